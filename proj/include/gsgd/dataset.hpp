#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gsgd {

// Small synthetic image-classification set: oriented gratings with
// class-dependent orientation/frequency, random phase, Gaussian pixel noise.
struct SyntheticDataset {
  int classes = 0;
  long per_class = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index channels = 0;
  std::uint64_t seed = 0;

  // images[sample][channel] is a rows x cols matrix; labels[sample] in [0,K).
  std::vector<std::vector<Eigen::MatrixXd>> images;
  std::vector<std::uint16_t> labels;

  long num_samples() const { return static_cast<long>(labels.size()); }
  Eigen::Index flat_dim() const { return channels * rows * cols; }
  // One sample flattened channel-major, each channel row-major.
  Eigen::VectorXd flattened(long sample) const;
};

SyntheticDataset make_synthetic_dataset(int classes, long per_class,
                                        std::uint64_t seed,
                                        Eigen::Index rows = 8,
                                        Eigen::Index cols = 8,
                                        Eigen::Index channels = 2);

// Binary container: magic "PEMD", version, class/sample counts, image dims,
// then float32 pixel data and uint16 labels, all little-endian.
void save_dataset(const SyntheticDataset& ds, const std::string& path);
SyntheticDataset load_dataset(const std::string& path);

}  // namespace gsgd
