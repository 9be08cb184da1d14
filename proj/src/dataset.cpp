#include "gsgd/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "gsgd/errors.hpp"

namespace gsgd {

namespace {

constexpr char kMagic[4] = {'P', 'E', 'M', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ostream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(static_cast<std::uint16_t>(b[0]) |
                                    (static_cast<std::uint16_t>(b[1]) << 8));
}

float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

Eigen::VectorXd SyntheticDataset::flattened(long sample) const {
  Eigen::VectorXd v(flat_dim());
  Eigen::Index k = 0;
  for (const auto& channel : images.at(static_cast<std::size_t>(sample))) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) v[k++] = channel(r, c);
    }
  }
  return v;
}

SyntheticDataset make_synthetic_dataset(int classes, long per_class,
                                        std::uint64_t seed, Eigen::Index rows,
                                        Eigen::Index cols,
                                        Eigen::Index channels) {
  if (classes < 2) throw ConfigError("synthetic dataset needs at least 2 classes");
  if (per_class < 1 || rows < 1 || cols < 1 || channels < 1) {
    throw ConfigError("synthetic dataset dimensions must be positive");
  }

  SyntheticDataset ds;
  ds.classes = classes;
  ds.per_class = per_class;
  ds.rows = rows;
  ds.cols = cols;
  ds.channels = channels;
  ds.seed = seed;

  const long total = static_cast<long>(classes) * per_class;
  ds.images.reserve(static_cast<std::size_t>(total));
  ds.labels.reserve(static_cast<std::size_t>(total));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  std::normal_distribution<double> noise(0.0, 0.25);

  for (long i = 0; i < total; ++i) {
    const int label = static_cast<int>(i % classes);
    // Class-specific orientation and mild frequency variation.
    const double theta = M_PI * label / classes;
    const double omega = 2.0 * M_PI / (3.0 + (label % 2));
    const double phi = phase(rng);
    const double cx = std::cos(theta), sx = std::sin(theta);

    std::vector<Eigen::MatrixXd> sample;
    sample.reserve(static_cast<std::size_t>(channels));
    for (Eigen::Index ch = 0; ch < channels; ++ch) {
      Eigen::MatrixXd img(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          const double wave =
              std::cos(omega * (cx * static_cast<double>(r) +
                                sx * static_cast<double>(c)) -
                       phi - M_PI_2 * static_cast<double>(ch));
          img(r, c) = wave + noise(rng);
        }
      }
      sample.push_back(std::move(img));
    }
    ds.images.push_back(std::move(sample));
    ds.labels.push_back(static_cast<std::uint16_t>(label));
  }
  return ds;
}

void save_dataset(const SyntheticDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(ds.classes));
  put_u32(out, static_cast<std::uint32_t>(ds.per_class));
  put_u32(out, static_cast<std::uint32_t>(ds.rows));
  put_u32(out, static_cast<std::uint32_t>(ds.cols));
  put_u32(out, static_cast<std::uint32_t>(ds.channels));
  for (const auto& sample : ds.images) {
    for (const auto& channel : sample) {
      for (Eigen::Index r = 0; r < ds.rows; ++r) {
        for (Eigen::Index c = 0; c < ds.cols; ++c) {
          put_f32(out, static_cast<float>(channel(r, c)));
        }
      }
    }
  }
  for (std::uint16_t label : ds.labels) put_u16(out, label);
  if (!out) throw Error("failed writing dataset to " + path);
}

SyntheticDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(path + " is not a PEMD dataset");
  }
  const auto version = get_u32(in);
  if (version != kVersion) {
    throw Error("unsupported PEMD version " + std::to_string(version));
  }
  SyntheticDataset ds;
  ds.classes = static_cast<int>(get_u32(in));
  ds.per_class = static_cast<long>(get_u32(in));
  ds.rows = static_cast<Eigen::Index>(get_u32(in));
  ds.cols = static_cast<Eigen::Index>(get_u32(in));
  ds.channels = static_cast<Eigen::Index>(get_u32(in));
  if (!in || ds.classes < 1 || ds.per_class < 1 || ds.rows < 1 || ds.cols < 1 ||
      ds.channels < 1) {
    throw Error(path + ": corrupt PEMD header");
  }
  const long total = static_cast<long>(ds.classes) * ds.per_class;
  ds.images.reserve(static_cast<std::size_t>(total));
  for (long i = 0; i < total; ++i) {
    std::vector<Eigen::MatrixXd> sample;
    for (Eigen::Index ch = 0; ch < ds.channels; ++ch) {
      Eigen::MatrixXd img(ds.rows, ds.cols);
      for (Eigen::Index r = 0; r < ds.rows; ++r) {
        for (Eigen::Index c = 0; c < ds.cols; ++c) {
          img(r, c) = static_cast<double>(get_f32(in));
        }
      }
      sample.push_back(std::move(img));
    }
    ds.images.push_back(std::move(sample));
  }
  ds.labels.resize(static_cast<std::size_t>(total));
  for (long i = 0; i < total; ++i) {
    ds.labels[static_cast<std::size_t>(i)] = get_u16(in);
  }
  if (!in) throw Error(path + ": truncated PEMD payload");
  return ds;
}

}  // namespace gsgd
