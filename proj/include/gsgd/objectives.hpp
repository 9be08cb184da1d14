#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gsgd/dataset.hpp"
#include "gsgd/kernel_state.hpp"

namespace gsgd {

// One layer's kernels in (c,d) grid order: entry (c-1)*D + (d-1) is W_{c,d}.
using KernelGrid = std::vector<Eigen::MatrixXd>;

struct EvalResult {
  double loss = 0.0;
  std::vector<LayerGrad> grads;
};

// A differentiable training objective. The core evaluation works on plain
// ambient kernel matrices so that Euclidean gradients can be checked by
// finite differences; the KernelState overloads just collect the kernels
// out of the PEM layout first.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::string name() const = 0;
  virtual std::vector<LayerShape> layout() const = 0;
  // 0 means the objective has no sample dimension (deterministic loss).
  virtual long num_samples() const { return 0; }

  virtual double loss_at(const std::vector<KernelGrid>& kernels,
                         const std::vector<long>& batch) const = 0;
  virtual EvalResult eval_at(const std::vector<KernelGrid>& kernels,
                             const std::vector<long>& batch) const = 0;
  // Classification objectives report train accuracy; others decline.
  virtual std::optional<double> accuracy(
      const std::vector<KernelGrid>& kernels) const {
    return std::nullopt;
  }

  std::vector<KernelGrid> collect(const KernelState& state) const;
  EvalResult eval(const KernelState& state, const std::vector<long>& batch) const;
  double loss(const KernelState& state) const;  // full batch
  std::vector<long> full_batch() const;
};

// loss w^T A w on the unit sphere; minimum is the smallest eigenvalue of A.
class RayleighObjective : public Objective {
 public:
  explicit RayleighObjective(Eigen::MatrixXd A, std::ostream* log = nullptr);

  std::string name() const override { return "rayleigh"; }
  std::vector<LayerShape> layout() const override;
  double loss_at(const std::vector<KernelGrid>& kernels,
                 const std::vector<long>& batch) const override;
  EvalResult eval_at(const std::vector<KernelGrid>& kernels,
                     const std::vector<long>& batch) const override;

  const Eigen::MatrixXd& matrix() const { return A_; }

 private:
  Eigen::MatrixXd A_;
};

// loss |w X - Y|_F^2 over the Stiefel manifold; X defaults to the identity,
// in which case the minimizer is the polar factor of Y.
class ProcrustesObjective : public Objective {
 public:
  explicit ProcrustesObjective(Eigen::MatrixXd Y,
                               Eigen::MatrixXd X = Eigen::MatrixXd());

  std::string name() const override { return "procrustes"; }
  std::vector<LayerShape> layout() const override;
  double loss_at(const std::vector<KernelGrid>& kernels,
                 const std::vector<long>& batch) const override;
  EvalResult eval_at(const std::vector<KernelGrid>& kernels,
                     const std::vector<long>& batch) const override;

  const Eigen::MatrixXd& target() const { return Y_; }

 private:
  Eigen::MatrixXd Y_;
  Eigen::MatrixXd X_;
};

// Two-layer perceptron, tanh hidden units, softmax cross-entropy. Weight
// columns are the kernels: layer 1 has one H x 1 kernel per input unit,
// layer 2 one K x 1 kernel per hidden unit.
class MlpObjective : public Objective {
 public:
  MlpObjective(SyntheticDataset dataset, int hidden);

  std::string name() const override { return "mlp"; }
  std::vector<LayerShape> layout() const override;
  long num_samples() const override { return dataset_.num_samples(); }
  double loss_at(const std::vector<KernelGrid>& kernels,
                 const std::vector<long>& batch) const override;
  EvalResult eval_at(const std::vector<KernelGrid>& kernels,
                     const std::vector<long>& batch) const override;
  std::optional<double> accuracy(
      const std::vector<KernelGrid>& kernels) const override;

  const SyntheticDataset& dataset() const { return dataset_; }

 private:
  SyntheticDataset dataset_;
  int hidden_;
};

// One valid-mode convolution layer (output d sums over input channels c),
// ReLU, global average pooling, linear classifier, softmax cross-entropy.
// Classifier weights live in a second layer of K x 1 column kernels.
class ConvObjective : public Objective {
 public:
  ConvObjective(SyntheticDataset dataset, int conv_channels,
                Eigen::Index kernel_rows = 3, Eigen::Index kernel_cols = 3);

  std::string name() const override { return "conv"; }
  std::vector<LayerShape> layout() const override;
  long num_samples() const override { return dataset_.num_samples(); }
  double loss_at(const std::vector<KernelGrid>& kernels,
                 const std::vector<long>& batch) const override;
  EvalResult eval_at(const std::vector<KernelGrid>& kernels,
                     const std::vector<long>& batch) const override;
  std::optional<double> accuracy(
      const std::vector<KernelGrid>& kernels) const override;

  const SyntheticDataset& dataset() const { return dataset_; }
  // Pooled post-ReLU features of one sample, exposed for tests.
  Eigen::VectorXd pooled_features(const KernelGrid& conv_kernels,
                                  const std::vector<Eigen::MatrixXd>& image) const;

 private:
  SyntheticDataset dataset_;
  int conv_channels_;
  Eigen::Index kernel_rows_;
  Eigen::Index kernel_cols_;
};

// Valid-mode 2-D cross correlation (the convolution of Eq. 1 without kernel
// flipping): out(i,j) = sum_{u,v} x(i+u, j+v) k(u,v).
Eigen::MatrixXd corr2_valid(const Eigen::MatrixXd& x, const Eigen::MatrixXd& k);

// Central finite differences of the objective's loss w.r.t. every kernel
// entry; the oracle against which analytic gradients are accepted.
std::vector<LayerGrad> finite_difference_gradient(
    const Objective& objective, const std::vector<KernelGrid>& kernels,
    double h, const std::vector<long>& batch);

}  // namespace gsgd
