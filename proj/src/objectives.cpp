#include "gsgd/objectives.hpp"

#include <cmath>
#include <numeric>

namespace gsgd {

namespace {

void check_layer_count(const Objective& obj,
                       const std::vector<KernelGrid>& kernels) {
  const auto shapes = obj.layout();
  if (kernels.size() != shapes.size()) {
    throw ShapeError(obj.name() + ": got kernels for " +
                     std::to_string(kernels.size()) + " layers, expected " +
                     std::to_string(shapes.size()));
  }
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    if (kernels[l].size() != static_cast<std::size_t>(shapes[l].kernel_count())) {
      throw ShapeError(obj.name() + ": layer " + std::to_string(l) + " has " +
                       std::to_string(kernels[l].size()) + " kernels, expected " +
                       std::to_string(shapes[l].kernel_count()));
    }
    for (const auto& k : kernels[l]) {
      if (k.rows() != shapes[l].kernel_rows || k.cols() != shapes[l].kernel_cols) {
        throw ShapeError(obj.name() + ": kernel shape mismatch in layer " +
                         std::to_string(l));
      }
    }
  }
}

// Columns-as-kernels helper: stacks the H x 1 kernels of a layer into H x C.
Eigen::MatrixXd stack_columns(const KernelGrid& grid) {
  Eigen::MatrixXd m(grid.front().rows(), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t j = 0; j < grid.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = grid[j];
  return m;
}

double log_sum_exp(const Eigen::VectorXd& z) {
  const double zmax = z.maxCoeff();
  return zmax + std::log((z.array() - zmax).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::ArrayXd shifted = (z.array() - z.maxCoeff()).exp();
  return (shifted / shifted.sum()).matrix();
}

void check_batch(const std::vector<long>& batch, long n, const char* name) {
  for (long i : batch) {
    if (i < 0 || i >= n) {
      throw ShapeError(std::string(name) + ": sample index " +
                       std::to_string(i) + " out of range");
    }
  }
}

}  // namespace

std::vector<KernelGrid> Objective::collect(const KernelState& state) const {
  const auto shapes = layout();
  if (state.num_layers() != shapes.size()) {
    throw ShapeError(name() + ": state has " + std::to_string(state.num_layers()) +
                     " layers, objective needs " + std::to_string(shapes.size()));
  }
  std::vector<KernelGrid> kernels;
  kernels.reserve(shapes.size());
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    if (!(state.layer(l).shape == shapes[l])) {
      throw ShapeError(name() + ": layer " + std::to_string(l) +
                       " shape does not match the objective layout");
    }
    kernels.push_back(state.layer_kernels(l));
  }
  return kernels;
}

EvalResult Objective::eval(const KernelState& state,
                           const std::vector<long>& batch) const {
  return eval_at(collect(state), batch);
}

double Objective::loss(const KernelState& state) const {
  return loss_at(collect(state), full_batch());
}

std::vector<long> Objective::full_batch() const {
  std::vector<long> all(static_cast<std::size_t>(num_samples()));
  std::iota(all.begin(), all.end(), 0L);
  return all;
}

// ---------------------------------------------------------------------------
// Rayleigh quotient

RayleighObjective::RayleighObjective(Eigen::MatrixXd A, std::ostream* log)
    : A_(std::move(A)) {
  if (A_.rows() != A_.cols() || A_.rows() < 2) {
    throw ShapeError("rayleigh: A must be square, at least 2x2");
  }
  if ((A_ - A_.transpose()).cwiseAbs().maxCoeff() > 0.0) {
    if (log != nullptr) {
      *log << "warning: rayleigh matrix is not symmetric, symmetrizing\n";
    }
    A_ = 0.5 * (A_ + A_.transpose().eval());
  }
}

std::vector<LayerShape> RayleighObjective::layout() const {
  return {{1, A_.rows(), 1, 1, 1}};
}

double RayleighObjective::loss_at(const std::vector<KernelGrid>& kernels,
                                  const std::vector<long>&) const {
  check_layer_count(*this, kernels);
  const Eigen::MatrixXd& w = kernels[0][0];
  return (w.transpose() * A_ * w)(0, 0);
}

EvalResult RayleighObjective::eval_at(const std::vector<KernelGrid>& kernels,
                                      const std::vector<long>& batch) const {
  EvalResult out;
  out.loss = loss_at(kernels, batch);
  out.grads.push_back({{2.0 * A_ * kernels[0][0]}});
  return out;
}

// ---------------------------------------------------------------------------
// Orthogonal Procrustes

ProcrustesObjective::ProcrustesObjective(Eigen::MatrixXd Y, Eigen::MatrixXd X)
    : Y_(std::move(Y)), X_(std::move(X)) {
  if (Y_.rows() < Y_.cols() || Y_.cols() < 1) {
    throw ShapeError("procrustes: Y must be n x p with n >= p");
  }
  if (X_.size() == 0) {
    X_ = Eigen::MatrixXd::Identity(Y_.cols(), Y_.cols());
  }
  if (X_.rows() != Y_.cols() || X_.cols() != Y_.cols()) {
    throw ShapeError("procrustes: conditioning matrix must be p x p");
  }
}

std::vector<LayerShape> ProcrustesObjective::layout() const {
  return {{1, Y_.rows(), Y_.cols(), 1, 1}};
}

double ProcrustesObjective::loss_at(const std::vector<KernelGrid>& kernels,
                                    const std::vector<long>&) const {
  check_layer_count(*this, kernels);
  return (kernels[0][0] * X_ - Y_).squaredNorm();
}

EvalResult ProcrustesObjective::eval_at(const std::vector<KernelGrid>& kernels,
                                        const std::vector<long>& batch) const {
  EvalResult out;
  out.loss = loss_at(kernels, batch);
  out.grads.push_back({{2.0 * (kernels[0][0] * X_ - Y_) * X_.transpose()}});
  return out;
}

// ---------------------------------------------------------------------------
// Two-layer perceptron

MlpObjective::MlpObjective(SyntheticDataset dataset, int hidden)
    : dataset_(std::move(dataset)), hidden_(hidden) {
  if (hidden_ < 2) throw ConfigError("mlp needs at least 2 hidden units");
  if (dataset_.num_samples() == 0) throw ConfigError("mlp needs a dataset");
}

std::vector<LayerShape> MlpObjective::layout() const {
  const int in_dim = static_cast<int>(dataset_.flat_dim());
  return {{1, hidden_, 1, in_dim, 1},
          {2, dataset_.classes, 1, hidden_, 1}};
}

double MlpObjective::loss_at(const std::vector<KernelGrid>& kernels,
                             const std::vector<long>& batch) const {
  return eval_at(kernels, batch).loss;
}

EvalResult MlpObjective::eval_at(const std::vector<KernelGrid>& kernels,
                                 const std::vector<long>& batch) const {
  check_layer_count(*this, kernels);
  check_batch(batch, num_samples(), "mlp");
  const Eigen::MatrixXd W1 = stack_columns(kernels[0]);  // H x I
  const Eigen::MatrixXd W2 = stack_columns(kernels[1]);  // K x H

  Eigen::MatrixXd dW1 = Eigen::MatrixXd::Zero(W1.rows(), W1.cols());
  Eigen::MatrixXd dW2 = Eigen::MatrixXd::Zero(W2.rows(), W2.cols());
  double loss = 0.0;

  const double inv_n = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  for (long i : batch) {
    const Eigen::VectorXd x = dataset_.flattened(i);
    const Eigen::VectorXd h = (W1 * x).array().tanh().matrix();
    const Eigen::VectorXd z = W2 * h;
    const int y = dataset_.labels[static_cast<std::size_t>(i)];

    loss += (log_sum_exp(z) - z[y]) * inv_n;

    Eigen::VectorXd dz = softmax(z) * inv_n;
    dz[y] -= inv_n;
    dW2.noalias() += dz * h.transpose();
    const Eigen::VectorXd dh = W2.transpose() * dz;
    const Eigen::VectorXd da =
        (dh.array() * (1.0 - h.array().square())).matrix();
    dW1.noalias() += da * x.transpose();
  }

  if (!std::isfinite(loss) || !dW1.allFinite() || !dW2.allFinite()) {
    throw NonFiniteGradient("mlp: non-finite activations");
  }

  EvalResult out;
  out.loss = loss;
  LayerGrad g1, g2;
  for (Eigen::Index c = 0; c < dW1.cols(); ++c) g1.kernels.push_back(dW1.col(c));
  for (Eigen::Index c = 0; c < dW2.cols(); ++c) g2.kernels.push_back(dW2.col(c));
  out.grads.push_back(std::move(g1));
  out.grads.push_back(std::move(g2));
  return out;
}

std::optional<double> MlpObjective::accuracy(
    const std::vector<KernelGrid>& kernels) const {
  check_layer_count(*this, kernels);
  const Eigen::MatrixXd W1 = stack_columns(kernels[0]);
  const Eigen::MatrixXd W2 = stack_columns(kernels[1]);
  long hits = 0;
  for (long i = 0; i < num_samples(); ++i) {
    const Eigen::VectorXd h =
        (W1 * dataset_.flattened(i)).array().tanh().matrix();
    Eigen::Index best;
    (W2 * h).maxCoeff(&best);
    hits += best == dataset_.labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(num_samples());
}

// ---------------------------------------------------------------------------
// One-layer convolutional classifier

Eigen::MatrixXd corr2_valid(const Eigen::MatrixXd& x, const Eigen::MatrixXd& k) {
  const Eigen::Index orows = x.rows() - k.rows() + 1;
  const Eigen::Index ocols = x.cols() - k.cols() + 1;
  if (orows < 1 || ocols < 1) {
    throw ShapeError("corr2_valid: kernel larger than input");
  }
  Eigen::MatrixXd out(orows, ocols);
  for (Eigen::Index i = 0; i < orows; ++i) {
    for (Eigen::Index j = 0; j < ocols; ++j) {
      out(i, j) = (x.block(i, j, k.rows(), k.cols()).cwiseProduct(k)).sum();
    }
  }
  return out;
}

ConvObjective::ConvObjective(SyntheticDataset dataset, int conv_channels,
                             Eigen::Index kernel_rows, Eigen::Index kernel_cols)
    : dataset_(std::move(dataset)),
      conv_channels_(conv_channels),
      kernel_rows_(kernel_rows),
      kernel_cols_(kernel_cols) {
  if (conv_channels_ < 1) throw ConfigError("conv needs at least one channel");
  if (dataset_.rows < kernel_rows_ || dataset_.cols < kernel_cols_) {
    throw ShapeError("conv kernels do not fit the images");
  }
  if (dataset_.num_samples() == 0) throw ConfigError("conv needs a dataset");
}

std::vector<LayerShape> ConvObjective::layout() const {
  return {{1, kernel_rows_, kernel_cols_, static_cast<int>(dataset_.channels),
           conv_channels_},
          {2, dataset_.classes, 1, conv_channels_, 1}};
}

Eigen::VectorXd ConvObjective::pooled_features(
    const KernelGrid& conv_kernels,
    const std::vector<Eigen::MatrixXd>& image) const {
  const auto C = static_cast<std::size_t>(dataset_.channels);
  Eigen::VectorXd h(conv_channels_);
  for (int d = 0; d < conv_channels_; ++d) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dataset_.rows - kernel_rows_ + 1,
                                              dataset_.cols - kernel_cols_ + 1);
    for (std::size_t c = 0; c < C; ++c) {
      s += corr2_valid(image[c],
                       conv_kernels[c * static_cast<std::size_t>(conv_channels_) +
                                    static_cast<std::size_t>(d)]);
    }
    h[d] = s.cwiseMax(0.0).mean();
  }
  return h;
}

double ConvObjective::loss_at(const std::vector<KernelGrid>& kernels,
                              const std::vector<long>& batch) const {
  return eval_at(kernels, batch).loss;
}

EvalResult ConvObjective::eval_at(const std::vector<KernelGrid>& kernels,
                                  const std::vector<long>& batch) const {
  check_layer_count(*this, kernels);
  check_batch(batch, num_samples(), "conv");
  const auto C = static_cast<std::size_t>(dataset_.channels);
  const auto D = static_cast<std::size_t>(conv_channels_);
  const Eigen::MatrixXd U = stack_columns(kernels[1]);  // K x D

  std::vector<Eigen::MatrixXd> dW(C * D,
                                  Eigen::MatrixXd::Zero(kernel_rows_, kernel_cols_));
  Eigen::MatrixXd dU = Eigen::MatrixXd::Zero(U.rows(), U.cols());
  double loss = 0.0;

  const Eigen::Index orows = dataset_.rows - kernel_rows_ + 1;
  const Eigen::Index ocols = dataset_.cols - kernel_cols_ + 1;
  const double pool = 1.0 / static_cast<double>(orows * ocols);
  const double inv_n = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());

  for (long i : batch) {
    const auto& image = dataset_.images[static_cast<std::size_t>(i)];
    const int y = dataset_.labels[static_cast<std::size_t>(i)];

    std::vector<Eigen::MatrixXd> smaps(D);
    Eigen::VectorXd h(conv_channels_);
    for (std::size_t d = 0; d < D; ++d) {
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(orows, ocols);
      for (std::size_t c = 0; c < C; ++c) {
        s += corr2_valid(image[c], kernels[0][c * D + d]);
      }
      h[static_cast<Eigen::Index>(d)] = s.cwiseMax(0.0).mean();
      smaps[d] = std::move(s);
    }

    const Eigen::VectorXd z = U * h;
    loss += (log_sum_exp(z) - z[y]) * inv_n;

    Eigen::VectorXd dz = softmax(z) * inv_n;
    dz[y] -= inv_n;
    dU.noalias() += dz * h.transpose();

    const Eigen::VectorXd dh = U.transpose() * dz;
    for (std::size_t d = 0; d < D; ++d) {
      // dL/dS = dL/dh * pool through the ReLU mask.
      const Eigen::MatrixXd ds =
          ((smaps[d].array() > 0.0).cast<double>() *
           (dh[static_cast<Eigen::Index>(d)] * pool))
              .matrix();
      for (std::size_t c = 0; c < C; ++c) {
        dW[c * D + d] += corr2_valid(image[c], ds);
      }
    }
  }

  bool finite = std::isfinite(loss) && dU.allFinite();
  for (const auto& g : dW) finite = finite && g.allFinite();
  if (!finite) throw NonFiniteGradient("conv: non-finite activations");

  EvalResult out;
  out.loss = loss;
  LayerGrad g1{std::move(dW)};
  LayerGrad g2;
  for (Eigen::Index c = 0; c < dU.cols(); ++c) g2.kernels.push_back(dU.col(c));
  out.grads.push_back(std::move(g1));
  out.grads.push_back(std::move(g2));
  return out;
}

std::optional<double> ConvObjective::accuracy(
    const std::vector<KernelGrid>& kernels) const {
  check_layer_count(*this, kernels);
  const Eigen::MatrixXd U = stack_columns(kernels[1]);
  long hits = 0;
  for (long i = 0; i < num_samples(); ++i) {
    const Eigen::VectorXd h =
        pooled_features(kernels[0], dataset_.images[static_cast<std::size_t>(i)]);
    Eigen::Index best;
    (U * h).maxCoeff(&best);
    hits += best == dataset_.labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(num_samples());
}

// ---------------------------------------------------------------------------

std::vector<LayerGrad> finite_difference_gradient(
    const Objective& objective, const std::vector<KernelGrid>& kernels,
    double h, const std::vector<long>& batch) {
  if (!(h > 0.0)) throw ConfigError("finite differences need h > 0");
  std::vector<LayerGrad> grads;
  std::vector<KernelGrid> work = kernels;
  for (std::size_t l = 0; l < work.size(); ++l) {
    LayerGrad layer;
    for (auto& kernel : work[l]) {
      Eigen::MatrixXd g(kernel.rows(), kernel.cols());
      for (Eigen::Index r = 0; r < kernel.rows(); ++r) {
        for (Eigen::Index c = 0; c < kernel.cols(); ++c) {
          const double saved = kernel(r, c);
          kernel(r, c) = saved + h;
          const double up = objective.loss_at(work, batch);
          kernel(r, c) = saved - h;
          const double down = objective.loss_at(work, batch);
          kernel(r, c) = saved;
          g(r, c) = (up - down) / (2.0 * h);
        }
      }
      layer.kernels.push_back(std::move(g));
    }
    grads.push_back(std::move(layer));
  }
  return grads;
}

}  // namespace gsgd
