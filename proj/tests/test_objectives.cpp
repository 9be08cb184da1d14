#include "gsgd/objectives.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gsgd/errors.hpp"

using namespace gsgd;

namespace {

Eigen::MatrixXd randn(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

// Draw random ambient kernels matching the objective's layout.
std::vector<KernelGrid> random_kernels(const Objective& obj,
                                       std::mt19937_64& rng) {
  std::vector<KernelGrid> out;
  for (const auto& shape : obj.layout()) {
    KernelGrid grid;
    for (int k = 0; k < shape.kernel_count(); ++k)
      grid.push_back(randn(rng, shape.kernel_rows, shape.kernel_cols));
    out.push_back(std::move(grid));
  }
  return out;
}

// max |analytic - numeric| over all entries, normalized by max(1, |grad|_inf).
double gradcheck_error(const Objective& obj,
                       const std::vector<KernelGrid>& kernels,
                       const std::vector<long>& batch) {
  auto analytic = obj.eval_at(kernels, batch).grads;
  auto numeric = finite_difference_gradient(obj, kernels, 1e-5, batch);
  REQUIRE(analytic.size() == numeric.size());
  double max_diff = 0.0, max_mag = 1.0;
  for (std::size_t l = 0; l < analytic.size(); ++l) {
    REQUIRE(analytic[l].kernels.size() == numeric[l].kernels.size());
    for (std::size_t k = 0; k < analytic[l].kernels.size(); ++k) {
      const auto& a = analytic[l].kernels[k];
      const auto& n = numeric[l].kernels[k];
      REQUIRE(a.rows() == n.rows());
      REQUIRE(a.cols() == n.cols());
      max_diff = std::max(max_diff, (a - n).cwiseAbs().maxCoeff());
      max_mag = std::max({max_mag, a.cwiseAbs().maxCoeff(),
                          n.cwiseAbs().maxCoeff()});
    }
  }
  return max_diff / max_mag;
}

// Loss is strictly smaller after a small exact gradient step.
void check_descent(const Objective& obj, std::vector<KernelGrid> kernels,
                   const std::vector<long>& batch, double eta) {
  auto res = obj.eval_at(kernels, batch);
  for (std::size_t l = 0; l < kernels.size(); ++l)
    for (std::size_t k = 0; k < kernels[l].size(); ++k)
      kernels[l][k] -= eta * res.grads[l].kernels[k];
  CHECK(obj.loss_at(kernels, batch) < res.loss);
}

struct ConstantObjective : Objective {
  std::string name() const override { return "constant"; }
  std::vector<LayerShape> layout() const override {
    return {LayerShape{1, 2, 1, 1, 1}};
  }
  double loss_at(const std::vector<KernelGrid>&,
                 const std::vector<long>&) const override {
    return 3.75;
  }
  EvalResult eval_at(const std::vector<KernelGrid>&,
                     const std::vector<long>&) const override {
    EvalResult r;
    r.loss = 3.75;
    r.grads.push_back(LayerGrad{{Eigen::MatrixXd::Zero(2, 1)}});
    return r;
  }
};

}  // namespace

TEST_CASE("rayleigh quotient basics") {
  Eigen::MatrixXd A = Eigen::Vector3d(1.0, 2.0, 3.0).asDiagonal();
  RayleighObjective obj(A);

  KernelGrid grid{Eigen::MatrixXd::Zero(3, 1)};
  grid[0](0, 0) = 1.0;  // w = e1, the minimizer
  CHECK(obj.loss_at({grid}, {}) == 1.0);

  auto res = obj.eval_at({grid}, {});
  CHECK(res.loss == 1.0);
  REQUIRE(res.grads.size() == 1);
  Eigen::MatrixXd expected(3, 1);
  expected << 2.0, 0.0, 0.0;
  CHECK(res.grads[0].kernels[0] == expected);

  // Identity matrix: constant on the sphere.
  RayleighObjective iso(Eigen::MatrixXd::Identity(4, 4));
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd w = randn(rng, 4, 1);
    w /= w.norm();
    CHECK(iso.loss_at({{w}}, {}) == doctest::Approx(1.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(RayleighObjective(Eigen::MatrixXd::Zero(1, 1)), ShapeError);
  CHECK_THROWS_AS(RayleighObjective(Eigen::MatrixXd::Zero(2, 3)), ShapeError);
}

TEST_CASE("asymmetric rayleigh matrices are symmetrized with a warning") {
  Eigen::MatrixXd A(2, 2);
  A << 1.0, 4.0, 0.0, 2.0;
  std::ostringstream log;
  RayleighObjective obj(A, &log);
  CHECK(log.str().find("warning") != std::string::npos);
  Eigen::MatrixXd sym = 0.5 * (A + A.transpose());
  CHECK(obj.matrix() == sym);
}

TEST_CASE("rayleigh minimum is basis invariant") {
  std::mt19937_64 rng(2718);
  Eigen::MatrixXd M = randn(rng, 5, 5);
  Eigen::MatrixXd A = 0.5 * (M + M.transpose());

  // Random orthogonal Q from a QR factorization.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(randn(rng, 5, 5));
  Eigen::MatrixXd Q = qr.householderQ();
  Eigen::MatrixXd B = Q.transpose() * A * Q;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(A), eb(B);
  const double lam_min = ea.eigenvalues()(0);
  CHECK(eb.eigenvalues()(0) == doctest::Approx(lam_min).epsilon(1e-10));

  // Evaluating the rotated objective at the rotated eigenvector attains it.
  RayleighObjective obj(B);
  Eigen::MatrixXd w = Q.transpose() * ea.eigenvectors().col(0);
  CHECK(obj.loss_at({{w}}, {}) == doctest::Approx(lam_min).epsilon(1e-10));
}

TEST_CASE("procrustes basics") {
  std::mt19937_64 rng(33);

  // Orthonormal target: the target itself is feasible and has zero loss.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(randn(rng, 4, 2));
  Eigen::MatrixXd Y =
      Eigen::MatrixXd(qr.householderQ()).leftCols(2);
  ProcrustesObjective obj(Y);
  CHECK(obj.loss_at({{Y}}, {}) == doctest::Approx(0.0).epsilon(1e-14));
  auto res = obj.eval_at({{Y}}, {});
  CHECK(res.grads[0].kernels[0].cwiseAbs().maxCoeff() < 1e-14);

  // Zero target: loss is |w|^2 = p on every Stiefel frame.
  ProcrustesObjective zero(Eigen::MatrixXd::Zero(4, 2));
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::HouseholderQR<Eigen::MatrixXd> f(randn(rng, 4, 2));
    Eigen::MatrixXd w = Eigen::MatrixXd(f.householderQ()).leftCols(2);
    CHECK(zero.loss_at({{w}}, {}) == doctest::Approx(2.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(ProcrustesObjective(Eigen::MatrixXd::Zero(2, 4)), ShapeError);
  CHECK_THROWS_AS(
      ProcrustesObjective(Eigen::MatrixXd::Zero(4, 2), Eigen::MatrixXd::Zero(3, 3)),
      ShapeError);
}

TEST_CASE("procrustes optimum matches the polar factor") {
  std::mt19937_64 rng(404);
  Eigen::MatrixXd Y = randn(rng, 4, 2);
  Y += 3.0 * Eigen::MatrixXd::Identity(4, 2);  // diagonally dominant

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      Y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::MatrixXd polar = svd.matrixU() * svd.matrixV().transpose();
  // |Q - Y|^2 = p - 2 tr(sigma) + |Y|^2 at the polar factor Q.
  const double optimum =
      2.0 - 2.0 * svd.singularValues().sum() + Y.squaredNorm();

  ProcrustesObjective obj(Y);
  CHECK(obj.loss_at({{polar}}, {}) == doctest::Approx(optimum).epsilon(1e-12));

  // No other frame does better.
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::HouseholderQR<Eigen::MatrixXd> f(randn(rng, 4, 2));
    Eigen::MatrixXd w = Eigen::MatrixXd(f.householderQ()).leftCols(2);
    CHECK(obj.loss_at({{w}}, {}) >= optimum - 1e-10);
  }
}

TEST_CASE("mlp loss is ln K at zero weights and is permutation symmetric") {
  auto ds = make_synthetic_dataset(3, 4, 17, 4, 4, 1);
  MlpObjective obj(ds, 5);

  auto shapes = obj.layout();
  REQUIRE(shapes.size() == 2);
  CHECK(shapes[0].kernel_rows == 5);
  CHECK(shapes[0].in_channels == 16);
  CHECK(shapes[1].kernel_rows == 3);
  CHECK(shapes[1].in_channels == 5);

  std::vector<KernelGrid> zeros;
  for (const auto& s : shapes) {
    KernelGrid g(static_cast<std::size_t>(s.kernel_count()),
                 Eigen::MatrixXd::Zero(s.kernel_rows, s.kernel_cols));
    zeros.push_back(g);
  }
  auto batch = obj.full_batch();
  CHECK(obj.loss_at(zeros, batch) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-14));

  // Swap hidden units 1 and 3: rows of W1 and the attached W2 columns.
  std::mt19937_64 rng(88);
  auto kernels = random_kernels(obj, rng);
  const double base = obj.loss_at(kernels, batch);
  auto permuted = kernels;
  for (auto& col : permuted[0]) std::swap(col(1, 0), col(3, 0));
  std::swap(permuted[1][1], permuted[1][3]);
  CHECK(obj.loss_at(permuted, batch) == doctest::Approx(base).epsilon(1e-14));

  // Purity: identical inputs, identical outputs, bit for bit.
  CHECK(obj.loss_at(kernels, batch) == base);
  auto r1 = obj.eval_at(kernels, batch);
  auto r2 = obj.eval_at(kernels, batch);
  CHECK(r1.loss == r2.loss);
  CHECK(r1.grads[0].kernels[7] == r2.grads[0].kernels[7]);

  CHECK_THROWS_AS(MlpObjective(ds, 1), ConfigError);
}

TEST_CASE("corr2_valid cross-correlates without flipping") {
  Eigen::MatrixXd x(3, 3);
  x << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  Eigen::MatrixXd k(2, 2);
  k << 1, 0, 0, 2;
  auto out = corr2_valid(x, k);
  REQUIRE(out.rows() == 2);
  REQUIRE(out.cols() == 2);
  // out(i,j) = x(i,j) + 2 x(i+1,j+1)
  CHECK(out(0, 0) == 11.0);
  CHECK(out(0, 1) == 14.0);
  CHECK(out(1, 0) == 20.0);
  CHECK(out(1, 1) == 23.0);

  CHECK_THROWS_AS(corr2_valid(k, x), ShapeError);
}

TEST_CASE("conv loss is ln K at zero kernels") {
  auto ds = make_synthetic_dataset(4, 3, 5, 6, 6, 2);
  ConvObjective obj(ds, 3);
  auto shapes = obj.layout();
  REQUIRE(shapes.size() == 2);
  CHECK(shapes[0].in_channels == 2);
  CHECK(shapes[0].out_channels == 3);

  std::vector<KernelGrid> zeros;
  for (const auto& s : shapes) {
    zeros.emplace_back(static_cast<std::size_t>(s.kernel_count()),
                       Eigen::MatrixXd::Zero(s.kernel_rows, s.kernel_cols));
  }
  CHECK(obj.loss_at(zeros, obj.full_batch()) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-14));
}

TEST_CASE("pooled conv features match a brute-force oracle") {
  auto ds = make_synthetic_dataset(2, 1, 9, 7, 7, 2);
  ConvObjective obj(ds, 2, 3, 3);
  std::mt19937_64 rng(123);

  for (int trial = 0; trial < 10; ++trial) {
    KernelGrid bank;
    for (int k = 0; k < 4; ++k) bank.push_back(randn(rng, 3, 3));
    const auto& image = ds.images[0];

    Eigen::VectorXd got = obj.pooled_features(bank, image);
    REQUIRE(got.size() == 2);

    // Direct quadruple loop: h_d = mean_ij relu(sum_c corr(X_c, W_cd)(i,j)).
    for (int d = 0; d < 2; ++d) {
      double acc = 0.0;
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
          double s = 0.0;
          for (int c = 0; c < 2; ++c)
            for (int u = 0; u < 3; ++u)
              for (int v = 0; v < 3; ++v)
                s += image[static_cast<std::size_t>(c)](i + u, j + v) *
                     bank[static_cast<std::size_t>(c * 2 + d)](u, v);
          acc += std::max(0.0, s);
        }
      }
      CHECK(got(d) == doctest::Approx(acc / 25.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("interior translations leave all-ones pooled features unchanged") {
  // A bump well away from every border; shifting it one pixel moves the
  // nonzero window sums around without changing their values, so the pooled
  // means match exactly.
  SyntheticDataset ds;
  ds.classes = 2;
  ds.per_class = 1;
  ds.rows = 11;
  ds.cols = 11;
  ds.channels = 1;
  ds.seed = 0;
  Eigen::MatrixXd img = Eigen::MatrixXd::Zero(11, 11);
  img(5, 5) = 2.0;
  img(5, 6) = -1.0;
  img(6, 5) = 0.5;
  Eigen::MatrixXd shifted = Eigen::MatrixXd::Zero(11, 11);
  shifted.block(1, 1, 10, 10) = img.block(0, 0, 10, 10);
  ds.images = {{img}, {shifted}};
  ds.labels = {0, 1};

  ConvObjective obj(ds, 2, 3, 3);
  KernelGrid ones(2, Eigen::MatrixXd::Ones(3, 3));
  Eigen::VectorXd a = obj.pooled_features(ones, ds.images[0]);
  Eigen::VectorXd b = obj.pooled_features(ones, ds.images[1]);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("finite differences reproduce simple gradients") {
  // |w|^2 via a zero-target Procrustes on a 2-vector.
  ProcrustesObjective quad(Eigen::MatrixXd::Zero(2, 1));
  KernelGrid grid{Eigen::MatrixXd(2, 1)};
  grid[0] << 1.0, 2.0;
  auto num = finite_difference_gradient(quad, {grid}, 1e-5, {});
  REQUIRE(num.size() == 1);
  CHECK(num[0].kernels[0](0, 0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(num[0].kernels[0](1, 0) == doctest::Approx(4.0).epsilon(1e-8));

  ConstantObjective flat;
  auto zero = finite_difference_gradient(flat, {{Eigen::MatrixXd::Ones(2, 1)}},
                                         1e-5, {});
  CHECK(zero[0].kernels[0] == Eigen::MatrixXd::Zero(2, 1));

  CHECK_THROWS_AS(finite_difference_gradient(flat, {{grid[0]}}, 0.0, {}),
                  ConfigError);
}

TEST_CASE("gradcheck: rayleigh") {
  std::mt19937_64 rng(9001);
  Eigen::MatrixXd M = randn(rng, 5, 5);
  RayleighObjective obj(0.5 * (M + M.transpose()));
  for (int trial = 0; trial < 100; ++trial) {
    auto kernels = random_kernels(obj, rng);
    CHECK(gradcheck_error(obj, kernels, {}) < 1e-5);
  }
  check_descent(obj, random_kernels(obj, rng), {}, 1e-3);
}

TEST_CASE("gradcheck: procrustes with and without conditioning") {
  std::mt19937_64 rng(9002);
  ProcrustesObjective obj(randn(rng, 5, 2));
  for (int trial = 0; trial < 100; ++trial) {
    auto kernels = random_kernels(obj, rng);
    CHECK(gradcheck_error(obj, kernels, {}) < 1e-5);
  }
  check_descent(obj, random_kernels(obj, rng), {}, 1e-2);

  ProcrustesObjective cond(randn(rng, 5, 2), randn(rng, 2, 2));
  for (int trial = 0; trial < 30; ++trial) {
    auto kernels = random_kernels(cond, rng);
    CHECK(gradcheck_error(cond, kernels, {}) < 1e-5);
  }
}

TEST_CASE("gradcheck: mlp") {
  auto ds = make_synthetic_dataset(3, 2, 71, 4, 4, 1);
  MlpObjective obj(ds, 3);
  std::mt19937_64 rng(9003);

  // Single-sample check first, then random mini-batches.
  auto kernels = random_kernels(obj, rng);
  CHECK(gradcheck_error(obj, kernels, {0}) < 1e-5);

  std::uniform_int_distribution<long> pick(0, obj.num_samples() - 1);
  for (int trial = 0; trial < 40; ++trial) {
    kernels = random_kernels(obj, rng);
    std::vector<long> batch{pick(rng), pick(rng)};
    CHECK(gradcheck_error(obj, kernels, batch) < 1e-5);
  }
  check_descent(obj, random_kernels(obj, rng), obj.full_batch(), 1e-2);
}

TEST_CASE("gradcheck: conv on a 3x3x2x2 bank") {
  auto ds = make_synthetic_dataset(3, 2, 302, 5, 5, 2);
  ConvObjective obj(ds, 2, 3, 3);
  std::mt19937_64 rng(9004);
  std::uniform_int_distribution<long> pick(0, obj.num_samples() - 1);

  int accepted = 0;
  for (int trial = 0; trial < 200 && accepted < 40; ++trial) {
    auto kernels = random_kernels(obj, rng);
    std::vector<long> batch{pick(rng), pick(rng)};

    // ReLU is kinked; finite differences are only trustworthy when every
    // pre-activation sits clear of zero, so redraw until the margin holds.
    double margin = 1e30;
    for (long sample : batch) {
      const auto& image = ds.images[static_cast<std::size_t>(sample)];
      for (int d = 0; d < 2; ++d) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 3);
        for (int c = 0; c < 2; ++c)
          s += corr2_valid(image[static_cast<std::size_t>(c)],
                           kernels[0][static_cast<std::size_t>(c * 2 + d)]);
        margin = std::min(margin, s.cwiseAbs().minCoeff());
      }
    }
    if (margin < 1e-3) continue;

    ++accepted;
    CHECK(gradcheck_error(obj, kernels, batch) < 1e-5);
  }
  CHECK(accepted == 40);
  check_descent(obj, random_kernels(obj, rng), obj.full_batch(), 1e-3);
}

TEST_CASE("objectives evaluate through a kernel state") {
  std::mt19937_64 rng(515);
  Eigen::MatrixXd M = randn(rng, 4, 4);
  RayleighObjective obj(0.5 * (M + M.transpose()));

  KernelState state;
  const LayerShape shape = obj.layout()[0];
  state.add_layer(shape, build_whole(shape, component_spec(ManifoldKind::Sphere, shape)));
  state.randomize(7);

  auto collected = obj.collect(state);
  REQUIRE(collected.size() == 1);
  CHECK(collected[0][0] == state.kernel(0, 1, 1));
  CHECK(obj.loss(state) == obj.loss_at(collected, obj.full_batch()));

  auto res = obj.eval(state, {});
  CHECK(res.loss == obj.loss(state));

  // A state with the wrong layout is rejected.
  KernelState wrong;
  LayerShape other{1, 3, 1, 1, 1};
  wrong.add_layer(other, build_whole(other, component_spec(ManifoldKind::Sphere, other)));
  CHECK_THROWS_AS(obj.collect(wrong), ShapeError);
}

TEST_CASE("mlp accuracy is reported and bounded") {
  auto ds = make_synthetic_dataset(2, 10, 99, 4, 4, 1);
  MlpObjective obj(ds, 4);
  std::mt19937_64 rng(17);
  auto kernels = random_kernels(obj, rng);
  auto acc = obj.accuracy(kernels);
  REQUIRE(acc.has_value());
  CHECK(*acc >= 0.0);
  CHECK(*acc <= 1.0);

  RayleighObjective ray(Eigen::MatrixXd::Identity(3, 3));
  CHECK_FALSE(ray.accuracy({{Eigen::MatrixXd::Ones(3, 1)}}).has_value());
}
