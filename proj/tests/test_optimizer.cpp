#include "gsgd/optimizer.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "gsgd/objectives.hpp"

using namespace gsgd;

namespace {

KernelState single_kernel_state(const ManifoldSpec& spec) {
  LayerShape shape{1, spec.rows, spec.cols, 1, 1};
  KernelState state;
  state.add_layer(shape, build_whole(shape, spec));
  return state;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

// Quadratic pull toward a fixed target on one Euclidean 2x1 kernel.
class QuadraticObjective : public Objective {
 public:
  explicit QuadraticObjective(Eigen::VectorXd target) : target_(std::move(target)) {}
  std::string name() const override { return "quadratic"; }
  std::vector<LayerShape> layout() const override {
    return {{1, target_.size(), 1, 1, 1}};
  }
  double loss_at(const std::vector<KernelGrid>& kernels,
                 const std::vector<long>&) const override {
    return (kernels[0][0] - target_).squaredNorm();
  }
  EvalResult eval_at(const std::vector<KernelGrid>& kernels,
                     const std::vector<long>& batch) const override {
    return {loss_at(kernels, batch), {{{2.0 * (kernels[0][0] - target_)}}}};
  }

 private:
  Eigen::MatrixXd target_;
};

}  // namespace

TEST_CASE("zero gradients leave every point bitwise unchanged") {
  auto state = single_kernel_state(ManifoldSpec::sphere(3, 1));
  state.randomize(77);
  Optimizer opt(std::move(state), {});
  const Eigen::VectorXd before = opt.state().point(0, 0).values;

  auto diags = opt.step({{Eigen::VectorXd::Zero(3)}});
  CHECK(opt.state().point(0, 0).values == before);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].grad_norm == 0.0);
  CHECK(diags[0].denominator == 1.0);
  CHECK(opt.iteration() == 1);
}

TEST_CASE("sphere step matches the hand-evaluated update") {
  auto state = single_kernel_state(ManifoldSpec::sphere(2, 1));
  state.set_kernel(0, 1, 1, vec2(1, 0));
  OptimizerOptions options;
  options.schedule = {M_PI_2, 0.0, 1.0, ScheduleMode::Constant};
  Optimizer opt(std::move(state), options);

  auto diags = opt.step({{vec2(0, 1)}});
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].grad_norm == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(diags[0].denominator == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(diags[0].learning_rate == M_PI_2);
  CHECK(diags[0].constraint_residual < 1e-12);

  // Projection leaves (0,1) tangential; the scaled step is (0, -pi/6);
  // normalization closes the update.
  const double step = -(M_PI_2) / 3.0;
  Eigen::VectorXd expected = vec2(1, step);
  expected /= expected.norm();
  CHECK((opt.state().point(0, 0).values - expected).cwiseAbs().maxCoeff() <
        1e-15);
  CHECK(opt.state().point(0, 0).values[1] < 0.0);
}

TEST_CASE("flat PEMs with the adaptive bound reduce to plain SGD bitwise") {
  auto spec = ManifoldSpec::euclidean(2, 2);
  auto state = single_kernel_state(spec);
  state.randomize(3);
  OptimizerOptions options;
  options.schedule = {0.05, 0.1, 1.0, ScheduleMode::InverseTime};
  options.denominator = DenominatorMode::Adaptive;
  options.rho.policy = RhoPolicy::Zero;
  Optimizer opt(std::move(state), options);

  Eigen::VectorXd w = opt.state().point(0, 0).values;
  std::mt19937_64 rng(19);
  for (long t = 0; t < 25; ++t) {
    Eigen::VectorXd g(4);
    for (int i = 0; i < 4; ++i) {
      g[i] = std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
    }
    auto diags = opt.step({{g}});
    CHECK(diags[0].denominator == 1.0);  // R < 1 floors the bound exactly

    const double scale = -learning_rate(t, options.schedule) / 1.0;
    Eigen::VectorXd v = scale * g;
    w = (w + v).eval();
    REQUIRE(opt.state().point(0, 0).values == w);  // bit-for-bit
  }
}

TEST_CASE("non-finite gradients abort the step atomically") {
  LayerShape shape{1, 3, 3, 2, 2};
  auto sp = component_spec(ManifoldKind::Sphere, shape);
  KernelState state;
  state.add_layer(shape, build_pi(shape, kss_split(2, 1), {sp}));
  state.randomize(5);
  Optimizer opt(std::move(state), {});

  std::vector<Eigen::VectorXd> before;
  for (std::size_t g = 0; g < 2; ++g) before.push_back(opt.state().point(0, g).values);

  std::vector<Eigen::VectorXd> grads{Eigen::VectorXd::Ones(18),
                                     Eigen::VectorXd::Ones(18)};
  grads[1][7] = std::nan("");
  try {
    opt.step({grads});
    FAIL("expected NonFiniteGradient");
  } catch (const NonFiniteGradient& e) {
    CHECK(e.iteration() == 0);
  }
  CHECK(opt.iteration() == 0);
  for (std::size_t g = 0; g < 2; ++g) {
    CHECK(opt.state().point(0, g).values == before[g]);
  }

  CHECK_THROWS_AS(opt.step({}), ShapeError);
  CHECK_THROWS_AS(opt.step({{Eigen::VectorXd::Zero(18)}}), ShapeError);
  CHECK_THROWS_AS(
      opt.step({{Eigen::VectorXd::Zero(17), Eigen::VectorXd::Zero(18)}}),
      ShapeError);
}

TEST_CASE("property: steps respect constraints and the step-size cap") {
  LayerShape conv{1, 3, 3, 2, 2};
  auto sp = component_spec(ManifoldKind::Sphere, conv);
  auto st = component_spec(ManifoldKind::Stiefel, conv);
  KernelState state;
  state.add_layer(conv, build_pi(conv, kss_split(2, 2), {sp, st}));
  LayerShape head{2, 4, 1, 3, 1};
  state.add_layer(head, build_whole(head, component_spec(ManifoldKind::Oblique, head)));
  state.randomize(11);

  OptimizerOptions options;
  options.schedule = {0.2, 1e-2, 1.0, ScheduleMode::InverseTime};
  Optimizer opt(std::move(state), options);

  std::mt19937_64 rng(13);
  std::normal_distribution<double> gauss(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<std::vector<Eigen::VectorXd>> grads(2);
    for (std::size_t l = 0; l < 2; ++l) {
      for (const auto& product : opt.state().layer(l).products) {
        Eigen::VectorXd g(product.total_ambient_dim());
        for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = gauss(rng);
        grads[l].push_back(std::move(g));
      }
    }
    std::vector<Eigen::VectorXd> before;
    for (std::size_t l = 0; l < 2; ++l) {
      for (std::size_t g = 0; g < grads[l].size(); ++g) {
        before.push_back(opt.state().point(l, g).values);
      }
    }

    auto diags = opt.step(grads);
    std::size_t k = 0;
    for (const auto& d : diags) {
      REQUIRE(d.denominator >= 1.0);
      REQUIRE(d.constraint_residual < 1e-8);
      const auto& layer = opt.state().layer(d.layer);
      const auto& product = layer.products[d.pem];

      // Recompute the projected gradient norm to cross-check diagnostics.
      ProductPoint prev{before[k++]};
      auto tangent = product_tangent_project(product, prev, grads[d.layer][d.pem]);
      REQUIRE(product_grad_norm(product, tangent) ==
              doctest::Approx(d.grad_norm).epsilon(1e-12));

      // g >= 1 caps the tangent step at g(t) * R (the regularizer role);
      // the realized displacement adds at most a second-order retraction
      // term on top (QR is only a first-order approximation to exp).
      const double step_norm = d.learning_rate / d.denominator * d.grad_norm;
      REQUIRE(step_norm <= d.learning_rate * d.grad_norm * (1.0 + 1e-12));
      const Eigen::VectorXd& now = opt.state().point(d.layer, d.pem).values;
      const double moved = (now - prev.values).norm();
      REQUIRE(moved <= step_norm * (1.0 + step_norm) + 1e-12);

      REQUIRE(product_constraint_residual(product,
                                          opt.state().point(d.layer, d.pem)) <
              1e-8);
    }
  }
  CHECK(opt.iteration() == 100);
}

TEST_CASE("train runs the loop, records the trace, and stays deterministic") {
  QuadraticObjective obj(vec2(0.3, -0.7));
  auto make_opt = [] {
    auto state = single_kernel_state(ManifoldSpec::euclidean(2, 1));
    state.randomize(21);
    OptimizerOptions options;
    options.schedule = {0.2, 1e-3, 1.0, ScheduleMode::InverseTime};
    return Optimizer(std::move(state), options);
  };

  auto opt = make_opt();
  auto empty = train(obj, opt, {.iterations = 0});
  CHECK(empty.empty());
  CHECK(opt.iteration() == 0);

  TrainOptions run;
  run.iterations = 150;
  long streamed = 0;
  run.on_record = [&](const TraceRecord&) { ++streamed; };
  auto trace = train(obj, opt, run);
  REQUIRE(trace.size() == 150);
  CHECK(streamed == 150);
  CHECK(trace.front().iteration == 0);
  CHECK(trace.back().iteration == 149);
  CHECK(trace.back().loss < trace.front().loss);
  CHECK(trace[5].learning_rate ==
        learning_rate(5, opt.options().schedule));
  CHECK(obj.loss(opt.state()) < 1e-6);

  // Same seed, same run.
  auto opt2 = make_opt();
  auto trace2 = train(obj, opt2, run);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    REQUIRE(trace[i].loss == trace2[i].loss);
    REQUIRE(trace[i].grad_norm_max == trace2[i].grad_norm_max);
  }
  CHECK(opt.state().point(0, 0).values == opt2.state().point(0, 0).values);
}

TEST_CASE("constant schedules warn once per training run") {
  QuadraticObjective obj(vec2(0, 0));
  auto state = single_kernel_state(ManifoldSpec::euclidean(2, 1));
  OptimizerOptions options;
  options.schedule = {0.1, 0.0, 1.0, ScheduleMode::Constant};
  Optimizer opt(std::move(state), options);

  std::ostringstream log;
  TrainOptions run;
  run.iterations = 3;
  run.log = &log;
  train(obj, opt, run);
  CHECK(log.str().find("warning") != std::string::npos);
  CHECK(log.str().find("Robbins-Monro") != std::string::npos);
}

TEST_CASE("batch indices are a stateless function of seed and iteration") {
  CHECK(batch_indices(5, 0, 9, 0) == std::vector<long>{0, 1, 2, 3, 4});
  CHECK(batch_indices(5, 7, 9, 3) == std::vector<long>{0, 1, 2, 3, 4});

  // Within one epoch the batches partition a subset of the samples.
  const long n = 10, b = 3;
  std::set<long> seen;
  for (long t = 0; t < n / b; ++t) {
    auto batch = batch_indices(n, b, 42, t);
    REQUIRE(batch.size() == 3);
    for (long idx : batch) {
      REQUIRE(idx >= 0);
      REQUIRE(idx < n);
      REQUIRE(seen.insert(idx).second);  // no repeats within the epoch
    }
    REQUIRE(batch_indices(n, b, 42, t) == batch);  // deterministic
  }
  CHECK(seen.size() == 9);  // trailing partial batch is dropped

  // A different epoch reshuffles, a different seed reshuffles.
  CHECK(batch_indices(n, b, 42, 0) != batch_indices(n, b, 42, 3));
  CHECK(batch_indices(n, b, 42, 0) != batch_indices(n, b, 43, 0));
}

TEST_CASE("trace CSV round-trips doubles exactly") {
  std::ostringstream out;
  write_trace_header(out);
  TraceRecord rec{3, 1.0 / 3.0, 0.123456789012345678, 1e-300, 0.05};
  write_trace_row(out, rec);

  std::istringstream in(out.str());
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "iteration,loss,grad_norm_max,constraint_residual_max,learning_rate");
  std::getline(in, line);
  std::replace(line.begin(), line.end(), ',', ' ');
  std::istringstream fields(line);
  long it;
  double loss, gn, cr, lr;
  fields >> it >> loss >> gn >> cr >> lr;
  CHECK(it == 3);
  CHECK(loss == rec.loss);
  CHECK(gn == rec.grad_norm_max);
  CHECK(cr == rec.constraint_residual_max);
  CHECK(lr == rec.learning_rate);
}
