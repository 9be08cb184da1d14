#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "gsgd/kernel_state.hpp"
#include "gsgd/schedule.hpp"

namespace gsgd {

enum class RhoPolicy { CurvatureInverse, Fixed, Zero };
std::string_view to_string(RhoPolicy policy);
RhoPolicy rho_policy_from_string(std::string_view name);

// Stand-in for the geodesic distance to the (unknown) minimizer.
// CurvatureInverse uses rho_hat = min(1/c_hat, cap), falling back to the cap
// on flat PEMs where 1/c_hat is undefined.
struct RhoConfig {
  RhoPolicy policy = RhoPolicy::CurvatureInverse;
  double fixed_value = 1.0;
  double cap = 1.0;
  bool operator==(const RhoConfig&) const = default;
};
double rho_hat(const RhoConfig& cfg, double c_hat);

// Which form of the step-size denominator to evaluate. Sphere applies the
// closed form to every PEM regardless of its geometry (the cross-manifold
// comparable default); Adaptive evaluates the general bound with the PEM's
// own curvature bound and the rho policy.
enum class DenominatorMode { Sphere, Adaptive };
std::string_view to_string(DenominatorMode mode);
DenominatorMode denominator_mode_from_string(std::string_view name);

struct OptimizerOptions {
  ScheduleConfig schedule;
  DenominatorMode denominator = DenominatorMode::Sphere;
  RhoConfig rho;
  bool operator==(const OptimizerOptions&) const = default;
};

struct StepDiagnostics {
  std::size_t layer = 0;
  std::size_t pem = 0;
  double grad_norm = 0.0;            // R, after tangent projection
  double learning_rate = 0.0;        // g(t)
  double denominator = 1.0;          // g(w) >= 1
  double constraint_residual = 0.0;  // after the retraction
  int gamma2_branch = 0;
  bool floored = false;
};

class Optimizer {
 public:
  Optimizer(KernelState state, OptimizerOptions options);

  const KernelState& state() const { return state_; }
  KernelState& state() { return state_; }
  const OptimizerOptions& options() const { return options_; }
  long iteration() const { return iteration_; }
  void set_iteration(long t);

  // One G-SGD step: for every PEM, project the Euclidean gradient, scale by
  // -g(t)/g(w), retract. `grads` holds one flat ambient vector per PEM per
  // layer, as produced by KernelState::scatter. Throws NonFiniteGradient
  // (leaving the state untouched) if any entry is not finite; increments the
  // iteration count exactly once.
  std::vector<StepDiagnostics> step(
      const std::vector<std::vector<Eigen::VectorXd>>& grads);

 private:
  KernelState state_;
  OptimizerOptions options_;
  long iteration_ = 0;
};

// One row of the training trace.
struct TraceRecord {
  long iteration = 0;
  double loss = 0.0;
  double grad_norm_max = 0.0;
  double constraint_residual_max = 0.0;
  double learning_rate = 0.0;
};

void write_trace_header(std::ostream& out);
void write_trace_row(std::ostream& out, const TraceRecord& rec);

class Objective;

struct TrainOptions {
  long iterations = 0;
  long batch_size = 0;      // 0 = full batch
  std::uint64_t seed = 0;   // batch-sampling seed
  std::ostream* log = nullptr;  // schedule warnings etc.
  std::function<void(const TraceRecord&)> on_record;
  std::function<void(const std::vector<StepDiagnostics>&)> on_step;
};

// Runs Algorithm 1 for `iterations` steps, recording one TraceRecord per
// step (loss evaluated at the pre-step point). Deterministic for a fixed
// seed. NonFiniteGradient carries the failing iteration index.
std::vector<TraceRecord> train(const Objective& objective, Optimizer& optimizer,
                               const TrainOptions& options);

// The mini-batch drawn at iteration t: a deterministic, stateless function of
// (seed, t), so interrupted runs can resume bit-for-bit. Samples without
// replacement within each epoch; trailing samples that do not fill a batch
// are skipped. Returns all indices in order when batch_size is 0 or >= n.
std::vector<long> batch_indices(long n, long batch_size, std::uint64_t seed,
                                long t);

}  // namespace gsgd
