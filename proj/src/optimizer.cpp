#include "gsgd/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "gsgd/objectives.hpp"

namespace gsgd {

std::string_view to_string(RhoPolicy policy) {
  switch (policy) {
    case RhoPolicy::CurvatureInverse: return "CurvatureInverse";
    case RhoPolicy::Fixed: return "Fixed";
    case RhoPolicy::Zero: return "Zero";
  }
  return "?";
}

RhoPolicy rho_policy_from_string(std::string_view name) {
  if (name == "CurvatureInverse") return RhoPolicy::CurvatureInverse;
  if (name == "Fixed") return RhoPolicy::Fixed;
  if (name == "Zero") return RhoPolicy::Zero;
  throw ConfigError("unknown rho policy: " + std::string(name));
}

std::string_view to_string(DenominatorMode mode) {
  return mode == DenominatorMode::Sphere ? "Sphere" : "Adaptive";
}

DenominatorMode denominator_mode_from_string(std::string_view name) {
  if (name == "Sphere") return DenominatorMode::Sphere;
  if (name == "Adaptive") return DenominatorMode::Adaptive;
  throw ConfigError("unknown denominator mode: " + std::string(name));
}

double rho_hat(const RhoConfig& cfg, double c_hat) {
  switch (cfg.policy) {
    case RhoPolicy::CurvatureInverse:
      return c_hat > 0.0 ? std::min(1.0 / c_hat, cfg.cap) : cfg.cap;
    case RhoPolicy::Fixed:
      return cfg.fixed_value;
    case RhoPolicy::Zero:
      return 0.0;
  }
  return 0.0;
}

Optimizer::Optimizer(KernelState state, OptimizerOptions options)
    : state_(std::move(state)), options_(std::move(options)) {
  options_.schedule.validate();
  if (options_.rho.policy == RhoPolicy::Fixed && options_.rho.fixed_value < 0.0) {
    throw ConfigError("fixed rho must be non-negative");
  }
  if (options_.rho.cap <= 0.0) {
    throw ConfigError("rho cap must be positive");
  }
}

void Optimizer::set_iteration(long t) {
  if (t < 0) throw ConfigError("iteration index must be non-negative");
  iteration_ = t;
}

std::vector<StepDiagnostics> Optimizer::step(
    const std::vector<std::vector<Eigen::VectorXd>>& grads) {
  if (grads.size() != state_.num_layers()) {
    throw ShapeError("gradient set covers " + std::to_string(grads.size()) +
                     " layers, state has " + std::to_string(state_.num_layers()));
  }
  // Validate everything before touching any point, so a poisoned gradient
  // leaves the state exactly as it was.
  for (std::size_t l = 0; l < grads.size(); ++l) {
    const auto& layer = state_.layer(l);
    if (grads[l].size() != layer.products.size()) {
      throw ShapeError("layer " + std::to_string(l) + " gradient covers " +
                       std::to_string(grads[l].size()) + " PEMs, expected " +
                       std::to_string(layer.products.size()));
    }
    for (std::size_t g = 0; g < grads[l].size(); ++g) {
      if (grads[l][g].size() != layer.products[g].total_ambient_dim()) {
        throw ShapeError("gradient for PEM " + std::to_string(g) + " of layer " +
                         std::to_string(l) + " has the wrong length");
      }
      if (!grads[l][g].allFinite()) {
        throw NonFiniteGradient("non-finite gradient in PEM " +
                                    std::to_string(g) + " of layer " +
                                    std::to_string(l),
                                iteration_);
      }
    }
  }

  const double lr = learning_rate(iteration_, options_.schedule);
  std::vector<StepDiagnostics> diags;
  for (std::size_t l = 0; l < grads.size(); ++l) {
    const auto& layer = state_.layer(l);
    for (std::size_t g = 0; g < grads[l].size(); ++g) {
      const auto& M = layer.products[g];
      auto& p = state_.point(l, g);

      ProductTangent tangent = product_tangent_project(M, p, grads[l][g]);
      const double R = tangent.values.norm();

      DenominatorInfo denom;
      if (options_.denominator == DenominatorMode::Sphere) {
        denom = sphere_denominator_info(R);
      } else {
        const double c_hat = product_curvature_upper_bound(M);
        denom = adaptive_denominator_info(R, rho_hat(options_.rho, c_hat), c_hat);
      }

      const double scale = -lr / denom.value;
      ProductTangent v{scale * tangent.values, p.values};
      p = product_retract(M, p, v);

      diags.push_back({l, g, R, lr, denom.value,
                       product_constraint_residual(M, p), denom.gamma2_branch,
                       denom.floored});
    }
  }
  ++iteration_;
  return diags;
}

void write_trace_header(std::ostream& out) {
  out << "iteration,loss,grad_norm_max,constraint_residual_max,learning_rate\n";
}

namespace {

// Shortest round-trippable decimal form.
std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void write_trace_row(std::ostream& out, const TraceRecord& rec) {
  out << rec.iteration << ',' << fmt(rec.loss) << ',' << fmt(rec.grad_norm_max)
      << ',' << fmt(rec.constraint_residual_max) << ','
      << fmt(rec.learning_rate) << '\n';
}

std::vector<long> batch_indices(long n, long batch_size, std::uint64_t seed,
                                long t) {
  if (n < 0 || t < 0) throw ConfigError("batch_indices needs n, t >= 0");
  std::vector<long> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0L);
  if (batch_size <= 0 || batch_size >= n) return all;

  const long per_epoch = n / batch_size;
  const long epoch = t / per_epoch;
  const long slot = t % per_epoch;

  // Epoch-keyed generator so the permutation depends only on (seed, epoch).
  std::mt19937_64 rng(seed ^
                      (0x9E3779B97F4A7C15ULL *
                       (static_cast<std::uint64_t>(epoch) + 1)));
  std::shuffle(all.begin(), all.end(), rng);

  const auto begin = all.begin() + slot * batch_size;
  return std::vector<long>(begin, begin + batch_size);
}

std::vector<TraceRecord> train(const Objective& objective, Optimizer& optimizer,
                               const TrainOptions& options) {
  if (options.iterations < 0) {
    throw ConfigError("iteration count must be non-negative");
  }
  if (optimizer.options().schedule.mode == ScheduleMode::Constant &&
      options.log != nullptr) {
    *options.log << "warning: constant learning rate violates the "
                    "Robbins-Monro conditions; use InverseTime for "
                    "convergence guarantees\n";
  }

  const long n = objective.num_samples();
  std::vector<TraceRecord> trace;
  trace.reserve(static_cast<std::size_t>(options.iterations));

  for (long k = 0; k < options.iterations; ++k) {
    const long t = optimizer.iteration();
    auto batch = batch_indices(n, options.batch_size, options.seed, t);
    EvalResult eval;
    try {
      eval = objective.eval(optimizer.state(), batch);
    } catch (const NonFiniteGradient& e) {
      // Annotate with the iteration if the objective did not know it.
      if (e.iteration() >= 0) throw;
      throw NonFiniteGradient(e.what(), t);
    }
    if (!std::isfinite(eval.loss)) {
      throw NonFiniteGradient(objective.name() + ": loss is not finite", t);
    }

    std::vector<std::vector<Eigen::VectorXd>> grads;
    grads.reserve(eval.grads.size());
    for (std::size_t l = 0; l < eval.grads.size(); ++l) {
      grads.push_back(optimizer.state().scatter(l, eval.grads[l]));
    }

    auto diags = optimizer.step(grads);
    if (options.on_step) options.on_step(diags);

    TraceRecord rec;
    rec.iteration = t;
    rec.loss = eval.loss;
    for (const auto& d : diags) {
      rec.grad_norm_max = std::max(rec.grad_norm_max, d.grad_norm);
      rec.constraint_residual_max =
          std::max(rec.constraint_residual_max, d.constraint_residual);
      rec.learning_rate = d.learning_rate;
    }
    if (diags.empty()) {
      rec.learning_rate = learning_rate(t, optimizer.options().schedule);
    }
    trace.push_back(rec);
    if (options.on_record) options.on_record(rec);
  }
  return trace;
}

}  // namespace gsgd
