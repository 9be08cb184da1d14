// Python bindings for the core library. Matrices cross the boundary as
// numpy arrays; plans and experiment configs as JSON-compatible strings so
// the Python side can stay schema-identical with the CLI.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <tuple>

#include "gsgd/checkpoint.hpp"
#include "gsgd/errors.hpp"
#include "gsgd/experiment.hpp"
#include "gsgd/objectives.hpp"
#include "gsgd/optimizer.hpp"

namespace py = pybind11;
using namespace gsgd;

namespace {

ManifoldSpec make_spec(const std::string& kind, Eigen::Index rows,
                       Eigen::Index cols, double curvature_upper_bound) {
  ManifoldSpec spec =
      ManifoldSpec::make(manifold_kind_from_string(kind), rows, cols);
  if (spec.kind == ManifoldKind::Stiefel)
    spec.curvature_upper_bound = curvature_upper_bound;
  return spec;
}

ScheduleConfig make_schedule(double base_rate, double decay, double exponent,
                             const std::string& mode) {
  ScheduleConfig sched{base_rate, decay, exponent,
                       schedule_mode_from_string(mode)};
  sched.validate();
  return sched;
}

std::tuple<int, std::string, std::string> capture(
    const std::function<int(std::ostream&, std::ostream&)>& fn) {
  std::ostringstream out, err;
  const int code = fn(out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

PYBIND11_MODULE(_gsgd, m) {
  m.doc() = "Geometry-aware SGD on products of embedded kernel submanifolds";

  // Translators run newest-first, so the base class goes in first and the
  // specific exceptions after it.
  py::register_exception<Error>(m, "GsgdError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError",
                                          PyExc_RuntimeError);
  py::register_exception<NonFiniteGradient>(m, "NonFiniteGradient",
                                            PyExc_ArithmeticError);

  py::class_<ManifoldSpec>(m, "ManifoldSpec")
      .def(py::init(&make_spec), py::arg("kind"), py::arg("rows"),
           py::arg("cols"), py::arg("curvature_upper_bound") = 1.0)
      .def_property_readonly(
          "kind",
          [](const ManifoldSpec& s) { return std::string(to_string(s.kind)); })
      .def_readonly("rows", &ManifoldSpec::rows)
      .def_readonly("cols", &ManifoldSpec::cols)
      .def_readonly("curvature_upper_bound",
                    &ManifoldSpec::curvature_upper_bound)
      .def("ambient_dim", &ManifoldSpec::ambient_dim)
      .def("intrinsic_dim", &ManifoldSpec::intrinsic_dim)
      .def("__repr__", [](const ManifoldSpec& s) {
        std::ostringstream os;
        os << "ManifoldSpec(" << to_string(s.kind) << ", " << s.rows << "x"
           << s.cols << ")";
        return os.str();
      });

  m.def(
      "constraint_residual",
      [](const ManifoldSpec& spec, const Eigen::MatrixXd& p) {
        return constraint_residual(spec, Point{p});
      },
      py::arg("spec"), py::arg("point"));
  m.def(
      "tangent_project",
      [](const ManifoldSpec& spec, const Eigen::MatrixXd& p,
         const Eigen::MatrixXd& ambient) {
        return tangent_project(spec, Point{p}, ambient).values;
      },
      py::arg("spec"), py::arg("point"), py::arg("ambient"));
  m.def(
      "retract",
      [](const ManifoldSpec& spec, const Eigen::MatrixXd& p,
         const Eigen::MatrixXd& v) {
        return retract(spec, Point{p}, TangentVector{v, Point{p}}).values;
      },
      py::arg("spec"), py::arg("point"), py::arg("tangent"));
  m.def(
      "exp_map",
      [](const ManifoldSpec& spec, const Eigen::MatrixXd& p,
         const Eigen::MatrixXd& v) {
        return exp_map(spec, Point{p}, TangentVector{v, Point{p}}).values;
      },
      py::arg("spec"), py::arg("point"), py::arg("tangent"));
  m.def(
      "geodesic_distance",
      [](const ManifoldSpec& spec, const Eigen::MatrixXd& x,
         const Eigen::MatrixXd& y) {
        return geodesic_distance(spec, Point{x}, Point{y});
      },
      py::arg("spec"), py::arg("x"), py::arg("y"));
  m.def(
      "random_point",
      [](const ManifoldSpec& spec, std::uint64_t seed) {
        return random_point(spec, seed).values;
      },
      py::arg("spec"), py::arg("seed"));
  m.def(
      "project_to_manifold",
      [](const ManifoldSpec& spec, const Eigen::MatrixXd& ambient) {
        return project_to_manifold(spec, ambient).values;
      },
      py::arg("spec"), py::arg("ambient"));

  py::class_<ProductManifold>(m, "ProductManifold")
      .def(py::init<std::vector<ManifoldSpec>>(), py::arg("components"))
      .def_property_readonly("components", &ProductManifold::components)
      .def("total_ambient_dim", &ProductManifold::total_ambient_dim)
      .def(
          "random_point",
          [](const ProductManifold& M, std::uint64_t seed) {
            return product_random_point(M, seed).values;
          },
          py::arg("seed"))
      .def("__len__", &ProductManifold::num_components);

  m.def(
      "product_constraint_residual",
      [](const ProductManifold& M, const Eigen::VectorXd& p) {
        return product_constraint_residual(M, ProductPoint{p});
      },
      py::arg("product"), py::arg("point"));
  m.def(
      "product_tangent_project",
      [](const ProductManifold& M, const Eigen::VectorXd& p,
         const Eigen::VectorXd& ambient) {
        return product_tangent_project(M, ProductPoint{p}, ambient).values;
      },
      py::arg("product"), py::arg("point"), py::arg("ambient"));
  m.def(
      "product_retract",
      [](const ProductManifold& M, const Eigen::VectorXd& p,
         const Eigen::VectorXd& v) {
        return product_retract(M, ProductPoint{p}, ProductTangent{v, p}).values;
      },
      py::arg("product"), py::arg("point"), py::arg("tangent"));
  m.def(
      "product_inner",
      [](const ProductManifold& M, const Eigen::VectorXd& p,
         const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
        return product_inner(M, ProductPoint{p}, ProductTangent{u, p},
                             ProductTangent{v, p});
      },
      py::arg("product"), py::arg("point"), py::arg("u"), py::arg("v"));
  m.def(
      "sectional_curvature",
      [](const ProductManifold& M, const Eigen::VectorXd& p,
         const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
        return sectional_curvature(M, ProductPoint{p}, ProductTangent{u, p},
                                   ProductTangent{v, p});
      },
      py::arg("product"), py::arg("point"), py::arg("u"), py::arg("v"));
  m.def("product_curvature_upper_bound", &product_curvature_upper_bound,
        py::arg("product"));

  m.def("sphere_denominator", &sphere_denominator, py::arg("R"));
  m.def("adaptive_denominator", &adaptive_denominator, py::arg("R"),
        py::arg("rho"), py::arg("c_hat"));
  m.def(
      "learning_rate",
      [](long t, double base_rate, double decay, double exponent,
         const std::string& mode) {
        return learning_rate(t, make_schedule(base_rate, decay, exponent, mode));
      },
      py::arg("t"), py::arg("base_rate"), py::arg("decay") = 1e-3,
      py::arg("exponent") = 1.0, py::arg("mode") = "InverseTime");

  m.def("kss_split", &kss_split, py::arg("n"), py::arg("m"));
  m.def(
      "build_plan",
      [](int layer, Eigen::Index kernel_rows, Eigen::Index kernel_cols,
         int in_channels, int out_channels, const std::string& strategy,
         int splits, const std::vector<std::string>& kinds,
         double stiefel_bound, const std::string& groups_json) {
        const LayerShape shape{layer, kernel_rows, kernel_cols, in_channels,
                               out_channels};
        LayerStrategyConfig cfg;
        cfg.strategy = strategy_from_string(strategy);
        cfg.splits = splits;
        cfg.kinds.clear();
        for (const auto& k : kinds)
          cfg.kinds.push_back(manifold_kind_from_string(k));
        if (cfg.kinds.empty()) cfg.kinds.push_back(ManifoldKind::Sphere);
        cfg.stiefel_bound = stiefel_bound;
        if (!groups_json.empty())
          cfg.groups = nlohmann::json::parse(groups_json);
        return plan_to_json(make_plan(cfg, shape)).dump();
      },
      py::arg("layer"), py::arg("kernel_rows"), py::arg("kernel_cols"),
      py::arg("in_channels"), py::arg("out_channels"), py::arg("strategy"),
      py::arg("splits") = 1,
      py::arg("kinds") = std::vector<std::string>{"Sphere"},
      py::arg("stiefel_bound") = 1.0, py::arg("groups_json") = "");
  m.def(
      "validate_plan",
      [](const std::string& plan_json, int layer, Eigen::Index kernel_rows,
         Eigen::Index kernel_cols, int in_channels, int out_channels) {
        const auto plan = plan_from_json(nlohmann::json::parse(plan_json));
        const auto report = validate_plan(
            plan, LayerShape{layer, kernel_rows, kernel_cols, in_channels,
                             out_channels});
        return std::make_tuple(report.ok(), report.summary());
      },
      py::arg("plan_json"), py::arg("layer"), py::arg("kernel_rows"),
      py::arg("kernel_cols"), py::arg("in_channels"), py::arg("out_channels"));

  m.def(
      "make_dataset",
      [](const std::string& path, int classes, long per_class,
         std::uint64_t seed, Eigen::Index rows, Eigen::Index cols,
         Eigen::Index channels) {
        save_dataset(
            make_synthetic_dataset(classes, per_class, seed, rows, cols,
                                   channels),
            path);
      },
      py::arg("path"), py::arg("classes") = 4, py::arg("per_class") = 64,
      py::arg("seed") = 1, py::arg("rows") = 8, py::arg("cols") = 8,
      py::arg("channels") = 2);
  m.def(
      "load_dataset",
      [](const std::string& path) {
        const auto ds = load_dataset(path);
        Eigen::MatrixXd features(ds.num_samples(), ds.flat_dim());
        Eigen::VectorXi labels(ds.num_samples());
        for (long i = 0; i < ds.num_samples(); ++i) {
          features.row(i) = ds.flattened(i).transpose();
          labels(i) = ds.labels[static_cast<std::size_t>(i)];
        }
        return std::make_tuple(features, labels);
      },
      py::arg("path"));

  const auto overrides = [](std::optional<std::uint64_t> seed,
                            std::optional<long> iterations,
                            std::optional<std::string> out_dir, bool strict) {
    CliOverrides o;
    o.seed = seed;
    o.iterations = iterations;
    o.out_dir = std::move(out_dir);
    o.strict = strict;
    return o;
  };
  m.def(
      "run",
      [overrides](const std::string& config_path,
                  std::optional<std::uint64_t> seed,
                  std::optional<long> iterations,
                  std::optional<std::string> out_dir, bool strict) {
        return capture([&](std::ostream& out, std::ostream& err) {
          return cmd_run(config_path, overrides(seed, iterations, out_dir, strict),
                         out, err);
        });
      },
      py::arg("config_path"), py::arg("seed") = std::nullopt,
      py::arg("iterations") = std::nullopt, py::arg("out_dir") = std::nullopt,
      py::arg("strict") = false);
  m.def(
      "resume",
      [overrides](const std::string& checkpoint_path,
                  const std::string& config_path,
                  std::optional<std::uint64_t> seed,
                  std::optional<long> iterations,
                  std::optional<std::string> out_dir, bool strict) {
        return capture([&](std::ostream& out, std::ostream& err) {
          return cmd_resume(checkpoint_path, config_path,
                            overrides(seed, iterations, out_dir, strict), out,
                            err);
        });
      },
      py::arg("checkpoint_path"), py::arg("config_path"),
      py::arg("seed") = std::nullopt, py::arg("iterations") = std::nullopt,
      py::arg("out_dir") = std::nullopt, py::arg("strict") = false);
  m.def(
      "inspect",
      [](const std::string& checkpoint_path) {
        return capture([&](std::ostream& out, std::ostream& err) {
          return cmd_inspect(checkpoint_path, out, err);
        });
      },
      py::arg("checkpoint_path"));

  m.attr("EXIT_OK") = kExitOk;
  m.attr("EXIT_CONFIG") = kExitConfig;
  m.attr("EXIT_NUMERICAL") = kExitNumerical;
  m.attr("CHECKPOINT_VERSION") = kCheckpointVersion;
}
