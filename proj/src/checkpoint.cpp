#include "gsgd/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "gsgd/errors.hpp"

namespace gsgd {

namespace {

constexpr char kMagic[4] = {'P', 'E', 'M', 'C'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in) {
  const std::uint64_t lo = get_u32(in);
  const std::uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

double get_f64(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw CheckpointError(what);
}

}  // namespace

nlohmann::json shape_to_json(const LayerShape& shape) {
  return {{"layer", shape.layer},
          {"kernel_rows", shape.kernel_rows},
          {"kernel_cols", shape.kernel_cols},
          {"in_channels", shape.in_channels},
          {"out_channels", shape.out_channels}};
}

LayerShape shape_from_json(const nlohmann::json& j) {
  try {
    LayerShape shape;
    shape.layer = j.at("layer").get<int>();
    shape.kernel_rows = j.at("kernel_rows").get<Eigen::Index>();
    shape.kernel_cols = j.at("kernel_cols").get<Eigen::Index>();
    shape.in_channels = j.at("in_channels").get<int>();
    shape.out_channels = j.at("out_channels").get<int>();
    return shape;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad layer shape: ") + e.what());
  }
}

nlohmann::json schedule_to_json(const ScheduleConfig& cfg) {
  return {{"mode", to_string(cfg.mode)},
          {"base_rate", cfg.base_rate},
          {"decay", cfg.decay},
          {"exponent", cfg.exponent}};
}

ScheduleConfig schedule_from_json(const nlohmann::json& j) {
  try {
    ScheduleConfig cfg;
    if (j.contains("mode"))
      cfg.mode = schedule_mode_from_string(j.at("mode").get<std::string>());
    cfg.base_rate = j.value("base_rate", cfg.base_rate);
    cfg.decay = j.value("decay", cfg.decay);
    cfg.exponent = j.value("exponent", cfg.exponent);
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad schedule: ") + e.what());
  }
}

nlohmann::json rho_to_json(const RhoConfig& cfg) {
  return {{"policy", to_string(cfg.policy)},
          {"fixed_value", cfg.fixed_value},
          {"cap", cfg.cap}};
}

RhoConfig rho_from_json(const nlohmann::json& j) {
  try {
    RhoConfig cfg;
    if (j.contains("policy"))
      cfg.policy = rho_policy_from_string(j.at("policy").get<std::string>());
    cfg.fixed_value = j.value("fixed_value", cfg.fixed_value);
    cfg.cap = j.value("cap", cfg.cap);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad rho policy: ") + e.what());
  }
}

nlohmann::json optimizer_options_to_json(const OptimizerOptions& options) {
  return {{"schedule", schedule_to_json(options.schedule)},
          {"denominator", to_string(options.denominator)},
          {"rho", rho_to_json(options.rho)}};
}

OptimizerOptions optimizer_options_from_json(const nlohmann::json& j) {
  try {
    OptimizerOptions options;
    if (j.contains("schedule"))
      options.schedule = schedule_from_json(j.at("schedule"));
    if (j.contains("denominator"))
      options.denominator =
          denominator_mode_from_string(j.at("denominator").get<std::string>());
    if (j.contains("rho")) options.rho = rho_from_json(j.at("rho"));
    return options;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad optimizer options: ") + e.what());
  }
}

Checkpoint make_checkpoint(const Optimizer& optimizer) {
  Checkpoint ckpt;
  ckpt.iteration = optimizer.iteration();
  ckpt.options = optimizer.options();
  const KernelState& state = optimizer.state();
  for (std::size_t l = 0; l < state.num_layers(); ++l) {
    const auto& layer = state.layer(l);
    Checkpoint::Layer out{layer.shape, layer.plan, {}};
    for (const auto& point : layer.points) out.points.push_back(point.values);
    ckpt.layers.push_back(std::move(out));
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  // ordered_json keeps insertion order, so identical checkpoints serialize
  // to identical bytes.
  nlohmann::ordered_json header;
  header["iteration"] = ckpt.iteration;
  header["options"] = optimizer_options_to_json(ckpt.options);
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& layer : ckpt.layers) {
    nlohmann::ordered_json entry;
    entry["shape"] = shape_to_json(layer.shape);
    entry["plan"] = plan_to_json(layer.plan);
    layers.push_back(std::move(entry));
  }
  header["layers"] = std::move(layers);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  put_u32(out, ckpt.version);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& layer : ckpt.layers) {
    for (const auto& point : layer.points) {
      put_u64(out, static_cast<std::uint64_t>(point.size()));
      for (Eigen::Index i = 0; i < point.size(); ++i) put_f64(out, point[i]);
    }
  }
  if (!out) throw CheckpointError("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);

  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, kMagic, 4) == 0,
          path + ": not a PEMC checkpoint");

  Checkpoint ckpt;
  ckpt.version = get_u32(in);
  require(ckpt.version == kCheckpointVersion,
          path + ": unsupported checkpoint version " +
              std::to_string(ckpt.version));

  const std::uint64_t header_size = get_u64(in);
  require(in.good() && header_size > 0 && header_size < (1u << 30),
          path + ": corrupt header length");
  std::string text(header_size, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_size));
  require(in.good(), path + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    ckpt.iteration = header.at("iteration").get<long>();
    ckpt.options = optimizer_options_from_json(header.at("options"));
    for (const auto& entry : header.at("layers")) {
      Checkpoint::Layer layer;
      layer.shape = shape_from_json(entry.at("shape"));
      layer.plan = plan_from_json(entry.at("plan"));
      ckpt.layers.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path + ": bad header: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(path + ": bad header: " + e.what());
  }
  require(ckpt.iteration >= 0, path + ": negative iteration");

  for (auto& layer : ckpt.layers) {
    const auto products = plan_to_products(layer.plan, layer.shape);
    for (const auto& product : products) {
      const std::uint64_t count = get_u64(in);
      require(in.good() &&
                  count == static_cast<std::uint64_t>(product.total_ambient_dim()),
              path + ": point size does not match the plan");
      Eigen::VectorXd values(static_cast<Eigen::Index>(count));
      for (Eigen::Index i = 0; i < values.size(); ++i) values[i] = get_f64(in);
      require(in.good(), path + ": truncated point data");
      layer.points.push_back(std::move(values));
    }
  }
  // Nothing may trail the payload.
  in.peek();
  require(in.eof(), path + ": trailing bytes after payload");
  return ckpt;
}

Optimizer restore_optimizer(const Checkpoint& ckpt) {
  KernelState state;
  for (const auto& layer : ckpt.layers) state.add_layer(layer.shape, layer.plan);
  for (std::size_t l = 0; l < ckpt.layers.size(); ++l) {
    const auto& layer = ckpt.layers[l];
    if (layer.points.size() != state.layer(l).products.size())
      throw CheckpointError("layer " + std::to_string(l) +
                            ": point count does not match the plan");
    for (std::size_t m = 0; m < layer.points.size(); ++m) {
      const auto& product = state.layer(l).products[m];
      if (layer.points[m].size() != product.total_ambient_dim())
        throw CheckpointError("layer " + std::to_string(l) + ", PEM " +
                              std::to_string(m) + ": wrong point size");
      ProductPoint point{layer.points[m]};
      const double residual = product_constraint_residual(product, point);
      if (!(residual < 1e-6))
        throw CheckpointError("layer " + std::to_string(l) + ", PEM " +
                              std::to_string(m) +
                              ": constraint residual " +
                              std::to_string(residual) + " exceeds 1e-6");
      state.point(l, m) = std::move(point);
    }
  }
  Optimizer optimizer(std::move(state), ckpt.options);
  optimizer.set_iteration(ckpt.iteration);
  return optimizer;
}

Optimizer load_checkpoint(const std::string& path) {
  return restore_optimizer(read_checkpoint(path));
}

}  // namespace gsgd
