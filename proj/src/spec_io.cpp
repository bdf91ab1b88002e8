#include "jumpepr/spec_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace jumpepr {

namespace {

using nlohmann::json;

[[noreturn]] void unknown_family(const std::string& key, const std::string& family) {
  throw ConfigError(key + ".family: unknown family '" + family + "'");
}

std::string family_of(const json& entry, const std::string& key) {
  if (!entry.contains("family") || !entry["family"].is_string())
    throw ConfigError(key + ": missing string field 'family'");
  return entry["family"].get<std::string>();
}

Eigen::MatrixXd matrix_of(const json& entry, const std::string& key, int dim) {
  if (!entry.contains("matrix")) throw ConfigError(key + ": missing field 'matrix'");
  const auto& m = entry["matrix"];
  Eigen::MatrixXd out(dim, dim);
  if (!m.is_array() || static_cast<int>(m.size()) != dim)
    throw ConfigError(key + ".matrix: expected a " + std::to_string(dim) + "x" +
                      std::to_string(dim) + " array");
  for (int i = 0; i < dim; ++i) {
    const auto& row = m[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      throw ConfigError(key + ".matrix: ragged row " + std::to_string(i));
    for (int j = 0; j < dim; ++j) out(i, j) = row[static_cast<size_t>(j)].get<double>();
  }
  return out;
}

void load_drift(ProcessSpec& spec, const json& entry) {
  const std::string fam = family_of(entry, "drift");
  const int dim = spec.dim;
  if (fam == "linear") {
    const Eigen::MatrixXd M = matrix_of(entry, "drift", dim);
    spec.drift = [M](const State& x) { return State(M * x); };
  } else if (fam == "gradient_quadratic") {
    const double k = entry.value("stiffness", 1.0);
    spec.drift = [k](const State& x) { return State(-k * x); };
  } else if (fam == "zero") {
    spec.drift = [dim](const State&) { return State::Zero(dim); };
  } else {
    unknown_family("drift", fam);
  }
}

void load_diffusion(ProcessSpec& spec, const json& entry) {
  const std::string fam = family_of(entry, "diffusion");
  const int dim = spec.dim;
  if (fam == "constant") {
    const Eigen::MatrixXd a = matrix_of(entry, "diffusion", dim);
    spec.diffusion_factor = [a](const State&) { return a; };
    spec.constant_diffusion = true;
    spec.zero_diffusion = a.isZero(0.0);
  } else if (fam == "scalar") {
    const double v = entry.value("value", 1.0);
    const Eigen::MatrixXd a = v * Eigen::MatrixXd::Identity(dim, dim);
    spec.diffusion_factor = [a](const State&) { return a; };
    spec.constant_diffusion = true;
    spec.zero_diffusion = v == 0.0;
  } else if (fam == "zero") {
    spec.zero_diffusion = true;
    spec.constant_diffusion = true;
    spec.diffusion_factor = nullptr;
  } else {
    unknown_family("diffusion", fam);
  }
}

void load_levy(ProcessSpec& spec, const json& entry) {
  const std::string fam = family_of(entry, "levy");
  const int dim = spec.dim;
  if (fam == "gaussian") {
    const double sigma = entry.value("sigma", 1.0);
    if (!(sigma > 0.0)) throw ConfigError("levy.sigma must be positive");
    double amplitude = entry.value("amplitude", 1.0);
    if (entry.value("normalized", false))
      amplitude = 1.0 / std::pow(sigma * std::sqrt(2.0 * std::numbers::pi), dim);
    spec.levy_density = [amplitude, sigma](const State& z) {
      return amplitude * std::exp(-0.5 * z.squaredNorm() / (sigma * sigma));
    };
    spec.levy_mass = amplitude * std::pow(sigma * std::sqrt(2.0 * std::numbers::pi), dim);
    spec.levy_sampler = [sigma, dim](std::mt19937_64& rng) {
      std::normal_distribution<double> gauss(0.0, sigma);
      State z(dim);
      for (int d = 0; d < dim; ++d) z[d] = gauss(rng);
      return z;
    };
  } else if (fam == "stable") {
    if (dim != 1) throw ConfigError("levy.stable: stable drivers are one-dimensional");
    const double alpha = entry.value("alpha", 1.5);
    if (!(alpha > 0.0) || !(alpha < 2.0)) throw ConfigError("levy.alpha must lie in (0, 2)");
    spec.stable = StableDriver{alpha};
    spec.kernel_override = stable_jump_kernel(alpha);
    const double c = stable_levy_constant(alpha);
    spec.levy_density = [c, alpha](const State& z) {
      return c * std::pow(std::abs(z[0]), -(1.0 + alpha));
    };
  } else {
    unknown_family("levy", fam);
  }
}

void load_jump_map(ProcessSpec& spec, const json& entry) {
  const std::string fam = family_of(entry, "jump_map");
  if (fam == "identity") {
    JumpMap m;
    m.forward = [](const State&, const State& z) { return z; };
    m.inverse = [](const State&, const State& w) { return w; };
    m.inverse_jacobian_det = [](const State&, const State&) { return 1.0; };
    spec.jump_map = m;
  } else if (fam == "replace") {
    // jump from x lands at the sampled point z: sigma(x, z) = z - x
    JumpMap m;
    m.forward = [](const State& x, const State& z) { return State(z - x); };
    m.inverse = [](const State& x, const State& w) { return State(w + x); };
    m.inverse_jacobian_det = [](const State&, const State&) { return 1.0; };
    spec.jump_map = m;
  } else {
    unknown_family("jump_map", fam);
  }
}

}  // namespace

ProcessSpec load_process_spec(const nlohmann::json& doc) {
  ProcessSpec spec;
  spec.dim = doc.value("dim", 1);
  if (spec.dim < 1 || spec.dim > 2) throw ConfigError("dim must be 1 or 2");
  spec.beta = doc.value("beta", 1.0);
  if (!(spec.beta > 0.0)) throw ConfigError("beta must be positive");
  spec.jump_rate = doc.value("lambda", 0.0);
  if (spec.jump_rate < 0.0) throw ConfigError("lambda must be nonnegative");
  spec.name = doc.value("name", "spec");

  if (doc.contains("drift")) load_drift(spec, doc["drift"]);
  if (doc.contains("diffusion"))
    load_diffusion(spec, doc["diffusion"]);
  else
    spec.zero_diffusion = true;
  if (doc.contains("levy")) load_levy(spec, doc["levy"]);
  if (doc.contains("jump_map")) load_jump_map(spec, doc["jump_map"]);

  if (spec.jump_rate > 0.0 && !spec.stable) {
    if (!spec.levy_density) throw ConfigError("lambda > 0 requires a 'levy' entry");
    const bool has_map = spec.jump_map.has_value();
    const bool has_override = spec.kernel_override.has_value();
    if (has_map == has_override)
      throw ConfigError("exactly one of jump_map or kernel_override must be present when lambda > 0");
  }
  return spec;
}

ProcessSpec load_process_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return load_process_spec(doc);
}

}  // namespace jumpepr
