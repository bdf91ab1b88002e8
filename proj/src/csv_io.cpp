#include "jumpepr/csv_io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace jumpepr {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << content;
}

void write_density_csv(const std::string& path, const DensityField& field) {
  std::ostringstream os;
  const Grid& g = field.grid;
  os << (g.dim == 1 ? "x,rho\n" : "x,y,rho\n");
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i) {
    os << format_double(g.coord(0, g.ix_of(i)));
    if (g.dim == 2) os << ',' << format_double(g.coord(1, g.iy_of(i)));
    os << ',' << format_double(field.values[i]) << '\n';
  }
  write_text_file(path, os.str());
}

DensityField read_density_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open density CSV: " + path);
  std::string header;
  if (!std::getline(in, header)) throw ConfigError("empty density CSV: " + path);
  int dim;
  if (header == "x,rho")
    dim = 1;
  else if (header == "x,y,rho")
    dim = 2;
  else
    throw ConfigError("unrecognized density CSV header: " + header);

  std::vector<double> xs, ys, rhos;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    std::vector<double> row;
    while (std::getline(ls, tok, ',')) row.push_back(std::strtod(tok.c_str(), nullptr));
    if (static_cast<int>(row.size()) != dim + 1)
      throw ConfigError("malformed density CSV row: " + line);
    xs.push_back(row[0]);
    if (dim == 2) ys.push_back(row[1]);
    rhos.push_back(row.back());
  }
  if (rhos.size() < 2) throw ConfigError("density CSV has too few rows");

  Grid g;
  if (dim == 1) {
    g = Grid::line(xs.front(), xs.back(), static_cast<int>(xs.size()));
  } else {
    // row-major: y is contiguous, x outer
    size_t ny = 1;
    while (ny < ys.size() && ys[ny] > ys[ny - 1]) ++ny;
    if (ys.size() % ny != 0) throw ConfigError("density CSV is not a full rectangular grid");
    const size_t nx = ys.size() / ny;
    g = Grid::rectangle(xs.front(), xs.back(), static_cast<int>(nx), ys.front(), ys[ny - 1],
                        static_cast<int>(ny));
  }
  DensityField f;
  f.grid = g;
  f.values = Eigen::Map<const Eigen::ArrayXd>(rhos.data(), static_cast<Eigen::Index>(rhos.size()));
  if (f.values.size() != g.num_nodes()) throw ConfigError("density CSV node count mismatch");
  return f;
}

void write_thermo_csv(const std::string& path, const ThermoSeries& s) {
  std::ostringstream os;
  os << "t,S,U,dW,hd,ep_loc,ep_nl,ep,F,balance_residual\n";
  for (Eigen::Index i = 0; i < s.times.size(); ++i) {
    os << format_double(s.times[i]) << ',' << format_double(s.entropy[i]) << ','
       << format_double(s.internal_energy[i]) << ',' << format_double(s.work_rate[i]) << ','
       << format_double(s.heat_dissipation[i]) << ',' << format_double(s.epr_local[i]) << ','
       << format_double(s.epr_nonlocal[i]) << ',' << format_double(s.epr_total[i]) << ','
       << format_double(s.free_energy[i]) << ',' << format_double(s.balance_residual[i]) << '\n';
  }
  write_text_file(path, os.str());
}

void write_path_csv(const std::string& path, const Path& p) {
  std::ostringstream os;
  const int dim = static_cast<int>(p.states.cols());
  os << "t,x1" << (dim == 2 ? ",x2" : "") << ",jump_flag\n";
  std::vector<int> jump_flag(static_cast<size_t>(p.times.size()), 0);
  for (const auto& ev : p.jumps) jump_flag[static_cast<size_t>(ev.step + 1)] = 1;
  for (Eigen::Index i = 0; i < p.times.size(); ++i) {
    os << format_double(p.times[i]);
    for (int d = 0; d < dim; ++d) os << ',' << format_double(p.states(i, d));
    os << ',' << jump_flag[static_cast<size_t>(i)] << '\n';
  }
  write_text_file(path, os.str());
}

void write_girsanov_csv(const std::string& path, const std::vector<LogRnAccumulator>& rows) {
  std::ostringstream os;
  os << "path_id,martingale,drift,jump_log,compensator,total\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << i << ',' << format_double(r.martingale_part) << ',' << format_double(r.drift_part) << ','
       << format_double(r.jump_log_part) << ',' << format_double(r.jump_compensator_part) << ','
       << format_double(r.total()) << '\n';
  }
  write_text_file(path, os.str());
}

nlohmann::json report_to_json(const ReversibilityReport& r) {
  nlohmann::json doc;
  doc["residuals"] = {{"detailed_balance_local", r.db_local_residual},
                      {"detailed_balance_nonlocal", r.db_nonlocal_residual},
                      {"generator_asymmetry", r.generator_asymmetry},
                      {"gradient_structure", r.gradient_structure_residual},
                      {"epr_ss", r.epr_ss},
                      {"stationary", r.stationary_residual}};
  doc["thresholds"] = {{"detailed_balance_local", r.thresholds.db_local},
                       {"detailed_balance_nonlocal", r.thresholds.db_nonlocal},
                       {"generator", r.thresholds.generator},
                       {"gradient", r.thresholds.gradient},
                       {"epr", r.thresholds.epr}};
  doc["pass"] = {{"detailed_balance", r.pass_detailed_balance},
                 {"generator", r.pass_generator},
                 {"gradient", r.pass_gradient},
                 {"epr", r.pass_epr}};
  doc["verdict_consistent"] = r.verdict_consistent;
  return doc;
}

uint64_t fnv1a_hash(const std::string& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot hash missing file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hash(ss.str());
}

void RunManifest::write(const std::string& path) const {
  nlohmann::json doc = meta;
  doc["files"] = nlohmann::json::array();
  for (const auto& f : files) {
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016" PRIx64, hash_file(f));
    doc["files"].push_back({{"path", f}, {"fnv1a", hex}});
  }
  write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace jumpepr
