#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "jumpepr/girsanov.hpp"
#include "jumpepr/grid.hpp"
#include "jumpepr/reversibility.hpp"
#include "jumpepr/simulate.hpp"
#include "jumpepr/thermo.hpp"

namespace jumpepr {

// 17-significant-digit decimal: doubles round-trip exactly.
std::string format_double(double v);

// header "x[,y],rho", one node per row, row-major
void write_density_csv(const std::string& path, const DensityField& field);
DensityField read_density_csv(const std::string& path);

// header "t,S,U,dW,hd,ep_loc,ep_nl,ep,F,balance_residual"
void write_thermo_csv(const std::string& path, const ThermoSeries& series);

// header "t,x1[,x2],jump_flag"
void write_path_csv(const std::string& path, const Path& p);

// header "path_id,martingale,drift,jump_log,compensator,total"
void write_girsanov_csv(const std::string& path, const std::vector<LogRnAccumulator>& rows);

nlohmann::json report_to_json(const ReversibilityReport& report);

uint64_t fnv1a_hash(const std::string& bytes);
uint64_t hash_file(const std::string& path);

// Every emitted file of a run is registered here with a content hash; the
// manifest itself is written last.
struct RunManifest {
  nlohmann::json meta;
  std::vector<std::string> files;

  void add(const std::string& path) { files.push_back(path); }
  void write(const std::string& path) const;
};

void write_text_file(const std::string& path, const std::string& content);

}  // namespace jumpepr
