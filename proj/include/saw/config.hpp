#pragma once

#include <string>
#include <vector>

#include "saw/boundary.hpp"
#include "saw/sawtooth.hpp"
#include "saw/whitney.hpp"

namespace saw {

struct RunConfig {
  Json raw;
  int n = 2;
  Box window;
  Json boundary;
  std::string tree_mode = "auto";  // auto | nets | standard | self-similar
  int k_min = 0, k_max = -1;       // k_max < 0 selects the boundary default
  WhitneyOptions whitney;
  SawtoothParams sawtooth;
  std::string family = "none";
  int q0 = -1;
  Json op = Json::object();        // operator field spec
  int grid_cells = 128;
  Json data = Json::object();      // Dirichlet data spec for solve
  std::vector<Point> poles;        // empty selects the corkscrew point of the top cube
  int hm_generation = 3;
  bool hm_adjoint = true;
  double leakage_bound = 0.5;
  std::vector<double> eps{0.0};
  double p = 2.0;
  std::vector<int> carleson_generations{1, 2, 3};
  std::vector<double> alphas{1.0};
  int distance_samples = 50;
  std::uint64_t seed = 1;
  std::string out = "out";
  int workers = 1;
  std::vector<std::string> notes;  // non-fatal remarks from validation
};

// Applies SAWTOOTH_A__B=value as raw["a"]["b"] = value (JSON when it parses, string otherwise).
void apply_env_overrides(Json& raw, char** envp);

// Reads and validates every field; throws ConfigError naming the field.
RunConfig parse_config(const Json& raw);

Json load_json_file(const std::string& path);

}  // namespace saw
