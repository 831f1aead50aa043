#include "saw/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace saw {

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

const Json* find(const Json& raw, std::initializer_list<const char*> path) {
  const Json* cur = &raw;
  for (const char* key : path) {
    if (!cur->is_object() || !cur->contains(key)) return nullptr;
    cur = &(*cur)[key];
  }
  return cur;
}

template <class T>
T get(const Json& raw, std::initializer_list<const char*> path, T fallback) {
  const Json* j = find(raw, path);
  if (!j) return fallback;
  std::string name;
  for (const char* k : path) name += (name.empty() ? "" : ".") + std::string(k);
  try {
    return j->get<T>();
  } catch (const nlohmann::json::exception&) {
    field_error(name, "has the wrong type");
  }
}

Point read_point(const Json& j, int n, const std::string& field) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) field_error(field, "must be an array of " + std::to_string(n) + " numbers");
  Point p{};
  for (int i = 0; i < n; ++i) {
    if (!j[i].is_number()) field_error(field, "must contain numbers");
    p[i] = j[i].get<double>();
  }
  return p;
}

}  // namespace

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

void apply_env_overrides(Json& raw, char** envp) {
  if (!envp) return;
  std::vector<std::pair<std::string, std::string>> vars;
  for (char** e = envp; *e; ++e) {
    std::string kv = *e;
    if (kv.rfind("SAWTOOTH_", 0) != 0) continue;
    auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    vars.emplace_back(kv.substr(9, eq - 9), kv.substr(eq + 1));
  }
  std::sort(vars.begin(), vars.end());
  for (auto& [key, value] : vars) {
    std::vector<std::string> path;
    std::size_t start = 0;
    while (true) {
      auto pos = key.find("__", start);
      std::string part = key.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
      std::transform(part.begin(), part.end(), part.begin(), [](unsigned char c) { return std::tolower(c); });
      path.push_back(part);
      if (pos == std::string::npos) break;
      start = pos + 2;
    }
    Json* cur = &raw;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (!cur->contains(path[i]) || !(*cur)[path[i]].is_object()) (*cur)[path[i]] = Json::object();
      cur = &(*cur)[path[i]];
    }
    Json v;
    try {
      v = Json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
      v = value;
    }
    (*cur)[path.back()] = v;
  }
}

RunConfig parse_config(const Json& raw) {
  if (!raw.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  c.raw = raw;
  c.n = get<int>(raw, {"ambient", "n"}, 2);
  if (c.n < 2 || c.n > kMaxDim) field_error("ambient.n", "must be in [2, 4]");

  const Json* w = find(raw, {"window"});
  if (!w) field_error("window", "is required");
  c.window.n = c.n;
  c.window.lo = read_point(w->value("lo", Json()), c.n, "window.lo");
  c.window.hi = read_point(w->value("hi", Json()), c.n, "window.hi");
  for (int i = 0; i < c.n; ++i)
    if (!(c.window.lo[i] < c.window.hi[i])) field_error("window", "needs lo < hi on every axis");

  const Json* b = find(raw, {"boundary"});
  if (!b || !b->is_object() || !b->contains("kind")) field_error("boundary.kind", "is required");
  c.boundary = *b;

  c.tree_mode = get<std::string>(raw, {"dyadic", "mode"}, "auto");
  if (c.tree_mode != "auto" && c.tree_mode != "nets" && c.tree_mode != "standard" && c.tree_mode != "self-similar")
    field_error("dyadic.mode", "must be auto, nets, standard or self-similar");
  c.k_min = get<int>(raw, {"dyadic", "k_min"}, 0);
  c.k_max = get<int>(raw, {"dyadic", "k_max"}, -1);
  if (c.k_max >= 0 && c.k_max < c.k_min) field_error("dyadic.k_max", "must be >= dyadic.k_min");
  if (c.k_max > 24) field_error("dyadic.k_max", "must be <= 24");

  c.whitney.k_leaf = get<int>(raw, {"whitney", "k_leaf"}, 10);
  if (c.whitney.k_leaf < 1 || c.whitney.k_leaf > 30) field_error("whitney.k_leaf", "must be in [1, 30]");
  c.whitney.theta = get<double>(raw, {"whitney", "theta"}, 0.0);
  if (c.whitney.theta != 0.0 && !(c.whitney.theta > 0.0 && c.whitney.theta < 1.0 / (16.0 * std::sqrt(c.n))))
    field_error("whitney.theta", "must satisfy 0 < theta < 1/(16 sqrt n)");

  c.sawtooth.eta = get<double>(raw, {"sawtooth", "eta"}, 0.0);
  c.sawtooth.K = get<double>(raw, {"sawtooth", "K"}, 0.0);
  if (c.sawtooth.eta < 0.0) field_error("sawtooth.eta", "must be positive");
  if (c.sawtooth.K < 0.0) field_error("sawtooth.K", "must be positive");
  c.sawtooth.a0 = get<double>(raw, {"sawtooth", "a0"}, 0.0);
  c.sawtooth.A0 = get<double>(raw, {"sawtooth", "A0"}, 0.0);
  c.family = get<std::string>(raw, {"sawtooth", "family"}, "none");
  c.q0 = get<int>(raw, {"sawtooth", "q0"}, -1);

  if (const Json* op = find(raw, {"operator"})) {
    if (!op->is_object()) field_error("operator", "must be an object");
    c.op = *op;
  }

  if (const Json* h = find(raw, {"grid", "h"})) {
    if (!h->is_number() || !(h->get<double>() > 0.0)) field_error("grid.h", "must be a positive number");
    c.grid_cells = static_cast<int>(std::lround(c.window.side(0) / h->get<double>()));
  }
  c.grid_cells = get<int>(raw, {"grid", "cells"}, c.grid_cells);
  if (c.grid_cells < 8) field_error("grid.cells", "must be >= 8");
  if (std::pow(static_cast<double>(c.grid_cells), c.n) > 4.2e6) field_error("grid.cells", "grid exceeds 4.2e6 cells");

  if (const Json* d = find(raw, {"data"})) c.data = *d;

  c.hm_generation = get<int>(raw, {"harmonic", "generation"}, 3);
  std::string mode = get<std::string>(raw, {"harmonic", "mode"}, "adjoint");
  if (mode != "adjoint" && mode != "per-cube") field_error("harmonic.mode", "must be adjoint or per-cube");
  c.hm_adjoint = mode == "adjoint";
  c.leakage_bound = get<double>(raw, {"harmonic", "leakage_bound"}, 0.5);
  if (const Json* poles = find(raw, {"harmonic", "poles"})) {
    if (!poles->is_array()) field_error("harmonic.poles", "must be an array of points");
    for (std::size_t i = 0; i < poles->size(); ++i)
      c.poles.push_back(read_point((*poles)[i], c.n, "harmonic.poles[" + std::to_string(i) + "]"));
  }

  c.eps = get<std::vector<double>>(raw, {"perturbation", "eps"}, c.eps);
  for (double e : c.eps)
    if (!(e >= 0.0) || !std::isfinite(e)) field_error("perturbation.eps", "entries must be finite and >= 0");
  c.p = get<double>(raw, {"perturbation", "p"}, 2.0);
  if (!(c.p > 1.0)) field_error("perturbation.p", "must be > 1");
  c.carleson_generations = get<std::vector<int>>(raw, {"perturbation", "carleson_generations"}, c.carleson_generations);

  c.alphas = get<std::vector<double>>(raw, {"distance", "alpha"}, c.alphas);
  for (double a : c.alphas)
    if (!(a > 0.0)) field_error("distance.alpha", "entries must be > 0");
  c.distance_samples = get<int>(raw, {"distance", "samples"}, 50);
  if (c.distance_samples < 1) field_error("distance.samples", "must be >= 1");

  c.seed = get<std::uint64_t>(raw, {"seed"}, 1);
  c.out = get<std::string>(raw, {"output", "dir"}, "out");
  c.workers = get<int>(raw, {"workers"}, 1);
  if (c.workers < 1) field_error("workers", "must be >= 1");
  return c;
}

}  // namespace saw
