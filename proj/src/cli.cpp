#include "saw/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "saw/carleson.hpp"
#include "saw/config.hpp"
#include "saw/distance_fn.hpp"
#include "saw/dyadic.hpp"
#include "saw/pde.hpp"
#include "saw/sawtooth.hpp"
#include "saw/whitney.hpp"

namespace saw {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::string out;
  int workers = 0;
  std::int64_t seed = -1;
  std::string what = "whitney";
  std::string family;
  std::string field;
  std::string mode;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string point_csv(const Point& x, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? "," : "") + fmt_double(x[i]);
  return s;
}

std::string coord_header(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? ",x" : "x") + std::to_string(i);
  return s;
}

// Colour ramp from dark blue through white to dark red.
std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  int r, g, b;
  if (t < 0.5) {
    double s = t / 0.5;
    r = static_cast<int>(40 + 215 * s);
    g = static_cast<int>(60 + 195 * s);
    b = static_cast<int>(150 + 105 * s);
  } else {
    double s = (t - 0.5) / 0.5;
    r = static_cast<int>(255 - 75 * s);
    g = static_cast<int>(255 - 215 * s);
    b = static_cast<int>(255 - 215 * s);
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

// Heat map of a cell field on the plane x2 = mid (n = 3) or the whole grid (n = 2).
std::string heatmap_svg(const Grid& G, const std::vector<double>& v, const std::string& title) {
  const int N = G.N();
  const int stride = std::max(1, N / 256);
  const int M = (N + stride - 1) / stride;
  auto at = [&](int i, int j) {
    CellIndex c{};
    c[0] = i;
    c[1] = j;
    if (G.n() >= 3) c[2] = N / 2;
    if (G.n() >= 4) c[3] = N / 2;
    return v[G.index(c)];
  };
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i = 0; i < N; i += stride)
    for (int j = 0; j < N; j += stride) {
      double x = at(i, j);
      if (std::isfinite(x)) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    }
  if (!(hi > lo)) hi = lo + 1.0;
  std::ostringstream os;
  const int px = 2;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << M * px << "\" height=\"" << M * px + 20 << "\">\n";
  os << "<text x=\"4\" y=\"14\" font-size=\"12\">" << title << " [" << fmt_double(lo) << ", " << fmt_double(hi)
     << "]</text>\n";
  for (int j = 0; j < M; ++j)
    for (int i = 0; i < M; ++i) {
      double x = at(i * stride, j * stride);
      os << "<rect x=\"" << i * px << "\" y=\"" << 20 + (M - 1 - j) * px << "\" width=\"" << px << "\" height=\"" << px
         << "\" fill=\"" << ramp((x - lo) / (hi - lo)) << "\"/>\n";
    }
  os << "</svg>\n";
  return os.str();
}

std::string sawtooth_svg(const SawtoothDomain& dom) {
  const auto& grid = dom.regions().grid();
  const Box& w = grid.window();
  const double S = 600.0 / std::max(w.side(0), w.side(1));
  auto X = [&](double x) { return (x - w.lo[0]) * S; };
  auto Y = [&](double y) { return (w.hi[1] - y) * S; };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << static_cast<int>(w.side(0) * S) << "\" height=\""
     << static_cast<int>(w.side(1) * S) << "\">\n";
  const int n = grid.n();
  for (const Face& f : dom.faces()) {
    Box b = f.box(n, grid.theta());
    if (n > 2 && !(b.lo[2] <= 0.0 && 0.0 <= b.hi[2])) continue;
    os << "<line x1=\"" << X(b.lo[0]) << "\" y1=\"" << Y(b.lo[1]) << "\" x2=\"" << X(b.hi[0]) << "\" y2=\""
       << Y(b.hi[1]) << "\" stroke=\"" << (f.proxy ? "#999999" : "#aa2222") << "\" stroke-width=\"0.6\"/>\n";
  }
  const auto& t = dom.regions().tree();
  for (int a : dom.gamma_atoms())
    os << "<circle cx=\"" << X(t.atom(a)[0]) << "\" cy=\"" << Y(t.atom(a)[1]) << "\" r=\"0.7\" fill=\"#2222aa\"/>\n";
  os << "</svg>\n";
  return os.str();
}

class Session {
 public:
  Session(RunConfig cfg) : cfg_(std::move(cfg)) {
    g_ = make_boundary(cfg_.boundary, cfg_.n, cfg_.window);
    if (g_->d() > cfg_.n - 1 + 1e-12) throw ConfigError("config field 'boundary': d must satisfy d <= n - 1");
    if (g_->d() > cfg_.n - 1 - 1e-12) notes_.push_back("d = n - 1: codimension-one boundary, weight is identically 1");
  }

  const RunConfig& cfg() const { return cfg_; }
  BoundaryPtr g() const { return g_; }
  Json notes() const { return notes_; }

  std::shared_ptr<const DyadicTree> tree() {
    if (!tree_) {
      int kmax = cfg_.k_max >= 0 ? cfg_.k_max : g_->default_k_max();
      tree_ = std::make_shared<DyadicTree>(cfg_.tree_mode == "auto"
                                               ? DyadicTree::build(g_, cfg_.k_min, kmax)
                                               : DyadicTree::build(g_, cfg_.k_min, kmax, parse_tree_mode(cfg_.tree_mode)));
    }
    return tree_;
  }

  std::shared_ptr<const WhitneyGrid> whitney() {
    if (!whitney_) whitney_ = std::make_shared<WhitneyGrid>(WhitneyGrid::decompose(g_, cfg_.window, cfg_.whitney));
    return whitney_;
  }

  std::shared_ptr<const RegionSets> regions() {
    if (!regions_) regions_ = RegionSets::build(tree(), whitney(), cfg_.sawtooth);
    return regions_;
  }

  MatrixField field(const std::string& override_spec) {
    Json spec = cfg_.op;
    if (!override_spec.empty()) {
      try {
        spec = Json::parse(override_spec);
      } catch (const nlohmann::json::parse_error&) {
        throw ConfigError("--field must be a JSON object");
      }
    }
    return make_field(spec, cfg_.n, g_);
  }

  Family family(const std::string& spec_in) {
    const std::string spec = spec_in.empty() ? cfg_.family : spec_in;
    const DyadicTree& t = *tree();
    if (spec.rfind("stopping-from", 0) == 0) {
      // stopping-from <operator|mass> tau=<value>: Calderon-Zygmund cubes of a field sampled on the atoms.
      std::istringstream is(spec.substr(13));
      std::string source, tau_s;
      is >> source >> tau_s;
      if (tau_s.rfind("tau=", 0) != 0) throw ConfigError("config field 'sawtooth.family': expected 'tau=<value>'");
      double tau = 0.0;
      try {
        tau = std::stod(tau_s.substr(4));
      } catch (const std::exception&) {
        throw ConfigError("config field 'sawtooth.family': bad threshold '" + tau_s + "'");
      }
      std::vector<double> f(t.atom_count());
      if (source == "operator") {
        MatrixField A = field("");
        for (int a = 0; a < t.atom_count(); ++a) f[a] = operator_norm(A.perturbation_at(t.atom(a)), cfg_.n);
      } else if (source == "mass") {
        for (int a = 0; a < t.atom_count(); ++a) f[a] = t.atom_mass(a) / std::pow(t.min_spacing(), g_->d());
      } else {
        throw ConfigError("config field 'sawtooth.family': unknown stopping source '" + source + "'");
      }
      std::vector<int> cubes;
      for (int q : t.generation(t.k_min())) {
        if (cfg_.q0 >= 0 && q != cfg_.q0) continue;
        auto res = cz_stopping(t, f, t.atom_masses(), tau, q);
        for (int c : res.family.cubes()) cubes.push_back(c);
      }
      std::sort(cubes.begin(), cubes.end());
      return Family(t, cubes);
    }
    return parse_family(t, spec, cfg_.seed, cfg_.q0);
  }

  GridPtr grid() {
    if (!grid_) grid_ = Grid::build(g_, cfg_.window, cfg_.grid_cells);
    return grid_;
  }

 private:
  RunConfig cfg_;
  BoundaryPtr g_;
  std::vector<std::string> notes_;
  std::shared_ptr<const DyadicTree> tree_;
  std::shared_ptr<const WhitneyGrid> whitney_;
  std::shared_ptr<const RegionSets> regions_;
  GridPtr grid_;
};

Json header(Session& s, const std::string& command) {
  Json j;
  j["command"] = command;
  j["n"] = s.cfg().n;
  j["d"] = tagged(s.g()->d(), Tag::Formula);
  j["boundary"] = s.cfg().boundary;
  j["seed"] = s.cfg().seed;
  j["notes"] = s.notes();
  return j;
}

// ------------------------------------------------------------------ subcommands

int cmd_decompose(Session& s, const Options& o, const fs::path& out) {
  Json j = header(s, "decompose");
  bool ok = true;
  if (o.what == "whitney") {
    auto grid = s.whitney();
    WhitneyReport rep = verify_whitney(*grid);
    write_text(out / "whitney.csv", grid->to_csv());
    j["whitney"] = rep.to_json();
    j["warnings"] = grid->warnings();
    ok = rep.ok();
    write_json(out / "whitney_report.json", j);
  } else if (o.what == "dyadic") {
    auto t = s.tree();
    std::string lines;
    for (const Json& l : t->export_lines()) lines += l.dump() + "\n";
    write_text(out / "dyadic.jsonl", lines);
    GridReport rep = verify_grid(*t, s.cfg().sawtooth.a0, s.cfg().sawtooth.A0);
    j["dyadic"] = rep.to_json();
    ok = rep.ok();
    write_json(out / "dyadic_report.json", j);
  } else if (o.what == "sawtooth") {
    auto R = s.regions();
    Family F = s.family(o.family);
    SawtoothDomain dom = SawtoothDomain::build(R, F, s.cfg().q0);
    StructuralReport rep = structural_props(dom, s.cfg().seed);
    j["constants"] = R->constants().to_json();
    j["region_notes"] = R->notes();
    j["family"] = F.cubes().size();
    const auto& st = dom.stats();
    j["stats"] = {{"in_boxes", st.in_boxes},     {"out_boxes", st.out_boxes},     {"collar_in", st.collar_in},
                  {"collar_out", st.collar_out}, {"sigma_faces", st.sigma_faces}, {"proxy_faces", st.proxy_faces}};
    j["structural"] = rep.to_json();
    ok = rep.ok();
    write_json(out / "sawtooth_report.json", j);
    if (s.cfg().n <= 3) write_text(out / "sawtooth.svg", sawtooth_svg(dom));
  } else {
    throw ConfigError("--what must be dyadic, whitney or sawtooth");
  }
  if (!ok) throw VerificationError("decompose --what " + o.what + ": verification failed, see report");
  return kExitOk;
}

int cmd_verify_axioms(Session& s, const Options& o, const fs::path& out) {
  Json j = header(s, "verify-axioms");
  auto R = s.regions();
  Family F = s.family(o.family);
  SawtoothDomain dom = SawtoothDomain::build(R, F, s.cfg().q0);
  AxiomPlan plan;
  plan.seed = s.cfg().seed;
  AxiomReport rep = verify_axioms(dom, plan);
  j["constants"] = R->constants().to_json();
  j["family"] = F.cubes().size();
  j["axioms"] = rep.to_json();
  j["axioms"]["H6"] = "by-construction";
  write_json(out / "axioms.json", j);
  if (!rep.ok()) throw VerificationError("verify-axioms: at least one axiom failed, see axioms.json");
  return kExitOk;
}

int cmd_carleson(Session& s, const Options& o, const fs::path& out) {
  Json j = header(s, "carleson");
  auto R = s.regions();
  const DyadicTree& t = *s.tree();
  MatrixField A = s.field(o.field);
  DiscreteCarleson D = DiscreteCarleson::build(*R, A);
  const RegionConstants& k = R->constants();
  auto plan = carleson_ball_plan(t, k, s.cfg().carleson_generations);
  const int n = s.cfg().n;
  for (int q : t.canonical_cubes()) {
    const Cube& c = t.cube(q);
    plan.push_back({c.center_atom >= 0 ? t.atom(c.center_atom) : c.center, 7.0 * std::sqrt(n) * k.A2 * c.length()});
  }
  ContinuousNorm C = continuous_norm(A, *s.whitney(), t, plan);
  double disc = D.norm(t, s.cfg().q0);
  double K = comparison_constant(k);
  bool holds = disc <= K * C.norm;
  std::ostringstream csv;
  csv << "kind,id," << coord_header(n) << ",radius,value\n";
  for (int q : D.cubes()) {
    const Cube& c = t.cube(q);
    csv << "cube," << q << ',' << point_csv(c.center, n) << ',' << fmt_double(c.length()) << ','
        << fmt_double(D.alpha(q)) << '\n';
  }
  for (std::size_t b = 0; b < C.balls.size(); ++b)
    csv << "ball," << b << ',' << point_csv(C.balls[b].x, n) << ',' << fmt_double(C.balls[b].r) << ','
        << fmt_double(C.balls[b].value()) << '\n';
  write_text(out / "carleson.csv", csv.str());
  j["constants"] = k.to_json();
  j["discrete_norm"] = tagged(disc, Tag::Measured);
  j["continuous"] = C.to_json();
  j["comparison_constant"] = tagged(K, Tag::Formula);
  j["comparison_holds"] = holds;
  write_json(out / "carleson.json", j);
  if (!holds) throw VerificationError("carleson: discrete norm exceeds the comparison bound");
  return kExitOk;
}

std::vector<double> data_from_spec(const Grid& G, const Json& spec) {
  const std::string kind = spec.value("kind", std::string("constant"));
  const double far = spec.value("far", 0.0);
  if (kind == "constant") {
    double v = spec.value("value", 1.0);
    return dirichlet_data(G, [v](const Point&) { return v; }, spec.value("far", v));
  }
  if (kind == "linear") {
    int axis = spec.value("axis", 0);
    if (axis < 0 || axis >= G.n()) throw ConfigError("config field 'data.axis': out of range");
    return dirichlet_data(G, [axis](const Point& y) { return y[axis]; }, far);
  }
  if (kind == "bump") {
    Point c{};
    if (spec.contains("center"))
      for (int i = 0; i < G.n(); ++i) c[i] = spec["center"][i].get<double>();
    double r = spec.value("radius", 0.5);
    const int n = G.n();
    return dirichlet_data(
        G, [&](const Point& y) { return std::max(0.0, 1.0 - dist(y, c, n) / r); }, far);
  }
  throw ConfigError("config field 'data.kind': must be constant, linear or bump");
}

int cmd_solve(Session& s, const Options& o, const fs::path& out) {
  Json j = header(s, "solve");
  auto G = s.grid();
  MatrixField A = s.field(o.field);
  auto sys = DiscreteSystem::assemble(G, A);
  std::vector<double> data = data_from_spec(*G, s.cfg().data);
  DiscreteSolution sol = solve_dirichlet(*sys, data);
  j["grid"] = {{"cells", G->N()}, {"h", G->h()}, {"interior", G->interior().size()}, {"dirichlet", G->dirichlet().size()}};
  j["system"] = {{"symmetric", sys->symmetric()},
                 {"asymmetry", tagged(sys->asymmetry(), Tag::Measured)},
                 {"ellipticity", tagged(sys->ellipticity(), Tag::Measured)}};
  j["solution"] = sol.to_json();
  write_json(out / "solution.json", j);
  const int n = G->n();
  std::ostringstream csv;
  csv << "cell," << coord_header(n) << ",class,u\n";
  for (std::size_t id = 0; id < G->size(); ++id) {
    if (n >= 3) {
      CellIndex c = G->coords(id);
      if (c[2] != G->N() / 2 || (n == 4 && c[3] != G->N() / 2)) continue;
    }
    csv << id << ',' << point_csv(G->center(id), n) << ',' << static_cast<int>(G->cls(id)) << ','
        << fmt_double(sol.u[id]) << '\n';
  }
  write_text(out / "solution.csv", csv.str());
  write_text(out / "u.svg", heatmap_svg(*G, sol.u, "u"));
  return kExitOk;
}

int cmd_harmonic(Session& s, const Options& o, const fs::path& out) {
  Json j = header(s, "harmonic-measure");
  auto G = s.grid();
  const DyadicTree& t = *s.tree();
  MatrixField A = s.field(o.field);
  auto sys = DiscreteSystem::assemble(G, A);
  std::vector<Point> poles = s.cfg().poles;
  int q0 = s.cfg().q0 >= 0 ? s.cfg().q0 : t.generation(t.k_min()).front();
  if (poles.empty()) poles.push_back(grid_corkscrew(*G, t.cube(q0).center, t.cube(q0).length()));
  std::string mode = o.mode.empty() ? (s.cfg().hm_adjoint ? "adjoint" : "per-cube") : o.mode;
  if (mode != "adjoint" && mode != "per-cube" && mode != "both") throw ConfigError("--mode must be adjoint, per-cube or both");
  const int n = s.cfg().n;
  std::ostringstream csv;
  csv << "pole,cube," << coord_header(n) << ",omega,sigma,k\n";
  j["poles"] = Json::array();
  bool flagged = false;
  for (std::size_t p = 0; p < poles.size(); ++p) {
    HarmonicMeasure hm = harmonic_measure(*sys, t, poles[p], s.cfg().hm_generation, mode != "per-cube",
                                          s.cfg().leakage_bound);
    Json e = hm.to_json();
    if (mode == "both") {
      HarmonicMeasure hd = harmonic_measure(*sys, t, poles[p], s.cfg().hm_generation, false, s.cfg().leakage_bound);
      double diff = std::abs(hm.leakage - hd.leakage);
      for (std::size_t k = 0; k < hm.omega.size(); ++k) diff = std::max(diff, std::abs(hm.omega[k] - hd.omega[k]));
      e["adjoint_vs_per_cube"] = tagged(diff, Tag::Measured);
    }
    e["rh"] = rh_characteristic(t, hm, q0, s.cfg().p).to_json();
    e["ainfty"] = ainfty_curve(t, hm, q0).to_json();
    flagged = flagged || hm.flagged;
    j["poles"].push_back(e);
    for (std::size_t k = 0; k < hm.cubes.size(); ++k)
      csv << p << ',' << hm.cubes[k] << ',' << point_csv(t.cube(hm.cubes[k]).center, n) << ','
          << fmt_double(hm.omega[k]) << ',' << fmt_double(hm.sigma[k]) << ',' << fmt_double(hm.kernel[k]) << '\n';
  }
  GreenField gf = green_function(*sys, poles.front());
  j["green"] = {{"min", tagged(gf.min_value, Tag::Measured)},
                {"bound_C", tagged(gf.bound_C, Tag::Fitted)},
                {"solver", {{"method", gf.stats.method}, {"iterations", gf.stats.iterations}}}};
  j["flagged"] = flagged;
  write_text(out / "harmonic_measure.csv", csv.str());
  write_json(out / "harmonic_measure.json", j);
  write_text(out / "g.svg", heatmap_svg(*G, gf.g, "g"));
  return kExitOk;
}

int cmd_perturb(Session& s, const Options& o, const fs::path& out) {
  Json j = header(s, "perturb");
  auto G = s.grid();
  const DyadicTree& t = *s.tree();
  MatrixField A = s.field(o.field);
  PerturbPlan plan;
  plan.eps = s.cfg().eps;
  plan.p = s.cfg().p;
  plan.generation = s.cfg().hm_generation;
  plan.q0 = s.cfg().q0;
  plan.carleson_generations = s.cfg().carleson_generations;
  PerturbTable tab = perturbation_experiment(G, A, t, plan);
  j["table"] = tab.to_json();
  write_json(out / "perturb.json", j);
  write_text(out / "perturb.csv", tab.to_csv());
  return kExitOk;
}

int cmd_magic(Session& s, const Options&, const fs::path& out) {
  Json j = header(s, "magic-check");
  const int n = s.cfg().n;
  BoundaryPtr g = s.g();
  std::mt19937_64 rng(s.cfg().seed);
  const double scale = 0.25 * s.cfg().window.side(0);
  std::vector<Point> X;
  for (int k = 0; k < s.cfg().distance_samples; ++k) {
    Point y = g->sample_point(rng);
    Point dir{};
    double nn = 0.0;
    while (nn < 1e-6) {
      for (int i = 0; i < n; ++i) dir[i] = uniform(rng, -1.0, 1.0);
      nn = norm(dir, n);
    }
    double t = scale * (0.05 + 0.45 * uniform01(rng));
    X.push_back(y + (t / nn) * dir);
  }
  std::ostringstream csv;
  csv << "sample," << coord_header(n) << ",delta";
  j["comparability"] = Json::array();
  std::vector<std::vector<double>> ratios;
  for (double a : s.cfg().alphas) {
    RegularizedDistance D(g, a);
    ComparabilityReport rep = comparability(D, X);
    Json e = rep.to_json();
    e["alpha"] = a;
    j["comparability"].push_back(e);
    std::vector<double> r(X.size());
    for (std::size_t k = 0; k < X.size(); ++k) r[k] = D(X[k]) / g->distance(X[k]);
    ratios.push_back(r);
    csv << ",ratio_alpha_" << fmt_double(a);
  }
  std::vector<double> residual;
  if (g->d() < n - 2.0) {
    MagicReport mr = magic_residual(g, X);
    j["magic"] = mr.to_json();
    residual = mr.extrapolated;
    csv << ",magic_residual";
  } else {
    j["magic"] = "skipped: needs d < n - 2";
  }
  csv << '\n';
  for (std::size_t k = 0; k < X.size(); ++k) {
    csv << k << ',' << point_csv(X[k], n) << ',' << fmt_double(g->distance(X[k]));
    for (auto& r : ratios) csv << ',' << fmt_double(r[k]);
    if (!residual.empty()) csv << ',' << fmt_double(residual[k]);
    csv << '\n';
  }
  write_json(out / "magic.json", j);
  write_text(out / "magic.csv", csv.str());
  return kExitOk;
}

int cmd_report(const fs::path& out) {
  if (!fs::exists(out)) throw ConfigError("--out directory '" + out.string() + "' does not exist");
  std::vector<fs::path> files;
  for (auto& e : fs::directory_iterator(out))
    if (e.path().extension() == ".json" && e.path().filename() != "summary.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  Json j;
  j["command"] = "report";
  j["reports"] = Json::object();
  for (auto& f : files) j["reports"][f.stem().string()] = load_json_file(f.string());
  write_json(out / "summary.json", j);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, char** envp) {
  CLI::App app{"sawtooth: dyadic, Whitney and sawtooth decompositions with elliptic diagnostics"};
  Options o;
  app.add_option("--config", o.config_path, "JSON run configuration");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--workers", o.workers, "worker threads");
  app.add_option("--seed", o.seed, "random seed");
  app.require_subcommand(1, 1);
  auto* dec = app.add_subcommand("decompose", "dyadic, Whitney or sawtooth decomposition");
  dec->add_option("--what", o.what)->check(CLI::IsMember({"dyadic", "whitney", "sawtooth"}));
  dec->add_option("--family", o.family);
  auto* ver = app.add_subcommand("verify-axioms", "check the sawtooth domain axioms");
  ver->add_option("--family", o.family);
  auto* car = app.add_subcommand("carleson", "discrete versus continuous Carleson norms");
  car->add_option("--field", o.field, "operator field as JSON");
  auto* sol = app.add_subcommand("solve", "Dirichlet problem on the grid");
  sol->add_option("--field", o.field, "operator field as JSON");
  auto* hm = app.add_subcommand("harmonic-measure", "harmonic measure, Poisson kernel and Green function");
  hm->add_option("--field", o.field, "operator field as JSON");
  hm->add_option("--mode", o.mode, "adjoint, per-cube or both");
  auto* per = app.add_subcommand("perturb", "perturbation experiment");
  per->add_option("--field", o.field, "operator field as JSON");
  auto* mag = app.add_subcommand("magic-check", "regularized distance checks");
  auto* rep = app.add_subcommand("report", "bundle JSON reports into summary.json");
  for (auto* sc : {dec, ver, car, sol, hm, per, mag, rep}) sc->fallthrough();

  std::vector<std::string> argv_s{"sawtooth-cli"};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (auto& a : argv_s) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (rep->parsed()) {
      if (o.out.empty()) throw ConfigError("--out is required for report");
      return cmd_report(o.out);
    }
    if (o.config_path.empty()) throw ConfigError("--config is required");
    Json raw = load_json_file(o.config_path);
    apply_env_overrides(raw, envp);
    if (o.seed >= 0) raw["seed"] = static_cast<std::uint64_t>(o.seed);
    if (o.workers > 0) raw["workers"] = o.workers;
    if (!o.out.empty()) raw["output"]["dir"] = o.out;
    RunConfig cfg = parse_config(raw);
    set_workers(cfg.workers);
    fs::path out = cfg.out;
    fs::create_directories(out);
    Session s(std::move(cfg));
    if (dec->parsed()) return cmd_decompose(s, o, out);
    if (ver->parsed()) return cmd_verify_axioms(s, o, out);
    if (car->parsed()) return cmd_carleson(s, o, out);
    if (sol->parsed()) return cmd_solve(s, o, out);
    if (hm->parsed()) return cmd_harmonic(s, o, out);
    if (per->parsed()) return cmd_perturb(s, o, out);
    if (mag->parsed()) return cmd_magic(s, o, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const VerificationError& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return kExitVerification;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitConfig;
}

}  // namespace saw
