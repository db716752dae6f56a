// critfield command line: model diagnostics, Kac-Rice curves, simulation,
// extraction, estimation and the replication harness.
#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "critfield/critpoints.hpp"
#include "critfield/errors.hpp"
#include "critfield/fieldsim.hpp"
#include "critfield/kacrice.hpp"
#include "critfield/stats.hpp"
#include "json.hpp"

using namespace critfield;
using nlohmann::json;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitRuntimeCap = 4;

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InvalidArgument(std::string("cannot parse ") + what + " entry '" + tok + "'");
    }
  }
  return out;
}

struct ModelFlags {
  std::string family = "gauss";
  int d = 2;
  double nu = 3.5;
  double phi = 1.0;
  double target_rho = 0.0;

  void add(CLI::App* app) {
    app->add_option("--family", family, "matern | gauss | rwm");
    app->add_option("--d", d, "dimension");
    app->add_option("--nu", nu, "Matern smoothness");
    app->add_option("--phi", phi, "scale");
    app->add_option("--target-rho", target_rho, "set phi so that rho_L equals this value");
  }
  CovarianceModel build(const std::string& L_spec) const {
    Family f = parse_family(family);
    double p = phi;
    if (target_rho > 0) p = scale_for_intensity(f, d, nu, IndexSet::parse(d, L_spec), target_rho);
    return CovarianceModel::make(f, d, nu, p);
  }
};

struct Output {
  std::string path;
  std::ofstream file;
  std::ostream& open() {
    if (path.empty() || path == "-") return std::cout;
    file.open(path, std::ios::binary);
    if (!file) throw InvalidArgument("cannot open output file " + path);
    return file;
  }
};

// Every option of the subcommand with its final value; goes into output headers.
json config_of(const CLI::App* app) {
  json j = json::object();
  j["command"] = app->get_name();
  for (const CLI::Option* o : app->get_options()) {
    std::string name = o->get_single_name();
    if (name == "help" || name == "config" || name == "out") continue;
    if (o->get_expected_min() == 0) {
      j[name] = o->count() > 0;
      continue;
    }
    j[name] = o->count() ? o->results().back() : o->get_default_str();
  }
  return j;
}

void write_curve_csv(std::ostream& os, const json& meta, const std::vector<double>& r, const std::vector<double>& v,
                     const std::vector<double>& se) {
  os << "# " << meta.dump() << "\n";
  os << "r,value,stderr\n";
  os.precision(17);
  for (size_t i = 0; i < r.size(); ++i) os << r[i] << "," << v[i] << "," << se[i] << "\n";
}

std::vector<double> grid(double lo, double hi, int n, bool log) {
  if (n < 2 || !(hi > lo) || (log && !(lo > 0))) throw InvalidArgument("bad r grid");
  std::vector<double> r(n);
  for (int i = 0; i < n; ++i)
    r[i] = log ? lo * std::pow(hi / lo, double(i) / (n - 1)) : lo + (hi - lo) * i / (n - 1);
  return r;
}

Window window_from_flags(int d, const std::string& lo, const std::string& hi) {
  auto l = parse_list(lo, "lower"), u = parse_list(hi, "upper");
  if (l.size() == 1) l.assign(d, l[0]);
  if (u.size() == 1) u.assign(d, u[0]);
  if (static_cast<int>(l.size()) != d || static_cast<int>(u.size()) != d)
    throw InvalidArgument("window corners need 1 or d entries");
  return Window(l, u);
}

std::uint64_t resolve_seed(long long given) {
  if (given >= 0) return static_cast<std::uint64_t>(given);
  std::random_device rd;
  return (std::uint64_t(rd()) << 32) ^ rd();
}

// Splice the keys of a JSON config file in front of the subcommand's flags, so
// flags given on the command line take precedence.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  for (size_t i = 1; i < args.size(); ++i) {
    std::string path;
    size_t erase = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      erase = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      erase = 1;
    }
    if (path.empty()) continue;
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot read config file " + path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw InvalidArgument(std::string("config file: ") + e.what());
    }
    if (!j.is_object()) throw InvalidArgument("config file must hold a JSON object");
    std::vector<std::string> extra;
    for (auto& [k, v] : j.items()) {
      if (v.is_boolean()) {
        if (v.get<bool>()) extra.push_back("--" + k);
        continue;
      }
      std::string s;
      if (v.is_array()) {
        for (size_t n = 0; n < v.size(); ++n) s += (n ? "," : "") + (v[n].is_string() ? v[n].get<std::string>() : v[n].dump());
      } else {
        s = v.is_string() ? v.get<std::string>() : v.dump();
      }
      extra.push_back("--" + k + "=" + s);
    }
    args.erase(args.begin() + i, args.begin() + i + erase);
    args.insert(args.begin() + 2, extra.begin(), extra.end());  // right after the subcommand
    break;
  }
  return args;
}

int exit_code_for(const Error& e) {
  static const std::map<std::string, int> codes = {
      {"InvalidArgument", kExitInvalid},         {"UnsupportedDimension", kExitInvalid},
      {"BandwidthRateViolation", kExitInvalid},  {"OutOfWindow", kExitInvalid},
      {"InsufficientSmoothness", kExitDegenerate}, {"DegenerateJoint", kExitDegenerate},
      {"DegenerateField", kExitDegenerate},      {"IntegrabilityViolation", kExitDegenerate},
      {"NonPositiveValues", kExitDegenerate},    {"EmptyPattern", kExitDegenerate},
      {"LatticeTooLarge", kExitRuntimeCap}};
  auto it = codes.find(e.kind());
  return it == codes.end() ? 1 : it->second;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical points of smooth Gaussian random fields"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  auto add_common = [&](CLI::App* s) { s->add_option("--config", config_path, "JSON file of flag values"); };

  // ---- model
  ModelFlags mf;
  std::string L_spec = "all", Lp_spec;
  auto* model = app.add_subcommand("model", "spectral moments and assumption checks");
  mf.add(model);
  model->add_option("--L", L_spec, "index set used with --target-rho");
  add_common(model);

  // ---- intensity
  long mc = 1000000;
  long long seed = -1;
  int threads = 0;
  Output out;
  auto* inten = app.add_subcommand("intensity", "rho_L in closed form and by GOE Monte Carlo");
  mf.add(inten);
  inten->add_option("--L", L_spec);
  inten->add_option("--mc", mc, "GOE draws, 0 to skip");
  inten->add_option("--seed", seed);
  inten->add_option("--threads", threads);
  inten->add_option("--out", out.path);
  add_common(inten);

  // ---- pcf / kfun / repulsion / slope
  double r_min = 0.0, r_max = 0.0, eta = 0.0, lo = 0.01, hi = 0.05;
  int n_r = 50;
  bool log_grid = false, stub_poisson = false;
  std::string r_list, curve_in;
  auto* pcf = app.add_subcommand("pcf", "pair correlation g_{L,L'}(r)");
  auto* kfun = app.add_subcommand("kfun", "K_{eta,L}(r)");
  auto* rep = app.add_subcommand("repulsion", "repulsion index 1 + (s_d/rho) int_0^r z^{d-1}(g-1)");
  auto* slope = app.add_subcommand("slope", "log-log slope of g on [lo, hi] * phi");
  for (auto* s : {pcf, kfun, rep, slope}) {
    mf.add(s);
    s->add_option("--L", L_spec);
    s->add_option("--mc", mc, "draws per abscissa");
    s->add_option("--seed", seed);
    s->add_option("--threads", threads);
    s->add_option("--out", out.path);
    add_common(s);
  }
  for (auto* s : {pcf, kfun, rep}) {
    s->add_option("--r-min", r_min, "smallest abscissa (default 1e-3 phi)");
    s->add_option("--r-max", r_max, "largest abscissa (default 5 phi)");
    s->add_option("--n-r", n_r, "number of abscissae");
    s->add_flag("--log", log_grid, "geometric grid");
  }
  pcf->add_option("--Lp", Lp_spec, "second index set (default L)");
  for (auto* s : {kfun, rep}) s->add_option("--r", r_list, "comma separated r values");
  kfun->add_option("--eta", eta, "lower cutoff (default 0.05 rho_L^{-1/d})");
  kfun->add_flag("--stub-poisson", stub_poisson, "use g = 1 instead of the model's pcf");
  slope->add_option("--lo", lo, "window start in units of phi");
  slope->add_option("--hi", hi, "window end in units of phi");
  slope->add_option("--n-r", n_r, "abscissae in the window");
  slope->add_option("--in", curve_in, "fit a curve CSV (r,value,stderr) instead of computing one");

  // ---- simulate
  std::string method = "spectral", lower = "0", upper = "1";
  int n_terms = 4096, lattice_n = 32;
  double xi = 0.0;
  long lattice_cap = kDefaultLatticeCap;
  auto* sim = app.add_subcommand("simulate", "draw a field realization");
  mf.add(sim);
  sim->add_option("--L", L_spec, "index set used with --target-rho");
  sim->add_option("--method", method, "spectral | lattice");
  sim->add_option("--n-terms", n_terms);
  sim->add_option("--lattice-n", lattice_n, "lattice refinement n (spacing 1/n)");
  sim->add_option("--xi", xi, "bandwidth (default n^{-1/(d+4)})");
  sim->add_option("--lattice-cap", lattice_cap, "largest lattice allowed");
  sim->add_option("--lower", lower, "window lower corner");
  sim->add_option("--upper", upper, "window upper corner");
  sim->add_option("--seed", seed);
  sim->add_option("--out", out.path);
  add_common(sim);

  // ---- extract
  std::string field_in;
  bool cosine = false;
  int seeds_per_axis = 0;
  std::string wlo, whi;
  auto* ext = app.add_subcommand("extract", "critical points of a field");
  ext->add_option("--field", field_in, "field JSON from simulate");
  ext->add_flag("--cosine", cosine, "cos(2 pi x) cos(2 pi y) on the unit square");
  ext->add_option("--lower", wlo, "window lower corner (default field domain)");
  ext->add_option("--upper", whi, "window upper corner");
  ext->add_option("--seeds-per-axis", seeds_per_axis);
  ext->add_option("--L", L_spec, "keep only these indices");
  ext->add_option("--threads", threads);
  ext->add_option("--out", out.path);
  add_common(ext);

  // ---- estimate
  std::string pattern_in;
  auto* est = app.add_subcommand("estimate", "rho_hat and k_hat_eta of a pattern");
  est->add_option("--pattern", pattern_in, "pattern CSV")->required();
  est->add_option("--L", L_spec);
  est->add_option("--eta", eta, "default 0.05 rho_hat^{-1/d}");
  est->add_option("--r", r_list, "comma separated r values");
  est->add_option("--out", out.path);
  add_common(est);

  // ---- clt
  std::string n_list = "10,20,40";
  int reps = 500;
  long pcf_mc = 200000;
  auto* clt = app.add_subcommand("clt", "replication experiment for rho_hat and k_hat");
  mf.add(clt);
  clt->add_option("--L", L_spec);
  clt->add_option("--eta", eta);
  clt->add_option("--r", r_list);
  clt->add_option("--n", n_list, "window sides");
  clt->add_option("--reps", reps);
  clt->add_option("--n-terms", n_terms);
  clt->add_option("--pcf-mc", pcf_mc);
  clt->add_option("--seed", seed);
  clt->add_option("--threads", threads);
  clt->add_option("--out", out.path);
  add_common(clt);

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = expand_config(args);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitInvalid;
  }
  std::vector<const char*> cargs;
  for (auto& a : args) cargs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  auto mc_options = [&](std::uint64_t s) {
    McOptions o;
    o.n_samples = mc;
    o.seed = s;
    o.threads = threads;
    return o;
  };

  try {
    CLI::App* cmd = app.get_subcommands().front();
    json meta = config_of(cmd);

    if (cmd == model) {
      CovarianceModel m = mf.build(L_spec);
      json j;
      j["model"] = to_json(m);
      j["describe"] = m.describe();
      for (int p = 1; p <= 3; ++p) {
        std::string key = "lambda" + std::to_string(2 * p);
        try {
          j[key] = spectral_moment(m, p);
        } catch (const InsufficientSmoothness& e) {
          j[key] = nullptr;
          j[key + "_note"] = e.what();
        }
      }
      j["moment_ratio"] = moment_ratio(m);
      auto ic = check_integrability(m);
      j["integrability"] = {{"ok", ic.ok},
                            {"tail_integral", std::isfinite(ic.tail_integral) ? json(ic.tail_integral) : json("inf")},
                            {"decay_exponent", ic.decay_exponent},
                            {"verdict", ic.verdict}};
      json nd = json::array();
      for (double f : {0.01, 0.1, 0.5, 1.0, 2.0, std::numbers::pi, 5.0}) {
        auto c = check_pairwise_nondegeneracy(m, f * m.phi());
        nd.push_back({{"r", f * m.phi()}, {"ok", c.ok}, {"margin1", c.margin1}, {"margin2", c.margin2}});
      }
      j["nondegeneracy"] = nd;
      json warn = json::array();
      if (m.second_order_degenerate()) warn.push_back("second-order degenerate at r in pi*phi*Z");
      if (!ic.ok) warn.push_back("integrability fails: variance and CLT results do not apply");
      j["warnings"] = warn;
      for (auto& w : warn) std::cerr << "warning: " << w.get<std::string>() << "\n";
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (cmd == inten) {
      CovarianceModel m = mf.build(L_spec);
      IndexSet L = IndexSet::parse(m.dim(), L_spec);
      json j = meta;
      j["model"] = to_json(m);
      j["rho"] = intensity(m, L);
      json by = json::array();
      for (int l = 0; l <= m.dim(); ++l) by.push_back(intensity(m, IndexSet(m.dim(), {l})));
      j["rho_by_index"] = by;
      if (mc > 0) {
        std::uint64_t s = resolve_seed(seed);
        j["seed"] = s;
        json goe = json::array();
        for (auto& e : intensity_goe_mc_all(m, mc_options(s)))
          goe.push_back({{"value", e.value}, {"stderr", e.std_error}});
        j["goe_mc"] = goe;
      }
      out.open() << j.dump(2) << "\n";
      return 0;
    }

    if (cmd == pcf || cmd == kfun || cmd == rep) {
      CovarianceModel m = mf.build(L_spec);
      const int d = m.dim();
      IndexSet L = IndexSet::parse(d, L_spec);
      IndexSet Lp = cmd == pcf && !Lp_spec.empty() ? IndexSet::parse(d, Lp_spec) : L;
      std::uint64_t s = resolve_seed(seed);
      meta["seed"] = s;
      meta["model"] = to_json(m);
      if (cmd == pcf) {
        double a = r_min > 0 ? r_min : pcf_cutoff(m), b = r_max > 0 ? r_max : 5.0 * m.phi();
        auto g = pcf_curve(m, L, Lp, grid(a, b, n_r, log_grid), mc_options(s));
        write_curve_csv(out.open(), meta, g.r, g.value, g.std_error);
      } else {
        auto rs = parse_list(r_list, "r");
        if (rs.empty()) throw InvalidArgument("--r is required");
        const double rmax = *std::max_element(rs.begin(), rs.end());
        const double rho = intensity(m, L);
        SummaryCurve g;
        std::optional<double> expo;
        if (cmd == kfun && eta <= 0) eta = default_eta(rho, d);
        meta["eta"] = eta;
        if (stub_poisson) {
          g.r = grid(std::max(eta, 1e-6 * rmax), rmax, 8, false);
          g.value.assign(g.r.size(), 1.0);
          g.std_error.assign(g.r.size(), 0.0);
          expo = 0.0;
        } else {
          double a = cmd == kfun ? std::max(eta, pcf_cutoff(m)) : pcf_cutoff(m);
          g = pcf_curve(m, L, L, grid(a, rmax, std::max(n_r, 2), true), mc_options(s));
          expo = small_r_exponent(d, L, L);
        }
        SummaryCurve se = g;
        se.value = g.std_error;
        std::vector<double> v, e;
        for (double r : rs) {
          if (cmd == kfun) {
            v.push_back(kfun_eta(g, d, eta, r, expo));
            e.push_back(stub_poisson ? 0.0 : kfun_eta(se, d, eta, r, expo));  // conservative
          } else {
            v.push_back(repulsion_index(g, d, rho, r, expo));
            e.push_back(sphere_surface(d) / rho * PcfIntegrator(se, d, expo).integrate(0.0, r));
          }
        }
        write_curve_csv(out.open(), meta, rs, v, e);
      }
      return 0;
    }

    if (cmd == slope) {
      SummaryCurve g;
      double a, b;
      json j = meta;
      if (!curve_in.empty()) {
        std::ifstream in(curve_in);
        if (!in) throw InvalidArgument("cannot read " + curve_in);
        std::string line;
        while (std::getline(in, line)) {
          if (line.empty() || line[0] == '#' || line[0] == 'r') continue;
          auto row = parse_list(line, "curve row");
          if (row.size() < 2) throw InvalidArgument("curve rows need r,value");
          g.r.push_back(row[0]);
          g.value.push_back(row[1]);
        }
        a = lo;
        b = hi;
        j["window"] = {a, b};
      } else {
        CovarianceModel m = mf.build(L_spec);
        IndexSet L = IndexSet::parse(m.dim(), L_spec);
        std::uint64_t s = resolve_seed(seed);
        j["seed"] = s;
        j["model"] = to_json(m);
        a = lo * m.phi();
        b = hi * m.phi();
        g = pcf_curve(m, L, L, grid(a, b, n_r, true), mc_options(s));
        auto ex = small_r_exponent(m.dim(), L, L);
        j["expected_slope"] = ex ? json(*ex) : json(nullptr);
        j["window"] = {a, b};
      }
      SlopeFit f = smallr_slope(g, a, b);
      j["slope"] = f.slope;
      j["intercept"] = f.intercept;
      j["std_error"] = f.std_error;
      j["n_points"] = f.n_points;
      out.open() << j.dump(2) << "\n";
      return 0;
    }

    if (cmd == sim) {
      CovarianceModel m = mf.build(L_spec);
      Window w = window_from_flags(m.dim(), lower, upper);
      std::uint64_t s = resolve_seed(seed);
      meta["seed"] = s;
      json j;
      if (method == "spectral") {
        j = simulate_spectral(m, n_terms, w, s).to_json();
      } else if (method == "lattice") {
        auto lat = simulate_lattice(m, lattice_n, w, s, lattice_cap);
        j = (xi > 0 ? smooth_lattice(std::move(lat), xi) : smooth_lattice(std::move(lat))).to_json();
      } else {
        throw InvalidArgument("unknown method " + method);
      }
      j["config"] = meta;
      out.open() << j.dump() << "\n";
      return 0;
    }

    if (cmd == ext) {
      std::unique_ptr<Field> f;
      if (cosine) {
        const double k = 2.0 * std::numbers::pi;
        f = std::make_unique<SpectralField>(Window::cube(2), std::vector<double>{0.5, 0.5}, std::vector<double>{0, 0},
                                            std::vector<double>{k, k, k, -k});
        if (seeds_per_axis == 0) seeds_per_axis = 16;
      } else {
        if (field_in.empty()) throw InvalidArgument("--field or --cosine is required");
        std::ifstream in(field_in);
        if (!in) throw InvalidArgument("cannot read " + field_in);
        json fj;
        try {
          fj = json::parse(in);
        } catch (const json::exception& e) {
          throw InvalidArgument(std::string("field file: ") + e.what());
        }
        f = field_from_json(fj);
        if (fj.contains("config")) meta["field_config"] = fj["config"];
      }
      const int d = f->dim();
      Window w = f->domain();
      if (!wlo.empty() || !whi.empty()) {
        // default corners: the field domain
        auto l = wlo.empty() ? w.lower : parse_list(wlo, "lower");
        auto u = whi.empty() ? w.upper : parse_list(whi, "upper");
        if (l.size() == 1) l.assign(d, l[0]);
        if (u.size() == 1) u.assign(d, u[0]);
        w = Window(l, u);
      }
      ExtractionConfig cfg;
      cfg.seeds_per_axis = seeds_per_axis;
      cfg.threads = threads;
      PointPattern p = extract(*f, w, cfg);
      if (L_spec != "all") p = filter_indices(p, IndexSet::parse(d, L_spec));
      write_pattern_csv(out.open(), p, {{"config", meta}});
      return 0;
    }

    if (cmd == est) {
      std::ifstream in(pattern_in);
      if (!in) throw InvalidArgument("cannot read " + pattern_in);
      PointPattern p = read_pattern_csv(in);
      IndexSet L = IndexSet::parse(p.d, L_spec);
      json j = meta;
      double rh = rho_hat(p, L);
      j["n_points"] = static_cast<long>(filter_indices(p, L).size());
      j["volume"] = p.window.volume();
      j["rho_hat"] = rh;
      auto rs = parse_list(r_list, "r");
      if (!rs.empty()) {
        if (eta <= 0) {
          if (rh == 0) throw EmptyPattern("no points with index in " + L.str());
          eta = default_eta(rh, p.d);
        }
        std::sort(rs.begin(), rs.end());
        j["eta"] = eta;
        auto k = k_hat_eta(p, L, eta, rs);
        json arr = json::array();
        for (size_t i = 0; i < rs.size(); ++i) arr.push_back({{"r", rs[i]}, {"k_hat", k[i]}});
        j["k_hat"] = arr;
      }
      out.open() << j.dump(2) << "\n";
      return 0;
    }

    if (cmd == clt) {
      CltConfig c;
      c.model = mf.build(L_spec);
      c.L = IndexSet::parse(c.model.dim(), L_spec);
      c.eta = eta;
      c.r_list = parse_list(r_list, "r");
      c.n_list = parse_list(n_list, "n");
      c.replicates = reps;
      c.n_terms = n_terms;
      c.seed = resolve_seed(seed);
      c.threads = threads;
      c.pcf_mc = pcf_mc;
      auto report = clt_experiment(c);
      json j = report.to_json();
      meta["seed"] = c.seed;
      j["config"] = meta;
      out.open() << j.dump(2) << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
