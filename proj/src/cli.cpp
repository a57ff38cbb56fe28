#include "renewlab/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <unistd.h>

#include "renewlab/chain.hpp"
#include "renewlab/dynsys.hpp"
#include "renewlab/error.hpp"
#include "renewlab/evolve.hpp"
#include "renewlab/format.hpp"
#include "renewlab/series.hpp"
#include "renewlab/spectral.hpp"

namespace renewlab::cli {

std::uint64_t fnv1a(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- config reading; every accessor validates its key

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* allowed) { return k == allowed; })) {
      throw ConfigError(where + ": unknown key '" + k + "'");
    }
  }
}

double as_number(const json& v, const std::string& where) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return kInf;
    throw ConfigError(where + ": expected a number or \"inf\"");
  }
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + ": not finite");
  return x;
}

std::uint64_t as_count(const json& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (x >= 0.0 && x < 0x1.0p63 && x == std::floor(x)) return static_cast<std::uint64_t>(x);
  }
  throw ConfigError(where + ": expected a nonnegative integer");
}

std::string as_choice(const json& v, const std::string& where, std::initializer_list<const char*> choices) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    for (const char* c : choices) {
      if (s == c) return s;
    }
  }
  std::string msg = where + ": expected one of";
  for (const char* c : choices) msg += std::string(" ") + c;
  throw ConfigError(msg);
}

std::vector<double> as_numbers(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(as_number(v[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

std::vector<long long> as_counts(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of integers");
  std::vector<long long> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    out.push_back(static_cast<long long>(as_count(v[k], where + "[" + std::to_string(k) + "]")));
  }
  return out;
}

// a number or [re, im]
std::vector<cplx> as_points(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of points");
  std::vector<cplx> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const std::string at = where + "[" + std::to_string(k) + "]";
    if (v[k].is_array()) {
      if (v[k].size() != 2) throw ConfigError(at + ": expected [re, im]");
      out.emplace_back(as_number(v[k][0], at), as_number(v[k][1], at));
    } else {
      out.emplace_back(as_number(v[k], at), 0.0);
    }
  }
  return out;
}

std::size_t positive(std::uint64_t n, const std::string& where) {
  if (n == 0) throw ConfigError(where + ": must be positive");
  return static_cast<std::size_t>(n);
}

struct LawSpec {
  std::string type;
  double q = 0.5;
  double degree = 1.0;
  double log_power = 0.0;
  double tail_exponent = kInf;
  std::vector<double> probs;
};

struct InitialSpec {
  std::string type = "point";
  std::size_t state = 1;
  std::vector<double> weights;
};

struct ObservableSpec {
  std::string type = "indicator";
  std::size_t state = 1;
  double value = 1.0;
  std::vector<double> values;
  double u_inf = 0.0;
};

struct SeriesSpec {
  std::string source = "one_minus_p";
  fs::path path;
  std::optional<double> gamma;
};

struct Tolerances {
  double slope = 0.15;
  double tail_bound = 1e-8;
  double lemma2 = 0.1;
  double constant = 0.2;
  double null = 0.05;
  double factorization = 1e-12;
  double eigen = 1e-10;
  double gf_identity = 1e-9;
  double two_route = 1e-10;
  double kac = 0.01;
  double sigma = 3.0;
  double mc_slope = 0.25;
  double entrance_slope = 0.2;
};

struct Experiment {
  LawSpec law;
  std::size_t truncation = 0;
  std::string output = ".";
  McOptions mc;
  std::optional<std::size_t> orbit_length;
  InitialSpec initial;
  ObservableSpec u;
  std::optional<ObservableSpec> v;
  std::optional<std::vector<long long>> grid;
  std::optional<std::pair<long long, long long>> fit_window;
  std::size_t n_max = 1000;
  std::optional<std::size_t> samples;
  std::optional<double> a;
  std::size_t a_state = 1;
  EntranceStarts starts = EntranceStarts::LongOrbit;
  std::optional<std::vector<cplx>> z;
  std::optional<std::vector<cplx>> lambda;
  std::optional<std::size_t> section;
  std::size_t i = 1;
  std::size_t j = 1;
  std::vector<double> radii;
  std::size_t bins = 10;
  std::size_t i_max = 10;
  std::optional<std::size_t> rows;
  SeriesSpec series;
  Tolerances tol;
};

LawSpec read_law(const json& v) {
  only_keys(v, "law", {"type", "q", "degree", "log_power", "probs", "tail_exponent"});
  if (!v.contains("type")) throw ConfigError("law: missing 'type'");
  LawSpec s;
  s.type = as_choice(v["type"], "law.type", {"geometric", "zeta", "finite", "custom"});
  if (v.contains("q")) s.q = as_number(v["q"], "law.q");
  if (v.contains("degree")) s.degree = as_number(v["degree"], "law.degree");
  if (v.contains("log_power")) s.log_power = as_number(v["log_power"], "law.log_power");
  if (v.contains("tail_exponent")) s.tail_exponent = as_number(v["tail_exponent"], "law.tail_exponent");
  if (v.contains("probs")) s.probs = as_numbers(v["probs"], "law.probs");
  if ((s.type == "finite" || s.type == "custom") && s.probs.empty()) {
    throw ConfigError("law: '" + s.type + "' needs 'probs'");
  }
  return s;
}

InitialSpec read_initial(const json& v) {
  only_keys(v, "initial", {"type", "state", "weights"});
  InitialSpec s;
  if (v.contains("type")) s.type = as_choice(v["type"], "initial.type", {"point", "stationary", "weights"});
  if (v.contains("state")) s.state = positive(as_count(v["state"], "initial.state"), "initial.state");
  if (v.contains("weights")) s.weights = as_numbers(v["weights"], "initial.weights");
  if (s.type == "weights" && s.weights.empty()) throw ConfigError("initial: 'weights' needs a nonempty list");
  return s;
}

ObservableSpec read_observable(const json& v, const std::string& where) {
  only_keys(v, where, {"type", "state", "value", "values", "u_inf"});
  ObservableSpec s;
  if (v.contains("type")) {
    s.type = as_choice(v["type"], where + ".type", {"indicator", "centered_indicator", "constant", "values"});
  }
  if (v.contains("state")) s.state = positive(as_count(v["state"], where + ".state"), where + ".state");
  if (v.contains("value")) s.value = as_number(v["value"], where + ".value");
  if (v.contains("values")) s.values = as_numbers(v["values"], where + ".values");
  if (v.contains("u_inf")) s.u_inf = as_number(v["u_inf"], where + ".u_inf");
  return s;
}

std::vector<long long> read_grid(const json& v) {
  if (v.is_array()) return as_counts(v, "grid");
  only_keys(v, "grid", {"lo", "hi", "per_decade"});
  const long long lo = static_cast<long long>(positive(as_count(v.value("lo", json(1)), "grid.lo"), "grid.lo"));
  const long long hi = static_cast<long long>(as_count(v.value("hi", json(1000)), "grid.hi"));
  const auto per = as_count(v.value("per_decade", json(20)), "grid.per_decade");
  if (hi < lo) throw ConfigError("grid: hi < lo");
  if (per == 0 || per > 1000) throw ConfigError("grid.per_decade: must lie in 1..1000");
  return log_grid(lo, hi, static_cast<int>(per));
}

Tolerances read_tolerances(const json& v) {
  only_keys(v, "tolerances", {"slope", "tail_bound", "lemma2", "constant", "null", "factorization", "eigen",
                              "gf_identity", "two_route", "kac", "sigma", "mc_slope", "entrance_slope"});
  Tolerances t;
  const std::map<std::string, double*> slots = {
      {"slope", &t.slope},         {"tail_bound", &t.tail_bound},   {"lemma2", &t.lemma2},
      {"constant", &t.constant},   {"null", &t.null},               {"factorization", &t.factorization},
      {"eigen", &t.eigen},         {"gf_identity", &t.gf_identity}, {"two_route", &t.two_route},
      {"kac", &t.kac},             {"sigma", &t.sigma},             {"mc_slope", &t.mc_slope},
      {"entrance_slope", &t.entrance_slope}};
  for (const auto& [k, slot] : slots) {
    if (!v.contains(k)) continue;
    *slot = as_number(v[k], "tolerances." + k);
    if (*slot <= 0.0) throw ConfigError("tolerances." + k + ": must be positive");
  }
  return t;
}

Experiment read_experiment(const json& cfg, const fs::path& config_dir) {
  only_keys(cfg, "config",
            {"law", "truncation", "output", "seed", "burn_in", "orbit_length", "batches", "streams", "sampler",
             "initial", "observable", "observable_v", "grid", "fit_window", "n_max", "samples", "a", "a_state",
             "starts", "z", "lambda", "disk", "section", "states", "radii", "bins", "i_max", "rows", "series",
             "tolerances"});
  Experiment e;
  if (!cfg.contains("law")) throw ConfigError("config: missing 'law'");
  e.law = read_law(cfg["law"]);
  if (!cfg.contains("truncation")) throw ConfigError("config: missing 'truncation'");
  e.truncation = positive(as_count(cfg["truncation"], "truncation"), "truncation");
  if (cfg.contains("output")) {
    if (!cfg["output"].is_string()) throw ConfigError("output: expected a path");
    e.output = cfg["output"].get<std::string>();
  }
  if (cfg.contains("seed")) e.mc.seed = as_count(cfg["seed"], "seed");
  if (cfg.contains("burn_in")) e.mc.burn_in = as_count(cfg["burn_in"], "burn_in");
  if (cfg.contains("batches")) e.mc.batches = as_count(cfg["batches"], "batches");
  if (cfg.contains("streams")) e.mc.streams = positive(as_count(cfg["streams"], "streams"), "streams");
  if (cfg.contains("sampler")) {
    e.mc.sampler = as_choice(cfg["sampler"], "sampler", {"float", "symbolic"}) == "float" ? Sampler::FloatOrbit
                                                                                         : Sampler::Symbolic;
  }
  if (cfg.contains("orbit_length")) e.orbit_length = positive(as_count(cfg["orbit_length"], "orbit_length"), "orbit_length");
  if (cfg.contains("initial")) e.initial = read_initial(cfg["initial"]);
  if (cfg.contains("observable")) e.u = read_observable(cfg["observable"], "observable");
  if (cfg.contains("observable_v")) e.v = read_observable(cfg["observable_v"], "observable_v");
  if (cfg.contains("grid")) e.grid = read_grid(cfg["grid"]);
  if (cfg.contains("fit_window")) {
    auto w = as_counts(cfg["fit_window"], "fit_window");
    if (w.size() != 2 || w[0] > w[1]) throw ConfigError("fit_window: expected [lo, hi] with lo <= hi");
    e.fit_window = std::pair{w[0], w[1]};
  }
  if (cfg.contains("n_max")) e.n_max = positive(as_count(cfg["n_max"], "n_max"), "n_max");
  if (cfg.contains("samples")) e.samples = positive(as_count(cfg["samples"], "samples"), "samples");
  if (cfg.contains("a")) e.a = as_number(cfg["a"], "a");
  if (cfg.contains("a_state")) e.a_state = positive(as_count(cfg["a_state"], "a_state"), "a_state");
  if (cfg.contains("starts")) {
    e.starts = as_choice(cfg["starts"], "starts", {"long_orbit", "independent"}) == "independent"
                   ? EntranceStarts::Independent
                   : EntranceStarts::LongOrbit;
  }
  if (cfg.contains("z")) e.z = as_points(cfg["z"], "z");
  if (cfg.contains("lambda")) e.lambda = as_points(cfg["lambda"], "lambda");
  if (cfg.contains("disk")) {
    const auto& d = cfg["disk"];
    only_keys(d, "disk", {"radii", "angles"});
    const auto radii = as_numbers(d.value("radii", json::array({0.5})), "disk.radii");
    const auto angles = positive(as_count(d.value("angles", json(16)), "disk.angles"), "disk.angles");
    if (!e.lambda) e.lambda.emplace();
    for (double r : radii) {
      for (std::size_t k = 0; k < angles; ++k) {
        e.lambda->push_back(std::polar(r, 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(angles)));
      }
    }
  }
  if (cfg.contains("section")) e.section = positive(as_count(cfg["section"], "section"), "section");
  if (cfg.contains("states")) {
    auto s = as_counts(cfg["states"], "states");
    if (s.size() != 2 || s[0] < 1 || s[1] < 1) throw ConfigError("states: expected [i, j] with i, j >= 1");
    e.i = static_cast<std::size_t>(s[0]);
    e.j = static_cast<std::size_t>(s[1]);
  }
  if (cfg.contains("radii")) e.radii = as_numbers(cfg["radii"], "radii");
  if (cfg.contains("bins")) e.bins = positive(as_count(cfg["bins"], "bins"), "bins");
  if (cfg.contains("i_max")) e.i_max = positive(as_count(cfg["i_max"], "i_max"), "i_max");
  if (cfg.contains("rows")) e.rows = positive(as_count(cfg["rows"], "rows"), "rows");
  if (cfg.contains("series")) {
    const auto& s = cfg["series"];
    only_keys(s, "series", {"source", "path", "gamma"});
    if (s.contains("source")) e.series.source = as_choice(s["source"], "series.source", {"one_minus_p", "d", "file"});
    if (s.contains("path")) {
      if (!s["path"].is_string()) throw ConfigError("series.path: expected a path");
      e.series.path = config_dir / s["path"].get<std::string>();
    }
    if (s.contains("gamma")) e.series.gamma = as_number(s["gamma"], "series.gamma");
    if (e.series.source == "file" && e.series.path.empty()) throw ConfigError("series: source 'file' needs 'path'");
  }
  if (cfg.contains("tolerances")) e.tol = read_tolerances(cfg["tolerances"]);
  return e;
}

// ---- model objects from the config

ReturnLaw make_law(const LawSpec& s) {
  if (s.type == "geometric") return ReturnLaw::geometric(s.q);
  if (s.type == "zeta") return ReturnLaw::zeta_tail(s.degree, s.log_power);
  if (s.type == "finite") return ReturnLaw::finite(s.probs);
  return ReturnLaw::custom(s.probs, s.tail_exponent);
}

SignedDistribution make_initial(const InitialSpec& s, const RenewalChain& chain) {
  if (s.type == "stationary") return SignedDistribution::stationary(chain);
  if (s.type == "weights") return SignedDistribution(s.weights);
  return SignedDistribution::point_mass(s.state);
}

Observable make_observable(const ObservableSpec& s, const RenewalChain& chain) {
  if (s.type == "constant") return Observable::constant(s.value);
  if (s.type == "values") return Observable(s.values, s.u_inf);
  if (s.type == "centered_indicator") {
    const double c = chain.pi_at(static_cast<long long>(s.state));
    std::vector<double> vals(s.state, -c);
    vals.back() = 1.0 - c;
    return Observable(std::move(vals), -c);
  }
  return Observable::indicator(s.state);
}

json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw fs::filesystem_error("cannot open for writing", tmp, std::make_error_code(std::errc::io_error));
    f << content;
    f.flush();
    if (!f) throw fs::filesystem_error("write failed", tmp, std::make_error_code(std::errc::io_error));
  }
  fs::rename(tmp, path);
}

struct Check {
  std::string name;
  double value;
  double limit;
  bool pass;
};

class Session {
 public:
  Session(std::string command, const Experiment& e, fs::path dir, std::string hash)
      : command_(std::move(command)), e_(e), dir_(std::move(dir)), hash_(std::move(hash)) {
    stem_ = command_;
    std::replace(stem_.begin(), stem_.end(), ' ', '_');
  }

  const std::string& stem() const { return stem_; }
  json& results() { return results_; }
  void note(std::string text) { note_ = std::move(text); }

  void csv(const std::string& name, const std::string& content) {
    write_atomic(dir_ / name, content);
    json side = header();
    side["file"] = name;
    if (!note_.empty()) side["note"] = note_;
    write_atomic(dir_ / (name + ".json"), side.dump(2) + "\n");
  }

  void check(std::string name, double value, double limit, bool pass) {
    checks_.push_back({std::move(name), value, limit, pass});
  }

  bool passed() const {
    return std::all_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.pass; });
  }

  json summary() const {
    json s = header();
    if (!note_.empty()) s["note"] = note_;
    s["results"] = results_;
    s["checks"] = json::array();
    for (const auto& c : checks_) {
      s["checks"].push_back({{"name", c.name}, {"value", num(c.value)}, {"limit", num(c.limit)}, {"pass", c.pass}});
    }
    s["status"] = passed() ? "pass" : "fail";
    return s;
  }

  void finish() { write_atomic(dir_ / (stem_ + ".json"), summary().dump(2) + "\n"); }

  const std::vector<Check>& checks() const { return checks_; }

 private:
  json header() const {
    return {{"command", command_}, {"config_hash", hash_}, {"seed", e_.mc.seed}, {"version", RENEWLAB_VERSION}};
  }

  std::string command_;
  const Experiment& e_;
  fs::path dir_;
  std::string hash_;
  std::string stem_;
  std::string note_;
  json results_ = json::object();
  std::vector<Check> checks_;
};

json fit_json(const RateFit& f) {
  return {{"exponent", num(f.exponent)}, {"intercept", num(f.intercept)}, {"n_lo", f.n_lo},
          {"n_hi", f.n_hi},           {"rms_residual", num(f.rms_residual)}, {"points", f.points}};
}

std::pair<long long, long long> window(const Experiment& e, const std::vector<long long>& grid) {
  if (e.fit_window) return *e.fit_window;
  if (grid.empty()) return {0, 0};
  return {*std::min_element(grid.begin(), grid.end()), *std::max_element(grid.begin(), grid.end())};
}

std::string rate_csv(const RateCurve& c) {
  std::ostringstream os;
  write_csv(os, c);
  return os.str();
}

std::string mc_csv(const std::vector<McRow>& rows) {
  std::ostringstream os;
  write_csv(os, rows);
  return os.str();
}

double last_value(const RateCurve& c) {
  if (c.size() == 0) throw ConfigError("grid: empty");
  return c.values.back();
}

bool finite_degree(const RenewalChain& c) { return std::isfinite(c.ergodic_degree()); }

// ---- commands

void chain_info(Session& s, const Experiment& e, const RenewalChain& c) {
  const std::size_t rows = std::min(c.truncation(), e.rows.value_or(1000));
  std::ostringstream os;
  os << "n,p,d,pi\n";
  for (std::size_t n = 1; n <= rows; ++n) {
    os << n << ',' << format_double(c.p()[n]) << ',' << format_double(c.d()[n]) << ',' << format_double(c.pi()[n - 1])
       << '\n';
  }
  s.csv(s.stem() + ".csv", os.str());
  auto& r = s.results();
  r["law"] = c.law().describe();
  r["truncation"] = c.truncation();
  r["m1"] = num(c.m1());
  r["pi1"] = num(c.pi1());
  r["degree"] = num(c.ergodic_degree());
  r["recurrence"] = c.positive_recurrent() ? "positive" : "null";
  r["p_tail"] = num(c.p_tail());
  r["d_tail"] = num(c.d_tail());
  r["pi_tail"] = num(c.pi_tail());
  r["kaluza"] = kaluza_check(c.p());
}

void rates_distance(Session& s, const Experiment& e, const RenewalChain& c) {
  const auto grid = e.grid.value_or(log_grid(1, 1000));
  auto curve = distance_curve(c, make_initial(e.initial, c), grid);
  s.csv(s.stem() + ".csv", rate_csv(curve));
  const auto [lo, hi] = window(e, grid);
  const auto fit = rate_fit(curve, lo, hi);
  const double bound = *std::max_element(curve.tail_bound.begin(), curve.tail_bound.end());
  s.results()["fit"] = fit_json(fit);
  s.results()["max_tail_bound"] = num(bound);
  s.results()["degree"] = num(c.ergodic_degree());
  if (finite_degree(c)) {
    s.check("slope", fit.exponent, e.tol.slope, std::abs(fit.exponent + c.ergodic_degree()) <= e.tol.slope);
  }
  s.check("tail_bound", bound, e.tol.tail_bound, bound < e.tol.tail_bound);
}

void rates_correlation(Session& s, const Experiment& e, const RenewalChain& c) {
  const auto grid = e.grid.value_or(log_grid(1, 1000));
  auto curve = correlation_curve(c, make_initial(e.initial, c), make_observable(e.u, c), grid);
  s.csv(s.stem() + ".csv", rate_csv(curve));
  const auto [lo, hi] = window(e, grid);
  s.results()["fit"] = fit_json(rate_fit(curve, lo, hi));
  s.results()["degree"] = num(c.ergodic_degree());
}

void rates_lemma2(Session& s, const Experiment& e, const RenewalChain& c) {
  const auto grid = e.grid.value_or(log_grid(1, 1000));
  auto curve = lemma2_ratio(c, grid);
  s.csv(s.stem() + ".csv", rate_csv(curve));
  const double last = last_value(curve);
  s.results()["n"] = curve.n_grid.back();
  s.results()["ratio"] = num(last);
  s.check("lemma2", std::abs(last - 1.0), e.tol.lemma2, std::abs(last - 1.0) <= e.tol.lemma2);
}

void rates_constant(Session& s, const Experiment& e, const RenewalChain& c) {
  const auto grid = e.grid.value_or(log_grid(1, 1000));
  auto t2 = theorem2_constant(c, make_initial(e.initial, c), make_observable(e.u, c), grid);
  s.csv(s.stem() + ".csv", rate_csv(t2.empirical));
  const double last = last_value(t2.empirical);
  const double rel = std::abs(last - t2.predicted) / std::abs(t2.predicted);
  s.results()["n"] = t2.empirical.n_grid.back();
  s.results()["empirical"] = num(last);
  s.results()["predicted"] = num(t2.predicted);
  s.check("constant", rel, e.tol.constant, rel <= e.tol.constant);
}

void rates_null(Session& s, const Experiment& e, const RenewalChain& c) {
  const auto grid = e.grid.value_or(log_grid(1, 1000));
  auto curve = null_recurrent_ratio(c, make_initial(e.initial, c), make_observable(e.u, c), grid);
  s.csv(s.stem() + ".csv", rate_csv(curve));
  const double last = last_value(curve);
  s.results()["n"] = curve.n_grid.back();
  s.results()["ratio"] = num(last);
  s.check("null", std::abs(last - 1.0), e.tol.null, std::abs(last - 1.0) <= e.tol.null);
}

void spectral_factorize(Session& s, const Experiment& e, const RenewalChain& c) {
  const auto zs = e.z.value_or(std::vector<cplx>{0.5, cplx(-0.3, 0.4)});
  const std::size_t n = e.section.value_or(std::min<std::size_t>(c.truncation(), 200));
  std::ostringstream os;
  os << "re_z,im_z,residual\n";
  double worst = 0.0;
  for (cplx z : zs) {
    const double r = factorization_residual(c, z, n);
    worst = std::max(worst, r);
    os << format_double(z.real()) << ',' << format_double(z.imag()) << ',' << format_double(r) << '\n';
  }
  s.csv(s.stem() + ".csv", os.str());
  s.results()["section"] = n;
  s.results()["max_residual"] = num(worst);
  s.check("factorization", worst, e.tol.factorization, worst < e.tol.factorization);
}

void spectral_eigen(Session& s, const Experiment& e, const RenewalChain& c) {
  const auto lambdas = e.lambda.value_or(std::vector<cplx>{0.0, 0.5, cplx(0.0, 0.5), 0.9});
  const std::size_t n = e.section.value_or(std::min<std::size_t>(c.truncation(), 400));
  s.note("diagnostic, not proof: truncated residuals and partial norms do not certify point spectrum");
  const auto scan = disk_scan(c, lambdas, n);
  std::ostringstream os;
  write_scan_csv(os, scan);
  s.csv(s.stem() + ".csv", os.str());
  double worst = 0.0;
  json probes = json::array();
  for (const auto& p : scan) {
    worst = std::max(worst, p.residual);
    probes.push_back({{"re", num(p.lambda.real())}, {"im", num(p.lambda.imag())}, {"residual", num(p.residual)},
                      {"tail_note", num(p.tail_note)}, {"l1_partial_norm", num(p.l1_partial_norm)}});
  }
  s.results()["section"] = n;
  s.results()["probes"] = probes;
  s.check("eigen", worst, e.tol.eigen, worst < e.tol.eigen);
}

void spectral_gf(Session& s, const Experiment& e, const RenewalChain& c) {
  const auto zs = e.z.value_or(std::vector<cplx>{0.5, cplx(0.0, 0.5), cplx(-0.5)});
  std::ostringstream os;
  os << "re_z,im_z,re_p,im_p,re_f,im_f,identity_gap,tail_bound\n";
  double worst = 0.0;
  for (cplx z : zs) {
    const auto v = gf_evaluate(c, e.i, e.j, z);
    worst = std::max(worst, v.identity_gap);
    os << format_double(z.real()) << ',' << format_double(z.imag()) << ',' << format_double(v.p_ij.real()) << ','
       << format_double(v.p_ij.imag()) << ',' << format_double(v.f_ij.real()) << ',' << format_double(v.f_ij.imag())
       << ',' << format_double(v.identity_gap) << ',' << format_double(v.tail_bound) << '\n';
  }
  s.csv(s.stem() + ".csv", os.str());
  s.results()["states"] = {e.i, e.j};
  s.results()["max_identity_gap"] = num(worst);
  if (!e.radii.empty()) {
    std::ostringstream rs;
    rs << "r,value\n";
    json pts = json::array();
    for (const auto& p : radial_probe(c, e.i, e.radii)) {
      rs << format_double(p.r) << ',' << format_double(p.value) << '\n';
      pts.push_back({{"r", num(p.r)}, {"value", num(p.value)}});
    }
    s.csv(s.stem() + "_radial.csv", rs.str());
    s.results()["radial"] = pts;
    s.results()["radial_limit"] = num(c.pi_at(static_cast<long long>(e.i)));
  }
  s.check("gf_identity", worst, e.tol.gf_identity, worst <= e.tol.gf_identity);
}

McOptions mc_options(const Experiment& e) { return e.mc; }

void map_simulate(Session& s, const Experiment& e, const RenewalChain& c) {
  const auto map = build_map(c);
  const std::size_t len = e.orbit_length.value_or(10000);
  const auto orbit = sample_orbit(map, len, mc_options(e));
  std::ostringstream os;
  os << "t,cell,x\n";
  std::vector<double> visits(e.i_max + 1, 0.0);
  for (std::size_t t = 0; t < orbit.size(); ++t) {
    os << t << ',' << orbit[t].cell << ',' << format_double(orbit[t].x) << '\n';
    if (orbit[t].cell <= e.i_max) visits[orbit[t].cell] += 1.0;
  }
  s.csv(s.stem() + ".csv", os.str());
  json occ = json::array();
  for (std::size_t i = 1; i <= e.i_max; ++i) {
    occ.push_back({{"i", i}, {"frequency", num(visits[i] / static_cast<double>(len))},
                   {"pi", num(c.pi_at(static_cast<long long>(i)))}});
  }
  s.results()["orbit_length"] = len;
  s.results()["symbol_cap"] = map.symbol_cap();
  s.results()["occupation"] = occ;
}

void map_correlate(Session& s, const Experiment& e, const RenewalChain& c) {
  const auto map = build_map(c);
  const auto u = make_observable(e.u, c);
  const auto v = e.v ? make_observable(*e.v, c) : u;
  const auto lags = e.grid.value_or(std::vector<long long>{0, 1, 2, 5, 10, 20, 50, 100});
  const auto rows = mc_correlation(map, u, v, lags, e.orbit_length.value_or(1000000), mc_options(e));
  const auto exact = exact_map_correlation(c, u, v, lags);
  s.csv(s.stem() + ".csv", mc_csv(rows));
  json per = json::array();
  double worst = 0.0;
  RateCurve mc;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& est = rows[k].estimate;
    const double diff = std::abs(est.mean - exact.values[k]);
    const double z = est.std_error > 0.0 ? diff / est.std_error : (diff <= 1e-12 ? 0.0 : kInf);
    worst = std::max(worst, z);
    per.push_back({{"n", rows[k].n}, {"mean", num(est.mean)}, {"stderr", num(est.std_error)},
                   {"exact", num(exact.values[k])}, {"z", num(z)}, {"censored", rows[k].censored}});
    mc.push(rows[k].n, est.mean);
  }
  s.results()["lags"] = per;
  s.check("sigma", worst, e.tol.sigma, worst <= e.tol.sigma);
  if (finite_degree(c)) {
    s.results()["predicted_constant"] = num(map_correlation_constant(c, u, v));
    if (e.fit_window) {
      const auto fit = rate_fit(mc, e.fit_window->first, e.fit_window->second);
      s.results()["fit"] = fit_json(fit);
      s.check("mc_slope", fit.exponent, e.tol.mc_slope,
              std::abs(fit.exponent + c.ergodic_degree()) <= e.tol.mc_slope);
    }
  }
}

void map_entrance(Session& s, const Experiment& e, const RenewalChain& c) {
  const auto map = build_map(c);
  if (!e.a && e.a_state > map.branches()) throw ConfigError("a_state: beyond the last breakpoint");
  const double a = e.a.value_or(map.breakpoints()[e.a_state]);
  const std::size_t samples = e.samples.value_or(e.orbit_length.value_or(1000000));
  const auto tail = entrance_tail(map, a, e.n_max, samples, mc_options(e), e.starts);
  s.csv(s.stem() + ".csv", mc_csv(tail.rows));
  const long long n_max = static_cast<long long>(e.n_max);
  const auto [lo, hi] = e.fit_window.value_or(std::pair{std::max(1LL, n_max / 10), n_max});
  const auto fit = fit_survival(tail, lo, hi);
  s.results()["a"] = num(a);
  s.results()["starts"] = e.starts == EntranceStarts::Independent ? "independent" : "long_orbit";
  s.results()["power_slope"] = num(fit.power_slope);
  s.results()["log_rate"] = num(fit.log_rate);
  s.results()["points"] = fit.points;
  s.results()["window"] = {lo, hi};
  if (finite_degree(c)) {
    s.check("entrance_slope", fit.power_slope, e.tol.entrance_slope,
            std::abs(fit.power_slope + c.ergodic_degree()) <= e.tol.entrance_slope);
  }
}

void map_kac(Session& s, const Experiment& e, const RenewalChain& c) {
  const auto map = build_map(c);
  const auto k = kac_check(map, e.orbit_length.value_or(1000000), mc_options(e), e.bins);
  std::ostringstream os;
  os << "k,count,expected\n";
  const double total = static_cast<double>(k.excursions);
  for (std::size_t b = 0; b <= e.bins; ++b) {
    const double prob = b < e.bins ? c.law().prob(static_cast<long long>(b + 1))
                                   : c.law().tail(static_cast<long long>(e.bins));
    os << b + 1 << ',' << k.histogram[b] << ',' << format_double(total * prob) << '\n';
  }
  s.csv(s.stem() + ".csv", os.str());
  auto& r = s.results();
  r["rho_e"] = num(k.rho_e);
  r["mean_return"] = num(k.mean_return);
  r["product"] = num(k.product);
  r["excursions"] = k.excursions;
  r["chi_square"] = num(k.chi_square);
  r["chi_square_quantile"] = num(k.chi_square_quantile);
  r["censored"] = k.censored;
  s.check("kac", std::abs(k.product - 1.0), e.tol.kac, std::abs(k.product - 1.0) < e.tol.kac);
  s.check("chi_square", k.chi_square, k.chi_square_quantile, k.chi_square < k.chi_square_quantile);
}

void map_frequency(Session& s, const Experiment& e, const RenewalChain& c) {
  const auto map = build_map(c);
  const auto rep = markov_frequency_check(map, e.orbit_length.value_or(1000000), e.i_max, mc_options(e));
  std::ostringstream os;
  os << "i,j,empirical,exact,stderr,visits\n";
  double worst = 0.0;
  for (const auto& cell : rep.cells) {
    os << cell.i << ',' << cell.j << ',' << format_double(cell.empirical) << ',' << format_double(cell.exact) << ','
       << format_double(cell.std_error) << ',' << cell.visits << '\n';
    if (cell.i == 1 && cell.std_error > 0.0) worst = std::max(worst, std::abs(cell.empirical - cell.exact) / cell.std_error);
  }
  s.csv(s.stem() + ".csv", os.str());
  json occ = json::array();
  for (const auto& o : rep.occupation) {
    occ.push_back({{"i", o.i}, {"mean", num(o.estimate.mean)}, {"stderr", num(o.estimate.std_error)},
                   {"exact", num(o.exact)}});
  }
  s.results()["occupation"] = occ;
  s.results()["censored"] = rep.censored;
  s.check("sigma", worst, e.tol.sigma, worst <= e.tol.sigma);
}

void series_probe(Session& s, const Experiment& e, const RenewalChain& c) {
  std::optional<TruncatedSeries> input;
  if (e.series.source == "file") {
    std::ifstream f(e.series.path);
    if (!f) throw ConfigError("series.path: cannot read " + e.series.path.string());
    input = read_csv(f);
  } else if (e.series.source == "d") {
    input = c.d();
  } else {
    std::vector<double> a(c.truncation() + 1);
    a[0] = 1.0;
    for (std::size_t n = 1; n <= c.truncation(); ++n) a[n] = -c.p()[n];
    input = TruncatedSeries(std::move(a));
  }
  const auto out = reciprocal(*input);
  std::ostringstream os;
  write_csv(os, out);
  s.csv(s.stem() + ".csv", os.str());
  auto& r = s.results();
  r["source"] = e.series.source;
  r["order"] = out.order();
  r["kaluza"] = kaluza_check(c.p());
  r["min_modulus_on_circle"] = num(min_modulus_on_circle(*input));
  if (e.fit_window) {
    RateCurve curve;
    for (std::size_t n = 1; n <= out.order(); ++n) curve.push(static_cast<long long>(n), out[n]);
    r["fit"] = fit_json(rate_fit(curve, e.fit_window->first, e.fit_window->second));
  }
  if (e.series.source != "file") {
    // both routes to p_11^n: 1/(1 - P) directly, or partial sums of 1/D
    const auto e_n = renewal_sequence(c, c.truncation());
    const auto other = e.series.source == "d" ? partial_sums(out) : out;
    double gap = 0.0;
    for (std::size_t n = 0; n <= c.truncation(); ++n) gap = std::max(gap, std::abs(other[n] - e_n.values[n]));
    r["two_route_gap"] = num(gap);
    s.check("two_route", gap, e.tol.two_route, gap <= e.tol.two_route);
  }
  if (e.series.gamma) {
    json rows = json::array();
    for (long long n : e.grid.value_or(log_grid(10, 10000, 4))) {
      const auto p = convpower_probe(*e.series.gamma, n);
      rows.push_back({{"n", n}, {"value", num(p.value)}, {"scaled", num(p.scaled)}});
    }
    r["convpower"] = rows;
  }
}

using Command = void (*)(Session&, const Experiment&, const RenewalChain&);

const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Command>>>>& commands() {
  static const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Command>>>> table = {
      {"chain", {{"info", chain_info}}},
      {"rates",
       {{"distance", rates_distance},
        {"correlation", rates_correlation},
        {"lemma2", rates_lemma2},
        {"constant", rates_constant},
        {"null", rates_null}}},
      {"spectral", {{"factorize", spectral_factorize}, {"eigen", spectral_eigen}, {"gf", spectral_gf}}},
      {"map",
       {{"simulate", map_simulate},
        {"correlate", map_correlate},
        {"entrance", map_entrance},
        {"kac", map_kac},
        {"frequency", map_frequency}}},
      {"series", {{"probe", series_probe}}},
  };
  return table;
}

int exit_for(ErrorCode code) {
  switch (classify(code)) {
    case ErrorClass::Input:
      return kBadConfig;
    case ErrorClass::Precondition:
      return kPrecondition;
    case ErrorClass::Truncation:
      return kToleranceFailure;
  }
  return kInternal;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Renewal chain and intermittent map experiments", "renewlab"};
  app.set_version_flag("--version", RENEWLAB_VERSION);
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  std::size_t truncation = 0;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides config 'output')");
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides config 'seed')");
  auto* trunc_opt = app.add_option("--truncation", truncation, "state-space truncation N")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", quiet, "no summary on stdout");

  std::vector<std::pair<CLI::App*, std::vector<std::pair<CLI::App*, Command>>>> subs;
  for (const auto& [group, leaves] : commands()) {
    auto* g = app.add_subcommand(group, group + " commands")->require_subcommand(1)->fallthrough();
    subs.push_back({g, {}});
    for (const auto& [name, fn] : leaves) subs.back().second.push_back({g->add_subcommand(name)->fallthrough(), fn});
  }

  std::vector<const char*> argv{"renewlab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kBadConfig;
  }

  std::string command;
  Command fn = nullptr;
  for (const auto& [g, leaves] : subs) {
    for (const auto& [leaf, f] : leaves) {
      if (leaf->parsed()) {
        command = g->get_name() + " " + leaf->get_name();
        fn = f;
      }
    }
  }

  try {
    json cfg;
    {
      std::ifstream f(config_path);
      try {
        cfg = json::parse(f);
      } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
    }
    if (seed_opt->count()) cfg["seed"] = seed;
    if (trunc_opt->count()) cfg["truncation"] = truncation;
    const Experiment e = read_experiment(cfg, fs::path(config_path).parent_path());

    json hashed = cfg;
    hashed.erase("output");
    const std::string hash = hex64(fnv1a(hashed.dump()));
    const fs::path dir = out_opt->count() ? fs::path(out_dir) : fs::path(e.output);
    fs::create_directories(dir);

    const auto chain = build_chain(make_law(e.law), e.truncation);
    Session session(command, e, dir, hash);
    fn(session, e, chain);
    session.finish();
    if (!quiet) out << session.summary().dump(2) << '\n';
    for (const auto& c : session.checks()) {
      if (!c.pass) err << "check failed: " << c.name << " = " << format_double(c.value) << " (limit " << format_double(c.limit) << ")\n";
    }
    return session.passed() ? kOk : kToleranceFailure;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kBadConfig;
  } catch (const MathError& e) {
    err << "error: " << e.what() << '\n';
    return exit_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "output error: " << e.what() << '\n';
    return kBadConfig;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace renewlab::cli
