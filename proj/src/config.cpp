// SPDX-License-Identifier: Apache-2.0
#include "amem/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "amem/errors.hpp"
#include "json.hpp"

#ifndef AMEM_PRESET_DIR
#define AMEM_PRESET_DIR "presets"
#endif

namespace amem {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw InvalidArgument(where + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw InvalidArgument("unknown key '" + key + "' in " + where);
}

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument("key '" + key + "' has the wrong type");
  }
}

long get_integer(const json& j, const std::string& key) {
  if (!j.is_number_integer()) throw InvalidArgument("key '" + key + "' must be an integer");
  return j.get<long>();
}

int get_int(const json& j, const std::string& key) {
  const long v = get_integer(j, key);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw InvalidArgument("key '" + key + "' out of range");
  return static_cast<int>(v);
}

double get_real(const json& j, const std::string& key) {
  if (!j.is_number()) throw InvalidArgument("key '" + key + "' must be a number");
  return j.get<double>();
}

Spectrum parse_spectrum(const json& j) {
  if (!j.is_object() || !j.contains("type")) throw InvalidArgument("spectrum: 'type' is required");
  const std::string type = get_as<std::string>(j.at("type"), "spectrum.type");
  if (type == "explicit") {
    reject_unknown(j, {"type", "freqs"}, "spectrum");
    if (!j.contains("freqs")) throw InvalidArgument("spectrum: explicit spectrum needs 'freqs'");
    return ExplicitSpectrum{get_as<std::vector<double>>(j.at("freqs"), "spectrum.freqs")};
  }
  if (type == "power_law") {
    reject_unknown(j, {"type", "beta"}, "spectrum");
    if (!j.contains("beta")) throw InvalidArgument("spectrum: power_law spectrum needs 'beta'");
    return PowerLawSpectrum{get_real(j.at("beta"), "spectrum.beta")};
  }
  throw InvalidArgument("spectrum: unknown type '" + type + "' (expected explicit or power_law)");
}

SignMethod parse_sign_method(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "exact") return ExactSign{};
    if (s == "newton_schulz") return NewtonSchulz{};
    throw InvalidArgument("sign_method: unknown method '" + s + "'");
  }
  reject_unknown(j, {"type", "iterations", "coefficients"}, "optimizer.sign_method");
  const std::string type = j.contains("type") ? get_as<std::string>(j.at("type"), "sign_method.type") : "";
  if (type == "exact") return ExactSign{};
  if (type != "newton_schulz") throw InvalidArgument("sign_method: type must be exact or newton_schulz");
  NewtonSchulz ns;
  if (j.contains("iterations")) ns.iterations = get_int(j.at("iterations"), "sign_method.iterations");
  if (j.contains("coefficients")) {
    const json& c = j.at("coefficients");
    if (c.is_string()) {
      const std::string name = c.get<std::string>();
      if (name == "convergent") ns.coeffs = NewtonSchulz::kConvergent;
      else if (name == "muon") ns.coeffs = NewtonSchulz::kMuon;
      else throw InvalidArgument("sign_method: unknown coefficients '" + name + "'");
    } else {
      const auto v = get_as<std::vector<double>>(c, "sign_method.coefficients");
      if (v.size() != 3) throw InvalidArgument("sign_method: coefficients need exactly 3 values");
      ns.coeffs = {v[0], v[1], v[2]};
    }
  }
  return ns;
}

json sign_method_json(const SignMethod& m) {
  if (std::holds_alternative<ExactSign>(m)) return "exact";
  const NewtonSchulz& ns = std::get<NewtonSchulz>(m);
  json c;
  if (ns.coeffs == NewtonSchulz::kConvergent) c = "convergent";
  else if (ns.coeffs == NewtonSchulz::kMuon) c = "muon";
  else c = {ns.coeffs[0], ns.coeffs[1], ns.coeffs[2]};
  return {{"type", "newton_schulz"}, {"iterations", ns.iterations}, {"coefficients", c}};
}

void parse_optimizer_obj(const json& j, OptimizerConfig& opt) {
  reject_unknown(j, {"kind", "eta", "sign_method"}, "optimizer");
  if (j.contains("kind")) opt.kind = parse_optimizer(get_as<std::string>(j.at("kind"), "optimizer.kind"));
  if (j.contains("eta")) opt.eta = get_real(j.at("eta"), "optimizer.eta");
  if (j.contains("sign_method")) opt.sign_method = parse_sign_method(j.at("sign_method"));
}

void parse_sweep_obj(const json& j, SweepSettings& s) {
  reject_unknown(j, {"budgets", "eta_grid", "final_window", "optimizers"}, "sweep");
  if (j.contains("budgets")) {
    s.budgets.clear();
    for (const json& b : j.at("budgets")) s.budgets.push_back(get_integer(b, "sweep.budgets"));
  }
  if (j.contains("eta_grid")) s.eta_grid = get_as<std::vector<double>>(j.at("eta_grid"), "sweep.eta_grid");
  if (j.contains("final_window")) s.final_window = get_int(j.at("final_window"), "sweep.final_window");
  if (j.contains("optimizers")) {
    s.optimizers.clear();
    for (const json& o : j.at("optimizers")) s.optimizers.push_back(parse_optimizer(get_as<std::string>(o, "sweep.optimizers")));
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "': " + std::strerror(errno));
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

RunConfig ExperimentConfig::run_config() const {
  RunConfig rc;
  rc.spec = build_spec(M, C, spectrum, alpha);
  rc.seed = seed;
  rc.opt = optimizer;
  rc.steps = steps;
  rc.record_every = record_every;
  rc.engine = engine;
  rc.identity_basis = identity_basis;
  return rc;
}

ExperimentConfig parse_config(const std::string& json_text, const ExperimentConfig& base) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j,
                 {"K", "M", "C", "spectrum", "alpha", "optimizer", "steps", "seed", "probes", "output", "format",
                  "record_every", "engine", "basis", "theory_overlay", "sweep", "description"},
                 "config");
  ExperimentConfig c = base;
  if (j.contains("M")) c.M = get_int(j.at("M"), "M");
  if (j.contains("C")) c.C = get_int(j.at("C"), "C");
  if (j.contains("K")) {
    const int K = get_int(j.at("K"), "K");
    if (j.contains("C") && !j.contains("M")) {
      if (c.C <= 0 || K % c.C != 0) throw InvalidArgument("K must be a multiple of C");
      c.M = K / c.C;
    } else {
      if (c.M <= 0 || K % c.M != 0) throw InvalidArgument("K must be a multiple of M");
      if (j.contains("C") && c.C != K / c.M) throw InvalidArgument("K, M and C are inconsistent");
      c.C = K / c.M;
    }
  }
  if (j.contains("spectrum")) c.spectrum = parse_spectrum(j.at("spectrum"));
  if (j.contains("alpha")) c.alpha = get_real(j.at("alpha"), "alpha");
  if (j.contains("optimizer")) parse_optimizer_obj(j.at("optimizer"), c.optimizer);
  if (j.contains("steps")) c.steps = get_integer(j.at("steps"), "steps");
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_unsigned()) throw InvalidArgument("key 'seed' must be a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (j.contains("probes")) {
    const json& p = j.at("probes");
    if (p.is_string()) {
      c.probes = parse_probes(p.get<std::string>());
    } else {
      std::string joined;
      for (const json& e : p) joined += (joined.empty() ? "" : ",") + get_as<std::string>(e, "probes");
      c.probes = parse_probes(joined);
    }
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    if (o.is_null()) c.output.reset();
    else c.output = get_as<std::string>(o, "output");
  }
  if (j.contains("format")) c.format = parse_format(get_as<std::string>(j.at("format"), "format"));
  if (j.contains("record_every")) c.record_every = get_integer(j.at("record_every"), "record_every");
  if (j.contains("engine")) c.engine = parse_engine(get_as<std::string>(j.at("engine"), "engine"));
  if (j.contains("basis")) {
    const std::string b = get_as<std::string>(j.at("basis"), "basis");
    if (b != "random" && b != "identity") throw InvalidArgument("basis must be random or identity");
    c.identity_basis = b == "identity";
  }
  if (j.contains("theory_overlay")) c.theory_overlay = get_as<bool>(j.at("theory_overlay"), "theory_overlay");
  if (j.contains("sweep")) parse_sweep_obj(j.at("sweep"), c.sweep);
  return c;
}

ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base) {
  return parse_config(read_file(path), base);
}

std::string to_json(const ExperimentConfig& c) {
  json j;
  j["M"] = c.M;
  j["C"] = c.C;
  if (const auto* e = std::get_if<ExplicitSpectrum>(&c.spectrum))
    j["spectrum"] = {{"type", "explicit"}, {"freqs", e->freqs}};
  else
    j["spectrum"] = {{"type", "power_law"}, {"beta", std::get<PowerLawSpectrum>(c.spectrum).beta}};
  j["alpha"] = c.alpha;
  j["optimizer"] = {{"kind", to_string(c.optimizer.kind)},
                    {"eta", c.optimizer.eta},
                    {"sign_method", sign_method_json(c.optimizer.sign_method)}};
  j["steps"] = c.steps;
  j["seed"] = c.seed;
  j["probes"] = probe_names(c.probes);
  j["output"] = c.output ? json(*c.output) : json(nullptr);
  j["format"] = to_string(c.format);
  j["record_every"] = c.record_every;
  j["engine"] = to_string(c.engine);
  j["basis"] = c.identity_basis ? "identity" : "random";
  j["theory_overlay"] = c.theory_overlay;
  json sw;
  sw["budgets"] = c.sweep.budgets;
  sw["eta_grid"] = c.sweep.eta_grid;
  sw["final_window"] = c.sweep.final_window;
  sw["optimizers"] = json::array();
  for (OptimizerKind k : c.sweep.optimizers) sw["optimizers"].push_back(to_string(k));
  j["sweep"] = std::move(sw);
  return j.dump(2) + "\n";
}

std::string preset_directory() {
  // Installed copies (the Python wheel) point this at their bundled presets.
  if (const char* dir = std::getenv("AMEM_PRESET_DIR"); dir && *dir) return dir;
  return AMEM_PRESET_DIR;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(preset_directory(), ec))
    if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

ExperimentConfig load_preset(const std::string& name, const ExperimentConfig& base) {
  const std::filesystem::path path = std::filesystem::path(preset_directory()) / (name + ".json");
  if (!std::filesystem::exists(path)) {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw InvalidArgument("unknown preset '" + name + "' (available: " + known + ")");
  }
  return load_config(path.string(), base);
}

std::vector<long> default_budgets(const ExperimentConfig& cfg) {
  double scale = static_cast<double>(cfg.steps);
  if (const auto* p = std::get_if<PowerLawSpectrum>(&cfg.spectrum)) scale = std::pow(cfg.M, p->beta);
  std::vector<long> out;
  for (double f : {0.25, 0.5, 0.75, 1.0}) out.push_back(std::max(1L, std::lround(f * scale)));
  return out;
}

Probes parse_probes(const std::string& list) {
  Probes p;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty() || item == "losses" || item == "delta_gap") continue;
    if (item == "msgn_deviation") p.msgn_deviation = true;
    else if (item == "weight_structure") p.weight_structure = true;
    else if (item == "all") p.msgn_deviation = p.weight_structure = true;
    else throw InvalidArgument("unknown probe '" + item + "'");
  }
  return p;
}

std::vector<std::string> probe_names(const Probes& p) {
  std::vector<std::string> out{"losses", "delta_gap"};
  if (p.msgn_deviation) out.push_back("msgn_deviation");
  if (p.weight_structure) out.push_back("weight_structure");
  return out;
}

}  // namespace amem
