// SPDX-License-Identifier: Apache-2.0
#include "amem/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "amem/errors.hpp"
#include "amem/theory.hpp"
#include "json.hpp"

namespace amem {

using nlohmann::json;

double delta_gap(const ProbabilityTable& table) {
  const Vector d = table.cond.diagonal();
  return d.maxCoeff() - d.minCoeff();
}

std::pair<long, long> onset_range(const Trajectory& traj) {
  if (traj.onset_first.empty()) return {-1, -1};
  for (size_t g = 0; g < traj.onset_last.size(); ++g)
    if (traj.onset_first[g] < 0 || traj.onset_last[g] < 0) return {-1, -1};
  return {*std::min_element(traj.onset_first.begin(), traj.onset_first.end()),
          *std::max_element(traj.onset_last.begin(), traj.onset_last.end())};
}

std::vector<std::optional<double>> theory_overlay(const RunConfig& cfg, const Trajectory& traj) {
  const KnowledgeSpec& spec = cfg.spec;
  const int K = spec.K();
  const double eta = cfg.opt.eta;
  std::vector<std::optional<double>> out(traj.records.size());

  if (cfg.opt.kind == OptimizerKind::GD) {
    std::vector<double> delta(static_cast<size_t>(spec.M), 0.0);
    long t = 0;
    for (size_t r = 0; r < traj.records.size(); ++r) {
      for (; t < traj.records[r].step; ++t)
        for (int J = 0; J < spec.M; ++J)
          delta[J] = gd_margin_step(delta[J], eta, spec.group_freq[J] / spec.C, K, spec.alpha);
      double total = 0.0;
      for (int J = 0; J < spec.M; ++J) total += spec.group_freq[J] * margin_subtask_loss(delta[J], K, spec.alpha);
      out[r] = total;
    }
  } else if (cfg.opt.kind == OptimizerKind::Muon) {
    if (spec.alpha == 0.0) {
      for (size_t r = 0; r < traj.records.size(); ++r)
        if (traj.records[r].step > 0) out[r] = noiseless_muon_total(K, spec.M, eta, traj.records[r].step).value;
    } else if (spec.C > 2 * spec.M + 1) {
      const double t_hi = muon_phase_window(eta, K, spec.M, spec.C, spec.alpha).hi;
      const double ceiling = optimal_loss(spec.alpha, K) + eta * eta;
      for (size_t r = 0; r < traj.records.size(); ++r)
        if (traj.records[r].step > t_hi) out[r] = ceiling;
    }
  }
  return out;
}

ExportFormat parse_format(const std::string& name) {
  if (name == "csv") return ExportFormat::Csv;
  if (name == "json") return ExportFormat::Json;
  throw InvalidArgument("unknown format '" + name + "' (expected csv or json)");
}

std::string to_string(ExportFormat f) { return f == ExportFormat::Csv ? "csv" : "json"; }

ExperimentResult run_experiment(const RunConfig& cfg, const Probes& probes, bool with_overlay,
                                const std::optional<std::string>& output, ExportFormat format) {
  ExperimentResult res;
  res.trajectory = run(cfg, probes);
  if (with_overlay) res.overlay = theory_overlay(cfg, res.trajectory);
  if (output) export_trajectory(res.trajectory, cfg.spec.M, *output, format, res.overlay);
  return res;
}

namespace {

std::vector<double> geometric(double start, double stop, int per_decade) {
  std::vector<double> g;
  for (int k = 0;; ++k) {
    const double v = start * std::pow(10.0, static_cast<double>(k) / per_decade);
    if (v > stop * (1.0 + 1e-12)) break;
    g.push_back(v);
  }
  return g;
}

}  // namespace

std::vector<double> default_muon_grid(long T, const KnowledgeSpec& spec) {
  const double center = muon_budget_lr(T, spec.K(), spec.M, spec.C, spec.alpha);
  std::vector<double> g;
  for (int k = -9; k <= 9; ++k) g.push_back(center * std::pow(10.0, k / 9.0));
  return g;
}

std::vector<double> default_gd_grid(const KnowledgeSpec& spec) {
  std::vector<double> g = geometric(0.05, 0.8, 9);
  const double p1 = spec.item_freq(0);
  for (double& v : g) v /= p1;
  return g;
}

SweepResult sweep_lr(const SweepConfig& cfg) {
  if (cfg.budgets.empty()) throw InvalidArgument("sweep_lr: no budgets");
  if (cfg.final_window < 1) throw InvalidArgument("sweep_lr: final_window must be >= 1");
  for (long T : cfg.budgets)
    if (T < cfg.final_window) throw InvalidArgument("sweep_lr: budget shorter than final_window");

  std::vector<SweepCell> cells;
  for (long T : cfg.budgets) {
    std::vector<double> grid = cfg.eta_grid;
    if (grid.empty()) {
      switch (cfg.base.opt.kind) {
        case OptimizerKind::Muon: grid = default_muon_grid(T, cfg.base.spec); break;
        case OptimizerKind::GD: grid = default_gd_grid(cfg.base.spec); break;
        default: throw InvalidArgument("sweep_lr: no default grid for " + to_string(cfg.base.opt.kind));
      }
    }
    for (double eta : grid) cells.push_back({T, eta, 0.0});
  }
  if (cells.empty()) throw InvalidArgument("sweep_lr: empty learning-rate grid");

  auto evaluate_cell = [&](SweepCell& cell) {
    RunConfig rc = cfg.base;
    rc.steps = cell.budget;
    rc.record_every = 1;
    rc.opt.eta = cell.eta;
    const Trajectory tr = run(rc);
    double s = 0.0;
    for (int k = 0; k < cfg.final_window; ++k) s += tr.records[tr.records.size() - 1 - k].total_loss;
    cell.final_loss = s / cfg.final_window;
  };

  const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(cells.size())));
  if (jobs == 1) {
    for (SweepCell& c : cells) evaluate_cell(c);
  } else {
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (size_t i = next++; i < cells.size(); i = next++) {
          try {
            evaluate_cell(cells[i]);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  }

  SweepResult res;
  res.kind = cfg.base.opt.kind;
  res.l_star = optimal_loss(cfg.base.spec.alpha, cfg.base.spec.K());
  res.final_window = cfg.final_window;
  res.cells = cells;
  for (long T : cfg.budgets) {
    SweepEntry e{T, 0.0, std::numeric_limits<double>::infinity()};
    for (const SweepCell& c : cells)
      if (c.budget == T && c.final_loss < e.min_loss) {
        e.min_loss = c.final_loss;
        e.best_eta = c.eta;
      }
    res.entries.push_back(e);
  }
  return res;
}

FitResult fit_power_law(const std::vector<std::pair<double, double>>& points, double l_star) {
  const double floor = 10.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(l_star));
  std::vector<double> xs, ys;
  for (const auto& [T, loss] : points) {
    if (!(T > 0.0)) throw InvalidArgument("fit_power_law: budgets must be positive");
    const double ex = loss - l_star;
    if (!(ex > 0.0)) throw InvalidArgument("excess risk non-positive");
    if (ex <= floor) continue;
    xs.push_back(std::log(T));
    ys.push_back(std::log(ex));
  }
  if (xs.size() < 3) throw InvalidArgument("fit_power_law: need at least 3 points");

  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw InvalidArgument("fit_power_law: budgets must not all be equal");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (intercept + slope * xs[i]);
    ss += r * r;
  }
  FitResult f;
  f.gamma = -slope;
  f.a = std::exp(intercept);
  f.residual = std::sqrt(ss / n);
  f.t_min = std::exp(*std::min_element(xs.begin(), xs.end()));
  f.t_max = std::exp(*std::max_element(xs.begin(), xs.end()));
  f.points = static_cast<int>(xs.size());
  return f;
}

namespace {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  std::filesystem::path out = p.parent_path() / (p.stem().string() + suffix + p.extension().string());
  return out.string();
}

}  // namespace

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing: " + std::strerror(errno));
  f << text;
  f.flush();
  if (!f) throw IoError("write to '" + path + "' failed: " + std::strerror(errno));
}

std::string trajectory_csv(const Trajectory& traj, int M) {
  std::ostringstream os;
  os << "step,total_loss,excess_risk,delta_gap,msgn_inf_dev,structure_dev";
  for (int g = 1; g <= M; ++g) os << ",group_loss_" << g;
  os << "\n";
  for (const TrajectoryRecord& r : traj.records) {
    os << r.step << ',' << fmt17(r.total_loss) << ',' << fmt17(r.excess_risk) << ',' << fmt17(r.delta_gap) << ',';
    if (r.msgn_inf_dev) os << fmt17(*r.msgn_inf_dev);
    os << ',';
    if (r.structure_dev) os << fmt17(*r.structure_dev);
    for (double g : r.group_losses) os << ',' << fmt17(g);
    os << "\n";
  }
  return os.str();
}

std::string trajectory_json(const Trajectory& traj, const std::vector<std::optional<double>>& overlay) {
  json j;
  j["fingerprint"] = traj.fingerprint;
  j["onset_first"] = traj.onset_first;
  j["onset_last"] = traj.onset_last;
  json recs = json::array();
  for (size_t i = 0; i < traj.records.size(); ++i) {
    const TrajectoryRecord& r = traj.records[i];
    json o;
    o["step"] = r.step;
    o["total_loss"] = r.total_loss;
    o["excess_risk"] = r.excess_risk;
    o["group_losses"] = r.group_losses;
    o["delta_gap"] = r.delta_gap;
    o["msgn_inf_dev"] = optional_json(r.msgn_inf_dev);
    o["structure_dev"] = optional_json(r.structure_dev);
    if (!overlay.empty()) o["theory_total_loss"] = optional_json(overlay[i]);
    recs.push_back(std::move(o));
  }
  j["records"] = std::move(recs);
  return j.dump(1) + "\n";
}

void export_trajectory(const Trajectory& traj, int M, const std::string& path, ExportFormat format,
                       const std::vector<std::optional<double>>& overlay) {
  if (format == ExportFormat::Json) {
    write_text(path, trajectory_json(traj, overlay));
    return;
  }
  write_text(path, trajectory_csv(traj, M));
  if (!overlay.empty()) {
    std::ostringstream os;
    os << "step,theory_total_loss\n";
    for (size_t i = 0; i < traj.records.size(); ++i) {
      os << traj.records[i].step << ',';
      if (overlay[i]) os << fmt17(*overlay[i]);
      os << "\n";
    }
    write_text(with_suffix(path, "_theory"), os.str());
  }
}

Trajectory import_trajectory_json(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading: " + std::strerror(errno));
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw InvalidArgument("'" + path + "': " + e.what());
  }
  Trajectory t;
  t.fingerprint = j.at("fingerprint").get<std::string>();
  t.onset_first = j.at("onset_first").get<std::vector<long>>();
  t.onset_last = j.at("onset_last").get<std::vector<long>>();
  for (const json& o : j.at("records")) {
    TrajectoryRecord r;
    r.step = o.at("step").get<long>();
    r.total_loss = o.at("total_loss").get<double>();
    r.excess_risk = o.at("excess_risk").get<double>();
    r.group_losses = o.at("group_losses").get<std::vector<double>>();
    r.delta_gap = o.at("delta_gap").get<double>();
    r.msgn_inf_dev = optional_from(o.at("msgn_inf_dev"));
    r.structure_dev = optional_from(o.at("structure_dev"));
    t.records.push_back(std::move(r));
  }
  return t;
}

void export_sweeps(const std::vector<SweepResult>& sweeps, const std::vector<FitResult>& fits,
                   const std::string& path, ExportFormat format) {
  if (format == ExportFormat::Json) {
    json j;
    j["sweeps"] = json::array();
    for (const SweepResult& s : sweeps) {
      json o;
      o["optimizer"] = to_string(s.kind);
      o["l_star"] = s.l_star;
      o["final_window"] = s.final_window;
      o["entries"] = json::array();
      for (const SweepEntry& e : s.entries)
        o["entries"].push_back({{"budget", e.budget}, {"best_eta", e.best_eta}, {"min_loss", e.min_loss}});
      o["cells"] = json::array();
      for (const SweepCell& c : s.cells)
        o["cells"].push_back({{"budget", c.budget}, {"eta", c.eta}, {"final_loss", c.final_loss}});
      j["sweeps"].push_back(std::move(o));
    }
    j["fits"] = json::array();
    for (size_t i = 0; i < fits.size(); ++i) {
      const FitResult& f = fits[i];
      j["fits"].push_back({{"optimizer", i < sweeps.size() ? to_string(sweeps[i].kind) : ""},
                           {"a", f.a},
                           {"gamma", f.gamma},
                           {"residual", f.residual},
                           {"window", {f.t_min, f.t_max}},
                           {"points", f.points}});
    }
    write_text(path, j.dump(1) + "\n");
    return;
  }
  std::ostringstream os;
  os << "optimizer,budget,best_eta,min_loss,excess_risk\n";
  for (const SweepResult& s : sweeps)
    for (const SweepEntry& e : s.entries)
      os << to_string(s.kind) << ',' << e.budget << ',' << fmt17(e.best_eta) << ',' << fmt17(e.min_loss) << ','
         << fmt17(e.min_loss - s.l_star) << "\n";
  write_text(path, os.str());
  if (!fits.empty()) {
    std::ostringstream fo;
    fo << "optimizer,a,gamma,residual,t_min,t_max,points\n";
    for (size_t i = 0; i < fits.size(); ++i) {
      const FitResult& f = fits[i];
      fo << (i < sweeps.size() ? to_string(sweeps[i].kind) : "") << ',' << fmt17(f.a) << ',' << fmt17(f.gamma) << ','
         << fmt17(f.residual) << ',' << fmt17(f.t_min) << ',' << fmt17(f.t_max) << ',' << f.points << "\n";
    }
    write_text(with_suffix(path, "_fit"), fo.str());
  }
}

}  // namespace amem
