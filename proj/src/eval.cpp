#include "cryoplan/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>

#include <fmt/format.h>

#include "cryoplan/rng.hpp"

namespace cryoplan {

namespace {

class DqnPlanner final : public Planner {
 public:
  DqnPlanner(Policy policy, std::string name) : policy_(std::make_shared<Policy>(std::move(policy))), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  std::string classifier() const override { return policy_->classifier.spec(); }
  TrialRunner prepare(const Dataset& ds, double budget) const override {
    auto pt = std::make_shared<PredictionTable>(predict_all(ds, policy_->classifier));
    auto ctx = std::make_shared<PlanningContext>(make_context(ds, *pt, policy_->features, policy_->elim,
                                                              policy_->elim.beta_test, budget));
    return [policy = policy_, pt, ctx, budget](Index start, std::uint64_t) {
      return run_policy(*policy, *ctx, start, budget);
    };
  }

 private:
  std::shared_ptr<const Policy> policy_;
  std::string name_;
};

class PlanPlanner : public Planner {
 public:
  explicit PlanPlanner(ClassifierModel classifier) : classifier_(std::move(classifier)) {}
  std::string classifier() const override { return classifier_.spec(); }
  TrialRunner prepare(const Dataset& ds, double budget) const override {
    auto pt = std::make_shared<PredictionTable>(predict_all(ds, classifier_));
    auto plan = std::make_shared<PatchPlan>(search(ds, *pt, budget));
    return [&ds, pt, plan, budget](Index start, std::uint64_t) {
      return execute_plan(*plan, ds, *pt, budget, start);
    };
  }

 protected:
  virtual PatchPlan search(const Dataset& ds, const PredictionTable& pt, double budget) const = 0;
  ClassifierModel classifier_;
};

class GreedyPlanner final : public PlanPlanner {
 public:
  using PlanPlanner::PlanPlanner;
  std::string name() const override { return "greedy"; }

 protected:
  PatchPlan search(const Dataset& ds, const PredictionTable& pt, double) const override {
    return greedy_plan(ds, pt);
  }
};

class GaPlanner final : public PlanPlanner {
 public:
  GaPlanner(ClassifierModel classifier, GaConfig cfg) : PlanPlanner(std::move(classifier)), cfg_(cfg) { cfg_.validate(); }
  std::string name() const override { return "ga"; }

 protected:
  PatchPlan search(const Dataset& ds, const PredictionTable& pt, double budget) const override {
    return ga_optimize(ds, pt, budget, cfg_);
  }

 private:
  GaConfig cfg_;
};

class SaPlanner final : public PlanPlanner {
 public:
  SaPlanner(ClassifierModel classifier, SaConfig cfg) : PlanPlanner(std::move(classifier)), cfg_(cfg) { cfg_.validate(); }
  std::string name() const override { return "sa"; }

 protected:
  PatchPlan search(const Dataset& ds, const PredictionTable& pt, double budget) const override {
    return sa_optimize(ds, pt, budget, cfg_);
  }

 private:
  SaConfig cfg_;
};

class RandomPlanner final : public Planner {
 public:
  std::string name() const override { return "random"; }
  std::string classifier() const override { return "none"; }
  TrialRunner prepare(const Dataset& ds, double budget) const override {
    return [&ds, budget](Index start, std::uint64_t seed) { return random_policy(ds, budget, seed, start); };
  }
};

}  // namespace

std::unique_ptr<Planner> make_dqn_planner(Policy policy, std::string name) {
  return std::make_unique<DqnPlanner>(std::move(policy), std::move(name));
}
std::unique_ptr<Planner> make_greedy_planner(ClassifierModel classifier) {
  return std::make_unique<GreedyPlanner>(std::move(classifier));
}
std::unique_ptr<Planner> make_ga_planner(ClassifierModel classifier, GaConfig cfg) {
  return std::make_unique<GaPlanner>(std::move(classifier), cfg);
}
std::unique_ptr<Planner> make_sa_planner(ClassifierModel classifier, SaConfig cfg) {
  return std::make_unique<SaPlanner>(std::move(classifier), cfg);
}
std::unique_ptr<Planner> make_random_planner() { return std::make_unique<RandomPlanner>(); }

void EvalConfig::validate() const {
  if (budgets.empty()) throw ConfigError("at least one budget is required");
  for (double b : budgets) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("budgets must be finite and >= 0");
  }
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

void to_json(nlohmann::json& j, const EvalConfig& c) {
  j = nlohmann::json{{"budgets", c.budgets}, {"trials", c.trials}, {"seed", c.seed}, {"workers", c.workers}};
}

void from_json(const nlohmann::json& j, EvalConfig& c) {
  EvalConfig out = c;
  for (const auto& [key, v] : j.items()) {
    if (key == "budgets") out.budgets = v.get<std::vector<double>>();
    else if (key == "trials") out.trials = v.get<int>();
    else if (key == "seed") out.seed = v.get<std::uint64_t>();
    else if (key == "workers") out.workers = v.get<int>();
    else throw ConfigError("unknown eval config key '" + key + "'");
  }
  out.validate();
  c = out;
}

std::vector<Index> trial_starts(const Dataset& ds, const EvalConfig& cfg) {
  if (ds.hole_count() == 0) throw ConfigError("evaluation dataset is empty");
  std::vector<Index> starts(static_cast<std::size_t>(cfg.trials));
  for (int i = 0; i < cfg.trials; ++i) {
    const double u = keyed_uniform(cfg.seed, static_cast<std::uint64_t>(i), 0);
    starts[static_cast<std::size_t>(i)] =
        std::min(static_cast<Index>(u * static_cast<double>(ds.hole_count())), static_cast<Index>(ds.hole_count() - 1));
  }
  return starts;
}

std::uint64_t trial_seed(const EvalConfig& cfg, int trial) {
  return keyed_bits(cfg.seed, static_cast<std::uint64_t>(trial), 1);
}

BudgetStats summarize(double budget, std::vector<Trajectory> trajectories) {
  BudgetStats s;
  s.budget = budget;
  const double n = static_cast<double>(trajectories.size());
  std::size_t low_total = 0, visit_total = 0;
  std::map<double, std::pair<std::size_t, std::size_t>> by_time;  // elapsed -> (low, visits)
  for (const auto& t : trajectories) {
    std::size_t low = 0;
    double elapsed = 0.0;
    for (const auto& step : t) {
      elapsed += step.cost;
      auto& slot = by_time[elapsed];
      ++slot.second;
      if (step.low) {
        ++low;
        ++slot.first;
      }
    }
    s.lctf.push_back(low);
    s.visits.push_back(t.size());
    s.mean_objective += objective_value(t);
    low_total += low;
    visit_total += t.size();
  }
  if (n > 0) {
    double sum = 0.0;
    for (auto v : s.lctf) sum += static_cast<double>(v);
    s.mean_lctf = sum / n;
    double sq = 0.0;
    for (auto v : s.lctf) sq += (static_cast<double>(v) - s.mean_lctf) * (static_cast<double>(v) - s.mean_lctf);
    s.std_lctf = std::sqrt(sq / n);
    s.mean_visits = static_cast<double>(visit_total) / n;
    s.mean_objective /= n;
  }
  s.precision = visit_total ? static_cast<double>(low_total) / static_cast<double>(visit_total) : 0.0;
  std::size_t cum_low = 0, cum_visits = 0;
  for (const auto& [elapsed, lv] : by_time) {
    cum_low += lv.first;
    cum_visits += lv.second;
    s.curve.push_back(CurvePoint{elapsed, static_cast<double>(cum_low) / static_cast<double>(cum_visits)});
  }
  s.trajectories = std::move(trajectories);
  return s;
}

const BudgetStats& TrialReport::at_budget(double budget) const {
  for (const auto& b : budgets) {
    if (b.budget == budget) return b;
  }
  throw LookupError(fmt::format("report has no budget {}", budget));
}

TrialReport run_trials(const Planner& planner, const Dataset& ds, const EvalConfig& cfg) {
  cfg.validate();
  const auto starts = trial_starts(ds, cfg);
  TrialReport report;
  report.policy = planner.name();
  report.classifier = planner.classifier();
  report.trials = cfg.trials;
  const auto t0 = std::chrono::steady_clock::now();
  for (double budget : cfg.budgets) {
    const TrialRunner runner = planner.prepare(ds, budget);
    std::vector<Trajectory> trajectories(starts.size());
    const auto workers = static_cast<std::size_t>(std::min<int>(cfg.workers, cfg.trials));
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](std::size_t w) {
      try {
        for (std::size_t i = w; i < starts.size(); i += workers) {
          trajectories[i] = runner(starts[i], trial_seed(cfg, static_cast<int>(i)));
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    report.budgets.push_back(summarize(budget, std::move(trajectories)));
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<TrialReport> compare(std::span<const Planner* const> planners, const Dataset& ds, const EvalConfig& cfg) {
  if (planners.empty()) throw ConfigError("compare needs at least one policy");
  std::vector<TrialReport> out;
  for (const Planner* p : planners) out.push_back(run_trials(*p, ds, cfg));
  const double largest = *std::max_element(cfg.budgets.begin(), cfg.budgets.end());
  std::stable_sort(out.begin(), out.end(), [&](const TrialReport& a, const TrialReport& b) {
    return a.at_budget(largest).mean_lctf > b.at_budget(largest).mean_lctf;
  });
  return out;
}

VisitGraph export_visit_graph(const Dataset& ds, std::span<const Trajectory> trajectories) {
  std::map<std::pair<Index, Index>, std::size_t> counts;
  for (const auto& t : trajectories) {
    for (std::size_t i = 1; i < t.size(); ++i) {
      const Index a = ds.lineage(t[i - 1].hole).patch;
      const Index b = ds.lineage(t[i].hole).patch;
      if (a == b) continue;
      ++counts[{std::min(a, b), std::max(a, b)}];
    }
  }
  VisitGraph g;
  std::vector<std::uint8_t> seen(ds.patch_count(), 0);
  for (const auto& [key, w] : counts) {
    g.edges.push_back(VisitEdge{key.first, key.second, w});
    seen[key.first] = seen[key.second] = 1;
  }
  for (Index p = 0; p < ds.patch_count(); ++p) {
    if (!seen[p]) continue;
    std::size_t low = 0;
    for (Index h : ds.holes_of_patch(p)) low += is_low(ds.hole(h)) ? 1 : 0;
    g.patch_quality.emplace_back(p, low);
  }
  return g;
}

nlohmann::json report_json(const TrialReport& r, const Dataset& ds) {
  nlohmann::json budgets = nlohmann::json::array();
  for (const auto& b : r.budgets) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& c : b.curve) curve.push_back({c.elapsed, c.fraction});
    const auto graph = export_visit_graph(ds, b.trajectories);
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : graph.edges) {
      edges.push_back({{"patch_a", ds.patches()[e.patch_a].id}, {"patch_b", ds.patches()[e.patch_b].id}, {"weight", e.weight}});
    }
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& [p, low] : graph.patch_quality) nodes.push_back({{"patch", ds.patches()[p].id}, {"low_holes", low}});
    budgets.push_back({{"budget", b.budget},
                       {"mean_lctf", b.mean_lctf},
                       {"std_lctf", b.std_lctf},
                       {"mean_visits", b.mean_visits},
                       {"precision", b.precision},
                       {"mean_objective", b.mean_objective},
                       {"lctf", b.lctf},
                       {"visits", b.visits},
                       {"curve", curve},
                       {"visit_graph", {{"edges", edges}, {"patches", nodes}}}});
  }
  return {{"policy", r.policy},
          {"classifier", r.classifier},
          {"trials", r.trials},
          {"wall_seconds", r.wall_seconds},
          {"budgets", budgets}};
}

std::string report_csv(std::span<const TrialReport> reports) {
  std::string out = "policy,classifier,budget,trials,mean_lctf,std_lctf,mean_visits,precision,mean_objective,wall_seconds\n";
  for (const auto& r : reports) {
    for (const auto& b : r.budgets) {
      out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.policy, r.classifier, b.budget, r.trials, b.mean_lctf,
                         b.std_lctf, b.mean_visits, b.precision, b.mean_objective, r.wall_seconds);
    }
  }
  return out;
}

std::string curve_csv(std::span<const TrialReport> reports) {
  std::string out = "policy,budget,elapsed,fraction\n";
  for (const auto& r : reports) {
    for (const auto& b : r.budgets) {
      for (const auto& c : b.curve) out += fmt::format("{},{},{},{}\n", r.policy, b.budget, c.elapsed, c.fraction);
    }
  }
  return out;
}

std::string visits_csv(std::span<const TrialReport> reports, const Dataset& ds) {
  std::string out = "policy,budget,patch_a,patch_b,weight\n";
  for (const auto& r : reports) {
    for (const auto& b : r.budgets) {
      for (const auto& e : export_visit_graph(ds, b.trajectories).edges) {
        out += fmt::format("{},{},{},{},{}\n", r.policy, b.budget, ds.patches()[e.patch_a].id,
                           ds.patches()[e.patch_b].id, e.weight);
      }
    }
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace

void write_reports(const std::filesystem::path& dir, std::span<const TrialReport> reports, const Dataset& ds,
                   const nlohmann::json& meta) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : reports) rows.push_back(report_json(r, ds));
  nlohmann::json doc = meta;
  doc["reports"] = rows;
  write_text(dir / "report.json", doc.dump(2) + "\n");
  write_text(dir / "report.csv", report_csv(reports));
  write_text(dir / "curve.csv", curve_csv(reports));
  write_text(dir / "visits.csv", visits_csv(reports, ds));
}

}  // namespace cryoplan
