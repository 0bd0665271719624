#pragma once

// Paired-trial evaluation of planners over several budgets, plus report
// writers.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cryoplan/atlas.hpp"
#include "cryoplan/baselines.hpp"
#include "cryoplan/classifier.hpp"
#include "cryoplan/dqn.hpp"

namespace cryoplan {

// Runs one trial from `start`; must be safe to call concurrently.
using TrialRunner = std::function<Trajectory(Index start, std::uint64_t trial_seed)>;

class Planner {
 public:
  virtual ~Planner() = default;
  virtual std::string name() const = 0;
  virtual std::string classifier() const = 0;
  // Per-(dataset, budget) setup such as plan search or action elimination.
  virtual TrialRunner prepare(const Dataset& ds, double budget) const = 0;
};

std::unique_ptr<Planner> make_dqn_planner(Policy policy, std::string name = "dqn");
std::unique_ptr<Planner> make_greedy_planner(ClassifierModel classifier);
std::unique_ptr<Planner> make_ga_planner(ClassifierModel classifier, GaConfig cfg);
std::unique_ptr<Planner> make_sa_planner(ClassifierModel classifier, SaConfig cfg);
std::unique_ptr<Planner> make_random_planner();

struct EvalConfig {
  std::vector<double> budgets{120.0, 240.0, 360.0, 480.0};
  int trials = 50;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);

// Trial i starts at the same hole for every planner and budget.
std::vector<Index> trial_starts(const Dataset& ds, const EvalConfig& cfg);
std::uint64_t trial_seed(const EvalConfig& cfg, int trial);

struct CurvePoint {
  double elapsed;
  double fraction;  // low visits / visits with elapsed time <= `elapsed`
};

struct BudgetStats {
  double budget = 0.0;
  double mean_lctf = 0.0;
  double std_lctf = 0.0;  // population std over trials
  double mean_visits = 0.0;
  double precision = 0.0;  // pooled low visits / visits
  double mean_objective = 0.0;
  std::vector<std::size_t> lctf;    // per trial
  std::vector<std::size_t> visits;  // per trial
  std::vector<CurvePoint> curve;
  std::vector<Trajectory> trajectories;
};

struct TrialReport {
  std::string policy;
  std::string classifier;
  int trials = 0;
  std::vector<BudgetStats> budgets;
  double wall_seconds = 0.0;  // setup and rollouts, excluding report output

  const BudgetStats& at_budget(double budget) const;
};

// Aggregates finished trajectories for one budget.
BudgetStats summarize(double budget, std::vector<Trajectory> trajectories);

TrialReport run_trials(const Planner& planner, const Dataset& ds, const EvalConfig& cfg);

// One report per planner on identical starts, sorted by mean #lCTF at the
// largest budget, descending (stable).
std::vector<TrialReport> compare(std::span<const Planner* const> planners, const Dataset& ds,
                                 const EvalConfig& cfg);

struct VisitEdge {
  Index patch_a;  // patch_a < patch_b
  Index patch_b;
  std::size_t weight;
};

struct VisitGraph {
  std::vector<VisitEdge> edges;  // sorted by (patch_a, patch_b)
  std::vector<std::pair<Index, std::size_t>> patch_quality;  // patch, low-CTF holes
};

// Undirected counts of consecutive visits that change patch.
VisitGraph export_visit_graph(const Dataset& ds, std::span<const Trajectory> trajectories);

nlohmann::json report_json(const TrialReport& r, const Dataset& ds);
void write_reports(const std::filesystem::path& dir, std::span<const TrialReport> reports, const Dataset& ds,
                   const nlohmann::json& meta = nlohmann::json::object());

// The row renderings used by report.csv and curve.csv.
std::string report_csv(std::span<const TrialReport> reports);
std::string curve_csv(std::span<const TrialReport> reports);
std::string visits_csv(std::span<const TrialReport> reports, const Dataset& ds);

}  // namespace cryoplan
