#pragma once

// Non-learning planners: greedy ranking, uniform random, and patch-order
// search with a genetic algorithm or simulated annealing.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "cryoplan/atlas.hpp"
#include "cryoplan/classifier.hpp"

namespace cryoplan {

// Ordered, duplicate-free patch indices.
using PatchPlan = std::vector<Index>;

void validate_plan(const Dataset& ds, std::span<const Index> plan);

// Walks the plan, visiting each patch's predicted-low holes in ascending id
// order and stopping at the first visit that does not fit. Without a start,
// the episode begins at the first such hole, which is then visited itself.
Trajectory execute_plan(std::span<const Index> plan, const Dataset& ds, const PredictionTable& pt,
                        double budget, std::optional<Index> start = std::nullopt,
                        const RewardTable& rewards = {});

// Same ordering as rank_patches.
PatchPlan greedy_plan(const Dataset& ds, const PredictionTable& pt);

// Uniform choice among legal actions at every step.
Trajectory random_policy(const Dataset& ds, double budget, std::uint64_t seed,
                         std::optional<Index> start = std::nullopt, const RewardTable& rewards = {});

// Which labels decide the indicator term of the fitness. Predicted keeps the
// search blind to ground truth, like every other planner.
enum class FitnessLabels { Predicted, Truth };

struct FitnessSpec {
  FitnessLabels labels = FitnessLabels::Predicted;
  PenaltyCurve curve{};
};

// Objective of the start-agnostic execution of `plan`.
double plan_fitness(std::span<const Index> plan, const Dataset& ds, const PredictionTable& pt,
                    double budget, const FitnessSpec& spec = {});

// Patches holding at least one predicted-low hole, ascending; the search
// space of GA and SA (other patches are skipped by execute_plan anyway).
std::vector<Index> plannable_patches(const Dataset& ds, const PredictionTable& pt);

struct GaConfig {
  int generations = 40;
  int population = 10;
  double mutation_rate = 0.05;  // per gene, swap
  int tournament = 3;
  int elitism = 1;
  std::uint64_t seed = 0;
  FitnessSpec fitness{};

  void validate() const;
};

struct SaConfig {
  std::optional<double> t_max;  // default sqrt(#patches searched)
  double t_min = 1e-8;
  double rate = 0.995;
  std::uint64_t seed = 0;
  FitnessSpec fitness{};

  void validate() const;
};

void to_json(nlohmann::json& j, const GaConfig& c);
void from_json(const nlohmann::json& j, GaConfig& c);
void to_json(nlohmann::json& j, const SaConfig& c);
void from_json(const nlohmann::json& j, SaConfig& c);

struct SaStep {
  double temperature;
  double delta;  // candidate minus current energy
  bool accepted;
};

struct SearchResult {
  PatchPlan plan;
  double fitness = 0.0;
  std::vector<double> best_history;  // best-ever after each generation/iteration
  std::vector<SaStep> trace;         // SA only
};

// Genes are plannable_patches(); a dataset with fewer than two of them yields
// that list unchanged.
SearchResult ga_search(const Dataset& ds, const PredictionTable& pt, double budget, const GaConfig& cfg);
SearchResult sa_search(const Dataset& ds, const PredictionTable& pt, double budget, const SaConfig& cfg);

// Search restricted to an explicit gene list (used by small-instance oracles).
SearchResult ga_search(std::span<const Index> genes, const Dataset& ds, const PredictionTable& pt,
                       double budget, const GaConfig& cfg);
SearchResult sa_search(std::span<const Index> genes, const Dataset& ds, const PredictionTable& pt,
                       double budget, const SaConfig& cfg);

inline PatchPlan ga_optimize(const Dataset& ds, const PredictionTable& pt, double budget, const GaConfig& cfg) {
  return ga_search(ds, pt, budget, cfg).plan;
}
inline PatchPlan sa_optimize(const Dataset& ds, const PredictionTable& pt, double budget, const SaConfig& cfg) {
  return sa_search(ds, pt, budget, cfg).plan;
}

// Single-point crossover: a[0, cut) followed by b's remaining genes in b's
// order.
PatchPlan crossover(std::span<const Index> a, std::span<const Index> b, std::size_t cut);

}  // namespace cryoplan
