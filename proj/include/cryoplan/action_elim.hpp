#pragma once

// Restricts the action space to the holes of a ranked-patch prefix that
// covers beta times the best-case number of low-CTF holes within the budget.

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "cryoplan/atlas.hpp"
#include "cryoplan/classifier.hpp"

namespace cryoplan {

struct ElimConfig {
  bool enabled = true;
  double beta_train = 2.5;
  double beta_test = 1.5;

  void validate() const;
  friend bool operator==(const ElimConfig&, const ElimConfig&) = default;
};

void to_json(nlohmann::json& j, const ElimConfig& c);
void from_json(const nlohmann::json& j, ElimConfig& c);

// Patches sorted by their grid's predicted-low total (desc), then their own
// predicted-low count (desc), then ascending id.
std::vector<Index> rank_patches(const Dataset& ds, const PredictionTable& pt);

// Holes reachable within `budget` when every hole of every ranked patch is
// visited in order, the first visit charged as a same-patch move.
std::size_t max_lctf(const Dataset& ds, std::span<const Index> ranked, double budget);

struct Elimination {
  std::vector<Index> patches;  // selected prefix, in rank order
  std::vector<Index> holes;    // all holes of those patches, ascending
  std::size_t n_max = 0;
  bool fallback = false;       // no predicted-low hole anywhere: everything kept
};

Elimination eliminate_detail(const Dataset& ds, const PredictionTable& pt, double budget, double beta);

// Valid hole set (ascending indices).
std::vector<Index> eliminate(const Dataset& ds, const PredictionTable& pt, double budget, double beta);

}  // namespace cryoplan
