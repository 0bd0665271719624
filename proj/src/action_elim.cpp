#include "cryoplan/action_elim.hpp"

#include <algorithm>
#include <numeric>

namespace cryoplan {

void ElimConfig::validate() const {
  if (!(beta_train > 0.0) || !(beta_test > 0.0)) throw ConfigError("elimination beta must be > 0");
}

void to_json(nlohmann::json& j, const ElimConfig& c) {
  j = nlohmann::json{{"enabled", c.enabled}, {"beta_train", c.beta_train}, {"beta_test", c.beta_test}};
}

void from_json(const nlohmann::json& j, ElimConfig& c) {
  c.enabled = j.at("enabled").get<bool>();
  c.beta_train = j.at("beta_train").get<double>();
  c.beta_test = j.at("beta_test").get<double>();
  c.validate();
}

std::vector<Index> rank_patches(const Dataset& ds, const PredictionTable& pt) {
  const QualityCounts qc(ds, pt);
  std::vector<Index> order(ds.patch_count());
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const int ga = qc.grid(ds.grid_of_patch(a));
    const int gb = qc.grid(ds.grid_of_patch(b));
    if (ga != gb) return ga > gb;
    if (qc.patch(a) != qc.patch(b)) return qc.patch(a) > qc.patch(b);
    return a < b;
  });
  return order;
}

std::size_t max_lctf(const Dataset& ds, std::span<const Index> ranked, double budget) {
  std::size_t count = 0;
  double elapsed = 0.0;
  std::optional<Index> prev;
  for (Index p : ranked) {
    for (Index h : ds.holes_of_patch(p)) {
      const double cost = prev ? move_cost(move_class(ds, *prev, h)) : move_cost(MoveClass::SamePatch);
      if (elapsed + cost > budget + kBudgetSlack) return count;
      elapsed += cost;
      prev = h;
      ++count;
    }
  }
  return count;
}

Elimination eliminate_detail(const Dataset& ds, const PredictionTable& pt, double budget, double beta) {
  if (!(beta > 0.0)) throw ConfigError("elimination beta must be > 0");
  Elimination out;
  const auto ranked = rank_patches(ds, pt);
  out.n_max = max_lctf(ds, ranked, budget);

  const QualityCounts qc(ds, pt);
  long total_low = 0;
  for (Index p = 0; p < ds.patch_count(); ++p) total_low += qc.patch(p);

  if (total_low == 0) {
    out.fallback = true;
    out.patches = ranked;
  } else {
    const double target = std::min(beta * static_cast<double>(out.n_max), static_cast<double>(total_low));
    long covered = 0;
    for (Index p : ranked) {
      out.patches.push_back(p);
      covered += qc.patch(p);
      if (static_cast<double>(covered) >= target) break;
    }
  }
  for (Index p : out.patches) {
    const auto holes = ds.holes_of_patch(p);
    out.holes.insert(out.holes.end(), holes.begin(), holes.end());
  }
  std::sort(out.holes.begin(), out.holes.end());
  return out;
}

std::vector<Index> eliminate(const Dataset& ds, const PredictionTable& pt, double budget, double beta) {
  return eliminate_detail(ds, pt, budget, beta).holes;
}

}  // namespace cryoplan
