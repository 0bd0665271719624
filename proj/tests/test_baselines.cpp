#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <map>
#include <set>

#include "cryoplan/action_elim.hpp"
#include "cryoplan/baselines.hpp"
#include "cryoplan/dataset_io.hpp"
#include "cryoplan/rng.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cryoplan;

namespace {

// Predicted-label objective recomputed from an executed trajectory.
double recount(const Trajectory& traj, const PredictionTable& pt) {
  double total = 0.0;
  for (const auto& s : traj) total += (pt.low(s.hole) ? 1.0 : 0.0) - cost_penalty(s.cost);
  return total;
}

}  // namespace

TEST_CASE("execute_plan cost walks") {
  SUBCASE("predicted-high patches are skipped") {
    const auto ds = fixtures::all_low(1, 1, 2, 3);
    CHECK(execute_plan(std::vector<Index>{0, 1}, ds, fixtures::labels(std::vector<bool>(6, false)), 100.0).empty());
  }
  SUBCASE("three low holes fill six minutes") {
    const auto ds = fixtures::all_low(1, 1, 1, 3);
    const auto traj = execute_plan(std::vector<Index>{0}, ds, fixtures::truth(ds), 6.0);
    REQUIRE(traj.size() == 3);
    for (const auto& s : traj) CHECK(s.cost == 2.0);
    CHECK(traj[0].hole == 0);
  }
  SUBCASE("budget cuts mid-patch") {
    const auto ds = fixtures::all_low(1, 1, 2, 5);
    const auto traj = execute_plan(std::vector<Index>{1, 0}, ds, fixtures::truth(ds), 7.0);
    REQUIRE(traj.size() == 3);
    CHECK(traj[0].hole == 5);
    CHECK(traj[2].hole == 7);
  }
  SUBCASE("patch switches are charged by the hierarchy") {
    const auto ds = fixtures::tiny();
    const auto pt = fixtures::truth(ds);
    // Patch 0 (5 lows) then patch 4 in the other grid (1 low).
    const auto traj = execute_plan(std::vector<Index>{0, 4}, ds, pt, 100.0);
    REQUIRE(traj.size() == 6);
    CHECK(traj[5].hole == 20);
    CHECK(traj[5].move == MoveClass::DifferentGrid);
    CHECK(traj[5].cost == 10.0);
  }
  SUBCASE("an explicit start is a free seed") {
    const auto ds = fixtures::all_low(1, 1, 1, 3);
    const auto traj = execute_plan(std::vector<Index>{0}, ds, fixtures::truth(ds), 100.0, Index{0});
    REQUIRE(traj.size() == 2);
    CHECK(traj[0].hole == 1);
  }
  CHECK_THROWS(validate_plan(fixtures::tiny(), std::vector<Index>{0, 0}));
  CHECK_THROWS(validate_plan(fixtures::tiny(), std::vector<Index>{99}));
}

TEST_CASE("execute_plan visits only predicted-low holes, once each") {
  const auto ds = generate(GenConfig::y1(6));
  const auto pt = predict_all(ds, ClassifierModel::resnet50(6));
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Index> plan(ds.patch_count());
    std::iota(plan.begin(), plan.end(), Index{0});
    rng.shuffle(plan.begin(), plan.end());
    const double budget = rng.uniform(0.0, 500.0);
    const auto traj = execute_plan(plan, ds, pt, budget);
    std::set<Index> seen;
    double spent = 0.0;
    for (const auto& s : traj) {
      CHECK(pt.low(s.hole));
      CHECK(seen.insert(s.hole).second);
      spent += s.cost;
    }
    CHECK(spent <= budget + kBudgetSlack);
  }
}

TEST_CASE("greedy plan equals the elimination ranking") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto ds = generate(GenConfig::y1(seed));
    const auto pt = predict_all(ds, ClassifierModel::resnet18(seed));
    CHECK(greedy_plan(ds, pt) == rank_patches(ds, pt));
  }
}

TEST_CASE("random policy") {
  auto cfg = GenConfig::y1(12);
  cfg.total_squares = 40;
  const auto ds = generate(cfg);
  REQUIRE(ds.hole_count() >= 4000);
  std::size_t visits = 0, lows = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto traj = random_policy(ds, 240.0, t);
    double spent = 0.0;
    for (const auto& s : traj) {
      lows += s.low;
      spent += s.cost;
    }
    visits += traj.size();
    CHECK(spent <= 240.0 + kBudgetSlack);
  }
  const double frac = static_cast<double>(lows) / static_cast<double>(visits);
  CHECK(std::abs(frac - ds.low_fraction()) <= 0.03);

  const auto a = random_policy(ds, 240.0, 5);
  const auto b = random_policy(ds, 240.0, 5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].hole == b[i].hole);
}

TEST_CASE("crossover keeps permutations") {
  CHECK(crossover(std::vector<Index>{1, 2, 3, 4, 5}, std::vector<Index>{5, 4, 3, 2, 1}, 2) ==
        std::vector<Index>{1, 2, 5, 4, 3});
  Rng rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<std::size_t>(rng.range(2, 12));
    std::vector<Index> a(n), b(n);
    std::iota(a.begin(), a.end(), Index{0});
    std::iota(b.begin(), b.end(), Index{0});
    rng.shuffle(a.begin(), a.end());
    rng.shuffle(b.begin(), b.end());
    const auto cut = static_cast<std::size_t>(rng.range(0, static_cast<std::int64_t>(n)));
    auto child = crossover(a, b, cut);
    CHECK(std::equal(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(cut), child.begin()));
    std::sort(child.begin(), child.end());
    std::vector<Index> ids(n);
    std::iota(ids.begin(), ids.end(), Index{0});
    CHECK(child == ids);
  }
}

TEST_CASE("search reaches the exhaustive optimum on small atlases") {
  Rng rng(2024);
  int instances = 0;
  while (instances < 12) {
    const auto ds = fixtures::random_atlas(rng, static_cast<int>(rng.range(2, 6)));
    const auto pt = fixtures::truth(ds);
    const auto genes = plannable_patches(ds, pt);
    if (genes.size() < 2) continue;
    ++instances;
    const double budget = rng.uniform(10.0, 40.0);
    const double opt = oracles::exhaustive_optimum(genes, ds, pt, budget);

    GaConfig ga;
    ga.seed = static_cast<std::uint64_t>(instances);
    const auto g = ga_search(ds, pt, budget, ga);
    CHECK(g.fitness >= 0.95 * opt - 1e-12);
    CHECK(g.fitness == doctest::Approx(plan_fitness(g.plan, ds, pt, budget)));
    CHECK(g.fitness == doctest::Approx(recount(execute_plan(g.plan, ds, pt, budget), pt)));
    CHECK(std::is_sorted(g.best_history.begin(), g.best_history.end()));
    CHECK(g.best_history.size() == 40);

    SaConfig sa;
    sa.seed = static_cast<std::uint64_t>(instances);
    const auto s = sa_search(ds, pt, budget, sa);
    CHECK(s.fitness >= 0.95 * opt - 1e-12);
    CHECK(s.fitness == doctest::Approx(plan_fitness(s.plan, ds, pt, budget)));
    CHECK(std::is_sorted(s.best_history.begin(), s.best_history.end()));
  }
}

TEST_CASE("annealing schedule and acceptance") {
  const auto ds = generate(GenConfig::y1(1));
  const auto pt = predict_all(ds, ClassifierModel::resnet50(1));
  SaConfig cfg;
  cfg.seed = 4;
  const auto r = sa_search(ds, pt, 240.0, cfg);
  const double n = static_cast<double>(plannable_patches(ds, pt).size());
  REQUIRE(r.trace.size() > 100);
  CHECK(r.trace.front().temperature == doctest::Approx(std::sqrt(n)));
  CHECK(r.trace.back().temperature > 1e-8);
  CHECK(r.trace.back().temperature * 0.995 <= 1e-8);
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    CHECK(r.trace[i].temperature == doctest::Approx(r.trace[i - 1].temperature * 0.995));
  }
  for (auto it = r.trace.end() - 100; it != r.trace.end(); ++it) {
    if (it->accepted) CHECK(it->delta >= 0.0);
  }
  CHECK(sa_search(ds, pt, 240.0, cfg).plan == r.plan);
}

TEST_CASE("degenerate searches") {
  const auto ds = fixtures::all_low(1, 1, 1, 4);
  const auto pt = fixtures::truth(ds);
  CHECK(ga_optimize(ds, pt, 20.0, GaConfig{}) == PatchPlan{0});
  CHECK(sa_optimize(ds, pt, 20.0, SaConfig{}) == PatchPlan{0});
}

TEST_CASE("search configs") {
  GaConfig ga;
  CHECK(ga.generations == 40);
  CHECK(ga.population == 10);
  CHECK(ga.mutation_rate == 0.05);
  ga.population = 1;
  CHECK_THROWS_AS(ga.validate(), ConfigError);

  SaConfig sa;
  CHECK(sa.rate == 0.995);
  CHECK(sa.t_min == 1e-8);
  sa.rate = 1.0;
  CHECK_THROWS_AS(sa.validate(), ConfigError);
  sa = SaConfig{};
  sa.t_max = 1e-9;
  CHECK_THROWS_AS(sa.validate(), ConfigError);

  GaConfig g2;
  g2.seed = 8;
  g2.fitness.labels = FitnessLabels::Truth;
  nlohmann::json j = g2;
  const auto back = j.get<GaConfig>();
  CHECK(back.seed == 8);
  CHECK(back.fitness.labels == FitnessLabels::Truth);
  j["extra"] = true;
  CHECK_THROWS_AS(j.get<GaConfig>(), ConfigError);

  SaConfig s2;
  s2.t_max = 3.0;
  nlohmann::json js = s2;
  CHECK(js.get<SaConfig>().t_max == 3.0);
}

TEST_CASE("truth fitness matches the objective of the executed plan") {
  const auto ds = generate(GenConfig::y1(2));
  const auto pt = predict_all(ds, ClassifierModel::resnet50(2));
  const auto plan = greedy_plan(ds, pt);
  FitnessSpec truth;
  truth.labels = FitnessLabels::Truth;
  CHECK(plan_fitness(plan, ds, pt, 240.0, truth) ==
        doctest::Approx(objective_value(execute_plan(plan, ds, pt, 240.0))));
}
