#include <doctest.h>

#include <algorithm>

#include "cryoplan/action_elim.hpp"
#include "cryoplan/dataset_io.hpp"
#include "cryoplan/rng.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cryoplan;

namespace {

std::vector<Index> all_patches(const Dataset& ds) {
  std::vector<Index> out(ds.patch_count());
  for (Index p = 0; p < out.size(); ++p) out[p] = p;
  return out;
}

// Random small hierarchy with at most `max_holes` holes.
Dataset random_small(Rng& rng, int max_holes) {
  std::vector<HoleRecord> rows;
  Id hole = 0, patch = 0, square = 0;
  const int grids = static_cast<int>(rng.range(1, 2));
  for (int g = 1; g <= grids && static_cast<int>(rows.size()) < max_holes; ++g) {
    const int squares = static_cast<int>(rng.range(1, 2));
    for (int s = 0; s < squares && static_cast<int>(rows.size()) < max_holes; ++s) {
      ++square;
      const int patches = static_cast<int>(rng.range(1, 2));
      for (int p = 0; p < patches && static_cast<int>(rows.size()) < max_holes; ++p) {
        ++patch;
        const int holes = static_cast<int>(rng.range(1, 3));
        for (int h = 0; h < holes && static_cast<int>(rows.size()) < max_holes; ++h) {
          rows.push_back({++hole, static_cast<Id>(g), square, patch, {0, 0}, 4.0});
        }
      }
    }
  }
  return Dataset::from_records(rows);
}

}  // namespace

TEST_CASE("patch ranking") {
  SUBCASE("ties fall back to id order") {
    const auto ds = fixtures::all_low(2, 2, 2, 3);
    CHECK(rank_patches(ds, fixtures::truth(ds)) == all_patches(ds));
  }
  SUBCASE("grid total first, then patch count") {
    // Grid 2 holds more predicted-low holes overall; within grid 1 patch 2 beats patch 1.
    const auto ds = fixtures::regular(2, 1, 2, 5, [](int g, int, int p, int h) {
      if (g == 0) return h < (p == 0 ? 3 : 5) ? 4.0 : 9.0;
      return h < 5 ? 4.0 : 9.0;
    });
    const auto ranked = rank_patches(ds, fixtures::truth(ds));
    CHECK(ranked == std::vector<Index>{2, 3, 1, 0});
  }
}

TEST_CASE("max_lctf hand-simulated walks") {
  CHECK(max_lctf(fixtures::all_low(1, 1, 1, 10), all_patches(fixtures::all_low(1, 1, 1, 10)), 0.0) == 0);
  const auto one = fixtures::all_low(1, 1, 1, 10);
  CHECK(max_lctf(one, all_patches(one), 20.0) == 10);
  CHECK(max_lctf(one, all_patches(one), 19.9) == 9);
  const auto two = fixtures::all_low(1, 1, 2, 3);
  CHECK(max_lctf(two, all_patches(two), 14.0) == 6);
  CHECK(max_lctf(two, all_patches(two), 12.9) == 5);
  // Two grids of one hole each: 2 + 10.
  const auto grids = fixtures::all_low(2, 1, 1, 1);
  CHECK(max_lctf(grids, all_patches(grids), 12.0) == 2);
  CHECK(max_lctf(grids, all_patches(grids), 11.0) == 1);
}

TEST_CASE("max_lctf never beats exhaustive search") {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const auto ds = random_small(rng, 8);
    const double budget = rng.uniform(0.0, 40.0);
    const auto ranked = rank_patches(ds, fixtures::truth(ds));
    CHECK(max_lctf(ds, ranked, budget) <= oracles::brute_force_visits(ds, budget));
  }
  // A single patch is optimal by construction.
  for (double budget : {0.0, 3.0, 7.5, 16.0}) {
    const auto ds = fixtures::all_low(1, 1, 1, 7);
    CHECK(max_lctf(ds, all_patches(ds), budget) == oracles::brute_force_visits(ds, budget));
  }
}

TEST_CASE("elimination keeps a minimal covering prefix") {
  SUBCASE("one rich patch suffices") {
    // Patch 1: 10 lows; others: 1 low each. N_max at tau=10 is 5, beta 1.5 -> 7.5.
    const auto ds = fixtures::regular(1, 1, 4, 10, [](int, int, int p, int h) {
      return (p == 0 ? h < 10 : h < 1) ? 4.0 : 9.0;
    });
    const auto e = eliminate_detail(ds, fixtures::truth(ds), 10.0, 1.5);
    CHECK(e.n_max == 5);
    CHECK(e.patches == std::vector<Index>{0});
    CHECK(e.holes.size() == 10);
    CHECK_FALSE(e.fallback);
  }
  SUBCASE("huge beta keeps everything") {
    const auto ds = fixtures::all_low(2, 2, 2, 3);
    CHECK(eliminate(ds, fixtures::truth(ds), 240.0, 1e6).size() == ds.hole_count());
    // Trailing patches without any predicted-low hole are not needed to reach the cap.
    const auto tiny = fixtures::tiny();
    CHECK(eliminate(tiny, fixtures::truth(tiny), 240.0, 1e6).size() == 25);
  }
  SUBCASE("no predicted-low hole falls back to the full space") {
    const auto ds = fixtures::tiny();
    const auto e = eliminate_detail(ds, fixtures::labels(std::vector<bool>(40, false)), 240.0, 1.5);
    CHECK(e.fallback);
    CHECK(e.holes.size() == 40);
  }
}

TEST_CASE("elimination properties on generated data") {
  const auto ds = generate(GenConfig::y1(5));
  const auto pt = predict_all(ds, ClassifierModel::resnet50(5));
  const auto ranked = rank_patches(ds, pt);
  std::vector<Index> prev;
  for (double beta : {0.25, 0.5, 1.0, 1.5, 2.5, 4.0, 10.0}) {
    const auto e = eliminate_detail(ds, pt, 240.0, beta);
    // Minimal prefix of the ranking.
    CHECK(std::equal(e.patches.begin(), e.patches.end(), ranked.begin()));
    int covered = 0, without_last = 0;
    for (std::size_t i = 0; i < e.patches.size(); ++i) {
      int lows = 0;
      for (Index h : ds.holes_of_patch(e.patches[i])) lows += pt.low(h);
      covered += lows;
      if (i + 1 < e.patches.size()) without_last += lows;
    }
    int total = 0;
    for (Index h = 0; h < ds.hole_count(); ++h) total += pt.low(h);
    const double need = std::min(beta * static_cast<double>(e.n_max), static_cast<double>(total));
    CHECK(covered >= need);
    CHECK(without_last < need);
    // Every hole of a selected patch is valid.
    std::size_t expected = 0;
    for (Index p : e.patches) expected += ds.holes_of_patch(p).size();
    CHECK(e.holes.size() == expected);
    CHECK(std::is_sorted(e.holes.begin(), e.holes.end()));
    // Monotone in beta.
    CHECK(std::includes(e.holes.begin(), e.holes.end(), prev.begin(), prev.end()));
    prev = e.holes;
  }
}

TEST_CASE("elim config") {
  ElimConfig c;
  CHECK(c.beta_test == 1.5);
  CHECK(c.beta_train == 2.5);
  c.beta_test = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  ElimConfig d{false, 3.0, 1.0};
  nlohmann::json j = d;
  CHECK(j.get<ElimConfig>() == d);
}
