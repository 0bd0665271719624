#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cryoplan/atlas.hpp"
#include "cryoplan/rng.hpp"
#include "fixtures.hpp"

using namespace cryoplan;

namespace {

// Second route to the penalty curve: -expm1(-beta (t - t0)).
double penalty_oracle(double t) { return -std::expm1(-0.185 * (t - 2.0)); }

}  // namespace

TEST_CASE("move costs and rewards match the published tables") {
  CHECK(move_cost(MoveClass::SamePatch) == 2.0);
  CHECK(move_cost(MoveClass::SameSquare) == 3.0);
  CHECK(move_cost(MoveClass::SameGrid) == 5.0);
  CHECK(move_cost(MoveClass::DifferentGrid) == 10.0);

  const RewardTable rt;
  CHECK(rt[MoveClass::SamePatch] == 1.0);
  CHECK(rt[MoveClass::SameSquare] == 0.57);
  CHECK(rt[MoveClass::SameGrid] == 0.23);
  CHECK(rt[MoveClass::DifferentGrid] == 0.09);
  CHECK(rt.high == 0.0);
  CHECK(rt.ctf_threshold == 6.0);

  CHECK(step_reward(CtfValue(4.2), MoveClass::SameSquare, rt) == 0.57);
  CHECK(step_reward(CtfValue(6.0), MoveClass::SamePatch, rt) == 1.0);
  CHECK(step_reward(CtfValue(6.01), MoveClass::SamePatch, rt) == 0.0);
}

TEST_CASE("reward presets double the square or grid change rewards") {
  CHECK(RewardTable::double_square()[MoveClass::SameGrid] == 0.46);
  CHECK(RewardTable::double_square()[MoveClass::DifferentGrid] == 0.09);
  CHECK(RewardTable::double_grid()[MoveClass::DifferentGrid] == 0.18);
  CHECK(RewardTable::double_both()[MoveClass::SameGrid] == 0.46);
  CHECK(RewardTable::double_both()[MoveClass::DifferentGrid] == 0.18);
  CHECK(RewardTable::preset("default")[MoveClass::SameGrid] == 0.23);
  CHECK_THROWS_AS(RewardTable::preset("triple"), ConfigError);

  RewardTable bad;
  bad.low = {0.5, 0.6, 0.2, 0.1};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("cost penalty") {
  CHECK(cost_penalty(2.0) == 0.0);
  CHECK(std::abs(cost_penalty(5.0) - 0.4259) <= 1e-4);
  // Frozen from the oracle route.
  CHECK(cost_penalty(3.0) == doctest::Approx(0.16889571614787435).epsilon(1e-14));
  CHECK(cost_penalty(5.0) == doctest::Approx(0.42592773880356394).epsilon(1e-14));
  CHECK(cost_penalty(10.0) == doctest::Approx(0.7723623116161873).epsilon(1e-14));
  for (double t = 2.0; t <= 60.0; t += 0.25) {
    CHECK(cost_penalty(t) == doctest::Approx(penalty_oracle(t)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(cost_penalty(1.5), DomainError);
}

TEST_CASE("objective sums indicator minus penalty") {
  const Trajectory traj{{0, MoveClass::SamePatch, 2.0, 1.0, true}, {1, MoveClass::SameGrid, 5.0, 0.0, false}};
  CHECK(objective_value(traj) == doctest::Approx(0.5740722611964361).epsilon(1e-14));
  CHECK(objective_value(Trajectory{}) == 0.0);
}

TEST_CASE("dataset validation reports the offending row") {
  std::vector<HoleRecord> rows{{1, 1, 1, 1, {0, 0}, 4.0}, {2, 1, 1, 1, {1, 0}, 8.0}};
  CHECK_NOTHROW(Dataset::from_records(rows));

  auto dup = rows;
  dup.push_back({1, 1, 1, 1, {2, 0}, 4.0});
  try {
    Dataset::from_records(dup);
    FAIL("duplicate hole accepted");
  } catch (const RecordError& e) {
    CHECK(e.row() == 3);
  }

  auto orphan = rows;
  orphan.push_back({3, 1, 2, 1, {2, 0}, 4.0});  // patch 1 under two squares
  CHECK_THROWS_AS(Dataset::from_records(orphan), RecordError);

  auto two_grids = rows;
  two_grids.push_back({3, 2, 1, 2, {2, 0}, 4.0});  // square 1 under two grids
  CHECK_THROWS_AS(Dataset::from_records(two_grids), RecordError);

  auto bad_ctf = rows;
  bad_ctf.push_back({3, 1, 1, 1, {2, 0}, -1.0});
  CHECK_THROWS_AS(Dataset::from_records(bad_ctf), RecordError);
  bad_ctf.back().ctf = std::nan("");
  CHECK_THROWS_AS(Dataset::from_records(bad_ctf), RecordError);
}

TEST_CASE("dataset indexes are id ordered") {
  std::vector<HoleRecord> rows{{30, 2, 20, 200, {0, 0}, 4.0}, {10, 1, 10, 100, {0, 0}, 9.0},
                               {20, 1, 10, 101, {0, 0}, 5.0}};
  const auto ds = Dataset::from_records(rows);
  CHECK(ds.hole(0).id == 10);
  CHECK(ds.hole(2).id == 30);
  CHECK(ds.hole_index(20) == 1);
  CHECK(ds.patch_index(101) == 1);
  CHECK(ds.grid_of_patch(ds.patch_index(200)) == ds.grid_index(2));
  CHECK_THROWS_AS(ds.hole_index(99), LookupError);
  CHECK(ds.low_fraction() == doctest::Approx(2.0 / 3.0));
  CHECK(Dataset::from_records(ds.to_records()) == ds);
}

TEST_CASE("move classes follow the hierarchy") {
  const auto ds = fixtures::tiny();
  // Index layout: 5 holes per patch, 2 patches per square, 2 squares per grid.
  CHECK(move_class(ds, 0, 1) == MoveClass::SamePatch);
  CHECK(move_class(ds, 0, 5) == MoveClass::SameSquare);
  CHECK(move_class(ds, 0, 10) == MoveClass::SameGrid);
  CHECK(move_class(ds, 0, 20) == MoveClass::DifferentGrid);
  CHECK(move_class_by_id(ds, 1, 21) == MoveClass::DifferentGrid);
}

TEST_CASE("episode semantics") {
  const auto ds = fixtures::tiny();
  auto st = new_episode(ds, ds.hole(0).id, 7.0);
  CHECK(st.visited(0));
  CHECK(st.trajectory().empty());
  CHECK(st.lctf_found() == 0);

  SUBCASE("the seed cannot be revisited") { CHECK_THROWS_AS(st.apply(0), IllegalAction); }

  SUBCASE("costs accumulate and the budget binds") {
    st.apply(1);  // 2
    st.apply(5);  // 3 -> 5
    CHECK(st.elapsed() == 5.0);
    CHECK(st.fits(6));       // same patch: 2 more
    CHECK_FALSE(st.fits(10));  // same grid: 5 more
    CHECK_THROWS_AS(st.apply(10), BudgetExceeded);
    CHECK(st.elapsed() == 5.0);
    st.apply(6);
    CHECK(st.elapsed() == 7.0);
    CHECK(legal_actions(st).empty());
    CHECK(st.visit_sequence() == std::vector<Index>{0, 1, 5, 6});
  }

  SUBCASE("step returns a new state") {
    const auto next = step(st, 1);
    CHECK(next.elapsed() == 2.0);
    CHECK(st.elapsed() == 0.0);
    CHECK(next.total_return() == 1.0);
  }

  SUBCASE("zero budget has no legal action") {
    auto zero = new_episode(ds, ds.hole(0).id, 0.0);
    CHECK(legal_actions(zero).empty());
  }
}

TEST_CASE("position start leaves the start hole visitable") {
  const auto ds = fixtures::tiny();
  EpisodeState st(ds, 3, 4.0, {}, StartMode::Position);
  CHECK_FALSE(st.visited(3));
  const auto& s = st.apply(3);
  CHECK(s.move == MoveClass::SamePatch);
  CHECK(s.cost == 2.0);
  CHECK(st.lctf_found() == (is_low(ds.hole(3)) ? 1u : 0u));
}

TEST_CASE("legal actions are exactly the unvisited holes that fit") {
  const auto ds = fixtures::tiny();
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    EpisodeState st(ds, static_cast<Index>(rng.below(ds.hole_count())), rng.uniform(0.0, 40.0));
    for (;;) {
      const auto legal = legal_actions(st);
      for (Index h = 0; h < ds.hole_count(); ++h) {
        const bool expect = !st.visited(h) && st.elapsed() + move_cost(move_class(ds, st.current(), h)) <= st.budget() + kBudgetSlack;
        CHECK(expect == std::binary_search(legal.begin(), legal.end(), h));
      }
      if (legal.empty()) break;
      st.apply(legal[rng.below(legal.size())]);
      CHECK(st.elapsed() <= st.budget() + kBudgetSlack);
    }
  }
}
