#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "cryoplan/dataset_io.hpp"
#include "cryoplan/features.hpp"
#include "cryoplan/rng.hpp"
#include "fixtures.hpp"

using namespace cryoplan;

namespace {

std::span<const float> block(const FeatureVector& v, std::size_t i) {
  return std::span<const float>(v).subspan(i * kStepFeatures, kStepFeatures);
}

bool all_zero(std::span<const float> b) {
  return std::all_of(b.begin(), b.end(), [](float x) { return x == 0.0f; });
}

}  // namespace

TEST_CASE("step block layout") {
  const auto ds = fixtures::tiny();
  const auto pt = fixtures::truth(ds);
  const QualityCounts qc(ds, pt);
  const auto cfg = FeatureConfig::from_dataset(ds, pt);
  CHECK(cfg.patch_norm == 5.0);
  CHECK(cfg.square_norm == 9.0);
  CHECK(cfg.grid_norm == 14.0);

  const auto seed = encode_step(ds, 0, std::nullopt, pt, qc, cfg);
  CHECK(seed[0] == 1.0f);
  CHECK(seed[1] == 1.0f);
  CHECK(seed[2] == 1.0f);
  CHECK(seed[3] == 1.0f);
  CHECK(std::all_of(seed.begin() + 4, seed.end(), [](float x) { return x == 0.0f; }));

  const auto same = encode_step(ds, 1, Index{0}, pt, qc, cfg);
  CHECK(same[4] == 1.0f);
  CHECK(same[5] + same[6] + same[7] == 0.0f);
  CHECK(encode_step(ds, 20, Index{0}, pt, qc, cfg)[7] == 1.0f);

  // Patch 7 (index 35..39) has no predicted-low hole at all.
  const auto empty = encode_step(ds, 39, std::nullopt, pt, qc, cfg);
  CHECK(empty[0] == 0.0f);
  CHECK(empty[1] == 0.0f);
}

TEST_CASE("fresh episode padding") {
  const auto ds = fixtures::tiny();
  const auto pt = fixtures::truth(ds);
  const auto cfg = FeatureConfig::from_dataset(ds, pt);
  const EpisodeState st(ds, 0, 240.0);
  const auto v = encode_state_action(st, 5, pt, cfg);
  REQUIRE(v.size() == 32);
  CHECK(all_zero(block(v, 0)));
  CHECK(all_zero(block(v, 1)));
  const auto qc = QualityCounts::from_visited(ds, pt, st.visited_flags());
  const auto seed = encode_step(ds, 0, std::nullopt, pt, qc, cfg);
  CHECK(std::equal(seed.begin(), seed.end(), block(v, 2).begin()));
  const auto cand = encode_step(ds, 5, Index{0}, pt, qc, cfg);
  CHECK(std::equal(cand.begin(), cand.end(), block(v, 3).begin()));
  CHECK(block(v, 3)[5] == 1.0f);
}

TEST_CASE("history keeps the most recent visits oldest first") {
  const auto ds = fixtures::tiny();
  const auto pt = fixtures::truth(ds);
  const auto cfg = FeatureConfig::from_dataset(ds, pt);
  EpisodeState st(ds, 0, 240.0);
  for (Index h : {1, 5, 10, 20}) st.apply(h);
  const auto v = encode_state_action(st, 21, pt, cfg);
  const auto qc = QualityCounts::from_visited(ds, pt, st.visited_flags());
  const Index expect[] = {5, 10, 20};
  const Index prev[] = {1, 5, 10};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto b = encode_step(ds, expect[i], prev[i], pt, qc, cfg);
    CHECK(std::equal(b.begin(), b.end(), block(v, i).begin()));
  }
}

TEST_CASE("holes of one patch with equal labels share features") {
  const auto ds = fixtures::tiny();
  const auto pt = fixtures::truth(ds);
  const auto cfg = FeatureConfig::from_dataset(ds, pt);
  EpisodeState st(ds, 0, 240.0);
  st.apply(12);
  CHECK(encode_state_action(st, 5, pt, cfg) == encode_state_action(st, 6, pt, cfg));
  CHECK(encode_state_action(st, 5, pt, cfg) != encode_state_action(st, 9, pt, cfg));  // 9 is high
}

TEST_CASE("features are finite and counts normalized") {
  const auto ds = generate(GenConfig::y1(4));
  const auto pt = predict_all(ds, ClassifierModel::resnet50(4));
  for (bool soft : {false, true}) {
    auto cfg = FeatureConfig::from_dataset(ds, pt);
    cfg.soft_labels = soft;
    Rng rng(8);
    EpisodeState st(ds, static_cast<Index>(rng.below(ds.hole_count())), 240.0);
    while (true) {
      const auto legal = legal_actions(st);
      if (legal.empty()) break;
      const Index c = legal[rng.below(legal.size())];
      const auto v = encode_state_action(st, c, pt, cfg);
      for (float x : v) {
        CHECK(std::isfinite(x));
        CHECK(x >= 0.0f);
        CHECK(x <= 1.0f);
      }
      CHECK(v == encode_state_action(st, c, pt, cfg));
      st.apply(c);
    }
  }
}

TEST_CASE("relabeling ids preserves features") {
  const auto ds = fixtures::tiny();
  auto rows = ds.to_records();
  // Reverse every id space so index order flips.
  for (auto& r : rows) {
    r.hole_id = 1000 - r.hole_id;
    r.patch_id = 500 - r.patch_id;
    r.square_id = 300 - r.square_id;
    r.grid_id = 100 - r.grid_id;
  }
  const auto rel = Dataset::from_records(rows);
  auto map = [&](Index h) { return rel.hole_index(1000 - ds.hole(h).id); };

  const auto pt = fixtures::truth(ds);
  const auto pt_rel = fixtures::truth(rel);
  const auto cfg = FeatureConfig::from_dataset(ds, pt);
  CHECK(cfg == FeatureConfig::from_dataset(rel, pt_rel));

  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto start = static_cast<Index>(rng.below(ds.hole_count()));
    EpisodeState a(ds, start, 60.0);
    EpisodeState b(rel, map(start), 60.0);
    for (;;) {
      const auto legal = legal_actions(a);
      if (legal.empty()) break;
      for (Index c : legal) CHECK(encode_state_action(a, c, pt, cfg) == encode_state_action(b, map(c), pt_rel, cfg));
      const Index pick = legal[rng.below(legal.size())];
      a.apply(pick);
      b.apply(map(pick));
    }
  }
}

TEST_CASE("feature config validation") {
  FeatureConfig cfg;
  cfg.k = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.k = 2;
  cfg.grid_norm = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(FeatureConfig{}.dim() == 32);
}
