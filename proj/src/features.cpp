#include "cryoplan/features.hpp"

#include <algorithm>

namespace cryoplan {

void FeatureConfig::validate() const {
  if (k < 1) throw ConfigError("feature history length k must be >= 1");
  if (!(patch_norm > 0 && square_norm > 0 && grid_norm > 0)) {
    throw ConfigError("feature normalizers must be positive");
  }
}

FeatureConfig FeatureConfig::from_dataset(const Dataset& ds, const PredictionTable& pt, int k) {
  const QualityCounts qc(ds, pt);
  FeatureConfig cfg;
  cfg.k = k;
  int mp = 1, ms = 1, mg = 1;
  for (Index p = 0; p < ds.patch_count(); ++p) mp = std::max(mp, qc.patch(p));
  for (Index s = 0; s < ds.square_count(); ++s) ms = std::max(ms, qc.square(s));
  for (Index g = 0; g < ds.grid_count(); ++g) mg = std::max(mg, qc.grid(g));
  cfg.patch_norm = mp;
  cfg.square_norm = ms;
  cfg.grid_norm = mg;
  cfg.validate();
  return cfg;
}

void to_json(nlohmann::json& j, const FeatureConfig& c) {
  j = nlohmann::json{{"k", c.k},
                     {"patch_norm", c.patch_norm},
                     {"square_norm", c.square_norm},
                     {"grid_norm", c.grid_norm},
                     {"soft_labels", c.soft_labels}};
}

void from_json(const nlohmann::json& j, FeatureConfig& c) {
  c.k = j.at("k").get<int>();
  c.patch_norm = j.at("patch_norm").get<double>();
  c.square_norm = j.at("square_norm").get<double>();
  c.grid_norm = j.at("grid_norm").get<double>();
  c.soft_labels = j.value("soft_labels", false);
  c.validate();
}

float label_feature(const PredictionTable& pt, Index h, const FeatureConfig& cfg) {
  const Prediction& p = pt[h];
  if (!cfg.soft_labels) return p.low ? 1.0f : 0.0f;
  return static_cast<float>(p.low ? p.confidence : 1.0 - p.confidence);
}

namespace {

float normalized(int count, double norm) {
  return static_cast<float>(std::clamp(count / norm, 0.0, 1.0));
}

void fill_block(const Dataset& ds, Index patch, float label, std::optional<MoveClass> move,
                const QualityCounts& counts, const FeatureConfig& cfg, std::span<float> out) {
  const Index square = ds.square_of_patch(patch);
  const Index grid = ds.grid_of_square(square);
  out[0] = label;
  out[1] = normalized(counts.patch(patch), cfg.patch_norm);
  out[2] = normalized(counts.square(square), cfg.square_norm);
  out[3] = normalized(counts.grid(grid), cfg.grid_norm);
  std::fill(out.begin() + 4, out.begin() + 8, 0.0f);
  if (move) out[4 + static_cast<std::size_t>(*move)] = 1.0f;
}

}  // namespace

StepFeatures encode_step(const Dataset& ds, Index hole, std::optional<Index> prev,
                         const PredictionTable& pt, const QualityCounts& counts,
                         const FeatureConfig& cfg) {
  StepFeatures out{};
  std::optional<MoveClass> move;
  if (prev) move = move_class(ds, *prev, hole);
  fill_block(ds, ds.lineage(hole).patch, label_feature(pt, hole, cfg), move, counts, cfg, out);
  return out;
}

void encode_candidate(const Dataset& ds, Index patch, float label, MoveClass move,
                      const QualityCounts& counts, const FeatureConfig& cfg, std::span<float> out) {
  fill_block(ds, patch, label, move, counts, cfg, out);
}

void encode_history(const Dataset& ds, std::span<const Index> visits, const PredictionTable& pt,
                    const QualityCounts& counts, const FeatureConfig& cfg, std::span<float> out) {
  const std::size_t slots = static_cast<std::size_t>(cfg.k) - 1;
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(slots * kStepFeatures), 0.0f);
  const std::size_t used = std::min(slots, visits.size());
  const std::size_t first_visit = visits.size() - used;
  for (std::size_t i = 0; i < used; ++i) {
    const std::size_t v = first_visit + i;
    std::optional<Index> prev;
    if (v > 0) prev = visits[v - 1];
    const auto block = encode_step(ds, visits[v], prev, pt, counts, cfg);
    std::copy(block.begin(), block.end(), out.begin() + static_cast<std::ptrdiff_t>((slots - used + i) * kStepFeatures));
  }
}

FeatureVector encode_state_action(const EpisodeState& st, Index candidate,
                                  const PredictionTable& pt, const QualityCounts& counts,
                                  const FeatureConfig& cfg) {
  const Dataset& ds = st.dataset();
  FeatureVector out(cfg.dim(), 0.0f);
  const auto visits = st.visit_sequence();
  encode_history(ds, visits, pt, counts, cfg, out);
  const auto block = encode_step(ds, candidate, st.current(), pt, counts, cfg);
  std::copy(block.begin(), block.end(), out.end() - kStepFeatures);
  return out;
}

FeatureVector encode_state_action(const EpisodeState& st, Index candidate,
                                  const PredictionTable& pt, const FeatureConfig& cfg) {
  const auto counts = QualityCounts::from_visited(st.dataset(), pt, st.visited_flags());
  return encode_state_action(st, candidate, pt, counts, cfg);
}

}  // namespace cryoplan
