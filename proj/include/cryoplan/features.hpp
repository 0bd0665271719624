#pragma once

// DQN input: one 8-wide block per visited hole in the recent history plus one
// for the candidate. Block layout:
//   [0]    predicted low (hard label, or P(low) with soft_labels)
//   [1..3] unvisited predicted-low count of its patch / square / grid,
//          divided by the dataset-wide maximum and clamped to [0, 1]
//   [4..7] one-hot move class from the preceding hole (all zero if none)

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "cryoplan/atlas.hpp"
#include "cryoplan/classifier.hpp"

namespace cryoplan {

inline constexpr std::size_t kStepFeatures = 8;

struct FeatureConfig {
  int k = 4;
  double patch_norm = 1.0;
  double square_norm = 1.0;
  double grid_norm = 1.0;
  bool soft_labels = false;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(k) * kStepFeatures; }
  void validate() const;

  // Normalizers are the largest static predicted-low counts in `ds`.
  static FeatureConfig from_dataset(const Dataset& ds, const PredictionTable& pt, int k = 4);

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

void to_json(nlohmann::json& j, const FeatureConfig& c);
void from_json(const nlohmann::json& j, FeatureConfig& c);

using StepFeatures = std::array<float, kStepFeatures>;
using FeatureVector = std::vector<float>;

StepFeatures encode_step(const Dataset& ds, Index hole, std::optional<Index> prev,
                         const PredictionTable& pt, const QualityCounts& counts,
                         const FeatureConfig& cfg);

// Candidate block from the ingredients that determine it; every hole of the
// same patch and predicted label shares it.
void encode_candidate(const Dataset& ds, Index patch, float label, MoveClass move,
                      const QualityCounts& counts, const FeatureConfig& cfg, std::span<float> out);

float label_feature(const PredictionTable& pt, Index h, const FeatureConfig& cfg);

// First k-1 blocks: the last k-1 entries of `visits` (seed first), oldest
// first, left-padded with zero blocks.
void encode_history(const Dataset& ds, std::span<const Index> visits, const PredictionTable& pt,
                    const QualityCounts& counts, const FeatureConfig& cfg, std::span<float> out);

FeatureVector encode_state_action(const EpisodeState& st, Index candidate,
                                  const PredictionTable& pt, const QualityCounts& counts,
                                  const FeatureConfig& cfg);

// Convenience overload that derives counts from the episode's visited flags.
FeatureVector encode_state_action(const EpisodeState& st, Index candidate,
                                  const PredictionTable& pt, const FeatureConfig& cfg);

}  // namespace cryoplan
