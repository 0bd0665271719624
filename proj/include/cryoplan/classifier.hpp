#pragma once

// Confusion-statistics stand-in for the offline hole classifier.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cryoplan/atlas.hpp"

namespace cryoplan {

struct ClassifierModel {
  std::string name = "gt";
  double low_recall = 1.0;   // P(pred low | true low)
  double high_recall = 1.0;  // P(pred high | true high)
  std::uint64_t seed = 0;
  double ctf_threshold = 6.0;

  void validate() const;

  static ClassifierModel ground_truth(std::uint64_t seed = 0);
  static ClassifierModel resnet50(std::uint64_t seed = 0);
  static ClassifierModel resnet18(std::uint64_t seed = 0);
  static ClassifierModel transfer_m(std::uint64_t seed = 0);
  static ClassifierModel custom(double low_recall, double high_recall, std::uint64_t seed = 0);

  // gt | r50 | r18 | m | custom(low,high)
  static ClassifierModel parse(std::string_view spec, std::uint64_t seed = 0);
  std::string spec() const;
};

struct Prediction {
  bool low = false;
  double confidence = 1.0;
};

class PredictionTable {
 public:
  PredictionTable() = default;
  explicit PredictionTable(std::vector<Prediction> rows) : rows_(std::move(rows)) {}

  std::size_t size() const noexcept { return rows_.size(); }
  const Prediction& operator[](Index h) const { return rows_.at(h); }
  bool low(Index h) const { return rows_.at(h).low; }
  std::span<const Prediction> rows() const noexcept { return rows_; }

 private:
  std::vector<Prediction> rows_;
};

// Each hole's label is a pure function of (model.seed, hole id, recalls).
PredictionTable predict_all(const Dataset& ds, const ClassifierModel& m);

// Predicted-low, still-unvisited hole counts at patch, square and grid level.
class QualityCounts {
 public:
  QualityCounts(const Dataset& ds, const PredictionTable& pt);

  int patch(Index p) const { return patch_[p]; }
  int square(Index s) const { return square_[s]; }
  int grid(Index g) const { return grid_[g]; }

  // Static (nothing-visited) predicted-low tallies.
  int patch_total(Index p) const { return patch_total_[p]; }

  // Removes `h` from the unvisited pool. Idempotent per hole.
  void visit(Index h);
  bool visited(Index h) const { return visited_[h] != 0; }

  // Recompute from scratch for a given visited set.
  static QualityCounts from_visited(const Dataset& ds, const PredictionTable& pt,
                                    std::span<const std::uint8_t> visited);

  friend bool operator==(const QualityCounts& a, const QualityCounts& b) {
    return a.patch_ == b.patch_ && a.square_ == b.square_ && a.grid_ == b.grid_;
  }

 private:
  const Dataset* ds_;
  const PredictionTable* pt_;
  std::vector<int> patch_, square_, grid_, patch_total_;
  std::vector<std::uint8_t> visited_;
};

// Rows are truth (0 = low, 1 = high), columns prediction.
using ConfusionMatrix = std::array<std::array<std::size_t, 2>, 2>;

ConfusionMatrix empirical_confusion(const PredictionTable& pt, const Dataset& ds,
                                    double threshold = 6.0);

}  // namespace cryoplan
