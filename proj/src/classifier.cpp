#include "cryoplan/classifier.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "cryoplan/rng.hpp"

namespace cryoplan {

namespace {

constexpr std::uint64_t kLabelLane = 0;
constexpr std::uint64_t kJitterLane = 1;

}  // namespace

void ClassifierModel::validate() const {
  auto ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!ok(low_recall) || !ok(high_recall)) {
    throw ConfigError(fmt::format("classifier recalls must lie in [0,1], got ({}, {})", low_recall, high_recall));
  }
}

ClassifierModel ClassifierModel::ground_truth(std::uint64_t seed) { return {"gt", 1.0, 1.0, seed}; }
ClassifierModel ClassifierModel::resnet50(std::uint64_t seed) { return {"r50", 0.839, 0.912, seed}; }
ClassifierModel ClassifierModel::resnet18(std::uint64_t seed) { return {"r18", 0.910, 0.875, seed}; }
ClassifierModel ClassifierModel::transfer_m(std::uint64_t seed) { return {"m", 0.70, 0.70, seed}; }

ClassifierModel ClassifierModel::custom(double low_recall, double high_recall, std::uint64_t seed) {
  ClassifierModel m{"custom", low_recall, high_recall, seed};
  m.validate();
  return m;
}

ClassifierModel ClassifierModel::parse(std::string_view spec, std::uint64_t seed) {
  if (spec == "gt") return ground_truth(seed);
  if (spec == "r50") return resnet50(seed);
  if (spec == "r18") return resnet18(seed);
  if (spec == "m") return transfer_m(seed);
  if (spec.starts_with("custom(") && spec.ends_with(")")) {
    const auto inner = spec.substr(7, spec.size() - 8);
    const auto comma = inner.find(',');
    if (comma != std::string_view::npos) {
      double lo = 0.0, hi = 0.0;
      const auto a = inner.substr(0, comma);
      const auto b = inner.substr(comma + 1);
      const auto ra = std::from_chars(a.data(), a.data() + a.size(), lo);
      const auto rb = std::from_chars(b.data(), b.data() + b.size(), hi);
      if (ra.ec == std::errc{} && rb.ec == std::errc{} && ra.ptr == a.data() + a.size() &&
          rb.ptr == b.data() + b.size()) {
        return custom(lo, hi, seed);
      }
    }
  }
  throw ConfigError("unknown classifier preset '" + std::string(spec) +
                    "' (expected gt|r50|r18|m|custom(low,high))");
}

std::string ClassifierModel::spec() const {
  if (name == "custom") return fmt::format("custom({},{})", low_recall, high_recall);
  return name;
}

PredictionTable predict_all(const Dataset& ds, const ClassifierModel& m) {
  m.validate();
  std::vector<Prediction> rows;
  rows.reserve(ds.hole_count());
  for (const Hole& hole : ds.holes()) {
    const bool truth_low = hole.ctf_true.value() <= m.ctf_threshold;
    const double u = keyed_uniform(m.seed, hole.id, kLabelLane);
    const bool pred_low = truth_low ? u < m.low_recall : !(u < m.high_recall);
    const double jitter = keyed_uniform(m.seed, hole.id, kJitterLane) * 0.1 - 0.05;
    const double base = pred_low ? m.low_recall : m.high_recall;
    rows.push_back(Prediction{pred_low, std::clamp(base + jitter, 0.5, 1.0)});
  }
  return PredictionTable(std::move(rows));
}

QualityCounts::QualityCounts(const Dataset& ds, const PredictionTable& pt)
    : ds_(&ds),
      pt_(&pt),
      patch_(ds.patch_count(), 0),
      square_(ds.square_count(), 0),
      grid_(ds.grid_count(), 0),
      visited_(ds.hole_count(), 0) {
  if (pt.size() != ds.hole_count()) {
    throw ShapeError("prediction table does not match dataset hole count");
  }
  for (Index h = 0; h < ds.hole_count(); ++h) {
    if (!pt.low(h)) continue;
    const auto& lin = ds.lineage(h);
    ++patch_[lin.patch];
    ++square_[lin.square];
    ++grid_[lin.grid];
  }
  patch_total_ = patch_;
}

void QualityCounts::visit(Index h) {
  if (visited_.at(h)) return;
  visited_[h] = 1;
  if (!pt_->low(h)) return;
  const auto& lin = ds_->lineage(h);
  --patch_[lin.patch];
  --square_[lin.square];
  --grid_[lin.grid];
}

QualityCounts QualityCounts::from_visited(const Dataset& ds, const PredictionTable& pt,
                                          std::span<const std::uint8_t> visited) {
  QualityCounts qc(ds, pt);
  for (Index h = 0; h < visited.size(); ++h) {
    if (visited[h]) qc.visit(h);
  }
  return qc;
}

ConfusionMatrix empirical_confusion(const PredictionTable& pt, const Dataset& ds, double threshold) {
  ConfusionMatrix m{};
  for (Index h = 0; h < ds.hole_count(); ++h) {
    const int truth = ds.hole(h).ctf_true.value() <= threshold ? 0 : 1;
    const int pred = pt.low(h) ? 0 : 1;
    ++m[truth][pred];
  }
  return m;
}

}  // namespace cryoplan
