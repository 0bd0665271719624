#include "cryoplan/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cryoplan {

CtfValue::CtfValue(double angstrom) : value_(angstrom) {
  if (!std::isfinite(angstrom) || angstrom <= 0.0) {
    throw DomainError("CTF value must be positive and finite, got " + std::to_string(angstrom));
  }
}

namespace {

Index lookup(const std::unordered_map<Id, Index>& index, Id id, const char* what) {
  const auto it = index.find(id);
  if (it == index.end()) {
    throw LookupError(std::string("unknown ") + what + " id " + std::to_string(id));
  }
  return it->second;
}

}  // namespace

Dataset Dataset::from_records(std::span<const HoleRecord> records) {
  struct Parent {
    Id id;
    std::size_t row;
  };
  std::map<Id, Parent> patch_parent;
  std::map<Id, Parent> square_parent;
  std::map<Id, std::size_t> hole_rows;

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::size_t row = i + 1;
    if (!hole_rows.emplace(r.hole_id, row).second) {
      throw RecordError(row, "duplicate hole id " +
                        std::to_string(r.hole_id));
    }
    if (!std::isfinite(r.ctf) || r.ctf <= 0.0) {
      throw RecordError(row, "CTF must be positive and finite");
    }
    if (!std::isfinite(r.position.x) || !std::isfinite(r.position.y)) {
      throw RecordError(row, "non-finite position");
    }
    auto [pit, pnew] = patch_parent.emplace(r.patch_id, Parent{r.square_id, row});
    if (!pnew && pit->second.id != r.square_id) {
      throw RecordError(row, "patch " + std::to_string(r.patch_id) +
                        " claims square " + std::to_string(r.square_id) + " but row " +
                        std::to_string(pit->second.row) + " placed it in square " +
                        std::to_string(pit->second.id));
    }
    auto [sit, snew] = square_parent.emplace(r.square_id, Parent{r.grid_id, row});
    if (!snew && sit->second.id != r.grid_id) {
      throw RecordError(row, "square " + std::to_string(r.square_id) +
                        " claims grid " + std::to_string(r.grid_id) + " but row " +
                        std::to_string(sit->second.row) + " placed it in grid " +
                        std::to_string(sit->second.id));
    }
  }

  std::vector<HoleRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const HoleRecord& a, const HoleRecord& b) { return a.hole_id < b.hole_id; });

  Dataset ds;
  std::map<Id, std::vector<Id>> patch_children;
  std::map<Id, std::vector<Id>> square_children;
  std::map<Id, std::vector<Id>> grid_children;
  for (const auto& r : sorted) {
    ds.holes_.push_back(Hole{r.hole_id, r.patch_id, r.position, CtfValue(r.ctf)});
    patch_children[r.patch_id].push_back(r.hole_id);
  }
  for (const auto& [pid, parent] : patch_parent) square_children[parent.id].push_back(pid);
  for (const auto& [sid, parent] : square_parent) grid_children[parent.id].push_back(sid);

  for (auto& [id, kids] : patch_children) {
    ds.patches_.push_back(Patch{id, patch_parent.at(id).id, std::move(kids)});
  }
  for (auto& [id, kids] : square_children) {
    ds.squares_.push_back(Square{id, square_parent.at(id).id, std::move(kids)});
  }
  for (auto& [id, kids] : grid_children) ds.grids_.push_back(Grid{id, std::move(kids)});

  for (Index i = 0; i < ds.holes_.size(); ++i) ds.hole_by_id_.emplace(ds.holes_[i].id, i);
  for (Index i = 0; i < ds.patches_.size(); ++i) ds.patch_by_id_.emplace(ds.patches_[i].id, i);
  for (Index i = 0; i < ds.squares_.size(); ++i) ds.square_by_id_.emplace(ds.squares_[i].id, i);
  for (Index i = 0; i < ds.grids_.size(); ++i) ds.grid_by_id_.emplace(ds.grids_[i].id, i);

  ds.patch_holes_.resize(ds.patches_.size());
  ds.square_patches_.resize(ds.squares_.size());
  ds.grid_squares_.resize(ds.grids_.size());
  ds.patch_square_.resize(ds.patches_.size());
  ds.square_grid_.resize(ds.squares_.size());
  for (Index p = 0; p < ds.patches_.size(); ++p) {
    ds.patch_square_[p] = ds.square_by_id_.at(ds.patches_[p].square_id);
    for (Id h : ds.patches_[p].hole_ids) ds.patch_holes_[p].push_back(ds.hole_by_id_.at(h));
  }
  for (Index s = 0; s < ds.squares_.size(); ++s) {
    ds.square_grid_[s] = ds.grid_by_id_.at(ds.squares_[s].grid_id);
    for (Id p : ds.squares_[s].patch_ids) ds.square_patches_[s].push_back(ds.patch_by_id_.at(p));
  }
  for (Index g = 0; g < ds.grids_.size(); ++g) {
    for (Id s : ds.grids_[g].square_ids) ds.grid_squares_[g].push_back(ds.square_by_id_.at(s));
  }
  ds.lineage_.resize(ds.holes_.size());
  for (Index h = 0; h < ds.holes_.size(); ++h) {
    const Index p = ds.patch_by_id_.at(ds.holes_[h].patch_id);
    const Index s = ds.patch_square_[p];
    ds.lineage_[h] = Lineage{p, s, ds.square_grid_[s]};
  }
  return ds;
}

Index Dataset::hole_index(Id id) const { return lookup(hole_by_id_, id, "hole"); }
Index Dataset::patch_index(Id id) const { return lookup(patch_by_id_, id, "patch"); }
Index Dataset::square_index(Id id) const { return lookup(square_by_id_, id, "square"); }
Index Dataset::grid_index(Id id) const { return lookup(grid_by_id_, id, "grid"); }

std::vector<HoleRecord> Dataset::to_records() const {
  std::vector<HoleRecord> out;
  out.reserve(holes_.size());
  for (Index h = 0; h < holes_.size(); ++h) {
    const auto& lin = lineage_[h];
    out.push_back(HoleRecord{holes_[h].id, grids_[lin.grid].id, squares_[lin.square].id,
                             patches_[lin.patch].id, holes_[h].position,
                             holes_[h].ctf_true.value()});
  }
  return out;
}

double Dataset::low_fraction(double threshold) const {
  if (holes_.empty()) return 0.0;
  const auto n = std::count_if(holes_.begin(), holes_.end(),
                               [&](const Hole& h) { return is_low(h, threshold); });
  return static_cast<double>(n) / static_cast<double>(holes_.size());
}

std::string_view to_string(MoveClass mc) noexcept {
  switch (mc) {
    case MoveClass::SamePatch: return "same_patch";
    case MoveClass::SameSquare: return "same_square";
    case MoveClass::SameGrid: return "same_grid";
    case MoveClass::DifferentGrid: return "different_grid";
  }
  return "?";
}

MoveClass move_class(const Dataset& ds, Index prev, Index next) {
  if (prev >= ds.hole_count() || next >= ds.hole_count()) {
    throw LookupError("hole index out of range");
  }
  const Lineage& a = ds.lineage(prev);
  const Lineage& b = ds.lineage(next);
  if (a.patch == b.patch) return MoveClass::SamePatch;
  if (a.square == b.square) return MoveClass::SameSquare;
  if (a.grid == b.grid) return MoveClass::SameGrid;
  return MoveClass::DifferentGrid;
}

MoveClass move_class_by_id(const Dataset& ds, Id prev, Id next) {
  return move_class(ds, ds.hole_index(prev), ds.hole_index(next));
}

double cost_penalty(double minutes, const PenaltyCurve& curve) {
  if (!(minutes >= curve.t0)) {
    throw DomainError("cost_penalty: t=" + std::to_string(minutes) + " below t0=" +
                      std::to_string(curve.t0));
  }
  return 1.0 - std::exp(-curve.beta * (minutes - curve.t0));
}

void RewardTable::validate() const {
  for (std::size_t i = 1; i < low.size(); ++i) {
    if (low[i] > low[i - 1]) {
      throw ConfigError("reward table must be non-increasing with movement distance");
    }
  }
  for (double r : low) {
    if (!std::isfinite(r)) throw ConfigError("reward table entries must be finite");
    if (high > r) throw ConfigError("high-CTF reward exceeds a low-CTF reward");
  }
  (void)CtfValue(ctf_threshold);
}

RewardTable RewardTable::double_square() {
  RewardTable rt;
  rt.low[static_cast<std::size_t>(MoveClass::SameGrid)] *= 2.0;
  return rt;
}

RewardTable RewardTable::double_grid() {
  RewardTable rt;
  rt.low[static_cast<std::size_t>(MoveClass::DifferentGrid)] *= 2.0;
  return rt;
}

RewardTable RewardTable::double_both() {
  RewardTable rt;
  rt.low[static_cast<std::size_t>(MoveClass::SameGrid)] *= 2.0;
  rt.low[static_cast<std::size_t>(MoveClass::DifferentGrid)] *= 2.0;
  return rt;
}

RewardTable RewardTable::preset(std::string_view name) {
  if (name == "default" || name == "standard") return standard();
  if (name == "double-square") return double_square();
  if (name == "double-grid") return double_grid();
  if (name == "double-both") return double_both();
  throw ConfigError("unknown reward preset '" + std::string(name) + "'");
}

double step_reward(CtfValue ctf, MoveClass mc, const RewardTable& rt) {
  return ctf.value() <= rt.ctf_threshold ? rt[mc] : rt.high;
}

double objective_value(std::span<const TrajectoryStep> traj, const PenaltyCurve& curve) {
  double total = 0.0;
  for (const auto& s : traj) total += (s.low ? 1.0 : 0.0) - cost_penalty(s.cost, curve);
  return total;
}

EpisodeState::EpisodeState(const Dataset& ds, Index start, double budget, RewardTable rewards,
                           StartMode mode)
    : ds_(&ds), rewards_(rewards), start_(start), mode_(mode), current_(start), budget_(budget) {
  if (start >= ds.hole_count()) throw LookupError("start hole index out of range");
  if (!(budget >= 0.0)) throw DomainError("budget must be non-negative");
  rewards_.validate();
  visited_.assign(ds.hole_count(), 0);
  if (mode == StartMode::Seed) visited_[start] = 1;
}

bool EpisodeState::fits(Index h) const {
  return elapsed_ + move_cost(move_class(*ds_, current_, h)) <= budget_ + kBudgetSlack;
}

const TrajectoryStep& EpisodeState::apply(Index h) {
  if (h >= visited_.size()) throw LookupError("hole index out of range");
  if (visited_[h]) {
    throw IllegalAction("hole " + std::to_string(ds_->hole(h).id) + " already visited");
  }
  const MoveClass mc = move_class(*ds_, current_, h);
  const double cost = move_cost(mc);
  if (elapsed_ + cost > budget_ + kBudgetSlack) {
    throw BudgetExceeded("move to hole " + std::to_string(ds_->hole(h).id) + " needs " +
                         std::to_string(cost) + " min, " + std::to_string(remaining()) +
                         " remain");
  }
  const Hole& hole = ds_->hole(h);
  const bool low = is_low(hole, rewards_.ctf_threshold);
  const double r = step_reward(hole.ctf_true, mc, rewards_);
  visited_[h] = 1;
  elapsed_ += cost;
  return_ += r;
  if (low) ++lctf_;
  current_ = h;
  trajectory_.push_back(TrajectoryStep{h, mc, cost, r, low});
  return trajectory_.back();
}

std::vector<Index> EpisodeState::visit_sequence() const {
  std::vector<Index> seq;
  seq.reserve(trajectory_.size() + 1);
  seq.push_back(start_);
  for (const auto& s : trajectory_) seq.push_back(s.hole);
  return seq;
}

EpisodeState new_episode(const Dataset& ds, Id start_hole, double budget, RewardTable rewards) {
  return EpisodeState(ds, ds.hole_index(start_hole), budget, rewards);
}

std::vector<Index> legal_actions(const EpisodeState& st) {
  std::vector<Index> out;
  const Dataset& ds = st.dataset();
  if (st.remaining() + kBudgetSlack < kMinMoveCost) return out;
  for (Index h = 0; h < ds.hole_count(); ++h) {
    if (st.can_visit(h)) out.push_back(h);
  }
  return out;
}

EpisodeState step(const EpisodeState& st, Index hole) {
  EpisodeState next = st;
  next.apply(hole);
  return next;
}

}  // namespace cryoplan
