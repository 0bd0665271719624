#pragma once

// Acquisition hierarchy (grid -> square -> patch -> hole) and the exact
// movement-cost, reward and objective functions of the collection problem.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cryoplan/errors.hpp"

namespace cryoplan {

using Id = std::uint32_t;     // external identifier, as stored in files
using Index = std::uint32_t;  // dense position inside one Dataset

// CTF max-resolution in Angstrom; lower is better.
class CtfValue {
 public:
  explicit CtfValue(double angstrom);
  double value() const noexcept { return value_; }
  friend bool operator==(CtfValue, CtfValue) = default;

 private:
  double value_;
};

struct Position {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Position&, const Position&) = default;
};

struct Hole {
  Id id;
  Id patch_id;
  Position position;
  CtfValue ctf_true;
  friend bool operator==(const Hole&, const Hole&) = default;
};

struct Patch {
  Id id;
  Id square_id;
  std::vector<Id> hole_ids;
  friend bool operator==(const Patch&, const Patch&) = default;
};

struct Square {
  Id id;
  Id grid_id;
  std::vector<Id> patch_ids;
  friend bool operator==(const Square&, const Square&) = default;
};

struct Grid {
  Id id;
  std::vector<Id> square_ids;
  friend bool operator==(const Grid&, const Grid&) = default;
};

struct Lineage {
  Index patch;
  Index square;
  Index grid;
  friend bool operator==(const Lineage&, const Lineage&) = default;
};

// One flat row per hole; the on-disk and generator representation.
struct HoleRecord {
  Id hole_id;
  Id grid_id;
  Id square_id;
  Id patch_id;
  Position position;
  double ctf;
};

// Immutable after construction. Every collection is sorted by id, so index
// order and id order agree everywhere.
class Dataset {
 public:
  Dataset() = default;

  // Validates the hierarchy: unique hole ids, every patch under exactly one
  // square, every square under exactly one grid, positive finite CTF.
  // Throws RecordError with the offending row number (1-based, input order).
  static Dataset from_records(std::span<const HoleRecord> records);

  std::span<const Hole> holes() const noexcept { return holes_; }
  std::span<const Patch> patches() const noexcept { return patches_; }
  std::span<const Square> squares() const noexcept { return squares_; }
  std::span<const Grid> grids() const noexcept { return grids_; }

  std::size_t hole_count() const noexcept { return holes_.size(); }
  std::size_t patch_count() const noexcept { return patches_.size(); }
  std::size_t square_count() const noexcept { return squares_.size(); }
  std::size_t grid_count() const noexcept { return grids_.size(); }

  const Hole& hole(Index h) const { return holes_.at(h); }
  const Lineage& lineage(Index h) const { return lineage_.at(h); }

  std::span<const Index> holes_of_patch(Index p) const { return patch_holes_.at(p); }
  std::span<const Index> patches_of_square(Index s) const { return square_patches_.at(s); }
  std::span<const Index> squares_of_grid(Index g) const { return grid_squares_.at(g); }
  Index square_of_patch(Index p) const { return patch_square_.at(p); }
  Index grid_of_square(Index s) const { return square_grid_.at(s); }
  Index grid_of_patch(Index p) const { return square_grid_.at(patch_square_.at(p)); }

  // Id -> index; throw LookupError for unknown ids.
  Index hole_index(Id id) const;
  Index patch_index(Id id) const;
  Index square_index(Id id) const;
  Index grid_index(Id id) const;
  bool contains_hole(Id id) const { return hole_by_id_.contains(id); }

  std::vector<HoleRecord> to_records() const;

  // Fraction of holes with ctf <= threshold.
  double low_fraction(double threshold = 6.0) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.holes_ == b.holes_ && a.patches_ == b.patches_ && a.squares_ == b.squares_ &&
           a.grids_ == b.grids_;
  }

 private:
  std::vector<Hole> holes_;
  std::vector<Patch> patches_;
  std::vector<Square> squares_;
  std::vector<Grid> grids_;

  std::vector<Lineage> lineage_;
  std::vector<std::vector<Index>> patch_holes_;
  std::vector<std::vector<Index>> square_patches_;
  std::vector<std::vector<Index>> grid_squares_;
  std::vector<Index> patch_square_;
  std::vector<Index> square_grid_;

  std::unordered_map<Id, Index> hole_by_id_;
  std::unordered_map<Id, Index> patch_by_id_;
  std::unordered_map<Id, Index> square_by_id_;
  std::unordered_map<Id, Index> grid_by_id_;
};

// Ordered from nearest to most distant movement.
enum class MoveClass : std::uint8_t { SamePatch = 0, SameSquare = 1, SameGrid = 2, DifferentGrid = 3 };

inline constexpr std::size_t kMoveClassCount = 4;

std::string_view to_string(MoveClass mc) noexcept;

MoveClass move_class(const Dataset& ds, Index prev, Index next);
// Id-based overload for callers holding external identifiers.
MoveClass move_class_by_id(const Dataset& ds, Id prev, Id next);

// Minutes spent moving and settling the stage.
constexpr double move_cost(MoveClass mc) noexcept {
  constexpr std::array<double, kMoveClassCount> minutes{2.0, 3.0, 5.0, 10.0};
  return minutes[static_cast<std::size_t>(mc)];
}

inline constexpr double kMinMoveCost = 2.0;

// c(t) = 1 - exp(-beta (t - t0)).
struct PenaltyCurve {
  double beta = 0.185;
  double t0 = 2.0;
};

double cost_penalty(double minutes, const PenaltyCurve& curve = {});

struct RewardTable {
  std::array<double, kMoveClassCount> low{1.0, 0.57, 0.23, 0.09};
  double high = 0.0;
  double ctf_threshold = 6.0;

  double operator[](MoveClass mc) const noexcept { return low[static_cast<std::size_t>(mc)]; }

  // Throws ConfigError unless low rewards are non-increasing with distance,
  // high <= every low reward and the threshold is a valid CtfValue.
  void validate() const;

  static RewardTable standard() { return {}; }
  // Ablations: double the reward for changing square (SameGrid moves), for
  // changing grid (DifferentGrid moves), or both.
  static RewardTable double_square();
  static RewardTable double_grid();
  static RewardTable double_both();
  static RewardTable preset(std::string_view name);
};

double step_reward(CtfValue ctf, MoveClass mc, const RewardTable& rt);

inline bool is_low(const Hole& h, double threshold = 6.0) noexcept {
  return h.ctf_true.value() <= threshold;
}

struct TrajectoryStep {
  Index hole;
  MoveClass move;
  double cost;
  double reward;
  bool low;  // ground truth ctf <= threshold
};

using Trajectory = std::vector<TrajectoryStep>;

// Sum of (rho - c(t)) over the trajectory.
double objective_value(std::span<const TrajectoryStep> traj, const PenaltyCurve& curve = {});

// Budget comparisons allow for accumulated rounding in fractional budgets.
inline constexpr double kBudgetSlack = 1e-9;

// Single-owner episode. The dataset must outlive the state.
// Seed: the start hole counts as already visited (zero cost, no reward).
// Position: the episode merely begins at the start hole, which stays
// visitable; its first visit is a same-patch move.
enum class StartMode { Seed, Position };

class EpisodeState {
 public:
  EpisodeState(const Dataset& ds, Index start, double budget, RewardTable rewards = {},
               StartMode mode = StartMode::Seed);

  const Dataset& dataset() const noexcept { return *ds_; }
  const RewardTable& rewards() const noexcept { return rewards_; }
  Index start() const noexcept { return start_; }
  StartMode start_mode() const noexcept { return mode_; }
  Index current() const noexcept { return current_; }
  double elapsed() const noexcept { return elapsed_; }
  double budget() const noexcept { return budget_; }
  double remaining() const noexcept { return budget_ - elapsed_; }
  double total_return() const noexcept { return return_; }
  std::size_t lctf_found() const noexcept { return lctf_; }
  const Trajectory& trajectory() const noexcept { return trajectory_; }
  bool visited(Index h) const { return visited_.at(h) != 0; }
  std::span<const std::uint8_t> visited_flags() const noexcept { return visited_; }

  bool fits(Index h) const;
  bool can_visit(Index h) const { return !visited(h) && fits(h); }

  // Visit `h`; throws IllegalAction (visited) or BudgetExceeded.
  const TrajectoryStep& apply(Index h);

  // Holes visited so far, seed first.
  std::vector<Index> visit_sequence() const;

 private:
  const Dataset* ds_;
  RewardTable rewards_;
  Index start_;
  StartMode mode_;
  Index current_;
  double budget_;
  double elapsed_ = 0.0;
  double return_ = 0.0;
  std::size_t lctf_ = 0;
  std::vector<std::uint8_t> visited_;
  Trajectory trajectory_;
};

// The start hole is a zero-cost, zero-reward seed and is not counted.
EpisodeState new_episode(const Dataset& ds, Id start_hole, double budget, RewardTable rewards = {});

// Unvisited holes whose move fits in the remaining budget, ascending.
std::vector<Index> legal_actions(const EpisodeState& st);

EpisodeState step(const EpisodeState& st, Index hole);

}  // namespace cryoplan
