#pragma once

// Deep Q-learning over hole-selection episodes: experience replay, a target
// network, epsilon-greedy exploration and optional action elimination.
//
// The Q-network scores one (state, candidate) pair per row. Candidates that
// share a patch and a predicted label encode to identical rows, so scoring is
// done once per such group.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "cryoplan/action_elim.hpp"
#include "cryoplan/atlas.hpp"
#include "cryoplan/classifier.hpp"
#include "cryoplan/features.hpp"
#include "cryoplan/qnet.hpp"
#include "cryoplan/rng.hpp"

namespace cryoplan {

using QNet = Mlp<float>;
using FeatureMatrix = QNet::Matrix;

// Static data shared by every episode on one dataset.
class PlanningContext {
 public:
  // `allowed_patches` empty means the full action space.
  PlanningContext(const Dataset& ds, const PredictionTable& pt, FeatureConfig features,
                  RewardTable rewards = {}, std::vector<Index> allowed_patches = {});

  const Dataset& dataset() const noexcept { return *ds_; }
  const PredictionTable& predictions() const noexcept { return *pt_; }
  const FeatureConfig& features() const noexcept { return features_; }
  const RewardTable& rewards() const noexcept { return rewards_; }
  bool restricted() const noexcept { return restricted_; }
  std::span<const Index> allowed_patches() const noexcept { return allowed_patches_; }
  bool patch_allowed(Index p) const { return allowed_mask_[p] != 0; }
  const QualityCounts& base_counts() const noexcept { return base_counts_; }

  // Holes of patch `p` with the given predicted label, ascending.
  std::span<const Index> holes_by_label(Index p, bool pred_low) const {
    return by_label_[2 * p + (pred_low ? 1 : 0)];
  }

 private:
  const Dataset* ds_;
  const PredictionTable* pt_;
  FeatureConfig features_;
  RewardTable rewards_;
  bool restricted_;
  std::vector<Index> allowed_patches_;
  std::vector<std::uint8_t> allowed_mask_;
  std::vector<Index> all_patches_;
  QualityCounts base_counts_;
  std::vector<std::vector<Index>> by_label_;
};

// Candidates sharing (patch, predicted label); `representative` is the
// smallest unvisited hole index of the group.
struct CandidateGroup {
  Index patch;
  bool pred_low;
  MoveClass move;
  Index representative;
  std::uint32_t size;
};

// One episode with its incremental predicted-low counts.
class Rollout {
 public:
  Rollout(const PlanningContext& ctx, Index start, double budget);

  // Rebuilds the state reached by visiting `visits` (seed first).
  static Rollout replay(const PlanningContext& ctx, std::span<const Index> visits, double budget);

  const PlanningContext& context() const noexcept { return *ctx_; }
  const EpisodeState& state() const noexcept { return state_; }
  const QualityCounts& counts() const noexcept { return counts_; }
  std::span<const Index> visits() const noexcept { return visits_; }

  // Allowed-and-legal groups; falls back to the unrestricted legal set when
  // the restriction leaves nothing but budget remains.
  std::vector<CandidateGroup> groups() const;

  // Every hole of `groups()`, ascending.
  std::vector<Index> candidates() const;

  // (state, candidate) features for each group, one row per group.
  FeatureMatrix encode_groups(std::span<const CandidateGroup> groups) const;
  FeatureVector encode(Index candidate) const;

  const TrajectoryStep& apply(Index h);

 private:
  std::vector<CandidateGroup> collect(bool restricted) const;

  const PlanningContext* ctx_;
  EpisodeState state_;
  QualityCounts counts_;
  std::vector<Index> visits_;
  std::vector<std::uint32_t> remaining_;  // unvisited holes per (patch, label)
};

// Epsilon-greedy over `candidates` (uniform with probability eps, otherwise
// argmax Q with ties to the smallest hole id). Throws IllegalAction if empty.
Index select_action(const QNet& net, const Rollout& rollout, std::span<const Index> candidates,
                    double eps, Rng& rng);

// Greedy choice over the rollout's own groups; nullopt when none remain.
std::optional<Index> greedy_action(const QNet& net, const Rollout& rollout);

struct Transition {
  FeatureVector state_action;
  float reward = 0.0f;
  std::vector<Index> next_visits;  // visit sequence of s', seed first
  bool terminal = false;

  // max_a' target(s', a') memo, valid while `memo_generation` matches the
  // learner's target-network generation (generations start at 1).
  mutable std::uint64_t memo_generation = 0;
  mutable double memo_max = 0.0;

  // Candidate feature matrix of s' (one row per candidate group), rebuilt
  // from the compact visit sequence.
  FeatureMatrix next_candidate_features(const PlanningContext& ctx, double budget) const;
};

// r if terminal, otherwise r + gamma * max_a' target(s', a').
double td_target(const Transition& t, const QNet& target_net, double gamma,
                 const PlanningContext& ctx, double budget);

// Fixed-capacity FIFO of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }
  // Oldest-first position i.
  const Transition& oldest(std::size_t i) const { return items_.at((head_ + i) % items_.size()); }
  std::vector<std::size_t> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next overwrite slot once full
  std::vector<Transition> items_;
};

struct TrainConfig {
  double budget = 240.0;
  int epochs = 20;
  int episodes_per_epoch = 50;
  double lr = 0.01;  // initial learning rate
  // Learning rate at the last episode as a fraction of `lr`, reached
  // linearly; 1 keeps it constant.
  double lr_final_fraction = 1.0;
  double gamma = 0.99;
  std::size_t replay_capacity = 20000;
  std::size_t batch_size = 64;
  std::size_t target_sync = 500;  // gradient steps
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_fraction = 0.5;  // of all episodes
  std::uint64_t seed = 0;
  int k = 4;
  RewardTable rewards{};
  ElimConfig elim{};
  // Greedy episodes on the training set after every epoch (fixed starts).
  int eval_episodes = 10;
  // Return the network of the epoch with the best greedy evaluation return
  // instead of the last one.
  bool keep_best = false;

  void validate() const;
  double epsilon(std::size_t episode) const;
  double learning_rate(std::size_t episode) const;
  std::size_t total_episodes() const {
    return static_cast<std::size_t>(epochs) * static_cast<std::size_t>(episodes_per_epoch);
  }
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const RewardTable& r);
void from_json(const nlohmann::json& j, RewardTable& r);
void to_json(nlohmann::json& j, const ClassifierModel& m);
void from_json(const nlohmann::json& j, ClassifierModel& m);

struct EpochMetrics {
  int epoch = 0;
  double mean_return = 0.0;
  double mean_lctf = 0.0;
  double loss = 0.0;  // mean over the epoch's gradient steps
  double epsilon = 0.0;
  std::size_t gradient_steps = 0;
  double eval_return = 0.0;  // greedy, training set
  double eval_lctf = 0.0;
  bool best = false;  // best evaluation return so far
};

void to_json(nlohmann::json& j, const EpochMetrics& m);

struct Policy {
  QNet net;
  FeatureConfig features;
  ElimConfig elim;
  ClassifierModel classifier;
  double train_budget = 240.0;

  void save(const std::filesystem::path& path) const;
  static Policy load(const std::filesystem::path& path);
  void write(std::ostream& out) const;
  static Policy read(std::istream& in);
};

// Small hooks for tests and tooling.
struct TrainHooks {
  std::function<void(const EpochMetrics&)> on_epoch;
  std::function<void(std::size_t gradient_step, double loss)> on_gradient_step;
};

Policy train(const Dataset& ds_train, const ClassifierModel& classifier, const TrainConfig& cfg,
             const TrainHooks& hooks = {});

// Runs a minibatch update on the given transitions; returns the loss before
// the update. Exposed for training-dynamics checks.
class QLearner {
 public:
  QLearner(const PlanningContext& ctx, const TrainConfig& cfg, QNet net);

  double update(std::span<const Transition* const> batch);
  void sync_target();
  void set_learning_rate(double lr) { adam_.lr = lr; }
  const QNet& net() const noexcept { return net_; }
  const QNet& target() const noexcept { return target_; }
  std::size_t gradient_steps() const noexcept { return steps_; }
  // Loss of the current network on `batch` against fresh targets, no update.
  double loss(std::span<const Transition* const> batch) const;

 private:
  std::vector<double> targets(std::span<const Transition* const> batch) const;

  const PlanningContext* ctx_;
  TrainConfig cfg_;
  QNet net_;
  QNet target_;
  AdamState<float> adam_;
  std::size_t steps_ = 0;
  std::uint64_t generation_ = 1;
};

// Context restricted as the policy prescribes at budget `budget`.
PlanningContext make_context(const Dataset& ds, const PredictionTable& pt, const FeatureConfig& fc,
                             const ElimConfig& elim, double beta, double budget,
                             RewardTable rewards = {});

// Greedy rollout from `start` until no candidate fits.
Trajectory run_policy(const Policy& policy, const Dataset& ds, Index start, double budget);
Trajectory run_policy(const Policy& policy, const PlanningContext& ctx, Index start, double budget,
                      std::size_t max_steps = SIZE_MAX);

}  // namespace cryoplan
