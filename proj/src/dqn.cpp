#include "cryoplan/dqn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <unordered_map>

namespace cryoplan {

namespace {

// Target-network generations are unique process-wide so memoized maxima can
// never be mistaken across learners.
std::uint64_t fresh_generation() {
  static std::atomic<std::uint64_t> next{1};
  return next.fetch_add(1);
}

MoveClass patch_move(const Dataset& ds, Index from_hole, Index patch) {
  const Lineage& cur = ds.lineage(from_hole);
  if (cur.patch == patch) return MoveClass::SamePatch;
  const Index square = ds.square_of_patch(patch);
  if (cur.square == square) return MoveClass::SameSquare;
  if (cur.grid == ds.grid_of_square(square)) return MoveClass::SameGrid;
  return MoveClass::DifferentGrid;
}

// Index of the best-scoring group; ties go to the smallest representative.
std::size_t best_group(const QNet::Vector& q, std::span<const CandidateGroup> groups) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < groups.size(); ++i) {
    if (q[static_cast<Eigen::Index>(i)] > q[static_cast<Eigen::Index>(best)] ||
        (q[static_cast<Eigen::Index>(i)] == q[static_cast<Eigen::Index>(best)] &&
         groups[i].representative < groups[best].representative)) {
      best = i;
    }
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// PlanningContext

PlanningContext::PlanningContext(const Dataset& ds, const PredictionTable& pt, FeatureConfig features,
                                 RewardTable rewards, std::vector<Index> allowed_patches)
    : ds_(&ds),
      pt_(&pt),
      features_(features),
      rewards_(rewards),
      restricted_(!allowed_patches.empty()),
      allowed_patches_(std::move(allowed_patches)),
      allowed_mask_(ds.patch_count(), 0),
      base_counts_(ds, pt),
      by_label_(2 * ds.patch_count()) {
  features_.validate();
  rewards_.validate();
  std::sort(allowed_patches_.begin(), allowed_patches_.end());
  for (Index p : allowed_patches_) {
    if (p >= ds.patch_count()) throw LookupError("allowed patch index out of range");
    allowed_mask_[p] = 1;
  }
  if (allowed_patches_.size() == ds.patch_count()) restricted_ = false;
  if (!restricted_) {
    allowed_patches_.resize(ds.patch_count());
    std::iota(allowed_patches_.begin(), allowed_patches_.end(), Index{0});
    std::fill(allowed_mask_.begin(), allowed_mask_.end(), 1);
  }
  for (Index p = 0; p < ds.patch_count(); ++p) {
    for (Index h : ds.holes_of_patch(p)) by_label_[2 * p + (pt.low(h) ? 1 : 0)].push_back(h);
  }
}

PlanningContext make_context(const Dataset& ds, const PredictionTable& pt, const FeatureConfig& fc,
                             const ElimConfig& elim, double beta, double budget, RewardTable rewards) {
  std::vector<Index> allowed;
  if (elim.enabled) {
    auto e = eliminate_detail(ds, pt, budget, beta);
    if (!e.fallback) allowed = std::move(e.patches);
  }
  return PlanningContext(ds, pt, fc, rewards, std::move(allowed));
}

// ---------------------------------------------------------------------------
// Rollout

Rollout::Rollout(const PlanningContext& ctx, Index start, double budget)
    : ctx_(&ctx),
      state_(ctx.dataset(), start, budget, ctx.rewards()),
      counts_(ctx.base_counts()),
      visits_{start},
      remaining_(2 * ctx.dataset().patch_count()) {
  for (std::size_t i = 0; i < remaining_.size(); ++i) {
    remaining_[i] = static_cast<std::uint32_t>(ctx.holes_by_label(static_cast<Index>(i / 2), i % 2 == 1).size());
  }
  counts_.visit(start);
  --remaining_[2 * ctx.dataset().lineage(start).patch + (ctx.predictions().low(start) ? 1 : 0)];
}

Rollout Rollout::replay(const PlanningContext& ctx, std::span<const Index> visits, double budget) {
  if (visits.empty()) throw IllegalAction("replay needs at least the seed hole");
  Rollout r(ctx, visits.front(), budget);
  for (std::size_t i = 1; i < visits.size(); ++i) r.apply(visits[i]);
  return r;
}

const TrajectoryStep& Rollout::apply(Index h) {
  const auto& step = state_.apply(h);
  counts_.visit(h);
  visits_.push_back(h);
  --remaining_[2 * ctx_->dataset().lineage(h).patch + (ctx_->predictions().low(h) ? 1 : 0)];
  return step;
}

std::vector<CandidateGroup> Rollout::collect(bool restricted) const {
  const Dataset& ds = ctx_->dataset();
  const bool per_hole = ctx_->features().soft_labels;
  std::vector<CandidateGroup> out;
  auto visit_patch = [&](Index p) {
    const MoveClass mc = patch_move(ds, state_.current(), p);
    if (state_.elapsed() + move_cost(mc) > state_.budget() + kBudgetSlack) return;
    for (int label = 0; label < 2; ++label) {
      const std::uint32_t left = remaining_[2 * p + static_cast<std::size_t>(label)];
      if (left == 0) continue;
      const auto holes = ctx_->holes_by_label(p, label == 1);
      if (per_hole) {
        for (Index h : holes) {
          if (!state_.visited(h)) out.push_back(CandidateGroup{p, label == 1, mc, h, 1});
        }
        continue;
      }
      for (Index h : holes) {
        if (!state_.visited(h)) {
          out.push_back(CandidateGroup{p, label == 1, mc, h, left});
          break;
        }
      }
    }
  };
  if (restricted) {
    for (Index p : ctx_->allowed_patches()) visit_patch(p);
  } else {
    for (Index p = 0; p < ds.patch_count(); ++p) visit_patch(p);
  }
  return out;
}

std::vector<CandidateGroup> Rollout::groups() const {
  if (state_.remaining() + kBudgetSlack < kMinMoveCost) return {};
  if (ctx_->restricted()) {
    auto g = collect(true);
    if (!g.empty()) return g;
  }
  return collect(false);
}

std::vector<Index> Rollout::candidates() const {
  std::vector<Index> out;
  const bool per_hole = ctx_->features().soft_labels;
  for (const auto& g : groups()) {
    if (per_hole) {
      out.push_back(g.representative);
      continue;
    }
    for (Index h : ctx_->holes_by_label(g.patch, g.pred_low)) {
      if (!state_.visited(h)) out.push_back(h);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

FeatureMatrix Rollout::encode_groups(std::span<const CandidateGroup> groups) const {
  const auto& fc = ctx_->features();
  const std::size_t dim = fc.dim();
  const std::size_t hist = dim - kStepFeatures;
  FeatureMatrix x(static_cast<Eigen::Index>(groups.size()), static_cast<Eigen::Index>(dim));
  if (groups.empty()) return x;
  std::vector<float> history(hist);
  encode_history(ctx_->dataset(), visits_, ctx_->predictions(), counts_, fc, history);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    float* row = x.row(static_cast<Eigen::Index>(i)).data();
    std::copy(history.begin(), history.end(), row);
    const auto& g = groups[i];
    const float label = label_feature(ctx_->predictions(), g.representative, fc);
    encode_candidate(ctx_->dataset(), g.patch, label, g.move, counts_, fc,
                     std::span<float>(row + hist, kStepFeatures));
  }
  return x;
}

FeatureVector Rollout::encode(Index candidate) const {
  const auto& fc = ctx_->features();
  FeatureVector out(fc.dim());
  encode_history(ctx_->dataset(), visits_, ctx_->predictions(), counts_, fc, out);
  const auto block = encode_step(ctx_->dataset(), candidate, state_.current(), ctx_->predictions(), counts_, fc);
  std::copy(block.begin(), block.end(), out.end() - kStepFeatures);
  return out;
}

// ---------------------------------------------------------------------------
// Action selection

Index select_action(const QNet& net, const Rollout& rollout, std::span<const Index> candidates,
                    double eps, Rng& rng) {
  if (candidates.empty()) throw IllegalAction("select_action: no candidates");
  const double u = rng.uniform();
  if (u < eps) return candidates[rng.below(candidates.size())];

  const PlanningContext& ctx = rollout.context();
  const Dataset& ds = ctx.dataset();
  const bool per_hole = ctx.features().soft_labels;
  std::vector<CandidateGroup> groups;
  std::unordered_map<std::uint64_t, std::size_t> slot;
  for (Index h : candidates) {
    const Index p = ds.lineage(h).patch;
    const bool low = ctx.predictions().low(h);
    const std::uint64_t key = per_hole ? (std::uint64_t{1} << 40) + h : 2ULL * p + (low ? 1 : 0);
    auto [it, fresh] = slot.emplace(key, groups.size());
    if (fresh) {
      groups.push_back(CandidateGroup{p, low, patch_move(ds, rollout.state().current(), p), h, 1});
    } else {
      auto& g = groups[it->second];
      g.representative = std::min(g.representative, h);
      ++g.size;
    }
  }
  const auto q = net.forward(rollout.encode_groups(groups));
  return groups[best_group(q, groups)].representative;
}

std::optional<Index> greedy_action(const QNet& net, const Rollout& rollout) {
  const auto groups = rollout.groups();
  if (groups.empty()) return std::nullopt;
  const auto q = net.forward(rollout.encode_groups(groups));
  return groups[best_group(q, groups)].representative;
}

// ---------------------------------------------------------------------------
// Transitions and replay

FeatureMatrix Transition::next_candidate_features(const PlanningContext& ctx, double budget) const {
  const auto next = Rollout::replay(ctx, next_visits, budget);
  return next.encode_groups(next.groups());
}

double td_target(const Transition& t, const QNet& target_net, double gamma, const PlanningContext& ctx,
                 double budget) {
  if (t.terminal) return t.reward;
  const auto x = t.next_candidate_features(ctx, budget);
  if (x.rows() == 0) return t.reward;
  return t.reward + gamma * static_cast<double>(target_net.forward(x).maxCoeff());
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be > 0");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw IllegalAction("cannot sample from an empty replay buffer");
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = rng.below(items_.size());
  return idx;
}

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  if (!(budget >= 0.0)) throw ConfigError("training budget must be >= 0");
  if (epochs < 1 || episodes_per_epoch < 1) throw ConfigError("epochs and episodes_per_epoch must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0)) {
    throw ConfigError("lr_final_fraction must lie in (0, 1]");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (replay_capacity == 0 || batch_size == 0 || target_sync == 0) {
    throw ConfigError("replay capacity, batch size and target sync must be > 0");
  }
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(eps_start) || !prob(eps_end)) throw ConfigError("epsilon must lie in [0, 1]");
  if (!(eps_decay_fraction > 0.0 && eps_decay_fraction <= 1.0)) {
    throw ConfigError("eps_decay_fraction must lie in (0, 1]");
  }
  if (k < 1) throw ConfigError("k must be >= 1");
  if (eval_episodes < 0) throw ConfigError("eval_episodes must be >= 0");
  if (keep_best && eval_episodes == 0) throw ConfigError("keep_best needs eval_episodes > 0");
  rewards.validate();
  elim.validate();
}

double TrainConfig::epsilon(std::size_t episode) const {
  const double horizon = eps_decay_fraction * static_cast<double>(total_episodes());
  const double frac = horizon > 0.0 ? std::min(1.0, static_cast<double>(episode) / horizon) : 1.0;
  return eps_start + (eps_end - eps_start) * frac;
}

double TrainConfig::learning_rate(std::size_t episode) const {
  const std::size_t n = total_episodes();
  const double frac = n > 1 ? static_cast<double>(std::min(episode, n - 1)) / static_cast<double>(n - 1) : 0.0;
  return lr * (1.0 + (lr_final_fraction - 1.0) * frac);
}

void to_json(nlohmann::json& j, const RewardTable& r) {
  j = nlohmann::json{{"low", r.low}, {"high", r.high}, {"ctf_threshold", r.ctf_threshold}};
}

void from_json(const nlohmann::json& j, RewardTable& r) {
  r.low = j.at("low").get<std::array<double, kMoveClassCount>>();
  r.high = j.at("high").get<double>();
  r.ctf_threshold = j.at("ctf_threshold").get<double>();
  r.validate();
}

void to_json(nlohmann::json& j, const ClassifierModel& m) {
  j = nlohmann::json{{"name", m.name},
                     {"low_recall", m.low_recall},
                     {"high_recall", m.high_recall},
                     {"seed", m.seed},
                     {"ctf_threshold", m.ctf_threshold}};
}

void from_json(const nlohmann::json& j, ClassifierModel& m) {
  m.name = j.at("name").get<std::string>();
  m.low_recall = j.at("low_recall").get<double>();
  m.high_recall = j.at("high_recall").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.ctf_threshold = j.value("ctf_threshold", 6.0);
  m.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"budget", c.budget},
                     {"epochs", c.epochs},
                     {"episodes_per_epoch", c.episodes_per_epoch},
                     {"lr", c.lr},
                     {"lr_final_fraction", c.lr_final_fraction},
                     {"gamma", c.gamma},
                     {"replay_capacity", c.replay_capacity},
                     {"batch_size", c.batch_size},
                     {"target_sync", c.target_sync},
                     {"eps_start", c.eps_start},
                     {"eps_end", c.eps_end},
                     {"eps_decay_fraction", c.eps_decay_fraction},
                     {"seed", c.seed},
                     {"k", c.k},
                     {"rewards", c.rewards},
                     {"elim", c.elim},
                     {"eval_episodes", c.eval_episodes},
                     {"keep_best", c.keep_best}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig out = c;
  for (const auto& [key, v] : j.items()) {
    if (key == "budget") out.budget = v.get<double>();
    else if (key == "epochs") out.epochs = v.get<int>();
    else if (key == "episodes_per_epoch") out.episodes_per_epoch = v.get<int>();
    else if (key == "lr") out.lr = v.get<double>();
    else if (key == "lr_final_fraction") out.lr_final_fraction = v.get<double>();
    else if (key == "gamma") out.gamma = v.get<double>();
    else if (key == "replay_capacity") out.replay_capacity = v.get<std::size_t>();
    else if (key == "batch_size") out.batch_size = v.get<std::size_t>();
    else if (key == "target_sync") out.target_sync = v.get<std::size_t>();
    else if (key == "eps_start") out.eps_start = v.get<double>();
    else if (key == "eps_end") out.eps_end = v.get<double>();
    else if (key == "eps_decay_fraction") out.eps_decay_fraction = v.get<double>();
    else if (key == "seed") out.seed = v.get<std::uint64_t>();
    else if (key == "k") out.k = v.get<int>();
    else if (key == "rewards") out.rewards = v.get<RewardTable>();
    else if (key == "elim") out.elim = v.get<ElimConfig>();
    else if (key == "eval_episodes") out.eval_episodes = v.get<int>();
    else if (key == "keep_best") out.keep_best = v.get<bool>();
    else throw ConfigError("unknown training config key '" + key + "'");
  }
  out.validate();
  c = out;
}

void to_json(nlohmann::json& j, const EpochMetrics& m) {
  j = nlohmann::json{{"epoch", m.epoch},
                     {"mean_return", m.mean_return},
                     {"mean_lctf", m.mean_lctf},
                     {"loss", m.loss},
                     {"epsilon", m.epsilon},
                     {"gradient_steps", m.gradient_steps},
                     {"eval_return", m.eval_return},
                     {"eval_lctf", m.eval_lctf},
                     {"best", m.best}};
}

// ---------------------------------------------------------------------------
// Policy container

namespace {

constexpr char kPolicyMagic[4] = {'C', 'P', 'P', 'L'};
constexpr std::uint32_t kPolicyVersion = 1;

}  // namespace

void Policy::write(std::ostream& out) const {
  const nlohmann::json meta{{"features", features},
                            {"elim", elim},
                            {"classifier", classifier},
                            {"train_budget", train_budget}};
  const std::string text = meta.dump();
  out.write(kPolicyMagic, 4);
  const std::uint32_t version = kPolicyVersion;
  const auto len = static_cast<std::uint32_t>(text.size());
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  net.write(out);
}

Policy Policy::read(std::istream& in) {
  char magic[4];
  std::uint32_t version = 0, len = 0;
  if (!in.read(magic, 4) || std::memcmp(magic, kPolicyMagic, 4) != 0) {
    throw FormatError("not a policy file (bad magic)");
  }
  if (!in.read(reinterpret_cast<char*>(&version), sizeof version)) throw FormatError("policy file truncated");
  if (version != kPolicyVersion) {
    throw FormatError("policy file version " + std::to_string(version) + ", expected " +
                      std::to_string(kPolicyVersion));
  }
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1u << 24)) {
    throw FormatError("policy file truncated");
  }
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw FormatError("policy file truncated");
  Policy p;
  try {
    const auto meta = nlohmann::json::parse(text);
    p.features = meta.at("features").get<FeatureConfig>();
    p.elim = meta.at("elim").get<ElimConfig>();
    p.classifier = meta.at("classifier").get<ClassifierModel>();
    p.train_budget = meta.at("train_budget").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("policy metadata: ") + e.what());
  }
  p.net = QNet::read(in, static_cast<int>(p.features.dim()));
  return p;
}

void Policy::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write(out);
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Policy Policy::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read(in);
}

// ---------------------------------------------------------------------------
// Learning

QLearner::QLearner(const PlanningContext& ctx, const TrainConfig& cfg, QNet net)
    : ctx_(&ctx), cfg_(cfg), net_(std::move(net)), target_(net_), adam_(net_, cfg.lr) {
  if (net_.input_dim() != static_cast<int>(ctx.features().dim())) {
    throw ShapeError("network input dim does not match feature configuration");
  }
  generation_ = fresh_generation();
}

void QLearner::sync_target() {
  target_ = net_;
  generation_ = fresh_generation();
}

std::vector<double> QLearner::targets(std::span<const Transition* const> batch) const {
  // Next-state candidate rows of every transition without a valid memo are
  // stacked into one matrix and scored with a single forward pass.
  std::vector<const Transition*> pending;
  for (const Transition* t : batch) {
    if (t->terminal || t->memo_generation == generation_) continue;
    if (std::find(pending.begin(), pending.end(), t) == pending.end()) pending.push_back(t);
  }
  if (!pending.empty()) {
    std::vector<FeatureMatrix> blocks;
    blocks.reserve(pending.size());
    Eigen::Index rows = 0;
    for (const Transition* t : pending) {
      blocks.push_back(t->next_candidate_features(*ctx_, cfg_.budget));
      rows += blocks.back().rows();
    }
    FeatureMatrix stacked(rows, static_cast<Eigen::Index>(ctx_->features().dim()));
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
      stacked.middleRows(at, b.rows()) = b;
      at += b.rows();
    }
    const auto q = rows > 0 ? target_.forward(stacked) : QNet::Vector();
    at = 0;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      const Eigen::Index n = blocks[i].rows();
      pending[i]->memo_max = n > 0 ? static_cast<double>(q.segment(at, n).maxCoeff()) : 0.0;
      pending[i]->memo_generation = generation_;
      at += n;
    }
  }
  std::vector<double> y;
  y.reserve(batch.size());
  for (const Transition* t : batch) {
    y.push_back(t->terminal ? t->reward : t->reward + cfg_.gamma * t->memo_max);
  }
  return y;
}

double QLearner::loss(std::span<const Transition* const> batch) const {
  const auto y = targets(batch);
  const Eigen::Index dim = static_cast<Eigen::Index>(ctx_->features().dim());
  FeatureMatrix x(static_cast<Eigen::Index>(batch.size()), dim);
  QNet::Vector yv(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXf>(batch[i]->state_action.data(), dim);
    yv[static_cast<Eigen::Index>(i)] = static_cast<float>(y[i]);
  }
  return mse_loss<float>(net_.forward(x), yv).loss;
}

double QLearner::update(std::span<const Transition* const> batch) {
  const auto y = targets(batch);
  const Eigen::Index dim = static_cast<Eigen::Index>(ctx_->features().dim());
  FeatureMatrix x(static_cast<Eigen::Index>(batch.size()), dim);
  QNet::Vector yv(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXf>(batch[i]->state_action.data(), dim);
    yv[static_cast<Eigen::Index>(i)] = static_cast<float>(y[i]);
  }
  QNet::Workspace ws;
  const auto q = net_.forward(x, ws);
  const auto mse = mse_loss<float>(q, yv);
  const auto grads = net_.backward(ws, mse.grad);
  adam_step(net_, grads, adam_);
  ++steps_;
  if (steps_ % cfg_.target_sync == 0) sync_target();
  return mse.loss;
}

Policy train(const Dataset& ds_train, const ClassifierModel& classifier, const TrainConfig& cfg,
             const TrainHooks& hooks) {
  cfg.validate();
  if (ds_train.hole_count() == 0) throw ConfigError("training dataset is empty");
  const auto pt = predict_all(ds_train, classifier);
  const auto fc = FeatureConfig::from_dataset(ds_train, pt, cfg.k);
  const auto ctx = make_context(ds_train, pt, fc, cfg.elim, cfg.elim.beta_train, cfg.budget, cfg.rewards);
  const auto eval_ctx = make_context(ds_train, pt, fc, cfg.elim, cfg.elim.beta_test, cfg.budget, cfg.rewards);
  std::vector<Index> eval_starts;
  for (int i = 0; i < cfg.eval_episodes; ++i) {
    eval_starts.push_back(static_cast<Index>(keyed_bits(cfg.seed, static_cast<std::uint64_t>(i), 3) % ds_train.hole_count()));
  }
  std::optional<QNet> best_net;
  double best_return = -std::numeric_limits<double>::infinity();

  Rng rng(cfg.seed);
  QLearner learner(ctx, cfg, QNet(qnet_sizes(static_cast<int>(fc.dim())), mix64(cfg.seed ^ 0x51ULL)));
  ReplayBuffer replay(cfg.replay_capacity);
  std::vector<const Transition*> batch(cfg.batch_size);

  std::size_t episode = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch + 1;
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    for (int e = 0; e < cfg.episodes_per_epoch; ++e, ++episode) {
      const double eps = cfg.epsilon(episode);
      learner.set_learning_rate(cfg.learning_rate(episode));
      m.epsilon = eps;
      Rollout rollout(ctx, static_cast<Index>(rng.below(ds_train.hole_count())), cfg.budget);
      auto groups = rollout.groups();
      while (!groups.empty()) {
        Index action;
        if (rng.uniform() < eps) {
          const auto cands = rollout.candidates();
          action = cands[rng.below(cands.size())];
        } else {
          const auto q = learner.net().forward(rollout.encode_groups(groups));
          action = groups[best_group(q, groups)].representative;
        }
        Transition t;
        t.state_action = rollout.encode(action);
        t.reward = static_cast<float>(rollout.apply(action).reward);
        t.next_visits.assign(rollout.visits().begin(), rollout.visits().end());
        groups = rollout.groups();
        t.terminal = groups.empty();
        replay.push(std::move(t));

        if (replay.size() >= cfg.batch_size) {
          const auto idx = replay.sample(cfg.batch_size, rng);
          for (std::size_t i = 0; i < idx.size(); ++i) batch[i] = &replay.at(idx[i]);
          const double loss = learner.update(batch);
          loss_sum += loss;
          ++loss_n;
          if (hooks.on_gradient_step) hooks.on_gradient_step(learner.gradient_steps(), loss);
        }
      }
      m.mean_return += rollout.state().total_return();
      m.mean_lctf += static_cast<double>(rollout.state().lctf_found());
    }
    m.mean_return /= cfg.episodes_per_epoch;
    m.mean_lctf /= cfg.episodes_per_epoch;
    m.loss = loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0;
    m.gradient_steps = learner.gradient_steps();
    if (!eval_starts.empty()) {
      for (Index start : eval_starts) {
        Rollout r(eval_ctx, start, cfg.budget);
        while (const auto a = greedy_action(learner.net(), r)) r.apply(*a);
        m.eval_return += r.state().total_return();
        m.eval_lctf += static_cast<double>(r.state().lctf_found());
      }
      m.eval_return /= static_cast<double>(eval_starts.size());
      m.eval_lctf /= static_cast<double>(eval_starts.size());
      if (m.eval_return > best_return) {
        best_return = m.eval_return;
        m.best = true;
        if (cfg.keep_best) best_net = learner.net();
      }
    }
    if (hooks.on_epoch) hooks.on_epoch(m);
  }
  if (!learner.net().all_finite()) throw Error("training diverged: non-finite network parameters");

  Policy policy;
  policy.net = best_net ? std::move(*best_net) : learner.net();
  policy.features = fc;
  policy.elim = cfg.elim;
  policy.classifier = classifier;
  policy.train_budget = cfg.budget;
  return policy;
}

// ---------------------------------------------------------------------------
// Inference

Trajectory run_policy(const Policy& policy, const PlanningContext& ctx, Index start, double budget,
                      std::size_t max_steps) {
  Rollout rollout(ctx, start, budget);
  while (rollout.state().trajectory().size() < max_steps) {
    const auto action = greedy_action(policy.net, rollout);
    if (!action) break;
    rollout.apply(*action);
  }
  return rollout.state().trajectory();
}

Trajectory run_policy(const Policy& policy, const Dataset& ds, Index start, double budget) {
  const auto pt = predict_all(ds, policy.classifier);
  const auto ctx = make_context(ds, pt, policy.features, policy.elim, policy.elim.beta_test, budget);
  return run_policy(policy, ctx, start, budget);
}

}  // namespace cryoplan
