#include "cryoplan/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cryoplan/action_elim.hpp"
#include "cryoplan/rng.hpp"

namespace cryoplan {

void validate_plan(const Dataset& ds, std::span<const Index> plan) {
  std::vector<std::uint8_t> seen(ds.patch_count(), 0);
  for (Index p : plan) {
    if (p >= ds.patch_count()) throw LookupError("plan references unknown patch index " + std::to_string(p));
    if (seen[p]) throw DomainError("plan lists patch " + std::to_string(ds.patches()[p].id) + " twice");
    seen[p] = 1;
  }
}

Trajectory execute_plan(std::span<const Index> plan, const Dataset& ds, const PredictionTable& pt,
                        double budget, std::optional<Index> start, const RewardTable& rewards) {
  validate_plan(ds, plan);
  if (pt.size() != ds.hole_count()) throw ShapeError("prediction table does not match dataset");
  std::optional<EpisodeState> st;
  if (start) st.emplace(ds, *start, budget, rewards, StartMode::Seed);
  for (Index p : plan) {
    for (Index h : ds.holes_of_patch(p)) {
      if (!pt.low(h)) continue;
      if (!st) st.emplace(ds, h, budget, rewards, StartMode::Position);
      if (st->visited(h)) continue;
      if (!st->fits(h)) return st->trajectory();
      st->apply(h);
    }
  }
  return st ? st->trajectory() : Trajectory{};
}

PatchPlan greedy_plan(const Dataset& ds, const PredictionTable& pt) { return rank_patches(ds, pt); }

Trajectory random_policy(const Dataset& ds, double budget, std::uint64_t seed, std::optional<Index> start,
                         const RewardTable& rewards) {
  if (ds.hole_count() == 0) return {};
  Rng rng(seed);
  const Index s = start ? *start : static_cast<Index>(rng.below(ds.hole_count()));
  EpisodeState st(ds, s, budget, rewards);
  for (;;) {
    const auto legal = legal_actions(st);
    if (legal.empty()) break;
    st.apply(legal[rng.below(legal.size())]);
  }
  return st.trajectory();
}

double plan_fitness(std::span<const Index> plan, const Dataset& ds, const PredictionTable& pt, double budget,
                    const FitnessSpec& spec) {
  const auto traj = execute_plan(plan, ds, pt, budget);
  if (spec.labels == FitnessLabels::Truth) return objective_value(traj, spec.curve);
  double total = 0.0;
  for (const auto& s : traj) total += (pt.low(s.hole) ? 1.0 : 0.0) - cost_penalty(s.cost, spec.curve);
  return total;
}

std::vector<Index> plannable_patches(const Dataset& ds, const PredictionTable& pt) {
  std::vector<Index> out;
  for (Index p = 0; p < ds.patch_count(); ++p) {
    const auto holes = ds.holes_of_patch(p);
    if (std::any_of(holes.begin(), holes.end(), [&](Index h) { return pt.low(h); })) out.push_back(p);
  }
  return out;
}

void GaConfig::validate() const {
  if (population < 2) throw ConfigError("GA population must be >= 2");
  if (generations < 1) throw ConfigError("GA generations must be >= 1");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ConfigError("GA mutation rate must lie in [0, 1]");
  if (tournament < 1) throw ConfigError("GA tournament size must be >= 1");
  if (elitism < 0 || elitism >= population) throw ConfigError("GA elitism must lie in [0, population)");
}

void SaConfig::validate() const {
  if (!(t_min > 0.0)) throw ConfigError("SA t_min must be > 0");
  if (t_max && !(*t_max > t_min)) throw ConfigError("SA t_max must exceed t_min");
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("SA rate must lie in (0, 1)");
}

namespace {

std::string labels_name(FitnessLabels l) { return l == FitnessLabels::Truth ? "truth" : "predicted"; }

FitnessLabels parse_labels(const std::string& s) {
  if (s == "predicted") return FitnessLabels::Predicted;
  if (s == "truth") return FitnessLabels::Truth;
  throw ConfigError("fitness_labels must be 'predicted' or 'truth'");
}

}  // namespace

void to_json(nlohmann::json& j, const GaConfig& c) {
  j = nlohmann::json{{"generations", c.generations}, {"population", c.population},
                     {"mutation_rate", c.mutation_rate}, {"tournament", c.tournament},
                     {"elitism", c.elitism}, {"seed", c.seed},
                     {"fitness_labels", labels_name(c.fitness.labels)}};
}

void from_json(const nlohmann::json& j, GaConfig& c) {
  GaConfig out = c;
  for (const auto& [key, v] : j.items()) {
    if (key == "generations") out.generations = v.get<int>();
    else if (key == "population") out.population = v.get<int>();
    else if (key == "mutation_rate") out.mutation_rate = v.get<double>();
    else if (key == "tournament") out.tournament = v.get<int>();
    else if (key == "elitism") out.elitism = v.get<int>();
    else if (key == "seed") out.seed = v.get<std::uint64_t>();
    else if (key == "fitness_labels") out.fitness.labels = parse_labels(v.get<std::string>());
    else throw ConfigError("unknown GA config key '" + key + "'");
  }
  out.validate();
  c = out;
}

void to_json(nlohmann::json& j, const SaConfig& c) {
  j = nlohmann::json{{"t_max", c.t_max ? nlohmann::json(*c.t_max) : nlohmann::json(nullptr)},
                     {"t_min", c.t_min}, {"rate", c.rate}, {"seed", c.seed},
                     {"fitness_labels", labels_name(c.fitness.labels)}};
}

void from_json(const nlohmann::json& j, SaConfig& c) {
  SaConfig out = c;
  for (const auto& [key, v] : j.items()) {
    if (key == "t_max") out.t_max = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    else if (key == "t_min") out.t_min = v.get<double>();
    else if (key == "rate") out.rate = v.get<double>();
    else if (key == "seed") out.seed = v.get<std::uint64_t>();
    else if (key == "fitness_labels") out.fitness.labels = parse_labels(v.get<std::string>());
    else throw ConfigError("unknown SA config key '" + key + "'");
  }
  out.validate();
  c = out;
}

PatchPlan crossover(std::span<const Index> a, std::span<const Index> b, std::size_t cut) {
  if (a.size() != b.size()) throw ShapeError("crossover parents differ in length");
  cut = std::min(cut, a.size());
  PatchPlan child(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(cut));
  for (Index g : b) {
    if (std::find(child.begin(), child.end(), g) == child.end()) child.push_back(g);
  }
  if (child.size() != a.size()) throw DomainError("crossover parents are not permutations of one gene set");
  return child;
}

SearchResult ga_search(std::span<const Index> genes, const Dataset& ds, const PredictionTable& pt, double budget,
                       const GaConfig& cfg) {
  cfg.validate();
  SearchResult res;
  res.plan.assign(genes.begin(), genes.end());
  validate_plan(ds, res.plan);
  res.fitness = plan_fitness(res.plan, ds, pt, budget, cfg.fitness);
  if (genes.size() < 2) {
    res.best_history.assign(static_cast<std::size_t>(cfg.generations), res.fitness);
    return res;
  }

  Rng rng(cfg.seed);
  const auto n = static_cast<std::size_t>(cfg.population);
  std::vector<PatchPlan> pop(n, res.plan);
  std::vector<double> fit(n);
  for (auto& ind : pop) rng.shuffle(ind.begin(), ind.end());
  auto evaluate = [&] {
    for (std::size_t i = 0; i < n; ++i) fit[i] = plan_fitness(pop[i], ds, pt, budget, cfg.fitness);
  };
  auto record = [&] {
    const auto best = static_cast<std::size_t>(std::max_element(fit.begin(), fit.end()) - fit.begin());
    if (res.best_history.empty() || fit[best] > res.fitness) {
      res.fitness = fit[best];
      res.plan = pop[best];
    }
    res.best_history.push_back(res.fitness);
  };
  auto tournament = [&]() -> const PatchPlan& {
    std::size_t best = rng.below(n);
    for (int t = 1; t < cfg.tournament; ++t) {
      const std::size_t c = rng.below(n);
      if (fit[c] > fit[best]) best = c;
    }
    return pop[best];
  };

  evaluate();
  res.best_history.clear();
  // The unshuffled gene order is only a placeholder; the record starts with
  // the first generation.
  res.fitness = -std::numeric_limits<double>::infinity();
  record();
  for (int g = 1; g < cfg.generations; ++g) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return fit[x] > fit[y]; });
    std::vector<PatchPlan> next;
    next.reserve(n);
    for (int e = 0; e < cfg.elitism; ++e) next.push_back(pop[order[static_cast<std::size_t>(e)]]);
    while (next.size() < n) {
      const PatchPlan& a = tournament();
      const PatchPlan& b = tournament();
      PatchPlan child = crossover(a, b, 1 + rng.below(genes.size() - 1));
      for (std::size_t i = 0; i < child.size(); ++i) {
        if (rng.uniform() < cfg.mutation_rate) std::swap(child[i], child[rng.below(child.size())]);
      }
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    evaluate();
    record();
  }
  return res;
}

SearchResult ga_search(const Dataset& ds, const PredictionTable& pt, double budget, const GaConfig& cfg) {
  const auto genes = plannable_patches(ds, pt);
  return ga_search(genes, ds, pt, budget, cfg);
}

SearchResult sa_search(std::span<const Index> genes, const Dataset& ds, const PredictionTable& pt, double budget,
                       const SaConfig& cfg) {
  cfg.validate();
  SearchResult res;
  res.plan.assign(genes.begin(), genes.end());
  validate_plan(ds, res.plan);
  if (genes.size() < 2) {
    res.fitness = plan_fitness(res.plan, ds, pt, budget, cfg.fitness);
    return res;
  }
  const double t_max = cfg.t_max.value_or(std::sqrt(static_cast<double>(genes.size())));
  if (!(t_max > cfg.t_min)) throw ConfigError("SA t_max must exceed t_min");

  Rng rng(cfg.seed);
  PatchPlan cur = res.plan;
  rng.shuffle(cur.begin(), cur.end());
  double energy = plan_fitness(cur, ds, pt, budget, cfg.fitness);
  res.plan = cur;
  res.fitness = energy;
  for (double t = t_max; t > cfg.t_min; t *= cfg.rate) {
    const std::size_t i = rng.below(cur.size());
    std::size_t j = rng.below(cur.size() - 1);
    if (j >= i) ++j;
    std::swap(cur[i], cur[j]);
    const double cand = plan_fitness(cur, ds, pt, budget, cfg.fitness);
    const double delta = cand - energy;
    const bool accept = delta >= 0.0 || rng.uniform() < std::exp(delta / t);
    if (accept) {
      energy = cand;
      if (energy > res.fitness) {
        res.fitness = energy;
        res.plan = cur;
      }
    } else {
      std::swap(cur[i], cur[j]);
    }
    res.trace.push_back(SaStep{t, delta, accept});
    res.best_history.push_back(res.fitness);
  }
  return res;
}

SearchResult sa_search(const Dataset& ds, const PredictionTable& pt, double budget, const SaConfig& cfg) {
  const auto genes = plannable_patches(ds, pt);
  return sa_search(genes, ds, pt, budget, cfg);
}

}  // namespace cryoplan
