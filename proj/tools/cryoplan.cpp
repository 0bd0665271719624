// cryoplan: generate datasets, train and evaluate planners, serve the
// human benchmark.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "cryoplan/baselines.hpp"
#include "cryoplan/dataset_io.hpp"
#include "cryoplan/dqn.hpp"
#include "cryoplan/eval.hpp"
#include "cryoplan/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cryoplan;

namespace {

// Bad flag values or configs: reported like parse errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t fnv1a(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 15];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

json input_record(const fs::path& path) {
  return {{"path", path.string()}, {"fnv1a64", fmt::format("{:016x}", fnv1a(path))}};
}

// Config file or a previous run's manifest; returns the config object.
json load_config(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw UsageError("config '" + path + "' is not a JSON object");
  if (doc.contains("command") && doc.contains("config")) {
    if (doc["command"] != command) {
      throw UsageError(fmt::format("manifest '{}' is for command '{}'", path, doc["command"].get<std::string>()));
    }
    return doc["config"];
  }
  return doc;
}

void write_manifest(const fs::path& path, const std::string& command, const json& config, const json& seeds,
                    const json& inputs, const json& artifacts, const std::string& started) {
  json m{{"command", command},   {"tool_version", kToolVersion}, {"config", config},
         {"seeds", seeds},       {"inputs", inputs},             {"artifacts", artifacts},
         {"started_at", started}, {"finished_at", utc_now()}};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << m.dump(2) << '\n';
}

template <class T>
T pick(const json& cfg, const char* key, T fallback) {
  return cfg.contains(key) && !cfg[key].is_null() ? cfg[key].get<T>() : fallback;
}

bool parse_on_off(const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw UsageError("expected on|off, got '" + v + "'");
}

// ---------------------------------------------------------------------------
// gen

struct GenFlags {
  std::string config, out, preset = "y1", split, manifest;
  std::uint64_t seed = 0;
};

void add_gen(CLI::App& app, GenFlags& f) {
  app.add_option("--config", f.config, "Config or manifest JSON");
  app.add_option("--preset", f.preset, "y1 | custom (custom reads \"generator\" from --config)")
      ->check(CLI::IsMember({"y1", "custom"}));
  app.add_option("--seed", f.seed, "Generator seed");
  app.add_option("--out", f.out, "Output CSV path");
  app.add_option("--split", f.split, "Also write square-disjoint parts, e.g. 2:1");
  app.add_option("--manifest", f.manifest, "Manifest path (default <out>.manifest.json)");
}

int run_gen(CLI::App& app, const GenFlags& f) {
  const std::string started = utc_now();
  json cfg = f.config.empty() ? json::object() : load_config(f.config, "gen");
  if (app.count("--preset")) cfg["preset"] = f.preset;
  if (app.count("--seed")) cfg["seed"] = f.seed;
  if (app.count("--out")) cfg["out"] = f.out;
  if (app.count("--split")) cfg["split"] = f.split;
  const std::string preset = pick<std::string>(cfg, "preset", "y1");
  const auto seed = pick<std::uint64_t>(cfg, "seed", 0);
  const std::string out = pick<std::string>(cfg, "out", "");
  if (out.empty()) throw UsageError("--out is required");

  GenConfig gen;
  if (preset == "y1") {
    gen = GenConfig::y1(seed);
  } else if (preset == "custom") {
    if (!cfg.contains("generator")) throw UsageError("preset custom needs a \"generator\" object in --config");
    gen = cfg["generator"].get<GenConfig>();
    gen.seed = seed;
  } else {
    throw UsageError("unknown preset '" + preset + "'");
  }
  cfg["preset"] = preset;
  cfg["seed"] = seed;
  cfg["generator"] = gen;

  const Dataset ds = generate(gen);
  save(ds, out);
  json artifacts = json::array({out});
  fmt::print("wrote {}: {} holes, {} patches, {} squares, {} grids, low fraction {:.4f}\n", out, ds.hole_count(),
             ds.patch_count(), ds.square_count(), ds.grid_count(), ds.low_fraction(6.0));
  if (const std::string sp = pick<std::string>(cfg, "split", ""); !sp.empty()) {
    const auto [a, b] = split(ds, parse_split(sp), seed);
    const fs::path base = fs::path(out).replace_extension();
    const std::string pa = base.string() + ".train.csv", pb = base.string() + ".val.csv";
    save(a, pa);
    save(b, pb);
    artifacts.push_back(pa);
    artifacts.push_back(pb);
    fmt::print("split {}: {} ({} holes, {} squares), {} ({} holes, {} squares)\n", sp, pa, a.hole_count(),
               a.square_count(), pb, b.hole_count(), b.square_count());
  }
  write_manifest(f.manifest.empty() ? out + ".manifest.json" : f.manifest, "gen", cfg, {{"generator", seed}},
                 json::array(), artifacts, started);
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainFlags {
  std::string config, data, classifier = "r50", elim = "on", out, metrics, manifest;
  std::uint64_t seed = 0, classifier_seed = 0;
  double duration = 240.0, lr = 0.01, lr_final = 1.0, beta_train = 2.5, beta_test = 1.5, gamma = 0.99;
  int epochs = 20, episodes = 50;
  bool keep_best = false;
};

void add_train(CLI::App& app, TrainFlags& f) {
  app.add_option("--config", f.config, "Config or manifest JSON");
  app.add_option("--data", f.data, "Training dataset CSV");
  app.add_option("--classifier", f.classifier, "gt | r50 | r18 | m | custom(low,high)");
  app.add_option("--classifier-seed", f.classifier_seed, "Seed of the simulated classifier");
  app.add_option("--duration", f.duration, "Episode budget in minutes");
  app.add_option("--epochs", f.epochs, "Training epochs");
  app.add_option("--episodes-per-epoch", f.episodes, "Episodes per epoch");
  app.add_option("--lr", f.lr, "Initial Adam learning rate");
  app.add_option("--lr-final-fraction", f.lr_final, "Last-episode learning rate as a fraction of --lr");
  app.add_flag("--keep-best", f.keep_best, "Keep the epoch with the best greedy evaluation return");
  app.add_option("--gamma", f.gamma, "Discount factor");
  app.add_option("--elim", f.elim, "Action elimination on|off");
  app.add_option("--beta-train", f.beta_train, "Elimination coverage factor during training");
  app.add_option("--beta-test", f.beta_test, "Elimination coverage factor at evaluation");
  app.add_option("--seed", f.seed, "Training seed");
  app.add_option("--out", f.out, "Output policy file");
  app.add_option("--metrics", f.metrics, "Metrics stream (JSON lines, default <out>.metrics.jsonl)");
  app.add_option("--manifest", f.manifest, "Manifest path (default <out>.manifest.json)");
}

int run_train(CLI::App& app, const TrainFlags& f) {
  const std::string started = utc_now();
  json cfg = f.config.empty() ? json::object() : load_config(f.config, "train");
  TrainConfig tc;
  if (cfg.contains("train")) tc = cfg["train"].get<TrainConfig>();
  if (app.count("--duration")) tc.budget = f.duration;
  if (app.count("--epochs")) tc.epochs = f.epochs;
  if (app.count("--episodes-per-epoch")) tc.episodes_per_epoch = f.episodes;
  if (app.count("--lr")) tc.lr = f.lr;
  if (app.count("--lr-final-fraction")) tc.lr_final_fraction = f.lr_final;
  if (app.count("--keep-best")) tc.keep_best = f.keep_best;
  if (app.count("--gamma")) tc.gamma = f.gamma;
  if (app.count("--elim")) tc.elim.enabled = parse_on_off(f.elim);
  if (app.count("--beta-train")) tc.elim.beta_train = f.beta_train;
  if (app.count("--beta-test")) tc.elim.beta_test = f.beta_test;
  if (app.count("--seed")) tc.seed = f.seed;
  try {
    tc.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (app.count("--data")) cfg["data"] = f.data;
  if (app.count("--classifier")) cfg["classifier"] = f.classifier;
  if (app.count("--classifier-seed")) cfg["classifier_seed"] = f.classifier_seed;
  if (app.count("--out")) cfg["out"] = f.out;
  if (app.count("--metrics")) cfg["metrics"] = f.metrics;
  const std::string data = pick<std::string>(cfg, "data", "");
  const std::string out = pick<std::string>(cfg, "out", "");
  if (data.empty()) throw UsageError("--data is required");
  if (out.empty()) throw UsageError("--out is required");
  const std::string metrics = pick<std::string>(cfg, "metrics", out + ".metrics.jsonl");
  const auto cls_seed = pick<std::uint64_t>(cfg, "classifier_seed", 0);
  ClassifierModel cls;
  try {
    cls = ClassifierModel::parse(pick<std::string>(cfg, "classifier", "r50"), cls_seed);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  cfg["classifier"] = cls.spec();
  cfg["classifier_seed"] = cls_seed;
  cfg["metrics"] = metrics;
  cfg["train"] = tc;

  const Dataset ds = load(data);
  std::ofstream mout(metrics);
  if (!mout) throw IoError("cannot write metrics '" + metrics + "'");
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochMetrics& m) {
    mout << json(m).dump() << '\n';
    mout.flush();
    fmt::print("epoch {:>3}  return {:8.3f}  lctf {:7.2f}  loss {:9.4f}  eps {:.3f}\n", m.epoch, m.mean_return,
               m.mean_lctf, m.loss, m.epsilon);
  };
  const Policy policy = train(ds, cls, tc, hooks);
  policy.save(out);
  fmt::print("wrote {}\n", out);
  write_manifest(f.manifest.empty() ? out + ".manifest.json" : f.manifest, "train", cfg,
                 {{"train", tc.seed}, {"classifier", cls_seed}}, json::array({input_record(data)}),
                 json::array({out, metrics}), started);
  return 0;
}

// ---------------------------------------------------------------------------
// eval / compare

struct EvalFlags {
  std::string config, data, model, classifier = "r50", out, manifest, ga_config, sa_config;
  std::vector<std::string> policies;
  std::vector<double> budgets;
  int trials = 50, workers = 1;
  std::uint64_t seed = 0, classifier_seed = 0;
};

void add_eval(CLI::App& app, EvalFlags& f, bool many) {
  app.add_option("--config", f.config, "Config or manifest JSON");
  app.add_option("--data", f.data, "Evaluation dataset CSV");
  if (many) {
    app.add_option("--policies", f.policies, "Comma-separated: dqn,greedy,ga,sa,random")->delimiter(',');
  } else {
    app.add_option("--policy", f.policies, "dqn | greedy | ga | sa | random")->expected(1);
  }
  app.add_option("--model", f.model, "Trained policy file (for dqn)");
  app.add_option("--classifier", f.classifier, "Classifier for greedy/ga/sa (default: the model's, else r50)");
  app.add_option("--classifier-seed", f.classifier_seed, "Seed of the simulated classifier");
  app.add_option("--budgets", f.budgets, "Comma-separated budgets in minutes")->delimiter(',');
  app.add_option("--trials", f.trials, "Trials per budget");
  app.add_option("--seed", f.seed, "Seed of start holes and random trials");
  app.add_option("--workers", f.workers, "Parallel trial workers");
  app.add_option("--ga-config", f.ga_config, "GA config JSON");
  app.add_option("--sa-config", f.sa_config, "SA config JSON");
  app.add_option("--out", f.out, "Report directory");
  app.add_option("--manifest", f.manifest, "Manifest path (default <out>/manifest.json)");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw UsageError("'" + path + "' is not valid JSON");
  return j;
}

int run_eval(CLI::App& app, const EvalFlags& f, const std::string& command) {
  const std::string started = utc_now();
  json cfg = f.config.empty() ? json::object() : load_config(f.config, command);
  const bool many = command == "compare";
  if (app.count(many ? "--policies" : "--policy")) cfg["policies"] = f.policies;
  if (app.count("--data")) cfg["data"] = f.data;
  if (app.count("--model")) cfg["model"] = f.model;
  if (app.count("--classifier")) cfg["classifier"] = f.classifier;
  if (app.count("--classifier-seed")) cfg["classifier_seed"] = f.classifier_seed;
  if (app.count("--out")) cfg["out"] = f.out;
  if (app.count("--ga-config")) cfg["ga"] = read_json_file(f.ga_config);
  if (app.count("--sa-config")) cfg["sa"] = read_json_file(f.sa_config);

  EvalConfig ec;
  if (cfg.contains("eval")) ec = cfg["eval"].get<EvalConfig>();
  if (app.count("--budgets")) ec.budgets = f.budgets;
  if (app.count("--trials")) ec.trials = f.trials;
  if (app.count("--seed")) ec.seed = f.seed;
  if (app.count("--workers")) ec.workers = f.workers;
  GaConfig ga;
  SaConfig sa;
  try {
    ec.validate();
    if (cfg.contains("ga")) ga = cfg["ga"].get<GaConfig>();
    if (cfg.contains("sa")) sa = cfg["sa"].get<SaConfig>();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  cfg["eval"] = ec;
  cfg["ga"] = ga;
  cfg["sa"] = sa;

  const auto policies = pick<std::vector<std::string>>(cfg, "policies", many ? std::vector<std::string>{"dqn", "greedy", "ga", "sa", "random"} : std::vector<std::string>{});
  if (policies.empty()) throw UsageError(many ? "--policies is empty" : "--policy is required");
  for (const auto& p : policies) {
    if (p != "dqn" && p != "greedy" && p != "ga" && p != "sa" && p != "random") {
      throw UsageError("unknown policy '" + p + "'");
    }
  }
  const std::string data = pick<std::string>(cfg, "data", "");
  const std::string out = pick<std::string>(cfg, "out", "");
  const std::string model = pick<std::string>(cfg, "model", "");
  if (data.empty()) throw UsageError("--data is required");
  if (out.empty()) throw UsageError("--out is required");
  const bool wants_dqn = std::find(policies.begin(), policies.end(), "dqn") != policies.end();
  if (wants_dqn && model.empty()) throw UsageError("policy dqn needs --model");

  json inputs = json::array({input_record(data)});
  std::optional<Policy> policy;
  if (!model.empty()) {
    policy = Policy::load(model);
    inputs.push_back(input_record(model));
  }
  const auto cls_seed = pick<std::uint64_t>(cfg, "classifier_seed", policy ? policy->classifier.seed : 0);
  ClassifierModel cls;
  try {
    cls = cfg.contains("classifier") ? ClassifierModel::parse(cfg["classifier"].get<std::string>(), cls_seed)
          : policy                   ? policy->classifier
                                     : ClassifierModel::parse("r50", cls_seed);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  cfg["classifier"] = cls.spec();
  cfg["classifier_seed"] = cls.seed;
  cfg["policies"] = policies;

  const Dataset ds = load(data);
  std::vector<std::unique_ptr<Planner>> owned;
  for (const auto& p : policies) {
    if (p == "dqn") owned.push_back(make_dqn_planner(*policy));
    else if (p == "greedy") owned.push_back(make_greedy_planner(cls));
    else if (p == "ga") owned.push_back(make_ga_planner(cls, ga));
    else if (p == "sa") owned.push_back(make_sa_planner(cls, sa));
    else owned.push_back(make_random_planner());
  }
  std::vector<const Planner*> planners;
  for (const auto& p : owned) planners.push_back(p.get());
  std::vector<TrialReport> reports;
  if (many) {
    reports = compare(planners, ds, ec);
  } else {
    reports.push_back(run_trials(*planners.front(), ds, ec));
  }
  write_reports(out, reports, ds, {{"command", command}, {"data", data}, {"eval", ec}});

  for (const auto& r : reports) {
    for (const auto& b : r.budgets) {
      fmt::print("{:<8} budget {:>5}  lctf {:7.2f} +- {:5.2f}  visits {:7.2f}  precision {:.3f}\n", r.policy,
                 b.budget, b.mean_lctf, b.std_lctf, b.mean_visits, b.precision);
    }
    fmt::print("{:<8} wall {:.3f}s\n", r.policy, r.wall_seconds);
  }
  const fs::path dir(out);
  write_manifest(f.manifest.empty() ? (dir / "manifest.json") : fs::path(f.manifest), command, cfg,
                 {{"eval", ec.seed}, {"classifier", cls.seed}, {"ga", ga.seed}, {"sa", sa.seed}}, inputs,
                 json::array({(dir / "report.json").string(), (dir / "report.csv").string(),
                              (dir / "curve.csv").string(), (dir / "visits.csv").string()}),
                 started);
  return 0;
}

// ---------------------------------------------------------------------------
// serve

struct ServeFlags {
  std::string config, host = "127.0.0.1", agent_policy, store, cors = "*", manifest;
  std::vector<std::string> data;
  std::vector<int> budgets;
  int port = 8080;
  bool any_budget = false, patches_only = false;
};

void add_serve(CLI::App& app, ServeFlags& f) {
  app.add_option("--config", f.config, "Config or manifest JSON");
  app.add_option("--data", f.data, "Dataset CSV, served under its file stem (repeatable)");
  app.add_option("--agent-policy", f.agent_policy, "Policy file for /v1/compare");
  app.add_option("--host", f.host, "Bind address");
  app.add_option("--port", f.port, "Port (0 picks a free one)");
  app.add_option("--store", f.store, "Session event-log directory");
  app.add_option("--budgets", f.budgets, "Allowed selection budgets")->delimiter(',');
  app.add_flag("--any-budget", f.any_budget, "Allow any positive selection budget");
  app.add_flag("--patches-only", f.patches_only, "Hide square and grid context from participants");
  app.add_option("--cors-origin", f.cors, "Access-Control-Allow-Origin value");
  app.add_option("--manifest", f.manifest, "Manifest path (default <store>/manifest.json when --store is set)");
}

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

int run_serve(CLI::App& app, const ServeFlags& f) {
  const std::string started = utc_now();
  json cfg = f.config.empty() ? json::object() : load_config(f.config, "serve");
  if (app.count("--data")) cfg["data"] = f.data;
  if (app.count("--agent-policy")) cfg["agent_policy"] = f.agent_policy;
  if (app.count("--host")) cfg["host"] = f.host;
  if (app.count("--port")) cfg["port"] = f.port;
  if (app.count("--store")) cfg["store"] = f.store;
  if (app.count("--budgets")) cfg["budgets"] = f.budgets;
  if (app.count("--any-budget")) cfg["any_budget"] = f.any_budget;
  if (app.count("--patches-only")) cfg["patches_only"] = f.patches_only;
  if (app.count("--cors-origin")) cfg["cors_origin"] = f.cors;

  ServiceConfig sc;
  sc.budgets = pick<std::vector<int>>(cfg, "budgets", sc.budgets);
  sc.any_budget = pick<bool>(cfg, "any_budget", false);
  sc.patches_only = pick<bool>(cfg, "patches_only", false);
  sc.cors_origin = pick<std::string>(cfg, "cors_origin", "*");
  const std::string store = pick<std::string>(cfg, "store", "");
  if (!store.empty()) sc.store = store;
  const auto data = pick<std::vector<std::string>>(cfg, "data", {});
  if (data.empty()) throw UsageError("--data is required");
  const std::string host = pick<std::string>(cfg, "host", "127.0.0.1");
  const int port = pick<int>(cfg, "port", 8080);
  const std::string agent = pick<std::string>(cfg, "agent_policy", "");
  cfg["budgets"] = sc.budgets;
  cfg["any_budget"] = sc.any_budget;
  cfg["patches_only"] = sc.patches_only;
  cfg["host"] = host;
  cfg["port"] = port;

  BenchService svc(sc);
  json inputs = json::array();
  for (const auto& d : data) {
    svc.add_dataset(fs::path(d).stem().string(), load(d));
    inputs.push_back(input_record(d));
  }
  if (!agent.empty()) {
    svc.set_policy(Policy::load(agent));
    inputs.push_back(input_record(agent));
  }
  const std::size_t restored = svc.replay_store();

  HttpServer server(svc);
  if (!server.bind(host, port)) {
    fmt::print(stderr, "error: cannot bind {}:{}\n", host, port);
    return 1;
  }
  const std::string manifest = !f.manifest.empty() ? f.manifest : (store.empty() ? "" : (fs::path(store) / "manifest.json").string());
  if (!manifest.empty()) {
    write_manifest(manifest, "serve", cfg, json::object(), inputs, json::array(), started);
  }
  fmt::print("serving {} dataset(s) on http://{}:{}/v1 ({} session(s) restored)\n", data.size(), host, server.port(),
             restored);
  std::fflush(stdout);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::jthread watcher([&server](std::stop_token st) {
    while (!st.stop_requested() && !g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  });
  server.listen();
  watcher.request_stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted hole-selection planning: datasets, training, evaluation and the benchmark service"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  GenFlags gen;
  TrainFlags tr;
  EvalFlags ev, cmp;
  ServeFlags sv;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset");
  add_gen(*gen_cmd, gen);
  auto* train_cmd = app.add_subcommand("train", "Train a Q-learning policy");
  add_train(*train_cmd, tr);
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate one policy over paired trials");
  add_eval(*eval_cmd, ev, false);
  auto* cmp_cmd = app.add_subcommand("compare", "Evaluate several policies on the same trials");
  add_eval(*cmp_cmd, cmp, true);
  auto* serve_cmd = app.add_subcommand("serve", "Run the benchmark HTTP service");
  add_serve(*serve_cmd, sv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == gen_cmd) return run_gen(*gen_cmd, gen);
    if (active == train_cmd) return run_train(*train_cmd, tr);
    if (active == eval_cmd) return run_eval(*eval_cmd, ev, "eval");
    if (active == cmp_cmd) return run_eval(*cmp_cmd, cmp, "compare");
    return run_serve(*serve_cmd, sv);
  } catch (const UsageError& e) {
    fmt::print(stderr, "error: {}\n\n{}", e.what(), active->help());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
