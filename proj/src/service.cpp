#include "cryoplan/service.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <random>

#include <fmt/format.h>

#include "cryoplan/rng.hpp"

namespace cryoplan {

namespace {

HttpResponse error(int status, std::string message) {
  return HttpResponse{status, nlohmann::json{{"error", std::move(message)}}};
}

std::string now_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  return fmt::format("{}.{:03d}Z", buf, static_cast<int>(ms));
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const std::size_t j = path.find('/', i);
    const std::size_t end = j == std::string::npos ? path.size() : j;
    if (end > i) out.push_back(path.substr(i, end - i));
    i = end;
  }
  return out;
}

std::optional<std::uint64_t> parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// Whole non-negative JSON integer or nullopt.
std::optional<std::uint64_t> json_u64(const nlohmann::json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  return std::nullopt;
}

}  // namespace

double selection_minutes(int budget) { return 2.4 * static_cast<double>(budget); }

BenchService::BenchService(ServiceConfig cfg) : cfg_(std::move(cfg)), id_salt_(std::random_device{}()) {
  id_salt_ = (id_salt_ << 32) ^ std::random_device{}();
  if (cfg_.budgets.empty()) throw ConfigError("at least one session budget is required");
  for (int b : cfg_.budgets) {
    if (b < 1) throw ConfigError("session budgets must be >= 1");
  }
  if (cfg_.store) {
    std::error_code ec;
    std::filesystem::create_directories(*cfg_.store, ec);
    if (ec) throw IoError("cannot create store '" + cfg_.store->string() + "': " + ec.message());
  }
}

void BenchService::add_dataset(std::string id, Dataset ds) {
  if (id.empty()) throw ConfigError("dataset id must not be empty");
  datasets_[std::move(id)] = std::make_shared<const Dataset>(std::move(ds));
}

void BenchService::set_policy(Policy policy) { policy_ = std::make_shared<const Policy>(std::move(policy)); }

const Dataset* BenchService::dataset(const std::string& id) const {
  const auto it = datasets_.find(id);
  return it == datasets_.end() ? nullptr : it->second.get();
}

std::shared_ptr<BenchService::Slot> BenchService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mu_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::optional<Session> BenchService::session(const std::string& id) const {
  const auto slot = find(id);
  if (!slot) return std::nullopt;
  std::lock_guard lock(slot->mu);
  return slot->session;
}

std::string BenchService::new_session_id() {
  std::lock_guard lock(id_mu_);
  for (;;) {
    const std::string id = fmt::format("{:016x}", keyed_bits(id_salt_, id_counter_++, 0));
    std::shared_lock slock(sessions_mu_);
    if (!sessions_.contains(id)) return id;
  }
}

void BenchService::append_event(const std::string& session_id, const nlohmann::json& event) const {
  if (!cfg_.store) return;
  const auto path = *cfg_.store / (session_id + ".jsonl");
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to '" + path.string() + "'");
  out << event.dump() << '\n';
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::size_t BenchService::replay_store() {
  if (!cfg_.store) return 0;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(*cfg_.store)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::size_t restored = 0;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::optional<Session> s;
    const Dataset* ds = nullptr;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto ev = nlohmann::json::parse(line, nullptr, false);
      if (ev.is_discarded()) throw FormatError("corrupt event in '" + path.string() + "'");
      const std::string type = ev.value("type", "");
      if (type == "create") {
        ds = dataset(ev.at("dataset_id").get<std::string>());
        if (!ds) break;  // dataset not served this time
        s.emplace();
        s->id = ev.at("id").get<std::string>();
        s->dataset_id = ev.at("dataset_id").get<std::string>();
        s->mode = ev.value("mode", "human");
        s->budget = ev.at("budget").get<int>();
        s->minutes = ev.at("minutes").get<double>();
        s->created = s->updated = ev.at("at").get<std::string>();
      } else if (type == "select" && s) {
        const Id hole_id = ev.at("hole_id").get<Id>();
        const Hole& h = ds->hole(ds->hole_index(hole_id));
        const bool low = is_low(h);
        s->selections.push_back(Selection{hole_id, h.ctf_true.value(), low, ev.at("at").get<std::string>()});
        s->score += low ? 1 : 0;
        s->updated = s->selections.back().at;
      } else {
        throw FormatError("unexpected event '" + type + "' in '" + path.string() + "'");
      }
    }
    if (!s) continue;
    auto slot = std::make_shared<Slot>();
    slot->session = std::move(*s);
    std::unique_lock lock(sessions_mu_);
    sessions_[slot->session.id] = slot;
    ++restored;
  }
  return restored;
}

nlohmann::json BenchService::session_json(const Session& s) const {
  nlohmann::json sel = nlohmann::json::array();
  for (const auto& x : s.selections) {
    sel.push_back({{"hole_id", x.hole_id}, {"ctf", x.ctf}, {"is_low", x.is_low}, {"at", x.at}});
  }
  return {{"id", s.id},         {"dataset_id", s.dataset_id}, {"mode", s.mode},
          {"budget", s.budget}, {"minutes", s.minutes},       {"remaining", s.remaining()},
          {"score", s.score},   {"finished", s.finished()},   {"selections", sel},
          {"created", s.created}, {"updated", s.updated}};
}

HttpResponse BenchService::handle(const HttpRequest& req) {
  const auto parts = split_path(req.path);
  if (parts.empty() || parts[0] != "v1") return error(404, "unknown path");
  nlohmann::json body = nlohmann::json::object();
  if (req.method == "POST" && !req.body.empty()) {
    body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return error(400, "request body must be a JSON object");
  }
  try {
    const std::size_t n = parts.size();
    if (req.method == "GET" && n == 2 && parts[1] == "health") return health();
    if (req.method == "GET" && n == 2 && parts[1] == "datasets") return list_datasets();
    if (req.method == "POST" && n == 2 && parts[1] == "sessions") return create_session(body);
    if (req.method == "POST" && n == 2 && parts[1] == "compare") return compare(body);
    if (n >= 3 && parts[1] == "sessions") {
      const std::string& id = parts[2];
      if (req.method == "GET" && n == 3) {
        const auto s = session(id);
        if (!s) return error(404, "unknown session");
        return HttpResponse{200, session_json(*s)};
      }
      if (req.method == "GET" && n == 4 && parts[3] == "view") return view(id, req.query);
      if (req.method == "GET" && n == 4 && parts[3] == "atlas") return atlas(id);
      if (req.method == "GET" && n == 4 && parts[3] == "summary") return summary(id);
      if (req.method == "POST" && n == 4 && parts[3] == "select") return select(id, body);
    }
    return error(404, "unknown path");
  } catch (const IoError& e) {
    return error(500, e.what());
  } catch (const nlohmann::json::exception& e) {
    return error(400, e.what());
  }
}

HttpResponse BenchService::health() const {
  return HttpResponse{200, {{"status", "ok"}, {"version", kToolVersion}, {"policy_loaded", has_policy()}}};
}

HttpResponse BenchService::list_datasets() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [id, ds] : datasets_) {
    out.push_back({{"id", id}, {"holes", ds->hole_count()}, {"patches", ds->patch_count()}});
  }
  return HttpResponse{200, {{"datasets", out}, {"budgets", cfg_.budgets}, {"any_budget", cfg_.any_budget}}};
}

HttpResponse BenchService::create_session(const nlohmann::json& body) {
  if (!body.contains("dataset_id") || !body["dataset_id"].is_string()) return error(400, "dataset_id is required");
  const std::string dataset_id = body["dataset_id"].get<std::string>();
  if (!dataset(dataset_id)) return error(404, "unknown dataset '" + dataset_id + "'");
  const auto budget = body.contains("budget") ? json_u64(body["budget"]) : std::nullopt;
  if (!budget || *budget < 1 || *budget > 100000) return error(400, "budget must be a positive integer");
  const int b = static_cast<int>(*budget);
  if (!cfg_.any_budget && std::find(cfg_.budgets.begin(), cfg_.budgets.end(), b) == cfg_.budgets.end()) {
    return error(400, fmt::format("budget must be one of {}", nlohmann::json(cfg_.budgets).dump()));
  }
  auto slot = std::make_shared<Slot>();
  Session& s = slot->session;
  s.id = new_session_id();
  s.dataset_id = dataset_id;
  s.budget = b;
  s.minutes = selection_minutes(b);
  s.created = s.updated = now_iso();
  append_event(s.id, {{"type", "create"}, {"id", s.id}, {"dataset_id", s.dataset_id}, {"mode", s.mode},
                      {"budget", s.budget}, {"minutes", s.minutes}, {"at", s.created}});
  const auto json = session_json(s);
  std::unique_lock lock(sessions_mu_);
  sessions_[s.id] = std::move(slot);
  return HttpResponse{201, json};
}

HttpResponse BenchService::view(const std::string& id, const std::map<std::string, std::string>& query) {
  const auto s = session(id);
  if (!s) return error(404, "unknown session");
  const Dataset& ds = *dataset(s->dataset_id);
  const auto q = query.find("patch");
  if (q == query.end()) return error(400, "query parameter 'patch' is required");
  const auto patch_id = parse_u64(q->second);
  if (!patch_id || *patch_id > std::numeric_limits<Id>::max()) return error(400, "patch must be an integer id");
  Index p;
  try {
    p = ds.patch_index(static_cast<Id>(*patch_id));
  } catch (const LookupError&) {
    return error(404, "unknown patch");
  }
  std::map<Id, const Selection*> revealed;
  for (const auto& sel : s->selections) revealed[sel.hole_id] = &sel;
  nlohmann::json holes = nlohmann::json::array();
  for (Index h : ds.holes_of_patch(p)) {
    const Hole& hole = ds.hole(h);
    nlohmann::json row{{"hole_id", hole.id}, {"x", hole.position.x}, {"y", hole.position.y}};
    const auto it = revealed.find(hole.id);
    if (it == revealed.end()) {
      row["state"] = "unknown";
    } else {
      row["state"] = "revealed";
      row["ctf"] = it->second->ctf;
      row["is_low"] = it->second->is_low;
    }
    holes.push_back(std::move(row));
  }
  nlohmann::json out{{"patch_id", ds.patches()[p].id}, {"holes", holes}, {"remaining", s->remaining()},
                     {"score", s->score}};
  if (!cfg_.patches_only) {
    const Index sq = ds.square_of_patch(p);
    out["square_id"] = ds.squares()[sq].id;
    out["grid_id"] = ds.grids()[ds.grid_of_square(sq)].id;
  }
  return HttpResponse{200, out};
}

HttpResponse BenchService::atlas(const std::string& id) {
  const auto s = session(id);
  if (!s) return error(404, "unknown session");
  const Dataset& ds = *dataset(s->dataset_id);
  auto patch_row = [&](Index p) {
    return nlohmann::json{{"patch_id", ds.patches()[p].id}, {"holes", ds.holes_of_patch(p).size()}};
  };
  if (cfg_.patches_only) {
    nlohmann::json patches = nlohmann::json::array();
    for (Index p = 0; p < ds.patch_count(); ++p) patches.push_back(patch_row(p));
    return HttpResponse{200, {{"dataset_id", s->dataset_id}, {"patches", patches}}};
  }
  nlohmann::json grids = nlohmann::json::array();
  for (Index g = 0; g < ds.grid_count(); ++g) {
    nlohmann::json squares = nlohmann::json::array();
    for (Index sq : ds.squares_of_grid(g)) {
      nlohmann::json patches = nlohmann::json::array();
      for (Index p : ds.patches_of_square(sq)) patches.push_back(patch_row(p));
      squares.push_back({{"square_id", ds.squares()[sq].id}, {"patches", patches}});
    }
    grids.push_back({{"grid_id", ds.grids()[g].id}, {"squares", squares}});
  }
  return HttpResponse{200, {{"dataset_id", s->dataset_id}, {"grids", grids}}};
}

HttpResponse BenchService::select(const std::string& id, const nlohmann::json& body) {
  const auto slot = find(id);
  if (!slot) return error(404, "unknown session");
  const auto hole_id = body.contains("hole_id") ? json_u64(body["hole_id"]) : std::nullopt;
  if (!hole_id || *hole_id > std::numeric_limits<Id>::max()) return error(400, "hole_id must be an integer id");
  std::lock_guard lock(slot->mu);
  Session& s = slot->session;
  const Dataset& ds = *dataset(s.dataset_id);
  if (!ds.contains_hole(static_cast<Id>(*hole_id))) return error(404, "unknown hole");
  if (s.finished()) return error(410, "selection budget exhausted");
  for (const auto& sel : s.selections) {
    if (sel.hole_id == *hole_id) return error(409, "hole already selected");
  }
  const Hole& h = ds.hole(ds.hole_index(static_cast<Id>(*hole_id)));
  const bool low = is_low(h);
  const std::string at = now_iso();
  append_event(s.id, {{"type", "select"}, {"hole_id", h.id}, {"at", at}});
  s.selections.push_back(Selection{h.id, h.ctf_true.value(), low, at});
  s.score += low ? 1 : 0;
  s.updated = at;
  return HttpResponse{200, {{"hole_id", h.id}, {"ctf", h.ctf_true.value()}, {"is_low", low},
                            {"score", s.score}, {"remaining", s.remaining()}}};
}

HttpResponse BenchService::summary(const std::string& id) {
  const auto s = session(id);
  if (!s) return error(404, "unknown session");
  std::vector<std::shared_ptr<Slot>> others;
  {
    std::shared_lock lock(sessions_mu_);
    for (const auto& [other_id, slot] : sessions_) {
      if (other_id != id) others.push_back(slot);
    }
  }
  std::size_t below = 0, equal = 0, cohort = 0;
  for (const auto& slot : others) {
    std::lock_guard lock(slot->mu);
    const Session& o = slot->session;
    if (o.dataset_id != s->dataset_id || o.budget != s->budget || !o.finished()) continue;
    ++cohort;
    if (o.score < s->score) ++below;
    if (o.score == s->score) ++equal;
  }
  nlohmann::json history = nlohmann::json::array();
  int cumulative = 0;
  for (const auto& sel : s->selections) {
    cumulative += sel.is_low ? 1 : 0;
    history.push_back({{"hole_id", sel.hole_id}, {"ctf", sel.ctf}, {"is_low", sel.is_low}, {"at", sel.at},
                       {"cumulative", cumulative}});
  }
  nlohmann::json percentile = nullptr;
  if (cohort > 0) {
    percentile = 100.0 * (static_cast<double>(below) + 0.5 * static_cast<double>(equal)) / static_cast<double>(cohort);
  }
  return HttpResponse{200, {{"id", s->id}, {"dataset_id", s->dataset_id}, {"budget", s->budget},
                            {"minutes", s->minutes}, {"score", s->score}, {"remaining", s->remaining()},
                            {"finished", s->finished()}, {"history", history}, {"percentile", percentile},
                            {"cohort_size", cohort}}};
}

AgentRun run_agent(const Policy& policy, const Dataset& ds, int budget, double minutes, std::uint64_t seed) {
  if (ds.hole_count() == 0) throw ConfigError("dataset is empty");
  const auto pt = predict_all(ds, policy.classifier);
  const auto ctx = make_context(ds, pt, policy.features, policy.elim, policy.elim.beta_test, minutes);
  AgentRun run;
  run.start = std::min(static_cast<Index>(keyed_uniform(seed, 0, 2) * static_cast<double>(ds.hole_count())),
                       static_cast<Index>(ds.hole_count() - 1));
  const auto traj = run_policy(policy, ctx, run.start, minutes, static_cast<std::size_t>(budget));
  int score = 0;
  for (const auto& step : traj) {
    score += step.low ? 1 : 0;
    run.holes.push_back(ds.hole(step.hole).id);
    run.cumulative.push_back(score);
  }
  return run;
}

HttpResponse BenchService::compare(const nlohmann::json& body) const {
  if (!policy_) return error(503, "no agent policy loaded");
  if (!body.contains("dataset_id") || !body["dataset_id"].is_string()) return error(400, "dataset_id is required");
  const std::string dataset_id = body["dataset_id"].get<std::string>();
  const Dataset* ds = dataset(dataset_id);
  if (!ds) return error(404, "unknown dataset '" + dataset_id + "'");
  const auto budget = body.contains("budget") ? json_u64(body["budget"]) : std::nullopt;
  if (!budget || *budget < 1 || *budget > 100000) return error(400, "budget must be a positive integer");
  const int b = static_cast<int>(*budget);
  if (!cfg_.any_budget && std::find(cfg_.budgets.begin(), cfg_.budgets.end(), b) == cfg_.budgets.end()) {
    return error(400, fmt::format("budget must be one of {}", nlohmann::json(cfg_.budgets).dump()));
  }
  std::uint64_t seed = 0;
  if (body.contains("seed")) {
    const auto v = json_u64(body["seed"]);
    if (!v) return error(400, "seed must be a non-negative integer");
    seed = *v;
  }
  const double minutes = selection_minutes(b);
  const auto run = run_agent(*policy_, *ds, b, minutes, seed);
  return HttpResponse{200, {{"dataset_id", dataset_id}, {"budget", b}, {"minutes", minutes}, {"seed", seed},
                            {"start_hole", ds->hole(run.start).id}, {"holes", run.holes},
                            {"cumulative", run.cumulative},
                            {"score", run.cumulative.empty() ? 0 : run.cumulative.back()}}};
}

}  // namespace cryoplan
