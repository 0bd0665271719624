#pragma once

// Human-study benchmark service: selection-count sessions over a dataset,
// ground truth revealed only for selected holes, and an agent comparison.
// `BenchService::handle` is transport independent; `serve` binds it to HTTP.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "cryoplan/atlas.hpp"
#include "cryoplan/dqn.hpp"

namespace cryoplan {

inline constexpr const char* kToolVersion = "0.1.0";

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct HttpResponse {
  int status = 200;
  nlohmann::json body = nlohmann::json::object();
};

struct ServiceConfig {
  std::vector<int> budgets{50, 100};
  bool any_budget = false;
  bool patches_only = false;
  std::optional<std::filesystem::path> store;  // event-log directory
  std::string cors_origin = "*";
};

struct Selection {
  Id hole_id;
  double ctf;
  bool is_low;
  std::string at;
};

struct Session {
  std::string id;
  std::string dataset_id;
  std::string mode = "human";
  int budget = 0;
  double minutes = 0.0;  // movement-time budget the agent gets for the same count
  std::vector<Selection> selections;
  int score = 0;
  std::string created;
  std::string updated;

  int remaining() const { return budget - static_cast<int>(selections.size()); }
  bool finished() const { return remaining() <= 0; }
};

// Minutes granted to an agent for `budget` selections (50 -> 120, 100 -> 240).
double selection_minutes(int budget);

class BenchService {
 public:
  explicit BenchService(ServiceConfig cfg = {});

  // Registers a dataset under `id`; the service keeps its own copy.
  void add_dataset(std::string id, Dataset ds);
  void set_policy(Policy policy);
  bool has_policy() const noexcept { return policy_ != nullptr; }

  // Rebuilds sessions from the event logs in the configured store.
  std::size_t replay_store();

  HttpResponse handle(const HttpRequest& req);

  std::optional<Session> session(const std::string& id) const;
  const ServiceConfig& config() const noexcept { return cfg_; }

 private:
  struct Slot {
    std::mutex mu;
    Session session;
  };

  HttpResponse health() const;
  HttpResponse list_datasets() const;
  HttpResponse create_session(const nlohmann::json& body);
  HttpResponse view(const std::string& id, const std::map<std::string, std::string>& query);
  HttpResponse atlas(const std::string& id);
  HttpResponse select(const std::string& id, const nlohmann::json& body);
  HttpResponse summary(const std::string& id);
  HttpResponse compare(const nlohmann::json& body) const;

  std::shared_ptr<Slot> find(const std::string& id) const;
  const Dataset* dataset(const std::string& id) const;
  void append_event(const std::string& session_id, const nlohmann::json& event) const;
  nlohmann::json session_json(const Session& s) const;
  std::string new_session_id();

  ServiceConfig cfg_;
  std::map<std::string, std::shared_ptr<const Dataset>> datasets_;
  std::shared_ptr<const Policy> policy_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::mutex id_mu_;
  std::uint64_t id_counter_ = 0;
  std::uint64_t id_salt_;
};

// Agent rollout used by /compare: greedy DQN moves under `minutes`, capped
// at `budget` selections.
struct AgentRun {
  Index start;
  std::vector<Id> holes;
  std::vector<int> cumulative;
};
AgentRun run_agent(const Policy& policy, const Dataset& ds, int budget, double minutes, std::uint64_t seed);

// HTTP binding of a BenchService. stop() lets in-flight responses finish.
class HttpServer {
 public:
  explicit HttpServer(BenchService& svc);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  bool bind(const std::string& host, int port);  // port 0 picks a free one
  int port() const noexcept { return port_; }
  void listen();  // blocks
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace cryoplan
