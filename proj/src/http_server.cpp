// Eigen must come before httplib: <resolv.h> defines a `_res` macro.
#include "cryoplan/service.hpp"

#include <httplib.h>

namespace cryoplan {

struct HttpServer::Impl {
  BenchService* svc;
  httplib::Server server;
};

HttpServer::HttpServer(BenchService& svc) : impl_(std::make_unique<Impl>()) {
  impl_->svc = &svc;
  auto& server = impl_->server;
  const std::string origin = svc.config().cors_origin;
  server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    r.body = req.body;
    const HttpResponse out = impl_->svc->handle(r);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  server.Get(R"(/.*)", dispatch);
  server.Post(R"(/.*)", dispatch);
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    return port_ > 0;
  }
  if (!impl_->server.bind_to_port(host, port)) return false;
  port_ = port;
  return true;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace cryoplan
