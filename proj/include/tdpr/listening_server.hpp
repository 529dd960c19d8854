#pragma once

// HTTP transport for the listening-test backend (cpp-httplib).
//
//   GET  /                     UI index (or a placeholder page)
//   GET  /api/session/{id}     blinded manifest; ?participant=ID required
//   POST /api/response         JSON response record -> {"ok": true}
//   GET  /api/audio/{token}    WAV bytes, byte ranges supported

#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

#include <httplib.h>

#include "tdpr/listening.hpp"

namespace tdpr::listening {

struct ServerConfig {
  std::filesystem::path results_path = "results.jsonl";
  std::filesystem::path ui_dir;  // empty: built-in placeholder page
};

inline constexpr std::string_view kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>Listening test</title></head>"
    "<body><p>The listening-test UI is not installed. Start the server with --ui DIR to serve it.</p></body></html>";

namespace detail {

inline void send_error(httplib::Response& res, int status, const std::string& msg) {
  res.status = status;
  res.set_content(json{{"ok", false}, {"error", msg}}.dump(), "application/json");
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read '" + p.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

class ListeningServer {
 public:
  ListeningServer(std::shared_ptr<const Registry> registry, ServerConfig cfg)
      : registry_(std::move(registry)), cfg_(std::move(cfg)), log_(cfg_.results_path) {
    routes();
  }

  /// Binds to `port` (0: any free port) and returns the bound port.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    if (!server_.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
  }

  /// Blocks until stop().
  void run() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  void routes() {
    server_.Get("/", [this](const httplib::Request&, httplib::Response& res) {
      const auto index = cfg_.ui_dir / "index.html";
      if (!cfg_.ui_dir.empty() && std::filesystem::exists(index)) {
        res.set_content(detail::read_file(index), "text/html");
      } else {
        res.set_content(std::string(kPlaceholderPage), "text/html");
      }
    });
    if (!cfg_.ui_dir.empty() && std::filesystem::is_directory(cfg_.ui_dir)) {
      server_.set_mount_point("/static", cfg_.ui_dir.string());
    }

    server_.Get("/api/session/:id", [this](const httplib::Request& req, httplib::Response& res) {
      const Session* s = registry_->find(req.path_params.at("id"));
      if (s == nullptr) return detail::send_error(res, 404, "unknown session");
      const auto participant = req.get_param_value("participant");
      if (participant.empty()) return detail::send_error(res, 400, "missing 'participant' query parameter");
      res.set_header("Cache-Control", "no-store");
      res.set_content(registry_->served_manifest(*s, participant).dump(), "application/json");
    });

    server_.Post("/api/response", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception&) {
        return detail::send_error(res, 400, "body is not valid JSON");
      }
      ordered_json record;
      try {
        record = resolve_response(*registry_, body);
      } catch (const Error& e) {
        return detail::send_error(res, 422, e.what());
      }
      try {
        log_.append(record);
      } catch (const Error& e) {
        return detail::send_error(res, 500, e.what());
      }
      res.set_content(R"({"ok":true})", "application/json");
    });

    server_.Get("/api/audio/:token", [this](const httplib::Request& req, httplib::Response& res) {
      const AudioRef* ref = registry_->audio(req.path_params.at("token"));
      if (ref == nullptr) return detail::send_error(res, 404, "unknown audio token");
      std::string bytes;
      try {
        bytes = detail::read_file(ref->path);
      } catch (const Error&) {
        return detail::send_error(res, 500, "audio file unavailable");
      }
      res.set_header("Accept-Ranges", "bytes");
      res.set_header("Cache-Control", "no-store");
      res.set_content(std::move(bytes), "audio/wav");
    });
  }

  std::shared_ptr<const Registry> registry_;
  ServerConfig cfg_;
  ResultsLog log_;
  httplib::Server server_;
};

}  // namespace tdpr::listening
