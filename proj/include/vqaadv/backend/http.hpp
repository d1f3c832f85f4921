#pragma once

#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "client.hpp"
#include "endpoint.hpp"

namespace vqaadv::backend {

inline constexpr const char *kTokenEnvVar = "VQAADV_BACKEND_TOKEN";

/// JSON over HTTP/1.1, one connection per request.
class HttpTransport : public Transport {
  public:
    explicit HttpTransport(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(120))
        : base_url_(std::move(base_url)), timeout_(timeout) {
        while (!base_url_.empty() && base_url_.back() == '/')
            base_url_.pop_back();
        if (const char *tok = std::getenv(kTokenEnvVar))
            token_ = tok;
    }

    const std::string &base_url() const { return base_url_; }

    json send(Endpoint e, const json &request) override {
        httplib::Client cli(base_url_);
        cli.set_connection_timeout(10);
        cli.set_read_timeout(timeout_.count());
        cli.set_write_timeout(timeout_.count());
        if (!token_.empty())
            cli.set_bearer_token_auth(token_);
        httplib::Result res = is_get(e) ? cli.Get(path(e))
                                        : cli.Post(path(e), request.dump(), "application/json");
        if (!res)
            throw TransportError(std::string(name(e)) + ": " + httplib::to_string(res.error()), true);
        if (res->status >= 500)
            throw TransportError(std::string(name(e)) + ": HTTP " + std::to_string(res->status) + " " +
                                     res->body,
                                 true);
        if (res->status == 429)
            throw TransportError(std::string(name(e)) + ": HTTP 429", true);
        if (res->status != 200)
            throw TransportError(std::string(name(e)) + ": HTTP " + std::to_string(res->status) + " " +
                                     res->body,
                                 false);
        try {
            return json::parse(res->body);
        } catch (const json::parse_error &err) {
            throw SchemaError(std::string(name(e)) + " response", "<body>", err.what());
        }
    }

  private:
    std::string base_url_;
    std::chrono::seconds timeout_;
    std::string token_;
};

/// Serves any Transport (normally a StubBackend) over the wire protocol.
/// Requests are schema-checked; violations answer 400, handler failures 500,
/// both with a `{"error": {...}}` body.
class ProtocolServer {
  public:
    explicit ProtocolServer(Transport &impl, std::string token = {})
        : impl_(impl), token_(std::move(token)) {
        for (auto e : kAllEndpoints) {
            auto handler = [this, e](const httplib::Request &req, httplib::Response &res) {
                handle(e, req, res);
            };
            if (is_get(e))
                server_.Get(path(e), handler);
            else
                server_.Post(path(e), handler);
        }
    }

    ~ProtocolServer() { stop(); }

    ProtocolServer(const ProtocolServer &) = delete;
    ProtocolServer &operator=(const ProtocolServer &) = delete;

    /// Binds (port 0 picks a free port) and serves on a background thread.
    int start(const std::string &host = "127.0.0.1", int port = 0) {
        port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (port_ < 0)
            throw BackendUnavailable("cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    /// Serves on the calling thread until stopped.
    void run(const std::string &host, int port) {
        if (!server_.bind_to_port(host, port))
            throw BackendUnavailable("cannot bind " + host + ":" + std::to_string(port));
        port_ = port;
        server_.listen_after_bind();
    }

    void stop() {
        server_.stop();
        if (thread_.joinable())
            thread_.join();
    }

    int port() const { return port_; }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  private:
    static json error_body(const std::string &type, const std::string &message,
                           const std::string &field = {}) {
        json err{{"type", type}, {"message", message}};
        if (!field.empty())
            err["field"] = field;
        return json{{"error", err}};
    }

    void handle(Endpoint e, const httplib::Request &req, httplib::Response &res) {
        if (!token_.empty() && req.get_header_value("Authorization") != "Bearer " + token_) {
            res.status = 401;
            res.set_content(error_body("unauthorized", "missing or wrong bearer token").dump(),
                            "application/json");
            return;
        }
        json body = json::object();
        try {
            if (!is_get(e))
                body = json::parse(req.body);
            validate_request(e, body);
        } catch (const SchemaError &err) {
            res.status = 400;
            res.set_content(error_body("schema", err.what(), err.field()).dump(), "application/json");
            return;
        } catch (const json::exception &err) {
            res.status = 400;
            res.set_content(error_body("parse", err.what()).dump(), "application/json");
            return;
        }
        try {
            json out;
            {
                std::lock_guard lock(mu_);
                out = impl_.send(e, body);
            }
            res.status = 200;
            res.set_content(out.dump(), "application/json");
        } catch (const TransportError &err) {
            res.status = err.retryable() ? 500 : 400;
            res.set_content(error_body("model", err.what()).dump(), "application/json");
        } catch (const std::exception &err) {
            res.status = 500;
            res.set_content(error_body("model", err.what()).dump(), "application/json");
        }
    }

    Transport &impl_;
    std::string token_;
    httplib::Server server_;
    std::thread thread_;
    std::mutex mu_;
    int port_ = -1;
};

} // namespace vqaadv::backend
