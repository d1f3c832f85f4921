#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "../error.hpp"
#include "cache.hpp"
#include "endpoint.hpp"

namespace vqaadv::backend {

/// Transport-level failure. `retryable` distinguishes connection errors and
/// 5xx replies from client errors.
class TransportError : public BackendUnavailable {
  public:
    TransportError(const std::string &what, bool retryable)
        : BackendUnavailable(what), retryable_(retryable) {}
    bool retryable() const { return retryable_; }

  private:
    bool retryable_;
};

/// Moves one request to an implementation of the protocol and returns its body.
class Transport {
  public:
    virtual ~Transport() = default;
    virtual json send(Endpoint e, const json &request) = 0;
};

/// Adapts a callable; handy for scripted test transports.
class FunctionTransport : public Transport {
  public:
    using Fn = std::function<json(Endpoint, const json &)>;
    explicit FunctionTransport(Fn fn) : fn_(std::move(fn)) {}
    json send(Endpoint e, const json &request) override { return fn_(e, request); }

  private:
    Fn fn_;
};

/// Wraps another transport and counts calls per endpoint.
class CountingTransport : public Transport {
  public:
    explicit CountingTransport(Transport &inner) : inner_(inner) {}

    json send(Endpoint e, const json &request) override {
        {
            std::lock_guard lock(mu_);
            ++counts_[e];
        }
        ++total_;
        return inner_.send(e, request);
    }

    std::size_t total() const { return total_; }
    std::size_t count(Endpoint e) const {
        std::lock_guard lock(mu_);
        auto it = counts_.find(e);
        return it == counts_.end() ? 0 : it->second;
    }

  private:
    Transport &inner_;
    mutable std::mutex mu_;
    std::map<Endpoint, std::size_t> counts_;
    std::atomic<std::size_t> total_{0};
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{200};
    double multiplier = 2.0;
    std::chrono::milliseconds max_delay{5000};

    std::chrono::milliseconds delay(int attempt) const {
        double ms = static_cast<double>(base_delay.count());
        for (int i = 0; i < attempt; ++i)
            ms *= multiplier;
        return std::chrono::milliseconds(
            static_cast<long long>(std::min(ms, static_cast<double>(max_delay.count()))));
    }
};

struct ClientOptions {
    RetryPolicy retry;
    std::ptrdiff_t max_in_flight = 4; // per endpoint
    std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };
};

/// Schema-checked, cached, retrying access to the protocol.
class Client {
  public:
    Client(Transport &transport, ResponseCache *cache, ClientOptions options = {})
        : transport_(transport), cache_(cache), options_(std::move(options)) {
        for (auto e : kAllEndpoints)
            limits_[e] = std::make_unique<std::counting_semaphore<1024>>(
                std::clamp<std::ptrdiff_t>(options_.max_in_flight, 1, 1024));
    }

    /// Validates the request, serves it from the cache when present, otherwise
    /// sends it with exponential backoff, validates the reply and stores it.
    json call(Endpoint e, const json &request) {
        validate_request(e, request);
        if (e == Endpoint::health)
            return send_with_retry(e, request);
        std::string key = cache_key(e, request);
        if (cache_)
            if (auto hit = cache_->lookup(key))
                return *hit;
        json response = send_with_retry(e, request);
        if (cache_)
            cache_->store(key, e, request, response, identity_for(e));
        return response;
    }

    /// Server identity from /v1/health, fetched once.
    const json &health() {
        std::call_once(health_once_, [&] { health_ = send_with_retry(Endpoint::health, json::object()); });
        return health_;
    }

    BackendIdentity identity_for(Endpoint e) {
        try {
            const json &h = health();
            std::string model = h["models"].value(std::string(name(e)), std::string("unknown"));
            return {h["name"].get<std::string>(), model, h["protocol_version"].get<std::string>()};
        } catch (const Error &) {
            return {"unknown", "unknown", "1"};
        }
    }

    std::size_t network_calls() const { return network_calls_; }

  private:
    json send_with_retry(Endpoint e, const json &request) {
        auto &sem = *limits_.at(e);
        struct Slot {
            std::counting_semaphore<1024> &s;
            explicit Slot(std::counting_semaphore<1024> &sem) : s(sem) { s.acquire(); }
            ~Slot() { s.release(); }
        };
        for (int attempt = 0;; ++attempt) {
            std::string failure;
            bool retryable = true;
            try {
                json response;
                {
                    Slot slot(sem);
                    ++network_calls_;
                    response = transport_.send(e, request);
                }
                validate_response(e, response);
                return response;
            } catch (const SchemaError &) {
                throw;
            } catch (const TransportError &err) {
                failure = err.what();
                retryable = err.retryable();
            } catch (const std::exception &err) {
                failure = err.what();
            }
            if (!retryable || attempt >= options_.retry.max_retries)
                throw BackendUnavailable(std::string(name(e)) + " unavailable after " +
                                         std::to_string(attempt + 1) + " attempt(s): " + failure);
            options_.sleep(options_.retry.delay(attempt));
        }
    }

    Transport &transport_;
    ResponseCache *cache_;
    ClientOptions options_;
    std::map<Endpoint, std::unique_ptr<std::counting_semaphore<1024>>> limits_;
    std::once_flag health_once_;
    json health_;
    std::atomic<std::size_t> network_calls_{0};
};

} // namespace vqaadv::backend
