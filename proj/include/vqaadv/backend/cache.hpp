#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "../hash.hpp"
#include "endpoint.hpp"

namespace vqaadv::backend {

namespace fs = std::filesystem;

struct BackendIdentity {
    std::string name;
    std::string model_id;
    std::string version;
};

inline json to_json(const BackendIdentity &b) {
    return json{{"name", b.name}, {"model_id", b.model_id}, {"version", b.version}};
}

/// Canonical request form: object keys sorted (nlohmann objects are ordered maps).
inline std::string canonical_json(const json &j) { return j.dump(); }

/// Content address of a request. The endpoint name is part of the preimage so
/// identical bodies on different endpoints never collide.
inline std::string cache_key(Endpoint e, const json &request) {
    return sha256_hex(std::string(name(e)) + "\n" + canonical_json(request));
}

/// Append-only, content-addressed response cache: one file per key under
/// `<dir>/<key[0:2]>/<key>.json`. Entries are never rewritten once present.
class ResponseCache {
  public:
    explicit ResponseCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    const fs::path &dir() const { return dir_; }

    std::optional<json> lookup(const std::string &key) const {
        {
            std::shared_lock lock(mu_);
            if (auto it = memo_.find(key); it != memo_.end())
                return it->second["response"];
        }
        fs::path p = entry_path(key);
        std::ifstream in(p, std::ios::binary);
        if (!in)
            return std::nullopt;
        json entry;
        try {
            entry = json::parse(in);
        } catch (const json::exception &) {
            return std::nullopt;
        }
        std::unique_lock lock(mu_);
        auto [it, _] = memo_.emplace(key, std::move(entry));
        return it->second["response"];
    }

    /// Stores a response. A no-op when the key already exists.
    void store(const std::string &key, Endpoint e, const json &request, const json &response,
               const BackendIdentity &backend) {
        json entry{{"key", key},
                   {"endpoint", std::string(name(e))},
                   {"request", request},
                   {"response", response},
                   {"backend", to_json(backend)}};
        fs::path p = entry_path(key);
        {
            std::unique_lock lock(mu_);
            if (memo_.count(key) || fs::exists(p)) {
                memo_.emplace(key, entry);
                return;
            }
            memo_.emplace(key, entry);
        }
        fs::create_directories(p.parent_path());
        static std::atomic<unsigned long> counter{0};
        fs::path tmp = p;
        tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) +
               "." + std::to_string(counter++);
        {
            std::ofstream out(tmp, std::ios::binary);
            out << entry.dump() << '\n';
            if (!out)
                throw Error("cannot write cache entry " + tmp.string());
        }
        fs::rename(tmp, p); // atomic on POSIX
    }

    std::size_t size_on_disk() const {
        std::size_t n = 0;
        for (const auto &e : fs::recursive_directory_iterator(dir_))
            if (e.is_regular_file() && e.path().extension() == ".json")
                ++n;
        return n;
    }

  private:
    fs::path entry_path(const std::string &key) const {
        return dir_ / key.substr(0, 2) / (key + ".json");
    }

    fs::path dir_;
    mutable std::shared_mutex mu_;
    mutable std::map<std::string, json> memo_;
};

} // namespace vqaadv::backend
