#pragma once

#include <cstddef>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "p3/detect.hpp"
#include "p3/model.hpp"
#include "p3/pipeline.hpp"
#include "p3/render.hpp"

namespace p3 {

struct ApiRequest {
    std::string method = "GET";
    std::string path;
    std::vector<std::pair<std::string, std::string>> query;
    std::string body;
    std::string if_none_match;
};

struct ApiResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
    std::map<std::string, std::string> headers;
};

struct ServiceConfig {
    PipelinePaths paths;
    DetectConfig detect;
    RenderConfig render;
    std::size_t whatif_cache_capacity = 1024;
    std::size_t max_page = 200;
    std::size_t default_page = 50;
};

/// Thread-safe LRU keyed by request hash.
class WhatIfCache {
public:
    struct Entry {
        std::string result;
        std::string png;
    };

    explicit WhatIfCache(std::size_t capacity) : capacity_(capacity) {}
    std::optional<Entry> get(const std::string& key);
    void put(const std::string& key, Entry entry);
    std::size_t size() const;

private:
    std::size_t capacity_;
    mutable std::mutex mu_;
    std::list<std::pair<std::string, Entry>> order_;
    std::unordered_map<std::string, std::list<std::pair<std::string, Entry>>::iterator> index_;
};

/// Read-only view over the pipeline outputs, loaded once at construction.
/// `handle` may be called concurrently.
class Service {
public:
    explicit Service(ServiceConfig cfg);

    ApiResponse handle(const ApiRequest& req) const;

    std::size_t moment_count() const { return moments_.size(); }
    bool model_loaded() const { return model_.has_value(); }
    std::optional<double> probability(const std::string& moment_id) const;
    const DetectConfig& detect_config() const { return cfg_.detect; }
    const RenderConfig& render_config() const { return cfg_.render; }

private:
    ApiResponse list_moments(const ApiRequest& req) const;
    ApiResponse get_moment(const std::string& id) const;
    ApiResponse moment_image(const std::string& id) const;
    ApiResponse whatif(const std::string& id, const std::string& body) const;
    ApiResponse whatif_image(const std::string& key) const;
    ApiResponse kpi_players(const ApiRequest& req) const;
    ApiResponse kpi_teams(const ApiRequest& req) const;
    ApiResponse model_artifact(const std::string& name) const;
    ApiResponse health() const;

    ServiceConfig cfg_;
    std::vector<P3Moment> moments_;
    std::map<std::string, std::size_t> by_id_;
    std::vector<std::optional<double>> probabilities_;
    std::optional<CnnModel> model_;
    std::map<std::string, std::string> artifacts_;  // relative path -> bytes
    mutable WhatIfCache cache_;
};

ApiResponse error_response(int status, const std::string& message);

/// Blocks serving `service` over HTTP until `stop_http` is called or the
/// process receives a signal. `cors_origins` may contain "*".
void serve_http(const Service& service, const std::string& host, int port, const std::vector<std::string>& cors_origins);
void stop_http();

}  // namespace p3
