#include "maps/backend_http.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "maps/canonical_json.hpp"
#include "maps/error.hpp"
#include "maps/schema.hpp"
#include "http_util.hpp"
#include "json_io.hpp"

namespace maps::backend_http {

namespace {

constexpr std::size_t kAttachmentCap = 20 * 1024 * 1024;

std::string redact(std::string message, const std::string& secret) {
    if (secret.empty()) return message;
    std::size_t at = 0;
    while ((at = message.find(secret, at)) != std::string::npos) {
        message.replace(at, secret.size(), "[redacted]");
        at += std::string("[redacted]").size();
    }
    return message;
}

} // namespace

BackendConfig BackendConfig::from_json(const nlohmann::json& j) {
    BackendConfig c;
    if (j.contains("endpoint_url")) c.endpoint_url = j["endpoint_url"].get<std::string>();
    if (j.contains("model_name")) c.model_name = j["model_name"].get<std::string>();
    if (j.contains("api_key_source")) c.api_key_source = j["api_key_source"].get<std::string>();
    if (j.contains("timeout_s")) c.timeout_s = j["timeout_s"].get<double>();
    if (j.contains("max_retries")) c.max_retries = j["max_retries"].get<int>();
    if (j.contains("backoff_base_s")) c.backoff_base_s = j["backoff_base_s"].get<double>();
    if (j.contains("max_inflight")) c.max_inflight = j["max_inflight"].get<int>();
    if (j.contains("record_dir")) c.record_dir = j["record_dir"].get<std::string>();
    c.validate();
    return c;
}

void BackendConfig::validate() const {
    if (endpoint_url.empty()) throw Error("ConfigError", "endpoint_url must be set");
    if (timeout_s <= 0) throw Error("ConfigError", "timeout_s must be > 0");
    if (max_retries < 0) throw Error("ConfigError", "max_retries must be >= 0");
    if (backoff_base_s < 0) throw Error("ConfigError", "backoff_base_s must be >= 0");
    if (max_inflight < 1) throw Error("ConfigError", "max_inflight must be >= 1");
}

nlohmann::json build_wire_request(const BackendConfig& config, const std::string& prompt,
                                  const std::vector<agents::Attachment>& attachments,
                                  const agents::OutputSchema& output_schema) {
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& a : attachments) {
        nlohmann::json part{{"kind", a.kind}};
        if (!a.uri.empty()) {
            part["uri"] = a.uri;
        } else {
            if (a.inline_content.size() > kAttachmentCap) {
                throw Error("AttachmentTooLarge",
                            "'" + a.kind + "' attachment is " +
                                std::to_string(a.inline_content.size()) +
                                " bytes; the wire cap is 20 MB");
            }
            part["inline_base64"] = detail::base64_encode(a.inline_content);
        }
        parts.push_back(std::move(part));
    }
    return {{"model", config.model_name},
            {"prompt", prompt},
            {"response_schema", {{"name", output_schema.name}, {"schema", output_schema.schema}}},
            {"attachments", std::move(parts)}};
}

void HttpModelBackend::InflightLimiter::acquire() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [this] { return free_ > 0; });
    --free_;
}

void HttpModelBackend::InflightLimiter::release() {
    {
        std::lock_guard<std::mutex> lock(mu_);
        ++free_;
    }
    cv_.notify_one();
}

HttpModelBackend::HttpModelBackend(BackendConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)),
      limiter_(config_.max_inflight) {
    config_.validate();
    if (const char* key = std::getenv(config_.api_key_source.c_str())) {
        api_key_ = key;
    }
    if (!sleeper_) {
        sleeper_ = [](double seconds) {
            std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
        };
    }
}

agents::GenerationResult HttpModelBackend::generate_structured(
    const std::string& prompt, const std::vector<agents::Attachment>& attachments,
    const agents::OutputSchema& output_schema) {
    const nlohmann::json request = build_wire_request(config_, prompt, attachments, output_schema);
    const std::string body = canonical_dump(request);
    const auto split = detail::split_url(config_.endpoint_url);

    limiter_.acquire();
    struct Release {
        InflightLimiter& limiter;
        ~Release() { limiter.release(); }
    } release{limiter_};

    const auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    };
    auto fail = [&](const char* kind, const std::string& message) {
        return Error(kind, redact(message, api_key_));
    };

    for (int attempt = 1;; ++attempt) {
        httplib::Client client(split.base);
        const auto timeout =
            std::chrono::milliseconds(static_cast<long long>(config_.timeout_s * 1000));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers headers;
        if (!api_key_.empty()) {
            headers.emplace("Authorization", "Bearer " + api_key_);
        }

        auto res = client.Post(split.path, headers, body, "application/json");

        std::string transient;
        if (!res) {
            transient = "endpoint unreachable or timed out";
        } else if (res->status == 429) {
            transient = "rate limited";
        } else if (res->status >= 500) {
            transient = "endpoint returned status " + std::to_string(res->status);
        } else if (res->status == 401 || res->status == 403) {
            throw fail("AuthError", "endpoint rejected credentials with status " +
                                        std::to_string(res->status));
        } else if (res->status < 200 || res->status >= 300) {
            throw fail("TransportError",
                       "endpoint returned status " + std::to_string(res->status));
        } else {
            nlohmann::json tree = nlohmann::json::parse(res->body, nullptr, false);
            if (tree.is_discarded()) {
                throw fail("SchemaViolation", "endpoint returned a non-JSON body");
            }
            auto problems = schema::check(tree, output_schema.schema);
            if (!problems.empty()) {
                throw fail("SchemaViolation", problems.front());
            }
            agents::GenerationResult result;
            result.tree = std::move(tree);
            result.latency_s = elapsed();
            return result;
        }

        if (attempt > config_.max_retries) {
            const char* kind = res && res->status == 429 ? "RateLimited" : "TransportError";
            throw fail(kind, transient + " after " + std::to_string(attempt) + " attempts");
        }
        sleeper_(config_.backoff_base_s * std::pow(2.0, attempt - 1));
    }
}

void record_fixture(const BackendConfig& config, const std::string& scenario_id,
                    const std::string& agent_name, const nlohmann::json& request,
                    const nlohmann::json& response) {
    (void)request; // the replay layout stores response trees only
    if (config.record_dir.empty()) {
        throw Error("IoError", "record_dir is not configured");
    }
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(config.record_dir) / scenario_id;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error("IoError", "cannot create " + dir.string() + ": " + ec.message());
    }
    const fs::path final_path = dir / (agent_name + ".json");
    const fs::path temp_path = dir / (agent_name + ".json.tmp");
    detail::write_text_file(temp_path, canonical_dump(response, 2) + "\n");
    fs::rename(temp_path, final_path, ec);
    if (ec) {
        fs::remove(temp_path);
        throw Error("IoError", "cannot move fixture into place: " + ec.message());
    }
}

} // namespace maps::backend_http
