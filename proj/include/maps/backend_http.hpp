#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "maps/agents.hpp"

namespace maps::backend_http {

struct BackendConfig {
    std::string endpoint_url;
    std::string model_name;
    std::string api_key_source = "MAPS_API_KEY"; // environment variable name
    double timeout_s = 120;
    int max_retries = 3;
    double backoff_base_s = 2; // delay before retry k is backoff_base * 2^(k-1)
    int max_inflight = 3;
    std::string record_dir; // empty: fixture recording disabled

    static BackendConfig from_json(const nlohmann::json& j);
    void validate() const;
};

// Injectable so tests can assert the exact backoff schedule without waiting.
using Sleeper = std::function<void(double seconds)>;

// {model, prompt, response_schema, attachments:[{kind, uri|inline_base64}]}.
// Inline attachments above 20 MB raise AttachmentTooLarge.
nlohmann::json build_wire_request(const BackendConfig& config, const std::string& prompt,
                                  const std::vector<agents::Attachment>& attachments,
                                  const agents::OutputSchema& output_schema);

// Live structured-generation client. Retries transport failures, 5xx and 429
// with exponential backoff; 401/403 (AuthError) and nonconforming 2xx bodies
// (SchemaViolation) are terminal. The resolved API key never appears in any
// error message.
class HttpModelBackend : public agents::ModelBackend {
public:
    explicit HttpModelBackend(BackendConfig config, Sleeper sleeper = {});

    std::string identity() const override { return "live:" + config_.model_name; }
    agents::GenerationResult generate_structured(
        const std::string& prompt, const std::vector<agents::Attachment>& attachments,
        const agents::OutputSchema& output_schema) override;

private:
    class InflightLimiter {
    public:
        explicit InflightLimiter(int slots) : free_(slots) {}
        void acquire();
        void release();

    private:
        std::mutex mu_;
        std::condition_variable cv_;
        int free_;
    };

    BackendConfig config_;
    std::string api_key_;
    Sleeper sleeper_;
    InflightLimiter limiter_;
};

// Persists the response tree at <record_dir>/<scenario_id>/<agent_name>.json
// in the replay-backend layout. The write lands atomically (temp + rename);
// re-recording overwrites.
void record_fixture(const BackendConfig& config, const std::string& scenario_id,
                    const std::string& agent_name, const nlohmann::json& request,
                    const nlohmann::json& response);

} // namespace maps::backend_http
