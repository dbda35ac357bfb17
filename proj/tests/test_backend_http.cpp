#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "maps/backend_http.hpp"
#include "maps/canonical_json.hpp"
#include "test_support.hpp"

using namespace maps::backend_http;
using maps::agents::Attachment;
using maps::agents::image_agent_schema;

namespace {

nlohmann::json valid_tree() {
    return {{"users",
             {{{"label", "obj_1"},
               {"x", 0.5},
               {"y", 0.5},
               {"throughput_level", "low"},
               {"context", "c"},
               {"traffic_demand", 1.0}}}}};
}

// In-process stub endpoint. Handlers run on the server's own threads.
class StubServer {
public:
    explicit StubServer(httplib::Server::Handler handler) {
        server_.Post("/generate", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/generate"; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

BackendConfig stub_config(const std::string& url) {
    BackendConfig config;
    config.endpoint_url = url;
    config.model_name = "stub-model";
    config.api_key_source = "MAPS_TEST_KEY"; // tests own this variable
    config.timeout_s = 5;
    return config;
}

// Records requested backoff delays instead of sleeping.
struct SleepLog {
    std::vector<double> delays;
    Sleeper sleeper() {
        return [this](double seconds) { delays.push_back(seconds); };
    }
};

} // namespace

TEST_CASE("backend config json and validation") {
    const auto config = BackendConfig::from_json({{"endpoint_url", "http://h/p"},
                                                  {"model_name", "m"},
                                                  {"timeout_s", 30},
                                                  {"max_retries", 2},
                                                  {"backoff_base_s", 0.5},
                                                  {"max_inflight", 4}});
    CHECK(config.endpoint_url == "http://h/p");
    CHECK(config.max_retries == 2);
    CHECK(config.backoff_base_s == 0.5);
    CHECK(config.api_key_source == "MAPS_API_KEY"); // default stands

    CHECK_THROWS_AS(BackendConfig::from_json({{"model_name", "m"}}), maps::Error);
    auto bad = stub_config("http://h/p");
    bad.max_retries = -1;
    CHECK_THROWS_AS(bad.validate(), maps::Error);
    bad = stub_config("http://h/p");
    bad.max_inflight = 0;
    CHECK_THROWS_AS(bad.validate(), maps::Error);
    bad = stub_config("");
    CHECK_THROWS_AS(bad.validate(), maps::Error);
}

TEST_CASE("wire requests carry schema, prompt and encoded attachments") {
    const auto config = stub_config("http://h/generate");
    const std::vector<Attachment> attachments = {
        {"frame", "frame_0001.png", ""},
        {"detection_report", "", "{\"entries\":[]}"},
    };
    const auto wire = build_wire_request(config, "describe the scene", attachments,
                                         image_agent_schema());
    CHECK(wire["model"] == "stub-model");
    CHECK(wire["prompt"] == "describe the scene");
    CHECK(wire["response_schema"]["name"] == "image_agent");
    CHECK(wire["response_schema"]["schema"] == image_agent_schema().schema);
    REQUIRE(wire["attachments"].size() == 2);
    CHECK(wire["attachments"][0]["uri"] == "frame_0001.png");
    CHECK_FALSE(wire["attachments"][0].contains("inline_base64"));
    CHECK(wire["attachments"][1]["inline_base64"] == "eyJlbnRyaWVzIjpbXX0=");

    // Inline payloads beyond 20 MB are refused before any network use.
    std::vector<Attachment> heavy = {{"detection_report", "",
                                      std::string(20 * 1024 * 1024 + 1, 'x')}};
    CHECK_THROWS_WITH_AS(build_wire_request(config, "p", heavy, image_agent_schema()),
                         doctest::Contains("AttachmentTooLarge"), maps::Error);
}

TEST_CASE("success path returns the validated tree and measures latency") {
    setenv("MAPS_TEST_KEY", "sk-test-0123456789", 1);
    std::atomic<int> hits{0};
    std::string seen_auth, seen_body;
    StubServer server([&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        std::this_thread::sleep_for(std::chrono::milliseconds(80));
        res.set_content(valid_tree().dump(), "application/json");
    });

    HttpModelBackend backend(stub_config(server.url()));
    CHECK(backend.identity() == "live:stub-model");
    const auto result = backend.generate_structured("prompt", {}, image_agent_schema());
    CHECK(result.tree == valid_tree());
    CHECK(result.latency_s >= 0.08);
    CHECK(hits == 1);
    CHECK(seen_auth == "Bearer sk-test-0123456789");
    // The posted body is the canonical wire request.
    const auto posted = nlohmann::json::parse(seen_body);
    CHECK(posted["model"] == "stub-model");
    CHECK(posted["prompt"] == "prompt");
    unsetenv("MAPS_TEST_KEY");
}

TEST_CASE("transient failures retry on the exact backoff schedule") {
    std::atomic<int> hits{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        const int n = ++hits;
        if (n <= 2) {
            res.status = 429;
            return;
        }
        res.set_content(valid_tree().dump(), "application/json");
    });

    SleepLog log;
    HttpModelBackend backend(stub_config(server.url()), log.sleeper());
    const auto result = backend.generate_structured("p", {}, image_agent_schema());
    CHECK(result.tree == valid_tree());
    CHECK(hits == 3);
    REQUIRE(log.delays.size() == 2);
    CHECK(log.delays[0] == 2.0); // backoff_base * 2^0
    CHECK(log.delays[1] == 4.0); // backoff_base * 2^1
}

TEST_CASE("retry budget exhaustion classifies the final error") {
    std::atomic<int> hits{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 503;
    });

    auto config = stub_config(server.url());
    config.max_retries = 2;
    config.backoff_base_s = 0.25;
    SleepLog log;
    HttpModelBackend backend(config, log.sleeper());
    CHECK_THROWS_WITH_AS(backend.generate_structured("p", {}, image_agent_schema()),
                         doctest::Contains("after 3 attempts"), maps::Error);
    CHECK(hits == 3); // 1 try + 2 retries
    REQUIRE(log.delays.size() == 2);
    CHECK(log.delays[0] == 0.25);
    CHECK(log.delays[1] == 0.5);

    // A rate limit at exhaustion surfaces as RateLimited.
    std::atomic<int> limited_hits{0};
    StubServer limited([&](const httplib::Request&, httplib::Response& res) {
        ++limited_hits;
        res.status = 429;
    });
    auto limited_config = stub_config(limited.url());
    limited_config.max_retries = 1;
    SleepLog limited_log;
    HttpModelBackend limited_backend(limited_config, limited_log.sleeper());
    CHECK_THROWS_WITH_AS(limited_backend.generate_structured("p", {}, image_agent_schema()),
                         doctest::Contains("RateLimited"), maps::Error);
    CHECK(limited_hits == 2);
}

TEST_CASE("unreachable endpoints exhaust the transport retry budget") {
    // Nothing listens here; connections fail fast.
    auto config = stub_config("http://127.0.0.1:1/generate");
    config.max_retries = 1;
    config.timeout_s = 1;
    SleepLog log;
    HttpModelBackend backend(config, log.sleeper());
    CHECK_THROWS_WITH_AS(backend.generate_structured("p", {}, image_agent_schema()),
                         doctest::Contains("TransportError"), maps::Error);
    CHECK(log.delays.size() == 1);
}

TEST_CASE("schema violations and auth failures never retry") {
    std::atomic<int> hits{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.set_content(R"({"not_users": []})", "application/json");
    });
    SleepLog log;
    HttpModelBackend backend(stub_config(server.url()), log.sleeper());
    CHECK_THROWS_WITH_AS(backend.generate_structured("p", {}, image_agent_schema()),
                         doctest::Contains("SchemaViolation"), maps::Error);
    CHECK(hits == 1);
    CHECK(log.delays.empty());

    std::atomic<int> non_json_hits{0};
    StubServer non_json([&](const httplib::Request&, httplib::Response& res) {
        ++non_json_hits;
        res.set_content("definitely not json", "text/plain");
    });
    HttpModelBackend non_json_backend(stub_config(non_json.url()), log.sleeper());
    CHECK_THROWS_WITH_AS(non_json_backend.generate_structured("p", {}, image_agent_schema()),
                         doctest::Contains("non-JSON"), maps::Error);
    CHECK(non_json_hits == 1);

    std::atomic<int> auth_hits{0};
    StubServer auth([&](const httplib::Request&, httplib::Response& res) {
        ++auth_hits;
        res.status = 401;
    });
    HttpModelBackend auth_backend(stub_config(auth.url()), log.sleeper());
    CHECK_THROWS_WITH_AS(auth_backend.generate_structured("p", {}, image_agent_schema()),
                         doctest::Contains("AuthError"), maps::Error);
    CHECK(auth_hits == 1);
    CHECK(log.delays.empty());
}

TEST_CASE("the api key never leaks into error messages") {
    const std::string secret = "sk-live-abcdef0123456789";
    setenv("MAPS_TEST_KEY", secret.c_str(), 1);

    // The stub echoes the key back inside an almost-valid tree; the enum
    // mismatch forces an error message quoting the offending value.
    StubServer server([&](const httplib::Request& req, httplib::Response& res) {
        auto tree = valid_tree();
        tree["users"][0]["throughput_level"] =
            req.get_header_value("Authorization").substr(7); // strip "Bearer "
        res.set_content(tree.dump(), "application/json");
    });

    HttpModelBackend backend(stub_config(server.url()));
    try {
        backend.generate_structured("p", {}, image_agent_schema());
        FAIL("expected a SchemaViolation");
    } catch (const maps::Error& e) {
        const std::string message = e.what();
        CHECK(message.find(secret) == std::string::npos);
        CHECK(message.find("[redacted]") != std::string::npos);
    }
    unsetenv("MAPS_TEST_KEY");
}

TEST_CASE("inflight requests are capped by the limiter") {
    std::atomic<int> inflight{0};
    std::atomic<int> peak{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        const int now = ++inflight;
        int snapshot = peak.load();
        while (now > snapshot && !peak.compare_exchange_weak(snapshot, now)) {}
        std::this_thread::sleep_for(std::chrono::milliseconds(120));
        --inflight;
        res.set_content(valid_tree().dump(), "application/json");
    });

    auto config = stub_config(server.url());
    config.max_inflight = 2;
    HttpModelBackend backend(config);

    std::vector<std::thread> callers;
    std::atomic<int> done{0};
    for (int i = 0; i < 5; ++i) {
        callers.emplace_back([&] {
            backend.generate_structured("p", {}, image_agent_schema());
            ++done;
        });
    }
    for (auto& t : callers) t.join();
    CHECK(done == 5);
    CHECK(peak.load() <= 2);
}

TEST_CASE("fixture recording lands atomically in the replay layout") {
    maps_test::TempDir dir("record");
    auto config = stub_config("http://h/generate");
    config.record_dir = (dir / "fixtures").string();

    record_fixture(config, "scenario_0009", "image_agent", nlohmann::json::object(),
                   valid_tree());
    const auto path = dir.path() / "fixtures" / "scenario_0009" / "image_agent.json";
    REQUIRE(std::filesystem::exists(path));
    CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    CHECK(maps_test::read_file(path) == maps::canonical_dump(valid_tree(), 2) + "\n");

    // Re-recording overwrites in place.
    auto other = valid_tree();
    other["users"][0]["label"] = "obj_2";
    record_fixture(config, "scenario_0009", "image_agent", nlohmann::json::object(), other);
    CHECK(maps_test::read_file(path).find("obj_2") != std::string::npos);

    auto disabled = stub_config("http://h/generate");
    CHECK_THROWS_WITH_AS(record_fixture(disabled, "s", "a", {}, valid_tree()),
                         doctest::Contains("IoError"), maps::Error);
}
