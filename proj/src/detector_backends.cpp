#include <httplib.h>

#include "maps/error.hpp"
#include "maps/perception.hpp"
#include "http_util.hpp"
#include "json_io.hpp"

namespace maps::perception {

DetectionFrame FileDetectorBackend::detect(const std::string& frame_ref) {
    return parse_detection_fixture(detail::load_json_file(frame_ref));
}

HttpDetectorBackend::HttpDetectorBackend(std::string url, double timeout_s)
    : url_(std::move(url)), timeout_s_(timeout_s) {}

DetectionFrame HttpDetectorBackend::detect(const std::string& frame_ref) {
    auto split = detail::split_url(url_);
    httplib::Client client(split.base);
    client.set_connection_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s_ * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s_ * 1000)));

    nlohmann::json body{{"frame", frame_ref}};
    auto res = client.Post(split.path, body.dump(), "application/json");
    if (!res) {
        throw Error("TransportError", "detector endpoint unreachable");
    }
    if (res->status != 200) {
        throw Error("TransportError", "detector endpoint returned status " + std::to_string(res->status));
    }
    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) {
        throw Error("ParseError", "detector endpoint returned invalid JSON");
    }
    return parse_detection_fixture(j);
}

} // namespace maps::perception
