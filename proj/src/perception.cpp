#include "maps/perception.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>

#include "maps/canonical_json.hpp"
#include "maps/error.hpp"

namespace maps::perception {

FilterPolicy FilterPolicy::defaults() {
    FilterPolicy p;
    for (const char* big : {"car", "airplane", "truck", "bus"}) {
        p.thresholds[big] = 0.40;
    }
    for (const char* small : {"person", "motorcycle"}) {
        p.thresholds[small] = 0.20;
    }
    return p;
}

FilterPolicy FilterPolicy::from_json(const nlohmann::json& j) {
    FilterPolicy p;
    if (!j.is_object() || !j.contains("thresholds") || !j["thresholds"].is_object()) {
        throw Error("ParseError", "filter policy needs a thresholds object");
    }
    for (auto it = j["thresholds"].begin(); it != j["thresholds"].end(); ++it) {
        double t = it.value().get<double>();
        if (t < 0.0 || t > 1.0) {
            throw Error("ParseError", "threshold for " + it.key() + " outside [0,1]");
        }
        p.thresholds[it.key()] = t;
    }
    if (j.contains("unknown") && !j["unknown"].is_null()) {
        if (j["unknown"].is_number()) {
            p.unknown_keep_above = j["unknown"].get<double>();
        } else if (j["unknown"].get<std::string>() != "drop") {
            throw Error("ParseError", "unknown must be \"drop\" or a threshold");
        }
    }
    return p;
}

nlohmann::json FilterPolicy::to_json() const {
    nlohmann::json t = nlohmann::json::object();
    for (const auto& [category, threshold] : thresholds) {
        t[category] = threshold;
    }
    nlohmann::json j{{"thresholds", std::move(t)}};
    j["unknown"] = unknown_keep_above ? nlohmann::json(*unknown_keep_above) : nlohmann::json("drop");
    return j;
}

std::optional<double> FilterPolicy::threshold_for(const std::string& category) const {
    auto it = thresholds.find(category);
    if (it != thresholds.end()) return it->second;
    return unknown_keep_above; // nullopt means drop
}

std::vector<sls::Detection> filter_detections(const std::vector<sls::Detection>& detections,
                                              const FilterPolicy& policy) {
    std::vector<sls::Detection> kept;
    kept.reserve(detections.size());
    for (const auto& d : detections) {
        auto threshold = policy.threshold_for(d.category);
        if (threshold && d.confidence > *threshold) {
            kept.push_back(d);
        }
    }
    return kept;
}

sls::RelativePoint bbox_center(const sls::BoundingBox& box, double frame_width, double frame_height) {
    if (frame_width <= 0 || frame_height <= 0) {
        throw Error("OutOfFrame", "frame dimensions must be positive");
    }
    if (box.width() <= 0 || box.height() <= 0) {
        throw Error("DegenerateBox", "box has zero area");
    }
    if (box.x_min < 0 || box.y_min < 0 || box.x_max > frame_width || box.y_max > frame_height) {
        throw Error("OutOfFrame", "box exceeds frame bounds");
    }
    return {(box.x_min + box.x_max) / 2.0 / frame_width,
            (box.y_min + box.y_max) / 2.0 / frame_height};
}

DetectionReport build_detection_report(const std::string& frame_id,
                                       double frame_width, double frame_height,
                                       const std::vector<sls::Detection>& filtered) {
    DetectionReport report;
    report.frame_id = frame_id;
    report.frame_width = frame_width;
    report.frame_height = frame_height;

    std::vector<sls::RelativePoint> centers;
    centers.reserve(filtered.size());
    for (const auto& d : filtered) {
        centers.push_back(bbox_center(d.box, frame_width, frame_height));
    }

    // Reading order: y, then x, ties by original index.
    std::vector<size_t> order(filtered.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (centers[a].y != centers[b].y) return centers[a].y < centers[b].y;
        if (centers[a].x != centers[b].x) return centers[a].x < centers[b].x;
        return a < b;
    });

    size_t n = 1;
    for (size_t idx : order) {
        ReportEntry entry;
        entry.tag = "obj_" + std::to_string(n++);
        entry.category = filtered[idx].category;
        entry.confidence = filtered[idx].confidence;
        entry.center = centers[idx];
        entry.box = filtered[idx].box;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

nlohmann::json DetectionReport::to_json() const {
    nlohmann::json entries_json = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json je;
        je["tag"] = e.tag;
        je["category"] = e.category;
        je["confidence"] = e.confidence;
        je["center"] = {e.center.x, e.center.y};
        je["box"] = {e.box.x_min, e.box.y_min, e.box.x_max, e.box.y_max};
        entries_json.push_back(std::move(je));
    }
    nlohmann::json j;
    j["frame_id"] = frame_id;
    j["frame_width"] = frame_width;
    j["frame_height"] = frame_height;
    j["entries"] = std::move(entries_json);
    return j;
}

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

// Stable cross-platform category color (std::hash is not portable).
uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

const char* category_color(const std::string& category) {
    static const char* palette[] = {"#e6194b", "#3cb44b", "#ffe119", "#4363d8",
                                    "#f58231", "#911eb4", "#46f0f0", "#f032e6"};
    return palette[fnv1a(category) % (sizeof(palette) / sizeof(palette[0]))];
}

} // namespace

std::string emit_overlay(const DetectionReport& report) {
    const std::string w = canonical_number(report.frame_width);
    const std::string h = canonical_number(report.frame_height);
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + w + "\" height=\"" + h +
           "\" viewBox=\"0 0 " + w + " " + h + "\">\n";
    svg += "  <image href=\"" + xml_escape(report.frame_id) + "\" x=\"0\" y=\"0\" width=\"" + w +
           "\" height=\"" + h + "\"/>\n";
    for (const auto& e : report.entries) {
        const char* color = category_color(e.category);
        svg += "  <rect x=\"" + canonical_number(e.box.x_min) + "\" y=\"" +
               canonical_number(e.box.y_min) + "\" width=\"" + canonical_number(e.box.width()) +
               "\" height=\"" + canonical_number(e.box.height()) + "\" fill=\"none\" stroke=\"" +
               color + "\" stroke-width=\"2\"/>\n";
        svg += "  <text x=\"" + canonical_number(e.box.x_min) + "\" y=\"" +
               canonical_number(std::max(0.0, e.box.y_min - 4.0)) + "\" fill=\"" + color +
               "\" font-size=\"14\" font-family=\"sans-serif\">" + xml_escape(e.tag) + " " +
               xml_escape(e.category) + " " + canonical_number(e.confidence) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

DetectionFrame parse_detection_fixture(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("frame_id") || !j.contains("width") ||
        !j.contains("height") || !j.contains("detections") || !j["detections"].is_array()) {
        throw Error("ParseError", "detection fixture missing frame_id/width/height/detections");
    }
    DetectionFrame frame;
    frame.frame_id = j["frame_id"].get<std::string>();
    frame.width = j["width"].get<double>();
    frame.height = j["height"].get<double>();
    for (const auto& jd : j["detections"]) {
        if (!jd.contains("category") || !jd.contains("confidence") || !jd.contains("box") ||
            !jd["box"].is_array() || jd["box"].size() != 4) {
            throw Error("ParseError", "detection needs category, confidence, box[4]");
        }
        sls::Detection d;
        d.category = jd["category"].get<std::string>();
        d.confidence = jd["confidence"].get<double>();
        if (d.category.empty() || d.confidence < 0.0 || d.confidence > 1.0) {
            throw Error("ParseError", "detection category empty or confidence outside [0,1]");
        }
        d.box = {jd["box"][0].get<double>(), jd["box"][1].get<double>(),
                 jd["box"][2].get<double>(), jd["box"][3].get<double>()};
        if (!d.box.valid()) {
            throw Error("ParseError", "detection box is degenerate or negative");
        }
        frame.detections.push_back(std::move(d));
    }
    return frame;
}

nlohmann::json fixture_to_json(const DetectionFrame& frame) {
    nlohmann::json detections = nlohmann::json::array();
    for (const auto& d : frame.detections) {
        nlohmann::json jd;
        jd["category"] = d.category;
        jd["confidence"] = d.confidence;
        jd["box"] = {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max};
        detections.push_back(std::move(jd));
    }
    nlohmann::json j;
    j["frame_id"] = frame.frame_id;
    j["width"] = frame.width;
    j["height"] = frame.height;
    j["detections"] = std::move(detections);
    return j;
}

} // namespace maps::perception
