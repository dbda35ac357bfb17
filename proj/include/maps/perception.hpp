#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "maps/sls.hpp"

namespace maps::perception {

// Per-category confidence thresholds. A detection survives iff its
// confidence STRICTLY exceeds its category threshold; boundary values drop.
// Unknown categories drop unless unknown_keep_above is set.
struct FilterPolicy {
    std::map<std::string, double> thresholds;
    std::optional<double> unknown_keep_above;

    // {car, airplane, truck, bus} -> 0.40, {person, motorcycle} -> 0.20, unknown -> drop
    static FilterPolicy defaults();
    // {"thresholds":{category:number}, "unknown":"drop"|number}
    static FilterPolicy from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    std::optional<double> threshold_for(const std::string& category) const;
};

std::vector<sls::Detection> filter_detections(const std::vector<sls::Detection>& detections,
                                              const FilterPolicy& policy);

// Center of box as fractions of the frame. Throws DegenerateBox on zero
// area, OutOfFrame when the box exceeds frame bounds.
sls::RelativePoint bbox_center(const sls::BoundingBox& box, double frame_width, double frame_height);

struct ReportEntry {
    std::string tag; // "obj_1"... assigned in reading order
    std::string category;
    double confidence = 0;
    sls::RelativePoint center;
    sls::BoundingBox box;
};

struct DetectionReport {
    std::string frame_id;
    double frame_width = 0;
    double frame_height = 0;
    std::vector<ReportEntry> entries;

    nlohmann::json to_json() const;
};

// One entry per (already filtered) detection. Tags follow reading order of
// centers: sort by y, then x, ties by original detection index.
DetectionReport build_detection_report(const std::string& frame_id,
                                       double frame_width, double frame_height,
                                       const std::vector<sls::Detection>& filtered);

// SVG overlay: frame-sized, references (does not embed) the source frame,
// one rect + one text label per entry. Deterministic bytes.
std::string emit_overlay(const DetectionReport& report);

// Detection fixture format:
// {frame_id, width, height, detections:[{category, confidence, box:[x0,y0,x1,y1]}]}
struct DetectionFrame {
    std::string frame_id;
    double width = 0;
    double height = 0;
    std::vector<sls::Detection> detections;
};

DetectionFrame parse_detection_fixture(const nlohmann::json& j);
nlohmann::json fixture_to_json(const DetectionFrame& frame);

// Boundary to the concrete detector. Implementations must be deterministic
// for a fixed frame reference and configuration (best effort for live ones).
class DetectorBackend {
public:
    virtual ~DetectorBackend() = default;
    virtual std::string identity() const = 0;
    // Safe to call concurrently on distinct frames unless this says otherwise.
    virtual bool concurrent_ok() const { return true; }
    virtual DetectionFrame detect(const std::string& frame_ref) = 0;
};

// Loads precomputed detections; frame_ref is a fixture file path.
class FileDetectorBackend : public DetectorBackend {
public:
    std::string identity() const override { return "file-detector"; }
    DetectionFrame detect(const std::string& frame_ref) override;
};

// POSTs {"frame": ref} to a detection service and expects the fixture format back.
class HttpDetectorBackend : public DetectorBackend {
public:
    HttpDetectorBackend(std::string url, double timeout_s = 30.0);
    std::string identity() const override { return "http-detector"; }
    bool concurrent_ok() const override { return false; } // single-flight client
    DetectionFrame detect(const std::string& frame_ref) override;

private:
    std::string url_;
    double timeout_s_;
};

} // namespace maps::perception
