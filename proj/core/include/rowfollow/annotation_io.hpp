#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "rowfollow/geometry.hpp"

namespace rowfollow {

/// One annotated image: intrinsics plus line labels. Stored on disk in
/// top-left pixel coordinates; held in memory in centred coordinates.
struct AnnotationRecord {
    std::string imageId;
    CameraIntrinsics intrinsics;
    AnnotationSet annotations;
};

struct LabelRecord {
    std::string imageId;
    double headingDeg = 0.0;
    double distanceRatio = 0.5;
    double rollDeg = 0.0;
    double pitchDeg = 0.0;
};

nlohmann::json annotationRecordToJson(const AnnotationRecord& rec);
AnnotationRecord annotationRecordFromJson(const nlohmann::json& doc);

nlohmann::json labelRecordToJson(const LabelRecord& rec);
LabelRecord labelRecordFromJson(const nlohmann::json& doc);

LabelRecord makeLabelRecord(const std::string& imageId, const GroundTruthLabel& label);

/// Whole-file helpers (one JSON record per line). Readers throw Error when
/// the file cannot be opened; per-line parse errors propagate as Error with
/// the line number.
void writeAnnotationsJsonl(const std::string& path,
                           const std::vector<AnnotationRecord>& records);
std::vector<AnnotationRecord> readAnnotationsJsonl(const std::string& path);
void writeLabelsJsonl(const std::string& path, const std::vector<LabelRecord>& records);
std::vector<LabelRecord> readLabelsJsonl(const std::string& path);

}  // namespace rowfollow
