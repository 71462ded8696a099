#include "rowfollow/annotation_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "rowfollow/record_io.hpp"

namespace rowfollow {

using nlohmann::json;

namespace {

json lineToPixelJson(const Line2D& line, const CameraIntrinsics& cam) {
    const double cx = cam.width / 2.0, cy = cam.height / 2.0;
    return json::array({{line.p0.x() + cx, line.p0.y() + cy},
                        {line.p1.x() + cx, line.p1.y() + cy}});
}

Line2D lineFromPixelJson(const json& arr, const CameraIntrinsics& cam) {
    if (!arr.is_array() || arr.size() != 2)
        throw Error("annotation line must be a pair of points");
    const double cx = cam.width / 2.0, cy = cam.height / 2.0;
    return Line2D(arr.at(0).at(0).get<double>() - cx, arr.at(0).at(1).get<double>() - cy,
                  arr.at(1).at(0).get<double>() - cx, arr.at(1).at(1).get<double>() - cy);
}

}  // namespace

json annotationRecordToJson(const AnnotationRecord& rec) {
    json doc;
    doc["image_id"] = rec.imageId;
    doc["f_px"] = rec.intrinsics.focalPx;
    doc["width"] = rec.intrinsics.width;
    doc["height"] = rec.intrinsics.height;
    doc["left_row"] = lineToPixelJson(rec.annotations.leftRow, rec.intrinsics);
    doc["right_row"] = lineToPixelJson(rec.annotations.rightRow, rec.intrinsics);
    doc["horizon"] = rec.annotations.horizon
                         ? lineToPixelJson(*rec.annotations.horizon, rec.intrinsics)
                         : json(nullptr);
    if (rec.annotations.stalks.empty()) {
        doc["stalks"] = json(nullptr);
    } else {
        json stalks = json::array();
        for (const auto& s : rec.annotations.stalks)
            stalks.push_back(lineToPixelJson(s, rec.intrinsics));
        doc["stalks"] = stalks;
    }
    return doc;
}

AnnotationRecord annotationRecordFromJson(const json& doc) {
    try {
        AnnotationRecord rec;
        rec.imageId = doc.at("image_id").get<std::string>();
        rec.intrinsics.focalPx = doc.at("f_px").get<double>();
        rec.intrinsics.width = doc.at("width").get<int>();
        rec.intrinsics.height = doc.at("height").get<int>();
        rec.intrinsics.validate();
        rec.annotations.leftRow = lineFromPixelJson(doc.at("left_row"), rec.intrinsics);
        rec.annotations.rightRow = lineFromPixelJson(doc.at("right_row"), rec.intrinsics);
        if (doc.contains("horizon") && !doc.at("horizon").is_null())
            rec.annotations.horizon = lineFromPixelJson(doc.at("horizon"), rec.intrinsics);
        if (doc.contains("stalks") && !doc.at("stalks").is_null())
            for (const auto& s : doc.at("stalks"))
                rec.annotations.stalks.push_back(lineFromPixelJson(s, rec.intrinsics));
        return rec;
    } catch (const json::exception& e) {
        throw Error(std::string("annotation record: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw Error(std::string("annotation record: ") + e.what());
    }
}

json labelRecordToJson(const LabelRecord& rec) {
    return {{"image_id", rec.imageId},
            {"heading_deg", rec.headingDeg},
            {"distance_ratio", rec.distanceRatio},
            {"roll_deg", rec.rollDeg},
            {"pitch_deg", rec.pitchDeg}};
}

LabelRecord labelRecordFromJson(const json& doc) {
    try {
        LabelRecord rec;
        rec.imageId = doc.at("image_id").get<std::string>();
        rec.headingDeg = doc.at("heading_deg").get<double>();
        rec.distanceRatio = doc.at("distance_ratio").get<double>();
        rec.rollDeg = doc.at("roll_deg").get<double>();
        rec.pitchDeg = doc.at("pitch_deg").get<double>();
        return rec;
    } catch (const json::exception& e) {
        throw Error(std::string("label record: ") + e.what());
    }
}

LabelRecord makeLabelRecord(const std::string& imageId, const GroundTruthLabel& label) {
    constexpr double kRadToDeg = 180.0 / M_PI;
    LabelRecord rec;
    rec.imageId = imageId;
    rec.headingDeg = label.heading * kRadToDeg;
    rec.distanceRatio = label.distanceRatio;
    rec.rollDeg = label.attitude.roll * kRadToDeg;
    rec.pitchDeg = label.attitude.pitch * kRadToDeg;
    return rec;
}

namespace {

template <typename T, typename ToJson>
void writeJsonl(const std::string& path, const std::vector<T>& records, ToJson&& toJson) {
    std::ostringstream out;
    for (const auto& rec : records) out << toJson(rec).dump() << '\n';
    writeTextFileAtomic(path, out.str());
}

template <typename T, typename FromJson>
std::vector<T> readJsonl(const std::string& path, FromJson&& fromJson) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    std::vector<T> records;
    std::string line;
    size_t lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty()) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(path + ":" + std::to_string(lineNo) + ": " + e.what());
        }
        records.push_back(fromJson(doc));
    }
    return records;
}

}  // namespace

void writeAnnotationsJsonl(const std::string& path,
                           const std::vector<AnnotationRecord>& records) {
    writeJsonl(path, records, annotationRecordToJson);
}

std::vector<AnnotationRecord> readAnnotationsJsonl(const std::string& path) {
    return readJsonl<AnnotationRecord>(path, annotationRecordFromJson);
}

void writeLabelsJsonl(const std::string& path, const std::vector<LabelRecord>& records) {
    writeJsonl(path, records, labelRecordToJson);
}

std::vector<LabelRecord> readLabelsJsonl(const std::string& path) {
    return readJsonl<LabelRecord>(path, labelRecordFromJson);
}

}  // namespace rowfollow
