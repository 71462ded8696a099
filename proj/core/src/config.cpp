#include "rowfollow/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace rowfollow {

using nlohmann::json;

namespace {

constexpr double kDegToRad = M_PI / 180.0;

json intervalsToJson(const std::vector<ArcInterval>& intervals) {
    json arr = json::array();
    for (const auto& iv : intervals) arr.push_back({{"start", iv.start}, {"length", iv.length}});
    return arr;
}

std::vector<ArcInterval> intervalsFromJson(const json& arr) {
    std::vector<ArcInterval> out;
    for (const auto& item : arr)
        out.push_back({item.at("start").get<double>(), item.at("length").get<double>()});
    return out;
}

// Every key in doc must exist in the schema document (arrays are opaque).
void checkUnknownKeys(const json& doc, const json& schema, const std::string& prefix) {
    if (!doc.is_object()) return;
    for (const auto& [key, value] : doc.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!schema.is_object() || !schema.contains(key))
            throw ConfigInvalid("unknown config key: " + path);
        if (value.is_object()) checkUnknownKeys(value, schema.at(key), path);
    }
}

// Recursive merge of overlay onto base (objects only; other values replace).
void mergeInto(json& base, const json& overlay) {
    if (!overlay.is_object() || !base.is_object()) {
        base = overlay;
        return;
    }
    for (const auto& [key, value] : overlay.items()) {
        if (base.contains(key) && base.at(key).is_object() && value.is_object())
            mergeInto(base.at(key), value);
        else
            base[key] = value;
    }
}

}  // namespace

json configToJson(const TrialConfig& cfg) {
    json field;
    json centerline = json::array();
    for (const auto& v : cfg.field.centerline) centerline.push_back({v.x(), v.y()});
    field["centerline"] = centerline;
    field["laneWidth"] = cfg.field.laneWidth;
    field["gaps"] = intervalsToJson(cfg.field.gaps);
    field["occlusions"] = intervalsToJson(cfg.field.occlusions);

    json perception;
    perception["headingSigmaDeg"] = cfg.perception.headingSigma / kDegToRad;
    perception["distanceRatioSigma"] = cfg.perception.distanceRatioSigma;
    perception["outlierProb"] = cfg.perception.outlierProb;
    perception["outlierScale"] = cfg.perception.outlierScale;
    perception["gapDegradation"] = cfg.perception.gapDegradation;
    perception["updateRate"] = cfg.perception.updateRate;
    perception["latency"] = cfg.perception.latency;
    perception["headingInflationPerRad"] = cfg.perception.headingInflationPerRad;

    json ekf;
    ekf["processDiag"] = {cfg.ekf.processDiag(0), cfg.ekf.processDiag(1),
                          cfg.ekf.processDiag(2), cfg.ekf.processDiag(3)};
    ekf["measurementDiag"] = {cfg.ekf.measurementDiag(0), cfg.ekf.measurementDiag(1),
                              cfg.ekf.measurementDiag(2), cfg.ekf.measurementDiag(3)};

    // Stage weights are uniform with a terminal value in the file schema;
    // arbitrary per-stage arrays remain available programmatically.
    json mpc;
    mpc["horizon"] = cfg.mpc.horizon;
    mpc["step"] = cfg.mpc.stepLength;
    mpc["cteWeight"] = cfg.mpc.cteWeights.front();
    mpc["cteWeightTerminal"] = cfg.mpc.cteWeights.back();
    mpc["headingWeight"] = cfg.mpc.headingWeights.front();
    mpc["headingWeightTerminal"] = cfg.mpc.headingWeights.back();
    mpc["smoothnessWeight"] = cfg.mpc.smoothnessWeights.front();
    mpc["minTurnRadius"] = cfg.mpc.minTurnRadius;
    mpc["maxIterations"] = cfg.mpc.maxIterations;
    mpc["tolerance"] = cfg.mpc.costTolerance;

    json pid;
    pid["kp"] = cfg.pid.kp;
    pid["ki"] = cfg.pid.ki;
    pid["kd"] = cfg.pid.kd;
    pid["integratorLimit"] = cfg.pid.integratorLimit;
    pid["feedforward"] = cfg.pid.feedforward;

    json doc;
    doc["field"] = field;
    doc["v"] = cfg.v;
    doc["controlRate"] = cfg.controlRate;
    doc["physicsRate"] = cfg.physicsRate;
    doc["perception"] = perception;
    doc["useIMU"] = cfg.useIMU;
    doc["seed"] = cfg.seed;
    doc["robotHalfWidth"] = cfg.robotHalfWidth;
    doc["initialOffset"] = cfg.initialOffset;
    doc["initialHeadingDeg"] = cfg.initialHeading / kDegToRad;
    doc["ekf"] = ekf;
    doc["mpc"] = mpc;
    doc["pid"] = pid;
    doc["actuator"] = {{"timeConstant", cfg.actuator.timeConstant}};
    doc["sensors"] = {{"gyroSigma", cfg.sensors.gyroSigma},
                      {"encoderSigma", cfg.sensors.encoderSigma}};
    doc["maxDurationFactor"] = cfg.maxDurationFactor;
    return doc;
}

json defaultConfigJson() { return configToJson(TrialConfig{}); }

TrialConfig configFromJson(const json& doc) {
    try {
        checkUnknownKeys(doc, defaultConfigJson(), "");
        json merged = defaultConfigJson();
        mergeInto(merged, doc);

        TrialConfig cfg;
        const json& field = merged.at("field");
        cfg.field.centerline.clear();
        for (const auto& v : field.at("centerline"))
            cfg.field.centerline.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
        cfg.field.laneWidth = field.at("laneWidth").get<double>();
        cfg.field.gaps = intervalsFromJson(field.at("gaps"));
        cfg.field.occlusions = intervalsFromJson(field.at("occlusions"));

        cfg.v = merged.at("v").get<double>();
        cfg.controlRate = merged.at("controlRate").get<double>();
        cfg.physicsRate = merged.at("physicsRate").get<double>();

        const json& perception = merged.at("perception");
        cfg.perception.headingSigma = perception.at("headingSigmaDeg").get<double>() * kDegToRad;
        cfg.perception.distanceRatioSigma = perception.at("distanceRatioSigma").get<double>();
        cfg.perception.outlierProb = perception.at("outlierProb").get<double>();
        cfg.perception.outlierScale = perception.at("outlierScale").get<double>();
        cfg.perception.gapDegradation = perception.at("gapDegradation").get<double>();
        cfg.perception.updateRate = perception.at("updateRate").get<double>();
        cfg.perception.latency = perception.at("latency").get<double>();
        cfg.perception.headingInflationPerRad =
            perception.at("headingInflationPerRad").get<double>();

        cfg.useIMU = merged.at("useIMU").get<bool>();
        cfg.seed = merged.at("seed").get<std::uint64_t>();
        cfg.robotHalfWidth = merged.at("robotHalfWidth").get<double>();
        cfg.initialOffset = merged.at("initialOffset").get<double>();
        cfg.initialHeading = merged.at("initialHeadingDeg").get<double>() * kDegToRad;

        const json& ekf = merged.at("ekf");
        for (int i = 0; i < 4; ++i) {
            cfg.ekf.processDiag(i) = ekf.at("processDiag").at(static_cast<size_t>(i)).get<double>();
            cfg.ekf.measurementDiag(i) =
                ekf.at("measurementDiag").at(static_cast<size_t>(i)).get<double>();
        }

        const json& mpc = merged.at("mpc");
        cfg.mpc.horizon = mpc.at("horizon").get<int>();
        if (cfg.mpc.horizon < 2) throw ConfigInvalid("mpc.horizon must be >= 2");
        cfg.mpc.stepLength = mpc.at("step").get<double>();
        const auto n = static_cast<size_t>(cfg.mpc.horizon);
        cfg.mpc.cteWeights.assign(n, mpc.at("cteWeight").get<double>());
        cfg.mpc.cteWeights.back() = mpc.at("cteWeightTerminal").get<double>();
        cfg.mpc.headingWeights.assign(n, mpc.at("headingWeight").get<double>());
        cfg.mpc.headingWeights.back() = mpc.at("headingWeightTerminal").get<double>();
        cfg.mpc.smoothnessWeights.assign(n, mpc.at("smoothnessWeight").get<double>());
        cfg.mpc.minTurnRadius = mpc.at("minTurnRadius").get<double>();
        cfg.mpc.maxIterations = mpc.at("maxIterations").get<int>();
        cfg.mpc.costTolerance = mpc.at("tolerance").get<double>();

        const json& pid = merged.at("pid");
        cfg.pid.kp = pid.at("kp").get<double>();
        cfg.pid.ki = pid.at("ki").get<double>();
        cfg.pid.kd = pid.at("kd").get<double>();
        cfg.pid.integratorLimit = pid.at("integratorLimit").get<double>();
        cfg.pid.feedforward = pid.at("feedforward").get<bool>();

        cfg.actuator.timeConstant = merged.at("actuator").at("timeConstant").get<double>();
        cfg.sensors.gyroSigma = merged.at("sensors").at("gyroSigma").get<double>();
        cfg.sensors.encoderSigma = merged.at("sensors").at("encoderSigma").get<double>();
        cfg.maxDurationFactor = merged.at("maxDurationFactor").get<double>();

        try {
            cfg.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigInvalid(e.what());
        }
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigInvalid(std::string("config: ") + e.what());
    }
}

void applyOverride(json& doc, const std::string& keyValue) {
    const auto eq = keyValue.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigInvalid("override must look like key.path=value: " + keyValue);
    const std::string path = keyValue.substr(0, eq);
    const std::string rawValue = keyValue.substr(eq + 1);

    // The path must already exist: overrides cannot invent keys.
    std::vector<std::string> parts;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (part.empty()) throw ConfigInvalid("override has an empty path segment: " + keyValue);
        parts.push_back(part);
    }

    json* node = &doc;
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        const std::string& key = parts[i];
        if (node->is_array()) {
            size_t idx = 0;
            try {
                idx = std::stoul(key);
            } catch (...) {
                throw ConfigInvalid("expected array index in override path: " + path);
            }
            if (idx >= node->size()) throw ConfigInvalid("array index out of range: " + path);
            node = &(*node)[idx];
        } else if (node->is_object() && node->contains(key)) {
            node = &(*node)[key];
        } else {
            throw ConfigInvalid("unknown config key: " + path);
        }
    }

    json value;
    try {
        value = json::parse(rawValue);
    } catch (...) {
        value = rawValue;  // plain string value
    }

    const std::string& leaf = parts.back();
    if (node->is_array()) {
        size_t idx = 0;
        try {
            idx = std::stoul(leaf);
        } catch (...) {
            throw ConfigInvalid("expected array index in override path: " + path);
        }
        if (idx >= node->size()) throw ConfigInvalid("array index out of range: " + path);
        (*node)[idx] = value;
    } else if (node->is_object() && node->contains(leaf)) {
        (*node)[leaf] = value;
    } else {
        throw ConfigInvalid("unknown config key: " + path);
    }
}

TrialConfig loadTrialConfig(const std::string& path,
                            const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("cannot open config file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigInvalid("config parse error in " + path + ": " + e.what());
    }
    checkUnknownKeys(doc, defaultConfigJson(), "");
    json merged = defaultConfigJson();
    mergeInto(merged, doc);
    for (const auto& kv : overrides) applyOverride(merged, kv);
    return configFromJson(merged);
}

}  // namespace rowfollow
