// rowfollow: ground-truth labelling, closed-loop trials, experiment sweeps
// and plots for the under-canopy row-following stack.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "rowfollow/annotation_io.hpp"
#include "rowfollow/config.hpp"
#include "rowfollow/record_io.hpp"
#include "rowfollow/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rowfollow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRecordFailures = 1;
constexpr int kExitUsage = 2;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

int defaultJobs() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<std::uint64_t> parseSeeds(const std::string& spec) {
    std::vector<std::uint64_t> seeds;
    const auto range = spec.find("..");
    if (range != std::string::npos) {
        const std::uint64_t lo = std::stoull(spec.substr(0, range));
        const std::uint64_t hi = std::stoull(spec.substr(range + 2));
        if (hi < lo) throw ConfigInvalid("seed range is empty: " + spec);
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
        return seeds;
    }
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw ConfigInvalid("bad seed list: " + spec);
        seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) throw ConfigInvalid("bad seed list: " + spec);
    return seeds;
}

int cmdGroundtruth(const std::string& annotationsPath, const std::string& outPath,
                   double fOverride, int widthOverride, int heightOverride) {
    std::ifstream in(annotationsPath);
    if (!in) {
        std::cerr << "error: cannot open annotations file: " << annotationsPath << "\n";
        return kExitUsage;
    }

    std::vector<LabelRecord> labels;
    struct RecordError {
        size_t line;
        std::string message;
    };
    std::vector<RecordError> errors;

    std::string line;
    size_t lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty()) continue;
        try {
            const json doc = json::parse(line);
            AnnotationRecord rec = annotationRecordFromJson(doc);
            if (fOverride > 0.0) rec.intrinsics.focalPx = fOverride;
            if (widthOverride > 0) rec.intrinsics.width = widthOverride;
            if (heightOverride > 0) rec.intrinsics.height = heightOverride;
            const GroundTruthLabel label = groundTruth(rec.annotations, rec.intrinsics);
            labels.push_back(makeLabelRecord(rec.imageId, label));
        } catch (const std::exception& e) {
            errors.push_back({lineNo, e.what()});
        }
    }

    writeLabelsJsonl(outPath, labels);
    if (!errors.empty()) {
        std::cerr << errors.size() << " record(s) skipped:\n";
        for (const auto& err : errors)
            std::cerr << "  " << annotationsPath << ":" << err.line << ": "
                      << err.message << "\n";
    }
    std::cout << labels.size() << " label(s) written to " << outPath << "\n";
    return errors.empty() ? kExitOk : kExitRecordFailures;
}

int cmdTrial(const std::string& configPath, const std::vector<std::string>& overrides,
             const std::string& outDir, bool plot) {
    const TrialConfig cfg = loadTrialConfig(configPath, overrides);
    const TrialRecord record = runTrial(cfg);

    const fs::path dir(outDir);
    writeRecordCsv((dir / "record.csv").string(), record);
    writeSummaryJson((dir / "summary.json").string(), record);
    if (plot) writeTrajectorySvg((dir / "trajectory.svg").string(), cfg.field, record);

    const TrialSummary& s = record.summary;
    std::cout << "distance_m=" << fmt(s.distance)
              << " interventions=" << s.interventions
              << " mean_abs_cte_m=" << fmt(s.meanAbsCte)
              << " max_abs_cte_m=" << fmt(s.maxAbsCte) << "\n";
    return kExitOk;
}

void appendSummaryColumns(std::string& row, const TrialOutcome& out) {
    if (out.summary) {
        const TrialSummary& s = *out.summary;
        row += fmt(s.distance) + "," + std::to_string(s.interventions) + "," +
               fmt(s.meanAbsCte) + "," + fmt(s.maxAbsCte) + "," +
               fmt(s.oscillationAmplitude) + ",";
        if (auto mpi = s.metersPerIntervention()) row += fmt(*mpi);
        row += ",";
    } else {
        std::string msg = out.error;
        for (auto& c : msg)
            if (c == ',' || c == '\n') c = ';';
        row += ",,,,,," + msg;
    }
}

int cmdSuite(const std::vector<std::string>& configPaths,
             const std::vector<std::string>& overrides, const std::string& outPath,
             int jobs) {
    std::vector<TrialConfig> suite;
    for (const auto& path : configPaths) suite.push_back(loadTrialConfig(path, overrides));

    const SuiteResult result = runExperimentSuite(suite, jobs);

    std::string csv =
        "config_index,config,seed,distance_m,interventions,mean_abs_cte_m,"
        "max_abs_cte_m,oscillation_amp_m,meters_per_intervention,error\n";
    for (size_t i = 0; i < result.outcomes.size(); ++i) {
        std::string row = std::to_string(i) + "," + configPaths[i] + "," +
                          std::to_string(suite[i].seed) + ",";
        appendSummaryColumns(row, result.outcomes[i]);
        csv += row + "\n";
    }
    writeTextFileAtomic(outPath, csv);

    double distance = 0.0;
    int interventions = 0, completed = 0;
    for (const auto& out : result.outcomes) {
        if (!out.summary) continue;
        distance += out.summary->distance;
        interventions += out.summary->interventions;
        ++completed;
    }
    json aggregate;
    aggregate["trials"] = result.outcomes.size();
    aggregate["failed_trials"] = result.failures;
    aggregate["total_distance_m"] = distance;
    aggregate["total_interventions"] = interventions;
    aggregate["meters_per_intervention"] =
        interventions > 0 ? json(distance / interventions) : json(nullptr);
    (void)completed;
    std::cout << aggregate.dump(2) << "\n";
    return result.failures == 0 ? kExitOk : kExitRecordFailures;
}

int cmdSweep(const std::string& configPath, const std::string& axisSpec,
             const std::string& seedSpec, const std::vector<std::string>& overrides,
             const std::string& outPath, int jobs) {
    std::string axis;
    std::vector<std::string> values;
    if (axisSpec == "seed-batch") {
        axis = axisSpec;
    } else {
        const auto eq = axisSpec.find('=');
        if (eq == std::string::npos)
            throw ConfigInvalid("axis must look like key=v1,v2,...: " + axisSpec);
        axis = axisSpec.substr(0, eq);
        std::stringstream ss(axisSpec.substr(eq + 1));
        std::string item;
        while (std::getline(ss, item, ',')) values.push_back(item);
        if (values.empty()) throw ConfigInvalid("axis has no values: " + axisSpec);
    }
    const bool axisKnown = axis == "perception.updateRate" || axis == "v" ||
                           axis == "useIMU" || axis == "seed-batch";
    if (!axisKnown) throw ConfigInvalid("unsupported sweep axis: " + axis);
    if (axis == "seed-batch" && !values.empty())
        throw ConfigInvalid("seed-batch axis takes no values");
    if (axis == "seed-batch") values.push_back("");

    const std::vector<std::uint64_t> seeds = parseSeeds(seedSpec);

    // Cross product, ordered by (config index, seed).
    std::vector<TrialConfig> suite;
    struct RowKey {
        size_t configIndex;
        std::string value;
        std::uint64_t seed;
    };
    std::vector<RowKey> keys;
    for (size_t ci = 0; ci < values.size(); ++ci) {
        std::vector<std::string> configOverrides = overrides;
        if (axis != "seed-batch") configOverrides.push_back(axis + "=" + values[ci]);
        for (const std::uint64_t seed : seeds) {
            auto withSeed = configOverrides;
            withSeed.push_back("seed=" + std::to_string(seed));
            suite.push_back(loadTrialConfig(configPath, withSeed));
            keys.push_back({ci, values[ci], seed});
        }
    }

    const SuiteResult result = runExperimentSuite(suite, jobs);

    std::string csv =
        "config_index,axis,value,seed,distance_m,interventions,mean_abs_cte_m,"
        "max_abs_cte_m,oscillation_amp_m,meters_per_intervention,error\n";
    for (size_t i = 0; i < result.outcomes.size(); ++i) {
        std::string row = std::to_string(keys[i].configIndex) + "," + axis + "," +
                          keys[i].value + "," + std::to_string(keys[i].seed) + ",";
        appendSummaryColumns(row, result.outcomes[i]);
        csv += row + "\n";
    }
    writeTextFileAtomic(outPath, csv);
    std::cout << result.outcomes.size() << " trial(s) written to " << outPath << "\n";
    return result.failures == 0 ? kExitOk : kExitRecordFailures;
}

int cmdPlot(const std::string& configPath, const std::string& recordPath,
            const std::string& outPath) {
    const TrialConfig cfg = loadTrialConfig(configPath, {});
    TrialRecord record = readRecordCsv(recordPath);
    // Rebuild marker positions from the flagged rows.
    for (const auto& row : record.rows) {
        if (!row.intervention) continue;
        const auto proj = cfg.field.project({row.pose.x, row.pose.y});
        record.interventions.push_back({row.t, proj.arcLength, "logged"});
    }
    writeTrajectorySvg(outPath, cfg.field, record);
    std::cout << "plot written to " << outPath << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Under-canopy crop-row following: ground truthing, EKF+MPC "
                 "closed-loop simulation, and evaluation sweeps"};
    app.require_subcommand(1);

    // groundtruth
    auto* gt = app.add_subcommand("groundtruth",
                                  "Recover heading/distance-ratio labels from "
                                  "line annotations");
    std::string gtAnnotations, gtOut;
    double gtF = 0.0;
    int gtWidth = 0, gtHeight = 0;
    gt->add_option("--annotations", gtAnnotations, "Annotation .jsonl file")->required();
    gt->add_option("--out", gtOut, "Output labels .jsonl file")->required();
    gt->add_option("--f-px", gtF, "Override focal length (pixels)");
    gt->add_option("--width", gtWidth, "Override image width (pixels)");
    gt->add_option("--height", gtHeight, "Override image height (pixels)");

    // trial
    auto* trial = app.add_subcommand("trial", "Run one closed-loop trial");
    std::string trialConfig, trialOut;
    std::vector<std::string> trialOverrides;
    bool trialPlot = false;
    trial->add_option("--config", trialConfig, "Trial configuration file")->required();
    trial->add_option("--out", trialOut, "Output directory")->required();
    trial->add_option("--override", trialOverrides,
                      "Config override key.path=value (repeatable, last wins)");
    trial->add_flag("--plot", trialPlot, "Also write trajectory.svg");

    // suite
    auto* suite = app.add_subcommand("suite", "Run a set of trial configs");
    std::vector<std::string> suiteConfigs, suiteOverrides;
    std::string suiteOut;
    int suiteJobs = defaultJobs();
    suite->add_option("--config", suiteConfigs, "Trial configuration file (repeatable)")
        ->required();
    suite->add_option("--out", suiteOut, "Output table CSV")->required();
    suite->add_option("--override", suiteOverrides, "Config override (applied to all)");
    suite->add_option("--jobs", suiteJobs, "Concurrent trials")
        ->envname("ROWFOLLOW_JOBS");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Cross-product sweep over one axis");
    std::string sweepConfig, sweepAxis, sweepSeeds = "1", sweepOut;
    std::vector<std::string> sweepOverrides;
    int sweepJobs = defaultJobs();
    sweep->add_option("--config", sweepConfig, "Base configuration file")->required();
    sweep->add_option("--axis", sweepAxis,
                      "Axis spec: perception.updateRate=..., v=..., useIMU=..., "
                      "or seed-batch")
        ->required();
    sweep->add_option("--seeds", sweepSeeds, "Seed list: 1..20 or 1,5,9");
    sweep->add_option("--out", sweepOut, "Output table CSV")->required();
    sweep->add_option("--override", sweepOverrides, "Config override (applied to all)");
    sweep->add_option("--jobs", sweepJobs, "Concurrent trials")
        ->envname("ROWFOLLOW_JOBS");

    // plot
    auto* plot = app.add_subcommand("plot", "Render a trajectory SVG from a record CSV");
    std::string plotConfig, plotRecord, plotOut;
    plot->add_option("--config", plotConfig, "Trial configuration file")->required();
    plot->add_option("--record", plotRecord, "record.csv from a trial")->required();
    plot->add_option("--out", plotOut, "Output SVG path")->required();

    // config
    auto* config = app.add_subcommand("config", "Configuration utilities");
    bool configDefaults = false;
    config->add_flag("--defaults", configDefaults, "Print the full default configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gt->parsed()) return cmdGroundtruth(gtAnnotations, gtOut, gtF, gtWidth, gtHeight);
        if (trial->parsed()) return cmdTrial(trialConfig, trialOverrides, trialOut, trialPlot);
        if (suite->parsed()) return cmdSuite(suiteConfigs, suiteOverrides, suiteOut, suiteJobs);
        if (sweep->parsed())
            return cmdSweep(sweepConfig, sweepAxis, sweepSeeds, sweepOverrides, sweepOut,
                            sweepJobs);
        if (plot->parsed()) return cmdPlot(plotConfig, plotRecord, plotOut);
        if (config->parsed()) {
            if (!configDefaults) {
                std::cerr << "error: config requires --defaults\n";
                return kExitUsage;
            }
            std::cout << defaultConfigJson().dump(2) << "\n";
            return kExitOk;
        }
    } catch (const ConfigInvalid& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRecordFailures;
    }
    return kExitUsage;
}
