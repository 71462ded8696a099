#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "rowfollow/annotation_io.hpp"
#include "rowfollow/config.hpp"

using namespace rowfollow;
namespace fs = std::filesystem;

namespace {

#ifndef ROWFOLLOW_BIN
#define ROWFOLLOW_BIN "rowfollow"
#endif

fs::path workDir() {
    const fs::path dir = fs::temp_directory_path() / "rowfollow_cli_tests";
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = std::string(ROWFOLLOW_BIN) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void writeShortConfig(const fs::path& path, double length = 40.0) {
    nlohmann::json doc;
    doc["field"]["centerline"] = {{0.0, 0.0}, {length, 0.0}};
    std::ofstream out(path);
    out << doc.dump();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("groundtruth labels renderer output within tolerance") {
    const fs::path dir = workDir();
    const CameraIntrinsics cam{380.0, 640, 480};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    std::vector<AnnotationRecord> records;
    std::vector<CameraPoseInRow> poses;
    for (int i = 0; i < 150; ++i) {
        CameraPoseInRow pose;
        pose.roll = 0.2 * u(rng);
        pose.pitch = 0.4 * u(rng);
        pose.heading = 0.5 * u(rng);
        const double d = 0.5 + 0.35 * u(rng);
        pose.leftOffset = d * 0.75;
        pose.rightOffset = (1.0 - d) * 0.75;
        char id[16];
        std::snprintf(id, sizeof(id), "img_%04d", i);
        records.push_back({id, cam, renderAnnotations(pose, cam, i % 3 == 0 ? 5 : 0)});
        poses.push_back(pose);
    }
    const fs::path annPath = dir / "ann.jsonl";
    const fs::path labelPath = dir / "labels.jsonl";
    writeAnnotationsJsonl(annPath.string(), records);

    REQUIRE(run("groundtruth --annotations " + annPath.string() + " --out " +
                labelPath.string()) == 0);

    const auto labels = readLabelsJsonl(labelPath.string());
    REQUIRE(labels.size() == records.size());
    for (size_t i = 0; i < labels.size(); ++i) {
        CHECK(std::fabs(labels[i].headingDeg * M_PI / 180.0 - poses[i].heading) < 1e-6);
        CHECK(std::fabs(labels[i].distanceRatio - poses[i].distanceRatio()) < 1e-6);
    }
}

TEST_CASE("groundtruth on an empty file succeeds with empty output") {
    const fs::path dir = workDir();
    const fs::path annPath = dir / "empty.jsonl";
    const fs::path labelPath = dir / "empty_labels.jsonl";
    std::ofstream(annPath).close();
    CHECK(run("groundtruth --annotations " + annPath.string() + " --out " +
              labelPath.string()) == 0);
    CHECK(slurp(labelPath).empty());
}

TEST_CASE("degenerate records are skipped with exit code 1") {
    const fs::path dir = workDir();
    const CameraIntrinsics cam{380.0, 640, 480};
    std::vector<AnnotationRecord> records;
    records.push_back({"good", cam, renderAnnotations(CameraPoseInRow{}, cam, 0)});
    AnnotationRecord bad = records.front();
    bad.imageId = "parallel_rows";
    bad.annotations.rightRow = bad.annotations.leftRow;  // parallel rows
    records.push_back(bad);

    const fs::path annPath = dir / "mixed.jsonl";
    const fs::path labelPath = dir / "mixed_labels.jsonl";
    writeAnnotationsJsonl(annPath.string(), records);
    CHECK(run("groundtruth --annotations " + annPath.string() + " --out " +
              labelPath.string()) == 1);
    const auto labels = readLabelsJsonl(labelPath.string());
    REQUIRE(labels.size() == 1);
    CHECK(labels[0].imageId == "good");
}

TEST_CASE("unreadable annotations exit with code 2") {
    CHECK(run("groundtruth --annotations /nonexistent/in.jsonl --out /tmp/x.jsonl") == 2);
}

TEST_CASE("seeded trials produce byte-identical outputs") {
    const fs::path dir = workDir();
    const fs::path cfgPath = dir / "short.cfg";
    writeShortConfig(cfgPath);
    const fs::path outA = dir / "a";
    const fs::path outB = dir / "b";
    REQUIRE(run("trial --config " + cfgPath.string() + " --override seed=7 --out " +
                outA.string()) == 0);
    REQUIRE(run("trial --config " + cfgPath.string() + " --override seed=7 --out " +
                outB.string()) == 0);
    CHECK(slurp(outA / "record.csv") == slurp(outB / "record.csv"));
    CHECK(slurp(outA / "summary.json") == slurp(outB / "summary.json"));
    CHECK(!slurp(outA / "record.csv").empty());
}

TEST_CASE("config errors exit with code 2") {
    const fs::path dir = workDir();
    const fs::path cfgPath = dir / "bad.cfg";
    std::ofstream(cfgPath) << "{\"vmax\": 2.0}";
    CHECK(run("trial --config " + cfgPath.string() + " --out " + dir.string()) == 2);

    const fs::path okPath = dir / "ok.cfg";
    writeShortConfig(okPath);
    CHECK(run("trial --config " + okPath.string() +
              " --override nosuch.key=1 --out " + dir.string()) == 2);
    CHECK(run("trial --config " + okPath.string() +
              " --override v=-1 --out " + dir.string()) == 2);
}

TEST_CASE("sweep emits one row per config and seed") {
    const fs::path dir = workDir();
    const fs::path cfgPath = dir / "sweep.cfg";
    writeShortConfig(cfgPath, 20.0);
    const fs::path table = dir / "table.csv";
    REQUIRE(run("sweep --config " + cfgPath.string() +
                " --axis perception.updateRate=22,10 --seeds 1..3 --out " +
                table.string()) == 0);
    std::istringstream rows(slurp(table));
    std::string line;
    int count = -1;  // skip header
    while (std::getline(rows, line))
        if (!line.empty()) ++count;
    CHECK(count == 6);
}

TEST_CASE("malformed sweep axis exits with code 2") {
    const fs::path dir = workDir();
    const fs::path cfgPath = dir / "axis.cfg";
    writeShortConfig(cfgPath, 20.0);
    CHECK(run("sweep --config " + cfgPath.string() +
              " --axis mpc.horizon=10,20 --seeds 1 --out " + (dir / "t.csv").string()) ==
          2);
    CHECK(run("sweep --config " + cfgPath.string() + " --axis v --seeds 1 --out " +
              (dir / "t.csv").string()) == 2);
}

TEST_CASE("config --defaults prints a parseable schema") {
    const fs::path dir = workDir();
    const std::string cmd = std::string(ROWFOLLOW_BIN) + " config --defaults > " +
                            (dir / "defaults.json").string();
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    const nlohmann::json doc = nlohmann::json::parse(slurp(dir / "defaults.json"));
    CHECK(doc == defaultConfigJson());
    (void)configFromJson(doc);  // must validate
}

}  // TEST_SUITE
