#include <benchmark/benchmark.h>

#include <random>

#include "rowfollow/geometry.hpp"
#include "rowfollow/simulation.hpp"

using namespace rowfollow;

namespace {

const CameraIntrinsics kCam{400.0, 640, 480};

CameraPoseInRow benchPose() {
    CameraPoseInRow pose;
    pose.roll = 0.05;
    pose.pitch = 0.25;
    pose.heading = -0.12;
    pose.leftOffset = 0.3;
    pose.rightOffset = 0.45;
    return pose;
}

}  // namespace

static void BM_RenderAnnotations(benchmark::State& state) {
    const CameraPoseInRow pose = benchPose();
    for (auto _ : state)
        benchmark::DoNotOptimize(renderAnnotations(pose, kCam, 0));
}
BENCHMARK(BM_RenderAnnotations);

static void BM_GroundTruthRoundtrip(benchmark::State& state) {
    const AnnotationSet ann = renderAnnotations(benchPose(), kCam, 0);
    for (auto _ : state)
        benchmark::DoNotOptimize(groundTruth(ann, kCam));
}
BENCHMARK(BM_GroundTruthRoundtrip);

static void BM_EKFPredictUpdate(benchmark::State& state) {
    StateBelief belief;
    belief.mean = {0.36, 0.39, 0.02, 0.0};
    belief.covariance = Eigen::Vector4d(0.05, 0.05, 0.05, 0.5).asDiagonal();
    VisionMeasurement z;
    z.distanceRatio = 0.49;
    z.heading = 0.01;
    z.laneWidth = 0.75;
    const NoiseConfig noise;
    for (auto _ : state) {
        belief = predict(belief, {0.6, 0.05, 0.05}, noise);
        belief = updateVision(belief, z, 0.05, noise);
        benchmark::DoNotOptimize(belief);
    }
}
BENCHMARK(BM_EKFPredictUpdate);

static void BM_MPCSolveCold(benchmark::State& state) {
    const MPCConfig cfg = MPCConfig::paperDefaults();
    RowRelativeState s{0.275, 0.475, 0.1, 0.0};
    const auto wps = generateWaypoints(s, 0.75, cfg);
    for (auto _ : state)
        benchmark::DoNotOptimize(solveMPC(wps, cfg, 0.0));
}
BENCHMARK(BM_MPCSolveCold);

static void BM_MPCSolveWarm(benchmark::State& state) {
    const MPCConfig cfg = MPCConfig::paperDefaults();
    RowRelativeState s{0.275, 0.475, 0.1, 0.0};
    const auto wps = generateWaypoints(s, 0.75, cfg);
    const MPCSolution cold = solveMPC(wps, cfg, 0.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            solveMPC(wps, cfg, cold.curvatures.front(), cold.curvatures));
}
BENCHMARK(BM_MPCSolveWarm);

static void BM_Trial10m(benchmark::State& state) {
    TrialConfig cfg;
    cfg.field = FieldModel::straight(10.0, 0.75);
    for (auto _ : state) {
        benchmark::DoNotOptimize(runTrial(cfg));
    }
}
BENCHMARK(BM_Trial10m)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
