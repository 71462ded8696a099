#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rowfollow/control.hpp"
#include "rowfollow/estimation.hpp"
#include "rowfollow/kinematics.hpp"

namespace rowfollow {

/// Arc-length interval along the field centerline.
struct ArcInterval {
    double start = 0.0;   // metres from the row start
    double length = 0.0;  // metres
    bool contains(double s) const { return s >= start && s < start + length; }
};

/// Crop-row world: a piecewise-linear centerline with rows laneWidth apart,
/// plus intervals where perception degrades (gaps) or drops out (occlusions).
struct FieldModel {
    std::vector<Eigen::Vector2d> centerline{{0.0, 0.0}, {428.0, 0.0}};
    double laneWidth = 0.75;
    std::vector<ArcInterval> gaps;
    std::vector<ArcInterval> occlusions;

    double length() const;
    void validate() const;
    bool inGap(double arcLength) const;
    bool inOcclusion(double arcLength) const;

    /// Centered, row-aligned pose at the given arc length.
    Pose2D poseAt(double arcLength) const;

    struct Projection {
        double arcLength = 0.0;   // clamped to [0, length]
        double leftOffset = 0.0;  // signed lateral offset, left-positive
        double heading = 0.0;     // local centerline direction
        bool beyondEnds = false;  // nearest point clamps past an end vertex
    };
    /// Nearest-point projection; ties broken toward smaller arc length.
    Projection project(const Eigen::Vector2d& point) const;

    static FieldModel straight(double length, double laneWidth);
};

/// Noise model of the synthetic perception oracle, calibrated so the
/// half-normal mean |error| matches the reported L1 errors.
struct PerceptionNoiseModel {
    double headingSigma = 0.043530171933316125;      // rad, 1.99 deg * sqrt(pi/2)
    double distanceRatioSigma = 0.050132565492620004; // 0.04 * sqrt(pi/2)
    double outlierProb = 0.02;
    double outlierScale = 5.0;
    double gapDegradation = 5.0;  // sigma multiplier inside row gaps
    double updateRate = 22.0;     // Hz
    double latency = -1.0;        // s; negative selects one frame (1/updateRate)
    double headingInflationPerRad = 0.0;  // optional |phi|-proportional sigma growth

    double effectiveLatency() const {
        return latency >= 0.0 ? latency : 1.0 / updateRate;
    }
    void validate() const;
};

/// First-order lag on the commanded rate; saturation is v / minTurnRadius.
struct ActuatorModel {
    double timeConstant = 0.15;  // s
    void validate() const;
};

struct SensorNoise {
    double gyroSigma = 0.0;     // rad/s
    double encoderSigma = 0.0;  // m/s
};

struct TrialConfig {
    FieldModel field = FieldModel::straight(428.0, 0.75);
    double v = 0.6;              // m/s, constant per trial
    double controlRate = 20.0;   // Hz: EKF predict + MPC
    double physicsRate = 100.0;  // Hz: PID, actuator, integration
    PerceptionNoiseModel perception;
    bool useIMU = true;
    std::uint64_t seed = 1;
    double robotHalfWidth = 0.15;  // m
    double initialOffset = 0.0;    // m, left-positive
    double initialHeading = 0.0;   // rad relative to the row
    NoiseConfig ekf;
    MPCConfig mpc = MPCConfig::paperDefaults();
    PIDConfig pid;
    ActuatorModel actuator;
    SensorNoise sensors;
    double maxDurationFactor = 3.0;  // sim-time cap relative to length/v

    void validate() const;
};

struct TickRow {
    double t = 0.0;
    Pose2D pose;
    double trueDLeft = 0.0, trueDRight = 0.0, trueHeading = 0.0;
    double estDLeft = 0.0, estDRight = 0.0, estHeading = 0.0;
    double omegaMpc = 0.0, omegaCmd = 0.0, rho1 = 0.0;
    bool intervention = false;  // any intervention since the previous row

    double cte() const { return (trueDRight - trueDLeft) / 2.0; }
};

struct InterventionEvent {
    double t = 0.0;
    double arcLength = 0.0;
    std::string cause;  // "offset" or "heading"
};

struct TrialSummary {
    double distance = 0.0;  // m of row completed
    int interventions = 0;
    double meanAbsCte = 0.0;
    double maxAbsCte = 0.0;
    double oscillationAmplitude = 0.0;  // sqrt(2) * steady-state CTE std
    bool completed = false;             // reached the end of the row

    std::optional<double> metersPerIntervention() const {
        if (interventions == 0) return std::nullopt;
        return distance / interventions;
    }
};

struct TrialRecord {
    std::vector<TickRow> rows;  // one per control tick
    std::vector<InterventionEvent> interventions;
    TrialSummary summary;
};

/// Ground-truth row-relative state of a pose. Throws OutOfField beyond the
/// row ends. yawRate fills the omega component (the pose carries none).
RowRelativeState trueRowState(const Pose2D& pose, const FieldModel& field,
                              double yawRate = 0.0);

/// One noisy perception sample of the true state. laneWidth is the
/// configured average width handed to the filter for ratio conversion.
VisionMeasurement samplePerception(const RowRelativeState& truth, double laneWidth,
                                   const PerceptionNoiseModel& noise,
                                   std::mt19937_64& rng, bool inGap);

/// Deterministic closed-loop trial: perception -> EKF -> MPC -> PID ->
/// actuator -> kinematics, with intervention detection and reset.
TrialRecord runTrial(const TrialConfig& cfg);

struct TrialOutcome {
    std::size_t index = 0;
    std::optional<TrialSummary> summary;  // empty on error
    std::string error;
};

struct SuiteResult {
    std::vector<TrialOutcome> outcomes;  // ordered by config index
    int failures = 0;
};

/// Runs every trial (concurrently up to `jobs`); per-trial errors are
/// captured without aborting the rest.
SuiteResult runExperimentSuite(const std::vector<TrialConfig>& suite, int jobs = 1);

}  // namespace rowfollow
