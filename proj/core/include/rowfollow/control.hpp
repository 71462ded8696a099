#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "rowfollow/estimation.hpp"
#include "rowfollow/kinematics.hpp"

namespace rowfollow {

/// Reference-path point in the robot's local frame (x forward, y left).
struct Waypoint {
    double x = 0.0;
    double y = 0.0;
};

struct MPCConfig {
    int horizon = 20;
    double stepLength = 0.2;  // metres between rollout stages
    std::vector<double> cteWeights;         // per stage, size horizon
    std::vector<double> headingWeights;     // per stage, size horizon
    std::vector<double> smoothnessWeights;  // term i is (rho_i - rho_{i-1})^2
    double minTurnRadius = 0.7;             // metres; |rho| <= 1/minTurnRadius
    int maxIterations = 200;
    double costTolerance = 1e-10;

    double maxCurvature() const { return 1.0 / minTurnRadius; }
    void validate() const;

    /// Horizon 20, step 0.2 m, stage weights 120/1200, 100/1000, smoothness
    /// 1000, minimum turn radius 0.7 m.
    static MPCConfig paperDefaults();
};

struct MPCSolution {
    std::vector<double> curvatures;     // 1/m, size horizon
    std::vector<Pose2D> predictedPoses; // rollout under the returned curvatures
    double cost = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> costTrace;  // cost after each accepted iterate

    /// omega = rho_1 * v, the rate handed to the low-level loop.
    double firstYawRate(double v) const { return curvatures.front() * v; }
};

/// Straight reference line down the middle of the lane, in the robot frame:
/// lateral offset (d_L - d_R)/2 and direction -phi.
std::vector<Waypoint> generateWaypoints(const RowRelativeState& state,
                                        double laneWidth, const MPCConfig& cfg);

/// Receding-horizon cost of a feasible curvature sequence (used by both the
/// solver and the sampling/grid oracles).
double mpcCost(std::span<const Waypoint> waypoints, const MPCConfig& cfg,
               double prevCurvature, std::span<const double> curvatures);

/// Analytic gradient of mpcCost with respect to the curvature sequence.
Eigen::VectorXd mpcCostGradient(std::span<const Waypoint> waypoints,
                                const MPCConfig& cfg, double prevCurvature,
                                std::span<const double> curvatures);

/// Rollout poses for a curvature sequence, starting at the robot origin.
std::vector<Pose2D> mpcRollout(const MPCConfig& cfg, std::span<const double> curvatures);

/// Projected-gradient solve to a stationary point of the cost. Accepts an
/// optional warm start; curvatures are clamped to the turn-radius box. A
/// solution that hits the iteration cap before the cost-decrease criterion
/// is returned with converged == false.
MPCSolution solveMPC(std::span<const Waypoint> waypoints, const MPCConfig& cfg,
                     double prevCurvature, std::span<const double> warmStart = {});

struct PIDConfig {
    double kp = 2.0;
    double ki = 5.0;
    double kd = 0.0;
    double integratorLimit = 1.0;  // rad/s clamp on the integral term
    bool feedforward = true;       // unity feedforward of the target rate

    void validate() const;
};

struct PIDState {
    double integral = 0.0;  // accumulated integral term, rad/s
    double prevError = 0.0;
    bool hasPrevError = false;
};

/// One step of the angular-rate loop: error = target - gyro, clamped
/// integrator, optional unity feedforward of the target.
std::pair<double, PIDState> stepPID(const PIDConfig& cfg, double targetYawRate,
                                    double gyroYawRate, double dt, PIDState state);

}  // namespace rowfollow
