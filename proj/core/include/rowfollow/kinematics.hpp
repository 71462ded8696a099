#pragma once

namespace rowfollow {

/// Folds an angle into (-pi, pi].
double normalizeYaw(double yaw);

/// Planar pose, world frame: x down-row, y left-positive, yaw in (-pi, pi].
struct Pose2D {
    double x = 0.0;
    double y = 0.0;
    double yaw = 0.0;
};

struct VelocityCommand {
    double v = 0.0;      // m/s, >= 0
    double omega = 0.0;  // rad/s, left-positive
};

struct ArcStepCommand {
    double curvature = 0.0;  // 1/m, left-positive
    double arcLength = 0.0;  // m, > 0
};

/// Explicit Euler step over dt; position uses the pre-step heading.
Pose2D stepTime(const Pose2D& pose, const VelocityCommand& cmd, double dt);

/// Euler step in arc-length parameterisation: ds of travel at curvature rho.
Pose2D stepArc(const Pose2D& pose, const ArcStepCommand& cmd);

}  // namespace rowfollow
