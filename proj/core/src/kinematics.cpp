#include "rowfollow/kinematics.hpp"

#include <cmath>
#include <stdexcept>

namespace rowfollow {

double normalizeYaw(double yaw) {
    if (yaw > -M_PI && yaw <= M_PI) return yaw;
    double wrapped = std::remainder(yaw, 2.0 * M_PI);
    if (wrapped <= -M_PI) wrapped += 2.0 * M_PI;
    return wrapped;
}

Pose2D stepTime(const Pose2D& pose, const VelocityCommand& cmd, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("stepTime: dt must be positive");
    Pose2D next;
    next.x = pose.x + cmd.v * std::cos(pose.yaw) * dt;
    next.y = pose.y + cmd.v * std::sin(pose.yaw) * dt;
    next.yaw = normalizeYaw(pose.yaw + cmd.omega * dt);
    return next;
}

Pose2D stepArc(const Pose2D& pose, const ArcStepCommand& cmd) {
    if (!(cmd.arcLength > 0.0))
        throw std::invalid_argument("stepArc: arc length must be positive");
    Pose2D next;
    next.x = pose.x + std::cos(pose.yaw) * cmd.arcLength;
    next.y = pose.y + std::sin(pose.yaw) * cmd.arcLength;
    next.yaw = normalizeYaw(pose.yaw + cmd.curvature * cmd.arcLength);
    return next;
}

}  // namespace rowfollow
