#pragma once

#include <Eigen/Dense>
#include <optional>

#include "rowfollow/errors.hpp"

namespace rowfollow {

/// Row-relative robot state: the filter's s = (d_L, d_R, phi, omega).
struct RowRelativeState {
    double dLeft = 0.0;    // metres to the left crop row
    double dRight = 0.0;   // metres to the right crop row
    double heading = 0.0;  // radians relative to the row direction
    double yawRate = 0.0;  // rad/s

    Eigen::Vector4d asVector() const { return {dLeft, dRight, heading, yawRate}; }
    static RowRelativeState fromVector(const Eigen::Vector4d& v) {
        return {v(0), v(1), v(2), v(3)};
    }
};

struct StateBelief {
    RowRelativeState mean;
    Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
};

/// Odometry input for one prediction step. gyroYawRate is absent when the
/// filter runs without the IMU; the heading then evolves as a constant.
struct ControlInput {
    double v = 0.0;  // m/s from encoders
    std::optional<double> gyroYawRate;
    double dt = 0.0;  // s, > 0
};

/// One perception output plus the lane width used to convert the ratio to
/// metric distances.
struct VisionMeasurement {
    double distanceRatio = 0.5;  // d in (0, 1)
    double heading = 0.0;        // radians
    double laneWidth = 0.75;     // metres

    void validate() const;
};

struct NoiseConfig {
    Eigen::Vector4d processDiag{0.001, 0.001, 0.01, 0.01};
    Eigen::Vector4d measurementDiag{0.05, 0.05, 0.05, 0.5};

    void validate() const;
};

/// Process model mean: d_L -= v sin(phi) dt, d_R += v sin(phi) dt,
/// phi += omega_gyro dt, omega <- omega_gyro (held without the gyro).
RowRelativeState predictMean(const RowRelativeState& s, const ControlInput& u);

/// Analytic Jacobian of predictMean with respect to the state.
Eigen::Matrix4d predictJacobian(const RowRelativeState& s, const ControlInput& u);

StateBelief predict(const StateBelief& belief, const ControlInput& u,
                    const NoiseConfig& noise);

/// EKF update with identity measurement model. The measurement vector is
/// (d W, (1-d) W, phi, omega_gyro); without a gyro reading only the first
/// three rows are used. Joseph-form covariance update.
StateBelief updateVision(const StateBelief& belief, const VisionMeasurement& z,
                         std::optional<double> gyroYawRate, const NoiseConfig& noise);

/// The fused output fed to the controller.
inline RowRelativeState fusedEstimate(const StateBelief& belief) { return belief.mean; }

/// Measurement-matched initial belief from the first vision sample.
StateBelief initialBelief(const VisionMeasurement& z, std::optional<double> gyroYawRate,
                          const NoiseConfig& noise);

/// Sequential predict/update wrapper holding one belief stream.
class RowStateFilter {
public:
    RowStateFilter(const NoiseConfig& noise, bool useIMU);

    /// Prediction at the control rate. The gyro argument is ignored when the
    /// filter was built with useIMU == false.
    void predict(double v, double gyroYawRate, double dt);

    /// Vision update; the gyro forms the omega measurement row (IMU mode only).
    void update(const VisionMeasurement& z, double gyroYawRate);

    bool initialized() const { return initialized_; }
    const StateBelief& belief() const;
    RowRelativeState estimate() const;
    void reset();

private:
    NoiseConfig noise_;
    bool useIMU_;
    bool initialized_ = false;
    StateBelief belief_;
};

}  // namespace rowfollow
