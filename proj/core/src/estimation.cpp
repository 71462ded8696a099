#include "rowfollow/estimation.hpp"

#include <cmath>

namespace rowfollow {

void VisionMeasurement::validate() const {
    if (!(distanceRatio > 0.0 && distanceRatio < 1.0))
        throw std::invalid_argument("VisionMeasurement: distance ratio must be in (0, 1)");
    if (!(laneWidth > 0.0))
        throw std::invalid_argument("VisionMeasurement: lane width must be positive");
}

void NoiseConfig::validate() const {
    if ((processDiag.array() <= 0.0).any() || (measurementDiag.array() <= 0.0).any())
        throw std::invalid_argument("NoiseConfig: all covariance entries must be positive");
}

RowRelativeState predictMean(const RowRelativeState& s, const ControlInput& u) {
    if (!(u.dt > 0.0)) throw std::invalid_argument("predict: dt must be positive");
    const double lateral = u.v * std::sin(s.heading) * u.dt;
    RowRelativeState next;
    next.dLeft = s.dLeft - lateral;
    next.dRight = s.dRight + lateral;
    if (u.gyroYawRate) {
        next.heading = s.heading + *u.gyroYawRate * u.dt;
        next.yawRate = *u.gyroYawRate;
    } else {
        next.heading = s.heading;
        next.yawRate = s.yawRate;
    }
    return next;
}

Eigen::Matrix4d predictJacobian(const RowRelativeState& s, const ControlInput& u) {
    const double dLat = u.v * std::cos(s.heading) * u.dt;
    Eigen::Matrix4d F = Eigen::Matrix4d::Zero();
    F(0, 0) = 1.0;
    F(0, 2) = -dLat;
    F(1, 1) = 1.0;
    F(1, 2) = dLat;
    F(2, 2) = 1.0;
    if (u.gyroYawRate) {
        // omega comes from the input, so the last row has no state dependence.
    } else {
        F(3, 3) = 1.0;
    }
    return F;
}

StateBelief predict(const StateBelief& belief, const ControlInput& u,
                    const NoiseConfig& noise) {
    noise.validate();
    const Eigen::Matrix4d F = predictJacobian(belief.mean, u);
    StateBelief next;
    next.mean = predictMean(belief.mean, u);
    next.covariance = F * belief.covariance * F.transpose();
    next.covariance += noise.processDiag.asDiagonal().toDenseMatrix();
    next.covariance = 0.5 * (next.covariance + next.covariance.transpose()).eval();
    return next;
}

namespace {

// Shared Joseph-form update for an m-row slice of the identity measurement.
StateBelief updateRows(const StateBelief& belief, const Eigen::Vector4d& zFull,
                       const NoiseConfig& noise, int rows) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    MatrixXd H = MatrixXd::Identity(4, 4).topRows(rows);
    MatrixXd R = noise.measurementDiag.head(rows).asDiagonal();
    const MatrixXd P = belief.covariance;

    const MatrixXd S = H * P * H.transpose() + R;
    Eigen::LLT<MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw NonPositiveDefinite("updateVision: innovation covariance not positive definite");

    const MatrixXd K = llt.solve(H * P).transpose();  // P H^T S^-1
    const VectorXd innovation = zFull.head(rows) - H * belief.mean.asVector();

    StateBelief next;
    next.mean = RowRelativeState::fromVector(belief.mean.asVector() + K * innovation);
    const MatrixXd A = MatrixXd::Identity(4, 4) - K * H;
    Eigen::Matrix4d cov = A * P * A.transpose() + K * R * K.transpose();
    next.covariance = 0.5 * (cov + cov.transpose());
    return next;
}

}  // namespace

StateBelief updateVision(const StateBelief& belief, const VisionMeasurement& z,
                         std::optional<double> gyroYawRate, const NoiseConfig& noise) {
    z.validate();
    noise.validate();
    Eigen::Vector4d zFull;
    zFull << z.distanceRatio * z.laneWidth, (1.0 - z.distanceRatio) * z.laneWidth,
        z.heading, gyroYawRate.value_or(0.0);
    return updateRows(belief, zFull, noise, gyroYawRate ? 4 : 3);
}

StateBelief initialBelief(const VisionMeasurement& z, std::optional<double> gyroYawRate,
                          const NoiseConfig& noise) {
    z.validate();
    noise.validate();
    StateBelief belief;
    belief.mean.dLeft = z.distanceRatio * z.laneWidth;
    belief.mean.dRight = (1.0 - z.distanceRatio) * z.laneWidth;
    belief.mean.heading = z.heading;
    belief.mean.yawRate = gyroYawRate.value_or(0.0);
    belief.covariance = noise.measurementDiag.asDiagonal();
    return belief;
}

RowStateFilter::RowStateFilter(const NoiseConfig& noise, bool useIMU)
    : noise_(noise), useIMU_(useIMU) {
    noise_.validate();
}

void RowStateFilter::predict(double v, double gyroYawRate, double dt) {
    if (!initialized_) return;
    ControlInput u;
    u.v = v;
    u.dt = dt;
    if (useIMU_) u.gyroYawRate = gyroYawRate;
    belief_ = rowfollow::predict(belief_, u, noise_);
}

void RowStateFilter::update(const VisionMeasurement& z, double gyroYawRate) {
    std::optional<double> gyro;
    if (useIMU_) gyro = gyroYawRate;
    if (!initialized_) {
        belief_ = initialBelief(z, gyro, noise_);
        initialized_ = true;
        return;
    }
    belief_ = updateVision(belief_, z, gyro, noise_);
}

const StateBelief& RowStateFilter::belief() const {
    if (!initialized_) throw Error("RowStateFilter: no measurement received yet");
    return belief_;
}

RowRelativeState RowStateFilter::estimate() const { return belief().mean; }

void RowStateFilter::reset() {
    initialized_ = false;
    belief_ = StateBelief{};
}

}  // namespace rowfollow
