#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "rowfollow/estimation.hpp"

using namespace rowfollow;

namespace {

RowRelativeState randomState(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RowRelativeState s;
    s.dLeft = 0.2 + 0.4 * std::fabs(u(rng));
    s.dRight = 0.2 + 0.4 * std::fabs(u(rng));
    s.heading = 0.5 * u(rng);
    s.yawRate = u(rng);
    return s;
}

}  // namespace

TEST_SUITE("estimation") {

TEST_CASE("aligned robot does not drift laterally") {
    StateBelief belief;
    belief.mean = {0.4, 0.35, 0.0, 0.0};
    ControlInput u{0.6, 0.25, 0.05};
    const StateBelief next = predict(belief, u, NoiseConfig{});
    CHECK(next.mean.dLeft == 0.4);
    CHECK(next.mean.dRight == 0.35);
    CHECK(next.mean.heading == doctest::Approx(0.25 * 0.05).epsilon(1e-15));
    CHECK(next.mean.yawRate == 0.25);
}

TEST_CASE("prediction matches the process model") {
    StateBelief belief;
    belief.mean = {0.40, 0.35, 0.10, 0.20};
    ControlInput u{0.6, 0.20, 0.05};
    const StateBelief next = predict(belief, u, NoiseConfig{});
    const double lateral = 0.6 * std::sin(0.10) * 0.05;
    CHECK(next.mean.dLeft == doctest::Approx(0.40 - lateral).epsilon(1e-15));
    CHECK(next.mean.dLeft == doctest::Approx(0.39700).epsilon(1e-4));
    CHECK(next.mean.dRight == doctest::Approx(0.35 + lateral).epsilon(1e-15));
    CHECK(next.mean.dRight == doctest::Approx(0.35300).epsilon(1e-4));
    CHECK(next.mean.heading == doctest::Approx(0.110).epsilon(1e-12));
    CHECK(next.mean.yawRate == 0.20);
}

TEST_CASE("jacobian matches central finite differences") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        const RowRelativeState s = randomState(rng);
        ControlInput input{0.3 + std::fabs(u(rng)), u(rng), 0.02 + 0.1 * std::fabs(u(rng))};
        if (trial % 3 == 0) input.gyroYawRate.reset();  // w/o-IMU variant

        const Eigen::Matrix4d F = predictJacobian(s, input);
        for (int j = 0; j < 4; ++j) {
            Eigen::Vector4d plus = s.asVector();
            Eigen::Vector4d minus = s.asVector();
            plus(j) += h;
            minus(j) -= h;
            const Eigen::Vector4d fp =
                predictMean(RowRelativeState::fromVector(plus), input).asVector();
            const Eigen::Vector4d fm =
                predictMean(RowRelativeState::fromVector(minus), input).asVector();
            const Eigen::Vector4d fd = (fp - fm) / (2.0 * h);
            for (int i = 0; i < 4; ++i) {
                const double scale = std::max({1.0, std::fabs(F(i, j)), std::fabs(fd(i))});
                CHECK(std::fabs(F(i, j) - fd(i)) / scale < 1e-6);
            }
        }
    }
}

TEST_CASE("lane width is conserved by prediction") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        StateBelief belief;
        belief.mean = randomState(rng);
        ControlInput input{0.6, u(rng), 0.05};
        const double before = belief.mean.dLeft + belief.mean.dRight;
        const StateBelief next = predict(belief, input, NoiseConfig{});
        CHECK(std::fabs(next.mean.dLeft + next.mean.dRight - before) < 1e-12);
    }
}

TEST_CASE("zero innovation keeps the mean and shrinks the covariance") {
    StateBelief belief;
    belief.mean = {0.4, 0.35, 0.05, 0.1};
    belief.covariance = Eigen::Vector4d(0.02, 0.03, 0.01, 0.2).asDiagonal();
    VisionMeasurement z;
    z.laneWidth = 0.75;
    z.distanceRatio = belief.mean.dLeft / 0.75;
    // Make the measurement equal the prior mean exactly.
    z.heading = belief.mean.heading;
    StateBelief post = updateVision(belief, z, belief.mean.yawRate, NoiseConfig{});
    CHECK(std::fabs(post.mean.dLeft - belief.mean.dLeft) < 1e-12);
    CHECK(std::fabs(post.mean.dRight - belief.mean.dRight) < 1e-12);
    CHECK(std::fabs(post.mean.heading - belief.mean.heading) < 1e-12);
    CHECK(std::fabs(post.mean.yawRate - belief.mean.yawRate) < 1e-12);

    const Eigen::Matrix4d diff = belief.covariance - post.covariance;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(diff);
    CHECK(eig.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("scalar equal-weight fusion") {
    StateBelief belief;
    belief.mean = {0.40, 0.35, 0.0, 0.0};
    belief.covariance = Eigen::Vector4d(0.05, 0.05, 0.05, 0.5).asDiagonal();
    VisionMeasurement z;
    z.laneWidth = 1.0;
    z.distanceRatio = 0.50;  // measured d_L = 0.50
    z.heading = 0.0;
    const StateBelief post = updateVision(belief, z, 0.0, NoiseConfig{});
    CHECK(post.mean.dLeft == doctest::Approx(0.45).epsilon(1e-12));
}

TEST_CASE("centered ratio converts to symmetric distances") {
    VisionMeasurement z;
    z.distanceRatio = 0.5;
    z.laneWidth = 0.75;
    z.heading = 0.1;
    const StateBelief b = initialBelief(z, 0.0, NoiseConfig{});
    CHECK(b.mean.dLeft == doctest::Approx(0.375).epsilon(1e-15));
    CHECK(b.mean.dRight == doctest::Approx(0.375).epsilon(1e-15));
}

TEST_CASE("covariance stays symmetric positive definite") {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> ratio(0.05, 0.95);
    StateBelief belief;
    VisionMeasurement z0;
    z0.distanceRatio = 0.5;
    z0.laneWidth = 0.75;
    belief = initialBelief(z0, 0.0, NoiseConfig{});

    for (int i = 0; i < 10000; ++i) {
        ControlInput input{0.6, u(rng), 0.05};
        belief = predict(belief, input, NoiseConfig{});
        if (i % 2 == 0) {
            VisionMeasurement z;
            z.distanceRatio = ratio(rng);
            z.laneWidth = 0.75;
            z.heading = 0.4 * u(rng);
            belief = updateVision(belief, z, u(rng), NoiseConfig{});
        }
        const Eigen::Matrix4d& P = belief.covariance;
        CHECK((P - P.transpose()).cwiseAbs().maxCoeff() < 1e-9);
        const Eigen::LLT<Eigen::Matrix4d> llt(P);
        CHECK(llt.info() == Eigen::Success);
    }
}

TEST_CASE("noise-free tracking converges to the true state") {
    // Robot steering itself back to centre; exact measurements and odometry.
    const double W = 0.75, v = 0.6, dt = 0.05;
    RowRelativeState truth{0.30, 0.45, 5.0 * M_PI / 180.0, 0.0};
    RowStateFilter filter(NoiseConfig{}, true);
    double t = 0.0;
    double lastErr = 1.0;
    for (int k = 0; k < 20 * 8; ++k) {
        const double offset = (truth.dRight - truth.dLeft) / 2.0;
        const double omega = 3.0 * (-0.5 * offset - truth.heading);
        truth.dLeft -= v * std::sin(truth.heading) * dt;
        truth.dRight += v * std::sin(truth.heading) * dt;
        truth.heading += omega * dt;
        truth.yawRate = omega;
        t += dt;

        filter.predict(v, omega, dt);
        VisionMeasurement z;
        z.distanceRatio = truth.dLeft / (truth.dLeft + truth.dRight);
        z.heading = truth.heading;
        z.laneWidth = W;
        filter.update(z, omega);

        if (t >= 5.0) {
            const RowRelativeState est = filter.estimate();
            lastErr = std::max({std::fabs(est.dLeft - truth.dLeft),
                                std::fabs(est.dRight - truth.dRight),
                                std::fabs(est.heading - truth.heading)});
            CHECK(lastErr < 1e-3);
        }
    }
    CHECK(lastErr < 1e-3);
}

TEST_CASE("fusion beats the raw measurement variance") {
    // Static truth, exact process, noise drawn at the configured R.
    std::mt19937_64 rng(45);
    std::normal_distribution<double> n(0.0, 1.0);
    const NoiseConfig noise;
    const double W = 0.75;
    const RowRelativeState truth{0.375, 0.375, 0.0, 0.0};

    StateBelief belief;
    bool init = false;
    double mseDL = 0.0, mseDR = 0.0, msePhi = 0.0;
    double rawDL = 0.0, rawDR = 0.0, rawPhi = 0.0;
    int count = 0;
    const int steps = 20000;
    for (int k = 0; k < steps; ++k) {
        // Metric noise at the configured R; the ratio clamp mirrors what any
        // real perception head would do at the lane boundary.
        const double edl = std::sqrt(noise.measurementDiag(0)) * n(rng);
        const double ephi = std::sqrt(noise.measurementDiag(2)) * n(rng);
        VisionMeasurement z;
        z.distanceRatio = std::clamp((truth.dLeft + edl) / W, 1e-3, 1.0 - 1e-3);
        z.heading = truth.heading + ephi;
        z.laneWidth = W;
        if (!init) {
            belief = initialBelief(z, 0.0, noise);
            init = true;
            continue;
        }
        belief = predict(belief, {0.6, 0.0, 0.05}, noise);
        belief = updateVision(belief, z, 0.0, noise);
        if (k > steps / 4) {
            mseDL += std::pow(belief.mean.dLeft - truth.dLeft, 2);
            mseDR += std::pow(belief.mean.dRight - truth.dRight, 2);
            msePhi += std::pow(belief.mean.heading - truth.heading, 2);
            rawDL += std::pow(z.distanceRatio * W - truth.dLeft, 2);
            rawDR += std::pow((1.0 - z.distanceRatio) * W - truth.dRight, 2);
            rawPhi += std::pow(z.heading - truth.heading, 2);
            ++count;
        }
    }
    CHECK(mseDL < rawDL);
    CHECK(mseDR < rawDR);
    CHECK(msePhi < rawPhi);
    CHECK(msePhi / count < noise.measurementDiag(2));
}

TEST_CASE("an effectively infinite R entry freezes that component") {
    NoiseConfig noise;
    noise.measurementDiag(2) = 1e12;  // ignore the heading measurement
    StateBelief belief;
    belief.mean = {0.375, 0.375, 0.2, 0.0};
    belief.covariance = Eigen::Vector4d(0.05, 0.05, 0.05, 0.5).asDiagonal();
    VisionMeasurement z;
    z.distanceRatio = 0.4;
    z.heading = -0.5;
    z.laneWidth = 0.75;
    const StateBelief post = updateVision(belief, z, 0.0, noise);
    CHECK(std::fabs(post.mean.heading - 0.2) < 1e-9);
}

TEST_CASE("without the IMU the gyro is ignored") {
    RowStateFilter filter(NoiseConfig{}, false);
    VisionMeasurement z;
    z.distanceRatio = 0.5;
    z.laneWidth = 0.75;
    z.heading = 0.05;
    filter.update(z, 99.0);
    CHECK(filter.estimate().yawRate == 0.0);

    filter.predict(0.6, 99.0, 0.05);
    CHECK(filter.estimate().heading == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(filter.estimate().yawRate == 0.0);
}

TEST_CASE("corrupted covariance raises NonPositiveDefinite") {
    StateBelief belief;
    belief.mean = {0.375, 0.375, 0.0, 0.0};
    belief.covariance = -10.0 * Eigen::Matrix4d::Identity();
    VisionMeasurement z;
    z.distanceRatio = 0.5;
    z.laneWidth = 0.75;
    CHECK_THROWS_AS((void)updateVision(belief, z, 0.0, NoiseConfig{}),
                    NonPositiveDefinite);
}

}  // TEST_SUITE
