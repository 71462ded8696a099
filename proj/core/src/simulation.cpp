#include "rowfollow/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <mutex>
#include <thread>

namespace rowfollow {

double FieldModel::length() const {
    double total = 0.0;
    for (size_t i = 1; i < centerline.size(); ++i)
        total += (centerline[i] - centerline[i - 1]).norm();
    return total;
}

void FieldModel::validate() const {
    if (centerline.size() < 2)
        throw std::invalid_argument("FieldModel: centerline needs at least two vertices");
    for (size_t i = 1; i < centerline.size(); ++i)
        if ((centerline[i] - centerline[i - 1]).norm() < 1e-9)
            throw std::invalid_argument("FieldModel: centerline segment has zero length");
    if (!(laneWidth > 0.0))
        throw std::invalid_argument("FieldModel: lane width must be positive");
    const double len = length();
    for (const auto& g : gaps)
        if (g.start < 0.0 || g.length < 0.0 || g.start + g.length > len + 1e-9)
            throw std::invalid_argument("FieldModel: gap outside the field");
    for (const auto& o : occlusions)
        if (o.start < 0.0 || o.length < 0.0 || o.start + o.length > len + 1e-9)
            throw std::invalid_argument("FieldModel: occlusion outside the field");
}

bool FieldModel::inGap(double s) const {
    return std::any_of(gaps.begin(), gaps.end(),
                       [&](const ArcInterval& g) { return g.contains(s); });
}

bool FieldModel::inOcclusion(double s) const {
    return std::any_of(occlusions.begin(), occlusions.end(),
                       [&](const ArcInterval& o) { return o.contains(s); });
}

Pose2D FieldModel::poseAt(double arcLength) const {
    double remaining = std::clamp(arcLength, 0.0, length());
    for (size_t i = 1; i < centerline.size(); ++i) {
        const Eigen::Vector2d seg = centerline[i] - centerline[i - 1];
        const double segLen = seg.norm();
        if (remaining <= segLen || i + 1 == centerline.size()) {
            const Eigen::Vector2d dir = seg / segLen;
            const Eigen::Vector2d p =
                centerline[i - 1] + std::min(remaining, segLen) * dir;
            return {p.x(), p.y(), std::atan2(dir.y(), dir.x())};
        }
        remaining -= segLen;
    }
    const Eigen::Vector2d dir =
        (centerline[1] - centerline[0]).normalized();
    return {centerline[0].x(), centerline[0].y(), std::atan2(dir.y(), dir.x())};
}

FieldModel::Projection FieldModel::project(const Eigen::Vector2d& point) const {
    Projection best;
    double bestDist2 = std::numeric_limits<double>::infinity();
    double arcBase = 0.0;
    for (size_t i = 1; i < centerline.size(); ++i) {
        const Eigen::Vector2d a = centerline[i - 1];
        const Eigen::Vector2d seg = centerline[i] - a;
        const double segLen = seg.norm();
        const Eigen::Vector2d dir = seg / segLen;
        const double tRaw = dir.dot(point - a);
        const double t = std::clamp(tRaw, 0.0, segLen);
        const Eigen::Vector2d q = a + t * dir;
        const double dist2 = (point - q).squaredNorm();
        if (dist2 < bestDist2 - 1e-15) {  // strict improvement keeps smaller arc on ties
            bestDist2 = dist2;
            const Eigen::Vector2d r = point - q;
            best.arcLength = arcBase + t;
            best.leftOffset = dir.x() * r.y() - dir.y() * r.x();
            best.heading = std::atan2(dir.y(), dir.x());
            best.beyondEnds = (i == 1 && tRaw < 0.0) ||
                              (i + 1 == centerline.size() && tRaw > segLen);
        }
        arcBase += segLen;
    }
    return best;
}

FieldModel FieldModel::straight(double length, double laneWidth) {
    FieldModel f;
    f.centerline = {{0.0, 0.0}, {length, 0.0}};
    f.laneWidth = laneWidth;
    return f;
}

void PerceptionNoiseModel::validate() const {
    if (headingSigma < 0.0 || distanceRatioSigma < 0.0)
        throw std::invalid_argument("PerceptionNoiseModel: sigmas must be non-negative");
    if (outlierProb < 0.0 || outlierProb >= 1.0)
        throw std::invalid_argument("PerceptionNoiseModel: outlier probability must be in [0, 1)");
    if (!(outlierScale >= 0.0) || !(gapDegradation >= 0.0) || headingInflationPerRad < 0.0)
        throw std::invalid_argument("PerceptionNoiseModel: scale factors must be non-negative");
    if (!(updateRate > 0.0))
        throw std::invalid_argument("PerceptionNoiseModel: update rate must be positive");
}

void ActuatorModel::validate() const {
    if (!(timeConstant >= 0.0))
        throw std::invalid_argument("ActuatorModel: time constant must be non-negative");
}

void TrialConfig::validate() const {
    try {
        field.validate();
        perception.validate();
        ekf.validate();
        mpc.validate();
        pid.validate();
        actuator.validate();
        if (!(v > 0.0)) throw std::invalid_argument("TrialConfig: v must be positive");
        if (!(controlRate > 0.0) || !(physicsRate > 0.0))
            throw std::invalid_argument("TrialConfig: rates must be positive");
        if (physicsRate + 1e-9 < controlRate)
            throw std::invalid_argument("TrialConfig: physics rate must be >= control rate");
        if (!(robotHalfWidth >= 0.0) || robotHalfWidth >= field.laneWidth / 2.0)
            throw std::invalid_argument("TrialConfig: robot half width must fit in the lane");
        if (sensors.gyroSigma < 0.0 || sensors.encoderSigma < 0.0)
            throw std::invalid_argument("TrialConfig: sensor sigmas must be non-negative");
        if (!(maxDurationFactor >= 1.0))
            throw std::invalid_argument("TrialConfig: duration factor must be >= 1");
    } catch (const std::invalid_argument& e) {
        throw ConfigInvalid(e.what());
    }
}

RowRelativeState trueRowState(const Pose2D& pose, const FieldModel& field,
                              double yawRate) {
    field.validate();
    const auto proj = field.project({pose.x, pose.y});
    if (proj.beyondEnds)
        throw OutOfField("trueRowState: pose is beyond the row ends");
    RowRelativeState s;
    s.dLeft = field.laneWidth / 2.0 - proj.leftOffset;
    s.dRight = field.laneWidth - s.dLeft;
    s.heading = normalizeYaw(pose.yaw - proj.heading);
    s.yawRate = yawRate;
    return s;
}

VisionMeasurement samplePerception(const RowRelativeState& truth, double laneWidth,
                                   const PerceptionNoiseModel& noise,
                                   std::mt19937_64& rng, bool inGap) {
    noise.validate();
    const double trueRatio = truth.dLeft / (truth.dLeft + truth.dRight);

    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double nPhi = unit(rng);
    const double nD = unit(rng);
    const double uOutlier = uniform(rng);

    double inflate = 1.0 + noise.headingInflationPerRad * std::fabs(truth.heading);
    if (inGap) inflate *= noise.gapDegradation;
    if (uOutlier < noise.outlierProb) inflate *= noise.outlierScale;

    constexpr double kRatioMargin = 1e-3;
    VisionMeasurement z;
    z.heading = truth.heading + noise.headingSigma * inflate * nPhi;
    z.distanceRatio = std::clamp(trueRatio + noise.distanceRatioSigma * inflate * nD,
                                 kRatioMargin, 1.0 - kRatioMargin);
    z.laneWidth = laneWidth;
    return z;
}

namespace {

struct PendingMeasurement {
    double deliverAt = 0.0;
    VisionMeasurement z;
};

double steadyStateStd(const std::vector<TickRow>& rows) {
    if (rows.size() < 4) return 0.0;
    const double tEnd = rows.back().t;
    const double tFrom = 0.2 * tEnd;
    double sum = 0.0, sum2 = 0.0;
    size_t n = 0;
    for (const auto& r : rows) {
        if (r.t < tFrom) continue;
        const double e = r.cte();
        sum += e;
        sum2 += e * e;
        ++n;
    }
    if (n < 2) return 0.0;
    const double mean = sum / n;
    return std::sqrt(std::max(0.0, sum2 / n - mean * mean));
}

}  // namespace

TrialRecord runTrial(const TrialConfig& cfg) {
    cfg.validate();

    const FieldModel& field = cfg.field;
    const double fieldLength = field.length();
    const double W = field.laneWidth;
    const double offsetLimit = W / 2.0 - cfg.robotHalfWidth;
    const double omegaLimit = cfg.v / cfg.mpc.minTurnRadius;
    const double dtPhys = 1.0 / cfg.physicsRate;
    const double dtCtrl = 1.0 / cfg.controlRate;
    const double latency = cfg.perception.effectiveLatency();
    const long maxTicks = static_cast<long>(
        std::ceil(cfg.maxDurationFactor * fieldLength / cfg.v * cfg.physicsRate));

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    // Initial pose: displaced from the row start by the configured offset
    // and heading.
    Pose2D pose = field.poseAt(0.0);
    pose.x -= std::sin(pose.yaw) * cfg.initialOffset;
    pose.y += std::cos(pose.yaw) * cfg.initialOffset;
    pose.yaw = normalizeYaw(pose.yaw + cfg.initialHeading);

    RowStateFilter filter(cfg.ekf, cfg.useIMU);
    PIDState pidState;
    std::deque<PendingMeasurement> pending;
    std::vector<double> warmStart;

    double omegaAct = 0.0;
    double omegaMpc = 0.0;
    double omegaCmd = 0.0;
    double prevRho = 0.0;
    double nextPerceptionT = 0.0;
    double nextControlT = 0.0;
    bool interventionSinceRow = false;

    TrialRecord record;
    TickRow lastRow;

    const double lagAlpha =
        cfg.actuator.timeConstant > 0.0 ? std::exp(-dtPhys / cfg.actuator.timeConstant)
                                        : 0.0;

    for (long tick = 0; tick < maxTicks; ++tick) {
        const double t = tick * dtPhys;
        auto proj = field.project({pose.x, pose.y});
        if (proj.arcLength >= fieldLength - 1e-9) {
            record.summary.completed = true;
            break;
        }

        RowRelativeState truth;
        truth.dLeft = W / 2.0 - proj.leftOffset;
        truth.dRight = W - truth.dLeft;
        truth.heading = normalizeYaw(pose.yaw - proj.heading);
        truth.yawRate = omegaAct;

        // Intervention: contact with a row or heading past 90 degrees. The
        // operator re-places the robot centred and aligned at the same
        // arc-length position.
        if (std::fabs(proj.leftOffset) >= offsetLimit ||
            std::fabs(truth.heading) > M_PI / 2.0) {
            InterventionEvent ev;
            ev.t = t;
            ev.arcLength = proj.arcLength;
            ev.cause = std::fabs(proj.leftOffset) >= offsetLimit ? "offset" : "heading";
            record.interventions.push_back(ev);

            pose = field.poseAt(proj.arcLength);
            omegaAct = 0.0;
            omegaMpc = 0.0;
            omegaCmd = 0.0;
            prevRho = 0.0;
            pidState = PIDState{};
            filter.reset();
            pending.clear();
            warmStart.clear();
            interventionSinceRow = true;

            proj = field.project({pose.x, pose.y});
            truth.dLeft = W / 2.0;
            truth.dRight = W / 2.0;
            truth.heading = 0.0;
            truth.yawRate = 0.0;
        }

        // Perception frame: sampled from the true state, delivered after the
        // pipeline latency. Occluded frames are dropped (noise draws are
        // consumed either way so seed pairing survives config changes).
        if (t + 1e-12 >= nextPerceptionT) {
            const bool gap = field.inGap(proj.arcLength);
            const bool occluded = field.inOcclusion(proj.arcLength);
            const VisionMeasurement z =
                samplePerception(truth, W, cfg.perception, rng, gap);
            if (!occluded) pending.push_back({t + latency, z});
            nextPerceptionT += 1.0 / cfg.perception.updateRate;
        }

        const bool controlTick = t + 1e-12 >= nextControlT;
        if (controlTick) {
            double gyro = omegaAct;
            if (cfg.sensors.gyroSigma > 0.0) gyro += cfg.sensors.gyroSigma * unit(rng);
            double vMeas = cfg.v;
            if (cfg.sensors.encoderSigma > 0.0)
                vMeas += cfg.sensors.encoderSigma * unit(rng);

            if (filter.initialized()) filter.predict(vMeas, gyro, dtCtrl);
            while (!pending.empty() && pending.front().deliverAt <= t + 1e-12) {
                filter.update(pending.front().z, gyro);
                pending.pop_front();
            }

            if (filter.initialized()) {
                // A badly degraded belief can stray outside the lane; the
                // reference generator still needs a usable in-lane state.
                RowRelativeState est = filter.estimate();
                const double margin = 0.02 * W;
                const double offset =
                    std::clamp((est.dLeft - est.dRight) / 2.0,
                               -(W / 2.0 - margin), W / 2.0 - margin);
                est.dLeft = W / 2.0 + offset;
                est.dRight = W / 2.0 - offset;
                const auto wps = generateWaypoints(est, W, cfg.mpc);
                if (!warmStart.empty()) {
                    // Receding-horizon shift of the previous solution.
                    std::rotate(warmStart.begin(), warmStart.begin() + 1, warmStart.end());
                    warmStart.back() = warmStart[warmStart.size() - 2];
                }
                const MPCSolution sol = solveMPC(wps, cfg.mpc, prevRho, warmStart);
                warmStart = sol.curvatures;
                prevRho = sol.curvatures.front();
                omegaMpc = sol.firstYawRate(cfg.v);
            }
            nextControlT += dtCtrl;
        }

        // Low-level loop and actuator at the physics rate.
        double gyroPid = omegaAct;
        if (cfg.sensors.gyroSigma > 0.0) gyroPid += cfg.sensors.gyroSigma * unit(rng);
        auto [cmd, nextPidState] = stepPID(cfg.pid, omegaMpc, gyroPid, dtPhys, pidState);
        pidState = nextPidState;
        omegaCmd = cmd;
        const double cmdSat = std::clamp(omegaCmd, -omegaLimit, omegaLimit);
        omegaAct = cmdSat + (omegaAct - cmdSat) * lagAlpha;

        if (controlTick) {
            TickRow row;
            row.t = t;
            row.pose = pose;
            row.trueDLeft = truth.dLeft;
            row.trueDRight = truth.dRight;
            row.trueHeading = truth.heading;
            if (filter.initialized()) {
                const RowRelativeState est = filter.estimate();
                row.estDLeft = est.dLeft;
                row.estDRight = est.dRight;
                row.estHeading = est.heading;
            } else {
                row.estDLeft = W / 2.0;
                row.estDRight = W / 2.0;
                row.estHeading = 0.0;
            }
            row.omegaMpc = omegaMpc;
            row.omegaCmd = omegaCmd;
            row.rho1 = prevRho;
            row.intervention = interventionSinceRow;
            interventionSinceRow = false;
            record.rows.push_back(row);
        }

        pose = stepTime(pose, {cfg.v, omegaAct}, dtPhys);
    }

    const auto finalProj = field.project({pose.x, pose.y});
    record.summary.distance = std::min(finalProj.arcLength, fieldLength);
    record.summary.interventions = static_cast<int>(record.interventions.size());
    double sumAbs = 0.0, maxAbs = 0.0;
    for (const auto& r : record.rows) {
        const double e = std::fabs(r.cte());
        sumAbs += e;
        maxAbs = std::max(maxAbs, e);
    }
    record.summary.meanAbsCte = record.rows.empty() ? 0.0 : sumAbs / record.rows.size();
    record.summary.maxAbsCte = maxAbs;
    record.summary.oscillationAmplitude = std::sqrt(2.0) * steadyStateStd(record.rows);
    return record;
}

SuiteResult runExperimentSuite(const std::vector<TrialConfig>& suite, int jobs) {
    if (suite.empty())
        throw std::invalid_argument("runExperimentSuite: suite must not be empty");
    jobs = std::max(1, jobs);

    SuiteResult result;
    result.outcomes.resize(suite.size());

    std::mutex mtx;
    std::size_t next = 0;
    auto worker = [&]() {
        for (;;) {
            std::size_t idx;
            {
                std::lock_guard<std::mutex> lock(mtx);
                if (next >= suite.size()) return;
                idx = next++;
            }
            TrialOutcome out;
            out.index = idx;
            try {
                out.summary = runTrial(suite[idx]).summary;
            } catch (const std::exception& e) {
                out.error = e.what();
            }
            {
                std::lock_guard<std::mutex> lock(mtx);
                result.outcomes[idx] = std::move(out);
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        const int count = std::min<std::size_t>(jobs, suite.size());
        threads.reserve(static_cast<size_t>(count));
        for (int i = 0; i < count; ++i) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }

    for (const auto& out : result.outcomes)
        if (!out.summary) ++result.failures;
    return result;
}

}  // namespace rowfollow
