#include "rowfollow/control.hpp"

#include <algorithm>
#include <cmath>

namespace rowfollow {

void MPCConfig::validate() const {
    if (horizon < 2) throw std::invalid_argument("MPCConfig: horizon must be >= 2");
    if (!(stepLength > 0.0)) throw std::invalid_argument("MPCConfig: step must be positive");
    if (!(minTurnRadius > 0.0))
        throw std::invalid_argument("MPCConfig: minimum turn radius must be positive");
    const auto n = static_cast<size_t>(horizon);
    if (cteWeights.size() != n || headingWeights.size() != n ||
        smoothnessWeights.size() != n)
        throw std::invalid_argument("MPCConfig: weight arrays must match the horizon");
    auto nonneg = [](const std::vector<double>& w) {
        return std::all_of(w.begin(), w.end(), [](double x) { return x >= 0.0; });
    };
    if (!nonneg(cteWeights) || !nonneg(headingWeights) || !nonneg(smoothnessWeights))
        throw std::invalid_argument("MPCConfig: weights must be non-negative");
    if (maxIterations < 1) throw std::invalid_argument("MPCConfig: maxIterations must be >= 1");
}

MPCConfig MPCConfig::paperDefaults() {
    MPCConfig cfg;
    cfg.horizon = 20;
    cfg.stepLength = 0.2;
    cfg.cteWeights.assign(20, 120.0);
    cfg.cteWeights.back() = 1200.0;
    cfg.headingWeights.assign(20, 100.0);
    cfg.headingWeights.back() = 1000.0;
    cfg.smoothnessWeights.assign(20, 1000.0);
    cfg.minTurnRadius = 0.7;
    return cfg;
}

std::vector<Waypoint> generateWaypoints(const RowRelativeState& state,
                                        double laneWidth, const MPCConfig& cfg) {
    cfg.validate();
    if (!(laneWidth > 0.0))
        throw std::invalid_argument("generateWaypoints: lane width must be positive");
    if (!(state.dLeft > 0.0) || !(state.dRight > 0.0))
        throw std::invalid_argument("generateWaypoints: robot must be inside the lane");

    // The centreline runs at -phi in the robot frame; the robot sits
    // (d_R - d_L)/2 to its left, so the line passes through the foot of the
    // perpendicular at -(d_R - d_L)/2 along the centreline's left normal.
    const double phi = state.heading;
    const double offset = (state.dRight - state.dLeft) / 2.0;
    const Eigen::Vector2d dir(std::cos(phi), -std::sin(phi));
    const Eigen::Vector2d leftNormal(std::sin(phi), std::cos(phi));
    const Eigen::Vector2d foot = -offset * leftNormal;

    std::vector<Waypoint> wps(static_cast<size_t>(cfg.horizon));
    for (int i = 0; i < cfg.horizon; ++i) {
        const Eigen::Vector2d p = foot + (i + 1) * cfg.stepLength * dir;
        wps[static_cast<size_t>(i)] = {p.x(), p.y()};
    }
    return wps;
}

namespace {

// Per-stage reference data: segment origin and unit direction entering each
// waypoint (the origin precedes waypoint 1).
struct Reference {
    std::vector<Eigen::Vector2d> anchor;  // wp_{i-1}
    std::vector<Eigen::Vector2d> dir;     // unit direction anchor -> wp_i
    std::vector<double> phiWp;
};

Reference buildReference(std::span<const Waypoint> wps) {
    Reference ref;
    const size_t n = wps.size();
    ref.anchor.resize(n);
    ref.dir.resize(n);
    ref.phiWp.resize(n);
    Eigen::Vector2d prev(0.0, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d cur(wps[i].x, wps[i].y);
        const Eigen::Vector2d d = cur - prev;
        const double len = d.norm();
        if (len < 1e-12)
            throw std::invalid_argument("mpc: consecutive waypoints coincide");
        ref.anchor[i] = prev;
        ref.dir[i] = d / len;
        ref.phiWp[i] = std::atan2(d.y(), d.x());
        prev = cur;
    }
    return ref;
}

struct Rollout {
    std::vector<double> x, y, phi;  // index 0 is the robot origin
};

Rollout rollout(const MPCConfig& cfg, std::span<const double> rho) {
    const size_t n = rho.size();
    Rollout r;
    r.x.assign(n + 1, 0.0);
    r.y.assign(n + 1, 0.0);
    r.phi.assign(n + 1, 0.0);
    const double ds = cfg.stepLength;
    for (size_t i = 0; i < n; ++i) {
        r.x[i + 1] = r.x[i] + std::cos(r.phi[i]) * ds;
        r.y[i + 1] = r.y[i] + std::sin(r.phi[i]) * ds;
        r.phi[i + 1] = r.phi[i] + rho[i] * ds;
    }
    return r;
}

double evaluate(const Reference& ref, const MPCConfig& cfg, double prevRho,
                std::span<const double> rho, const Rollout& r,
                Eigen::VectorXd* grad) {
    const int n = cfg.horizon;
    const double ds = cfg.stepLength;
    double cost = 0.0;

    std::vector<double> de(static_cast<size_t>(n)), phiErr(static_cast<size_t>(n));
    for (int i = 1; i <= n; ++i) {
        const size_t k = static_cast<size_t>(i - 1);
        const Eigen::Vector2d w(r.x[static_cast<size_t>(i)] - ref.anchor[k].x(),
                                r.y[static_cast<size_t>(i)] - ref.anchor[k].y());
        de[k] = ref.dir[k].y() * w.x() - ref.dir[k].x() * w.y();
        phiErr[k] = normalizeYaw(ref.phiWp[k] - r.phi[static_cast<size_t>(i)]);
        cost += cfg.cteWeights[k] * de[k] * de[k] +
                cfg.headingWeights[k] * phiErr[k] * phiErr[k];
    }
    double prev = prevRho;
    for (int i = 0; i < n; ++i) {
        const double d = rho[static_cast<size_t>(i)] - prev;
        cost += cfg.smoothnessWeights[static_cast<size_t>(i)] * d * d;
        prev = rho[static_cast<size_t>(i)];
    }

    if (grad) {
        grad->setZero(n);
        // Reverse sweep through the rollout recurrence.
        double lx = 0.0, ly = 0.0, lphi = 0.0;
        for (int i = n; i >= 1; --i) {
            const size_t k = static_cast<size_t>(i - 1);
            lx += 2.0 * cfg.cteWeights[k] * de[k] * ref.dir[k].y();
            ly += -2.0 * cfg.cteWeights[k] * de[k] * ref.dir[k].x();
            lphi += -2.0 * cfg.headingWeights[k] * phiErr[k];
            (*grad)(i - 1) += lphi * ds;
            // Pull lambda back through pose i-1 (position used phi_{i-1}).
            lphi += ds * (-std::sin(r.phi[k]) * lx + std::cos(r.phi[k]) * ly);
        }
        prev = prevRho;
        for (int i = 0; i < n; ++i) {
            const double d = rho[static_cast<size_t>(i)] - prev;
            (*grad)(i) += 2.0 * cfg.smoothnessWeights[static_cast<size_t>(i)] * d;
            if (i + 1 < n)
                (*grad)(i) -= 2.0 * cfg.smoothnessWeights[static_cast<size_t>(i + 1)] *
                              (rho[static_cast<size_t>(i + 1)] - rho[static_cast<size_t>(i)]);
            prev = rho[static_cast<size_t>(i)];
        }
    }
    return cost;
}

}  // namespace

double mpcCost(std::span<const Waypoint> waypoints, const MPCConfig& cfg,
               double prevCurvature, std::span<const double> curvatures) {
    cfg.validate();
    if (curvatures.size() != static_cast<size_t>(cfg.horizon))
        throw std::invalid_argument("mpcCost: curvature sequence must match the horizon");
    const Reference ref = buildReference(waypoints);
    const Rollout r = rollout(cfg, curvatures);
    return evaluate(ref, cfg, prevCurvature, curvatures, r, nullptr);
}

Eigen::VectorXd mpcCostGradient(std::span<const Waypoint> waypoints,
                                const MPCConfig& cfg, double prevCurvature,
                                std::span<const double> curvatures) {
    cfg.validate();
    if (curvatures.size() != static_cast<size_t>(cfg.horizon))
        throw std::invalid_argument("mpcCostGradient: curvature sequence must match the horizon");
    const Reference ref = buildReference(waypoints);
    const Rollout r = rollout(cfg, curvatures);
    Eigen::VectorXd grad;
    evaluate(ref, cfg, prevCurvature, curvatures, r, &grad);
    return grad;
}

std::vector<Pose2D> mpcRollout(const MPCConfig& cfg, std::span<const double> curvatures) {
    const Rollout r = rollout(cfg, curvatures);
    std::vector<Pose2D> poses(curvatures.size());
    for (size_t i = 0; i < curvatures.size(); ++i)
        poses[i] = {r.x[i + 1], r.y[i + 1], normalizeYaw(r.phi[i + 1])};
    return poses;
}

MPCSolution solveMPC(std::span<const Waypoint> waypoints, const MPCConfig& cfg,
                     double prevCurvature, std::span<const double> warmStart) {
    cfg.validate();
    if (waypoints.size() != static_cast<size_t>(cfg.horizon))
        throw std::invalid_argument("solveMPC: waypoint count must match the horizon");
    const double rhoMax = cfg.maxCurvature();
    if (std::fabs(prevCurvature) > rhoMax + 1e-9)
        throw std::invalid_argument("solveMPC: previous curvature violates the turn-radius bound");

    const Reference ref = buildReference(waypoints);
    const int n = cfg.horizon;

    Eigen::VectorXd rho = Eigen::VectorXd::Zero(n);
    if (!warmStart.empty()) {
        if (warmStart.size() != static_cast<size_t>(n))
            throw std::invalid_argument("solveMPC: warm start must match the horizon");
        for (int i = 0; i < n; ++i) rho(i) = warmStart[static_cast<size_t>(i)];
    }
    auto clampBox = [&](Eigen::VectorXd& v) {
        for (int i = 0; i < n; ++i) v(i) = std::clamp(v(i), -rhoMax, rhoMax);
    };
    clampBox(rho);

    auto costAt = [&](const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
        std::span<const double> s(v.data(), static_cast<size_t>(n));
        const Rollout r = rollout(cfg, s);
        return evaluate(ref, cfg, prevCurvature, s, r, grad);
    };

    MPCSolution sol;
    Eigen::VectorXd grad(n);
    double cost = costAt(rho, &grad);
    sol.costTrace.push_back(cost);

    double step = 1.0 / std::max(grad.lpNorm<Eigen::Infinity>(), 1.0);
    bool converged = false;
    int iter = 0;
    constexpr double armijo = 1e-4;

    for (; iter < cfg.maxIterations; ++iter) {
        Eigen::VectorXd candidate;
        double newCost = 0.0;
        double alpha = step;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            candidate = rho - alpha * grad;
            clampBox(candidate);
            const Eigen::VectorXd d = rho - candidate;
            const double pred = grad.dot(d);
            if (d.lpNorm<Eigen::Infinity>() < 1e-16) break;  // stationary
            newCost = costAt(candidate, nullptr);
            if (newCost <= cost - armijo * pred) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            converged = true;  // no descent direction left: stationary point
            break;
        }

        const Eigen::VectorXd s = candidate - rho;
        Eigen::VectorXd gradNew(n);
        const double checkCost = costAt(candidate, &gradNew);
        (void)checkCost;
        const Eigen::VectorXd yv = gradNew - grad;

        const double decrease = cost - newCost;
        rho = candidate;
        cost = newCost;
        grad = gradNew;
        sol.costTrace.push_back(cost);

        // Barzilai-Borwein step for the next iteration, safeguarded.
        const double sy = s.dot(yv);
        if (sy > 1e-300)
            step = std::clamp(s.dot(s) / sy, 1e-8, 1e8);
        else
            step = std::min(alpha * 2.0, 1e8);

        if (decrease < cfg.costTolerance) {
            converged = true;
            break;
        }
    }

    sol.curvatures.assign(rho.data(), rho.data() + n);
    sol.predictedPoses = mpcRollout(cfg, sol.curvatures);
    sol.cost = cost;
    sol.converged = converged;
    sol.iterations = iter;
    return sol;
}

void PIDConfig::validate() const {
    if (kp < 0.0 || ki < 0.0 || kd < 0.0)
        throw std::invalid_argument("PIDConfig: gains must be non-negative");
    if (!(integratorLimit > 0.0))
        throw std::invalid_argument("PIDConfig: integrator limit must be positive");
}

std::pair<double, PIDState> stepPID(const PIDConfig& cfg, double targetYawRate,
                                    double gyroYawRate, double dt, PIDState state) {
    cfg.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("stepPID: dt must be positive");

    const double error = targetYawRate - gyroYawRate;
    state.integral = std::clamp(state.integral + cfg.ki * error * dt,
                                -cfg.integratorLimit, cfg.integratorLimit);
    const double derivative =
        state.hasPrevError ? (error - state.prevError) / dt : 0.0;
    state.prevError = error;
    state.hasPrevError = true;

    double out = cfg.kp * error + state.integral + cfg.kd * derivative;
    if (cfg.feedforward) out += targetYawRate;
    return {out, state};
}

}  // namespace rowfollow
