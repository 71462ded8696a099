#include "rowfollow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace rowfollow {

namespace {

// Lines closer in direction than this are treated as parallel; the value is
// below realistic annotation precision.
constexpr double kParallelTol = 1e-4;

// Residual slope allowed on a roll-rectified horizon.
constexpr double kRectifiedSlopeTol = 1e-6;

// Fold an atan2 angle into [0, pi).
double foldAngle(double ang) {
    if (ang < 0.0) ang += M_PI;
    if (ang >= M_PI) ang -= M_PI;
    return ang;
}

// Smallest difference between two undirected angles in [0, pi).
double undirectedDiff(double a, double b) {
    double d = std::fabs(a - b);
    return std::min(d, M_PI - d);
}

// Line coefficients (a, b, c) in centred pixels for the image of the plane
// through the camera centre with normal m (camera frame): m_x*x + m_y*y +
// f*m_z = 0.
Eigen::Vector3d lineFromPlaneNormal(const Eigen::Vector3d& m, double f) {
    return {m.x(), m.y(), f * m.z()};
}

// Clips the infinite line a*x + b*y + c = 0 to the centred image rectangle.
// Returns the crossing segment, or nothing when the line misses the image.
std::optional<Line2D> clipToImage(const Eigen::Vector3d& abc,
                                  const CameraIntrinsics& cam) {
    const double norm = std::hypot(abc.x(), abc.y());
    if (norm < 1e-300) return std::nullopt;  // line at infinity
    const double a = abc.x() / norm;
    const double b = abc.y() / norm;
    const double c = abc.z() / norm;

    // Point closest to origin and unit direction.
    const Eigen::Vector2d base(-c * a, -c * b);
    const Eigen::Vector2d dir(-b, a);

    const double hw = cam.width / 2.0;
    const double hh = cam.height / 2.0;
    double tLo = -std::numeric_limits<double>::infinity();
    double tHi = std::numeric_limits<double>::infinity();

    auto clipAxis = [&](double p, double d, double lo, double hi) -> bool {
        if (std::fabs(d) < 1e-15) return p >= lo && p <= hi;
        double t0 = (lo - p) / d;
        double t1 = (hi - p) / d;
        if (t0 > t1) std::swap(t0, t1);
        tLo = std::max(tLo, t0);
        tHi = std::min(tHi, t1);
        return true;
    };

    if (!clipAxis(base.x(), dir.x(), -hw, hw)) return std::nullopt;
    if (!clipAxis(base.y(), dir.y(), -hh, hh)) return std::nullopt;
    if (!(tHi - tLo > 1e-9)) return std::nullopt;  // miss or corner graze

    return Line2D(base + tLo * dir, base + tHi * dir);
}

}  // namespace

void CameraIntrinsics::validate() const {
    if (!(focalPx > 0.0) || width <= 0 || height <= 0)
        throw std::invalid_argument("CameraIntrinsics: f and image size must be positive");
}

Eigen::Vector2d Line2D::direction() const {
    Eigen::Vector2d d = p1 - p0;
    const double n = d.norm();
    if (n < 1e-300) throw std::invalid_argument("Line2D: endpoints coincide");
    return d / n;
}

double Line2D::directionAngle() const {
    const Eigen::Vector2d d = direction();
    return foldAngle(std::atan2(d.y(), d.x()));
}

Eigen::Vector3d Line2D::coeffs() const {
    const Eigen::Vector2d d = direction();
    const Eigen::Vector2d n(d.y(), -d.x());
    return {n.x(), n.y(), -n.dot(p0)};
}

double Line2D::xAt(double y) const {
    const Eigen::Vector3d abc = coeffs();
    if (std::fabs(abc.x()) < 1e-12)
        throw std::invalid_argument("Line2D::xAt: line is horizontal");
    return (-abc.z() - abc.y() * y) / abc.x();
}

double Line2D::yAt(double x) const {
    const Eigen::Vector3d abc = coeffs();
    if (std::fabs(abc.y()) < 1e-12)
        throw std::invalid_argument("Line2D::yAt: line is vertical");
    return (-abc.z() - abc.x() * x) / abc.y();
}

Line2D Line2D::fromCoeffs(const Eigen::Vector3d& abc, double halfSpan) {
    const double norm = std::hypot(abc.x(), abc.y());
    if (norm < 1e-300)
        throw std::invalid_argument("Line2D::fromCoeffs: degenerate coefficients");
    const double a = abc.x() / norm;
    const double b = abc.y() / norm;
    const double c = abc.z() / norm;
    const Eigen::Vector2d base(-c * a, -c * b);
    const Eigen::Vector2d dir(-b, a);
    return Line2D(base - halfSpan * dir, base + halfSpan * dir);
}

double lineAngleBetween(const Line2D& a, const Line2D& b) {
    return undirectedDiff(a.directionAngle(), b.directionAngle());
}

void AnnotationSet::validate() const {
    const bool hasHorizon = horizon.has_value();
    const bool hasStalks = stalks.size() >= 2;
    if (hasHorizon == hasStalks)
        throw std::invalid_argument(
            "AnnotationSet: exactly one of {horizon, >=2 stalks} must be present");
    if (lineAngleBetween(leftRow, rightRow) < kParallelTol)
        throw std::invalid_argument("AnnotationSet: row lines are parallel");
}

Eigen::Matrix3d rollRotation(double roll) {
    const double c = std::cos(roll), s = std::sin(roll);
    Eigen::Matrix3d r;
    r << c, s, 0.0,
        -s, c, 0.0,
        0.0, 0.0, 1.0;
    return r;
}

Eigen::Matrix3d pitchRotation(double pitch) {
    const double c = std::cos(pitch), s = std::sin(pitch);
    Eigen::Matrix3d r;
    r << 1.0, 0.0, 0.0,
        0.0, c, s,
        0.0, -s, c;
    return r;
}

Eigen::Matrix3d headingRotation(double heading) {
    const double c = std::cos(heading), s = std::sin(heading);
    Eigen::Matrix3d r;
    r << c, 0.0, s,
        0.0, 1.0, 0.0,
        -s, 0.0, c;
    return r;
}

Eigen::Matrix3d attitudeRotation(const CameraAttitude& a) {
    return rollRotation(a.roll) * pitchRotation(a.pitch) * headingRotation(a.heading);
}

Eigen::Vector2d estimateVanishingPoint(std::span<const Line2D> lines) {
    if (lines.size() < 2)
        throw std::invalid_argument("estimateVanishingPoint: need at least two lines");

    std::vector<double> angles;
    angles.reserve(lines.size());
    for (const Line2D& l : lines) angles.push_back(l.directionAngle());
    double spread = 0.0;
    for (size_t i = 0; i < angles.size(); ++i)
        for (size_t j = i + 1; j < angles.size(); ++j)
            spread = std::max(spread, undirectedDiff(angles[i], angles[j]));
    if (spread < kParallelTol)
        throw DegenerateLines("estimateVanishingPoint: lines are mutually parallel");

    // Normal equations of min sum (a_i x + b_i y + c_i)^2, (a_i, b_i) unit.
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
    Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
    for (const Line2D& l : lines) {
        const Eigen::Vector3d abc = l.coeffs();
        const Eigen::Vector2d n(abc.x(), abc.y());
        A += n * n.transpose();
        rhs -= abc.z() * n;
    }
    const double det = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
    if (!(std::fabs(det) > 0.0))
        throw DegenerateLines("estimateVanishingPoint: normal equations singular");
    Eigen::Vector2d v;
    v.x() = (A(1, 1) * rhs.x() - A(0, 1) * rhs.y()) / det;
    v.y() = (A(0, 0) * rhs.y() - A(1, 0) * rhs.x()) / det;
    return v;
}

Line2D horizonFromStalks(std::span<const Line2D> stalks, const CameraIntrinsics& cam) {
    cam.validate();
    const Eigen::Vector2d v = estimateVanishingPoint(stalks);
    const Eigen::Vector3d abc(v.x(), v.y(), cam.focalPx * cam.focalPx);
    return Line2D::fromCoeffs(abc, std::max(cam.width, cam.height) * 1.0);
}

double estimateRoll(const Line2D& horizon) {
    const Eigen::Vector2d d = horizon.direction();
    // Direction angle folded into (-pi/2, pi/2]: rise-over-run slope angle.
    double ang = std::atan2(d.y(), d.x());
    if (ang > M_PI / 2.0) ang -= M_PI;
    if (ang <= -M_PI / 2.0) ang += M_PI;
    return -ang;
}

double estimatePitch(const Line2D& rectifiedHorizon, const CameraIntrinsics& cam) {
    cam.validate();
    const double slopeAngle = -estimateRoll(rectifiedHorizon);
    if (std::fabs(slopeAngle) > kRectifiedSlopeTol)
        throw NotRectified("estimatePitch: horizon not roll-rectified");
    const Eigen::Vector3d abc = rectifiedHorizon.coeffs();
    // Near-horizontal, so |b| ~ 1.
    const double yHorizon = -abc.z() / abc.y();
    return std::atan2(yHorizon, cam.focalPx);
}

double estimateHeading(const Line2D& leftRow, const Line2D& rightRow,
                       const CameraIntrinsics& cam) {
    cam.validate();
    if (lineAngleBetween(leftRow, rightRow) < kParallelTol)
        throw DegenerateLines("estimateHeading: row lines are parallel");
    const Line2D rows[2] = {leftRow, rightRow};
    const Eigen::Vector2d v = estimateVanishingPoint(rows);
    return std::atan2(v.x(), cam.focalPx);
}

double estimateDistanceRatio(const Line2D& leftRow, const Line2D& rightRow,
                             const CameraIntrinsics& cam) {
    cam.validate();
    const double yBottom = cam.height / 2.0;
    const double lx = leftRow.xAt(yBottom);
    const double rx = rightRow.xAt(yBottom);
    if (!(lx < 0.0) || !(rx > 0.0))
        throw RowOnWrongSide("estimateDistanceRatio: rows do not straddle the centre column");
    return -lx / (-lx + rx);
}

Line2D rotateLine(const Line2D& line, const Eigen::Matrix3d& rot,
                  const CameraIntrinsics& cam) {
    cam.validate();
    const double f = cam.focalPx;
    auto mapPoint = [&](const Eigen::Vector2d& p) -> std::optional<Eigen::Vector2d> {
        const Eigen::Vector3d q = rot * Eigen::Vector3d(p.x() / f, p.y() / f, 1.0);
        if (std::fabs(q.z()) < 1e-12) return std::nullopt;
        return Eigen::Vector2d(f * q.x() / q.z(), f * q.y() / q.z());
    };
    const auto q0 = mapPoint(line.p0);
    const auto q1 = mapPoint(line.p1);
    if (q0 && q1 && (*q0 - *q1).norm() > 1e-9) return Line2D(*q0, *q1);

    // An endpoint mapped to infinity: transform the coefficients instead.
    const Eigen::Vector3d abc = line.coeffs();
    const Eigen::Vector3d scaled(f * abc.x(), f * abc.y(), abc.z());
    const Eigen::Vector3d u = rot * scaled;
    return Line2D::fromCoeffs({u.x() / f, u.y() / f, u.z()},
                              std::max(cam.width, cam.height) * 1.0);
}

std::vector<Line2D> rotateLines(std::span<const Line2D> lines,
                                const Eigen::Matrix3d& rot,
                                const CameraIntrinsics& cam) {
    std::vector<Line2D> out;
    out.reserve(lines.size());
    for (const Line2D& l : lines) out.push_back(rotateLine(l, rot, cam));
    return out;
}

GroundTruthLabel groundTruth(const AnnotationSet& annotations,
                             const CameraIntrinsics& cam) {
    cam.validate();
    annotations.validate();

    auto rethrow = [](const char* stage, auto&& fn) {
        try {
            return fn();
        } catch (const DegenerateLines& e) {
            throw DegenerateLines(std::string(stage) + ": " + e.what());
        } catch (const NotRectified& e) {
            throw NotRectified(std::string(stage) + ": " + e.what());
        } catch (const RowOnWrongSide& e) {
            throw RowOnWrongSide(std::string(stage) + ": " + e.what());
        }
    };

    Line2D horizon = annotations.horizon
                         ? *annotations.horizon
                         : rethrow("horizon", [&] {
                               return horizonFromStalks(annotations.stalks, cam);
                           });

    const double roll = rethrow("roll", [&] { return estimateRoll(horizon); });

    const Eigen::Matrix3d rollFix = rollRotation(-roll);
    Line2D left = rotateLine(annotations.leftRow, rollFix, cam);
    Line2D right = rotateLine(annotations.rightRow, rollFix, cam);
    horizon = rotateLine(horizon, rollFix, cam);

    const double pitch = rethrow("pitch", [&] { return estimatePitch(horizon, cam); });

    const Eigen::Matrix3d pitchFix = pitchRotation(-pitch);
    left = rotateLine(left, pitchFix, cam);
    right = rotateLine(right, pitchFix, cam);

    const double heading =
        rethrow("heading", [&] { return estimateHeading(left, right, cam); });

    const Eigen::Matrix3d headingFix = headingRotation(-heading);
    left = rotateLine(left, headingFix, cam);
    right = rotateLine(right, headingFix, cam);

    const double ratio = rethrow(
        "distance", [&] { return estimateDistanceRatio(left, right, cam); });

    GroundTruthLabel label;
    label.heading = heading;
    label.distanceRatio = ratio;
    label.attitude = {roll, pitch, heading};
    return label;
}

AnnotationSet renderAnnotations(const CameraPoseInRow& pose,
                                const CameraIntrinsics& cam, int stalkCount) {
    cam.validate();
    if (!(pose.cameraHeight > 0.0) || !(pose.leftOffset > 0.0) || !(pose.rightOffset > 0.0))
        throw std::invalid_argument("renderAnnotations: H, X_l, X_r must be positive");
    if (std::fabs(pose.roll) >= M_PI / 2 || std::fabs(pose.pitch) >= M_PI / 2 ||
        std::fabs(pose.heading) >= M_PI / 2)
        throw std::invalid_argument("renderAnnotations: attitude out of range");
    if (stalkCount == 1 || stalkCount < 0)
        throw std::invalid_argument("renderAnnotations: stalkCount must be 0 or >= 2");

    const double f = cam.focalPx;
    const Eigen::Matrix3d rot = attitudeRotation(pose.attitude());

    // Row frame: x right, y down, z out along the row; ground at y = H.
    auto groundLine = [&](double lateral) -> Eigen::Vector3d {
        const Eigen::Vector3d p1 = rot * Eigen::Vector3d(lateral, pose.cameraHeight, 0.0);
        const Eigen::Vector3d p2 = rot * Eigen::Vector3d(lateral, pose.cameraHeight, 1.0);
        return lineFromPlaneNormal(p1.cross(p2), f);
    };

    auto clipOrThrow = [&](const Eigen::Vector3d& abc, const char* what) {
        auto seg = clipToImage(abc, cam);
        if (!seg) throw OutOfView(std::string("renderAnnotations: ") + what +
                                  " does not cross the image");
        return *seg;
    };

    AnnotationSet out;
    const Eigen::Vector3d leftCoeffs = groundLine(-pose.leftOffset);
    const Eigen::Vector3d rightCoeffs = groundLine(pose.rightOffset);
    out.leftRow = clipOrThrow(leftCoeffs, "left row");
    out.rightRow = clipOrThrow(rightCoeffs, "right row");

    // Vertical (ground-normal) direction in the camera frame.
    const Eigen::Vector3d vertical = rot * Eigen::Vector3d(0.0, 1.0, 0.0);
    const Eigen::Vector3d horizonCoeffs = lineFromPlaneNormal(vertical, f);

    if (stalkCount == 0) {
        out.horizon = clipOrThrow(horizonCoeffs, "horizon");
        return out;
    }

    // Place stalk bases on the visible part of each row that back-projects
    // onto the ground in front of the horizon, then project the vertical
    // line through each base.
    const Eigen::Matrix3d rotT = rot.transpose();
    auto groundness = [&](const Eigen::Vector2d& p) {
        return (rotT * Eigen::Vector3d(p.x() / f, p.y() / f, 1.0)).y();
    };

    struct Segment {
        Eigen::Vector2d a, b;
    };
    auto validSubSegment = [&](const Line2D& seg) -> std::optional<Segment> {
        const double ga = groundness(seg.p0);
        const double gb = groundness(seg.p1);
        constexpr double gMin = 1e-6;
        double s0 = 0.0, s1 = 1.0;
        if (ga < gMin && gb < gMin) return std::nullopt;
        if (ga < gMin || gb < gMin) {
            const double sCross = (gMin - ga) / (gb - ga);  // g is affine in s
            if (ga < gMin)
                s0 = sCross;
            else
                s1 = sCross;
        }
        const double span = s1 - s0;
        if (span < 1e-6) return std::nullopt;
        s0 += 0.05 * span;
        s1 -= 0.05 * span;
        Segment out2;
        out2.a = seg.p0 + s0 * (seg.p1 - seg.p0);
        out2.b = seg.p0 + s1 * (seg.p1 - seg.p0);
        return out2;
    };

    std::vector<Segment> segments;
    if (auto s = validSubSegment(out.leftRow)) segments.push_back(*s);
    if (auto s = validSubSegment(out.rightRow)) segments.push_back(*s);
    if (segments.empty())
        throw OutOfView("renderAnnotations: no visible ground to place stalks on");

    for (int j = 0; j < stalkCount; ++j) {
        const Segment& seg = segments[j % segments.size()];
        const int perSeg = stalkCount / static_cast<int>(segments.size()) +
                           (j % static_cast<int>(segments.size()) <
                                    stalkCount % static_cast<int>(segments.size())
                                ? 1
                                : 0);
        const int idx = j / static_cast<int>(segments.size());
        const double frac = (idx + 1.0) / (perSeg + 1.0);
        const Eigen::Vector2d base = seg.a + frac * (seg.b - seg.a);
        const Eigen::Vector3d baseCam(base.x() / f, base.y() / f, 1.0);
        const Eigen::Vector3d m = baseCam.cross(vertical);
        if (m.norm() < 1e-12 * vertical.norm() * baseCam.norm()) continue;
        auto line = clipToImage(lineFromPlaneNormal(m, f), cam);
        if (!line) continue;
        out.stalks.push_back(*line);
    }
    if (static_cast<int>(out.stalks.size()) < 2)
        throw OutOfView("renderAnnotations: could not place enough stalk lines");
    return out;
}

}  // namespace rowfollow
