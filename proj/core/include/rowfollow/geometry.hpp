#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "rowfollow/errors.hpp"

namespace rowfollow {

// All image quantities use centered coordinates: origin at the principal
// point (assumed at the image centre), x right, y down, units pixels.

struct CameraIntrinsics {
    double focalPx = 0.0;
    int width = 0;
    int height = 0;

    void validate() const;
};

/// Infinite line carried by two distinct points.
struct Line2D {
    Eigen::Vector2d p0{0.0, 0.0};
    Eigen::Vector2d p1{0.0, 0.0};

    Line2D() = default;
    Line2D(const Eigen::Vector2d& a, const Eigen::Vector2d& b) : p0(a), p1(b) {}
    Line2D(double x0, double y0, double x1, double y1) : p0(x0, y0), p1(x1, y1) {}

    /// Unit direction p0 -> p1.
    Eigen::Vector2d direction() const;

    /// Direction angle folded into [0, pi).
    double directionAngle() const;

    /// Coefficients (a, b, c) of a*x + b*y + c = 0 with hypot(a, b) = 1.
    Eigen::Vector3d coeffs() const;

    /// x at the given y; requires the line not horizontal.
    double xAt(double y) const;

    /// y at the given x; requires the line not vertical.
    double yAt(double x) const;

    /// Two points spaced +-halfSpan around the point closest to the origin.
    static Line2D fromCoeffs(const Eigen::Vector3d& abc, double halfSpan);
};

/// Smallest angle between two undirected line directions, in [0, pi/2].
double lineAngleBetween(const Line2D& a, const Line2D& b);

struct AnnotationSet {
    Line2D leftRow;
    Line2D rightRow;
    std::optional<Line2D> horizon;
    std::vector<Line2D> stalks;

    /// Exactly one of {horizon, >=2 stalks} must be present.
    void validate() const;
};

struct CameraAttitude {
    double roll = 0.0;     // alpha, radians
    double pitch = 0.0;    // theta, radians
    double heading = 0.0;  // phi, radians
};

struct GroundTruthLabel {
    double heading = 0.0;        // radians
    double distanceRatio = 0.5;  // d in (0, 1)
    CameraAttitude attitude;
};

/// Forward-renderer input: camera attitude plus its placement in the lane.
struct CameraPoseInRow {
    double roll = 0.0;
    double pitch = 0.0;
    double heading = 0.0;
    double cameraHeight = 0.3;  // metres above ground
    double leftOffset = 0.375;  // X_l, metres to the left row, > 0
    double rightOffset = 0.375; // X_r, metres to the right row, > 0

    CameraAttitude attitude() const { return {roll, pitch, heading}; }
    double laneWidth() const { return leftOffset + rightOffset; }
    double distanceRatio() const { return leftOffset / (leftOffset + rightOffset); }
};

// Elementary camera rotations, composed as camera-from-row. The signs are
// fixed so that a camera with attitude (alpha, theta, phi) sees the ground
// normal at (sin a cos t, cos a cos t, -sin t) and the row vanishing point
// at (f tan phi, 0) once roll and pitch are removed.
Eigen::Matrix3d rollRotation(double roll);
Eigen::Matrix3d pitchRotation(double pitch);
Eigen::Matrix3d headingRotation(double heading);
Eigen::Matrix3d attitudeRotation(const CameraAttitude& a);

/// Least-squares intersection of two or more lines: minimises the sum of
/// squared perpendicular distances. Throws DegenerateLines when every pair
/// of lines is parallel within tolerance.
Eigen::Vector2d estimateVanishingPoint(std::span<const Line2D> lines);

/// Horizon recovered from the vanishing point (v_x, v_y) of vertical stalk
/// lines as the line v_x*x + v_y*y + f^2 = 0.
Line2D horizonFromStalks(std::span<const Line2D> stalks, const CameraIntrinsics& cam);

/// Camera roll from the horizon slope.
double estimateRoll(const Line2D& horizon);

/// Camera pitch from the y-intercept of a roll-rectified horizon.
/// Throws NotRectified when the horizon still has slope.
double estimatePitch(const Line2D& rectifiedHorizon, const CameraIntrinsics& cam);

/// Heading from the crop-row vanishing point of roll/pitch-rectified rows.
double estimateHeading(const Line2D& leftRow, const Line2D& rightRow,
                       const CameraIntrinsics& cam);

/// Distance ratio d = l_x / (l_x + r_x) from the bottom-edge intercepts of
/// fully rectified rows. Throws RowOnWrongSide when the left row lands
/// right of centre or the right row lands left of it.
double estimateDistanceRatio(const Line2D& leftRow, const Line2D& rightRow,
                             const CameraIntrinsics& cam);

/// Applies the homography H = K R K^-1 induced by a rotation about the
/// camera centre to a line (endpoints map projectively).
Line2D rotateLine(const Line2D& line, const Eigen::Matrix3d& rot,
                  const CameraIntrinsics& cam);
std::vector<Line2D> rotateLines(std::span<const Line2D> lines,
                                const Eigen::Matrix3d& rot,
                                const CameraIntrinsics& cam);

/// Full pipeline: horizon (direct or from stalks) -> roll -> pitch ->
/// heading -> distance ratio. Sub-operation errors are rethrown with the
/// pipeline stage prepended to the message.
GroundTruthLabel groundTruth(const AnnotationSet& annotations,
                             const CameraIntrinsics& cam);

/// Renders exact line annotations for a known pose. With stalkCount == 0
/// the horizon is emitted directly; with stalkCount >= 2 that many vertical
/// stalk lines replace it. Throws OutOfView when a required line misses the
/// image rectangle.
AnnotationSet renderAnnotations(const CameraPoseInRow& pose,
                                const CameraIntrinsics& cam, int stalkCount = 0);

}  // namespace rowfollow
