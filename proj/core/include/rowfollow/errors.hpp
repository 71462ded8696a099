#pragma once

#include <stdexcept>
#include <string>

namespace rowfollow {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// All input lines are parallel within tolerance; no vanishing point exists.
class DegenerateLines : public Error {
public:
    explicit DegenerateLines(const std::string& what) : Error(what) {}
};

/// A line handed to a pitch estimator still has significant slope.
class NotRectified : public Error {
public:
    explicit NotRectified(const std::string& what) : Error(what) {}
};

/// After full rectification the left row sits right of centre (or vice versa).
class RowOnWrongSide : public Error {
public:
    explicit RowOnWrongSide(const std::string& what) : Error(what) {}
};

/// A rendered line does not intersect the image rectangle.
class OutOfView : public Error {
public:
    explicit OutOfView(const std::string& what) : Error(what) {}
};

/// Pose projects outside the ends of the field centerline.
class OutOfField : public Error {
public:
    explicit OutOfField(const std::string& what) : Error(what) {}
};

/// Innovation covariance lost positive definiteness (filter misconfigured).
class NonPositiveDefinite : public Error {
public:
    explicit NonPositiveDefinite(const std::string& what) : Error(what) {}
};

/// Configuration file or override violates the documented schema.
class ConfigInvalid : public Error {
public:
    explicit ConfigInvalid(const std::string& what) : Error(what) {}
};

}  // namespace rowfollow
