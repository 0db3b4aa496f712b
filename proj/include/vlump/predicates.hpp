/// @file predicates.hpp
/// @brief Orientation and circumsphere predicates with exact integer
/// fallback.
///
/// Points fed to these predicates must be snapped to the 2^-30 grid (see
/// snap()) with |coordinate| <= 16. A long-double filter decides the easy
/// cases; anything within the filter's error bound is re-evaluated exactly
/// in 128/256-bit integer arithmetic, so the returned sign (including 0) is
/// always the true sign of the determinant.
#pragma once

namespace vlump {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

inline bool operator==(const Vec3& a, const Vec3& b) {
    return a.x == b.x && a.y == b.y && a.z == b.z;
}

namespace geom {

/// Round to the nearest multiple of 2^-30.
double snap(double v);

/// Sign of det[b-a; c-a; d-a]: +1 when d lies on the positive side of the
/// plane through (a, b, c), i.e. the tet (a, b, c, d) is positively oriented.
int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// Sign of the 4x4 circumsphere determinant: +1 when e lies strictly inside
/// the sphere through (a, b, c, d), -1 outside, 0 exactly on it. Requires
/// orient3d(a, b, c, d) > 0.
int insphere(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& e);

}  // namespace geom
}  // namespace vlump
