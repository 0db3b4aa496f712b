#include "vlump/predicates.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace vlump::geom {
namespace {

constexpr double kGrid = 1073741824.0;  // 2^30

// 256-bit signed accumulator (two's complement over a pair of u128 limbs).
struct Int256 {
    unsigned __int128 lo = 0;
    unsigned __int128 hi = 0;
};

void acc_add(Int256& a, const Int256& b) {
    unsigned __int128 old = a.lo;
    a.lo += b.lo;
    a.hi += b.hi + (a.lo < old ? 1 : 0);
}

Int256 negate(Int256 a) {
    a.lo = ~a.lo;
    a.hi = ~a.hi;
    a.lo += 1;
    if (a.lo == 0) a.hi += 1;
    return a;
}

// Full 128x128 -> 256 bit signed product via 64-bit limbs.
Int256 mul_wide(__int128 x, __int128 y) {
    bool neg = false;
    if (x < 0) { x = -x; neg = !neg; }
    if (y < 0) { y = -y; neg = !neg; }
    auto ux = static_cast<unsigned __int128>(x);
    auto uy = static_cast<unsigned __int128>(y);
    std::uint64_t x0 = static_cast<std::uint64_t>(ux), x1 = static_cast<std::uint64_t>(ux >> 64);
    std::uint64_t y0 = static_cast<std::uint64_t>(uy), y1 = static_cast<std::uint64_t>(uy >> 64);
    unsigned __int128 p00 = static_cast<unsigned __int128>(x0) * y0;
    unsigned __int128 p01 = static_cast<unsigned __int128>(x0) * y1;
    unsigned __int128 p10 = static_cast<unsigned __int128>(x1) * y0;
    unsigned __int128 p11 = static_cast<unsigned __int128>(x1) * y1;
    unsigned __int128 mid = p01 + p10;
    unsigned __int128 mid_carry = (mid < p01) ? 1 : 0;

    Int256 r;
    r.lo = p00;
    r.hi = p11 + (mid >> 64) + (mid_carry << 64);
    unsigned __int128 old = r.lo;
    r.lo += mid << 64;
    if (r.lo < old) r.hi += 1;
    return neg ? negate(r) : r;
}

int acc_sign(const Int256& a) {
    bool negative = (a.hi >> 127) != 0;
    if (negative) return -1;
    return (a.lo == 0 && a.hi == 0) ? 0 : 1;
}

std::int64_t to_grid(double v) {
    double scaled = v * kGrid;
    auto k = static_cast<std::int64_t>(std::llround(scaled));
    if (static_cast<double>(k) != scaled)
        throw std::invalid_argument("predicate input not snapped to grid: " + std::to_string(v));
    if (std::abs(k) > (std::int64_t(1) << 34))
        throw std::invalid_argument("predicate input out of range: " + std::to_string(v));
    return k;
}

__int128 det3(std::int64_t ax, std::int64_t ay, std::int64_t az,
              std::int64_t bx, std::int64_t by, std::int64_t bz,
              std::int64_t cx, std::int64_t cy, std::int64_t cz) {
    auto m = [](std::int64_t p, std::int64_t q, std::int64_t r, std::int64_t s) {
        return static_cast<__int128>(p) * q - static_cast<__int128>(r) * s;
    };
    return static_cast<__int128>(ax) * m(by, cz, bz, cy) -
           static_cast<__int128>(ay) * m(bx, cz, bz, cx) +
           static_cast<__int128>(az) * m(bx, cy, by, cx);
}

}  // namespace

double snap(double v) {
    return std::nearbyint(v * kGrid) / kGrid;
}

int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    // Differences of snapped coordinates in [-16, 16] are exact in double.
    long double ax = b.x - a.x, ay = b.y - a.y, az = b.z - a.z;
    long double bx = c.x - a.x, by = c.y - a.y, bz = c.z - a.z;
    long double cx = d.x - a.x, cy = d.y - a.y, cz = d.z - a.z;

    long double t0 = ax * (by * cz - bz * cy);
    long double t1 = ay * (bx * cz - bz * cx);
    long double t2 = az * (bx * cy - by * cx);
    long double det = t0 - t1 + t2;
    long double mag = std::abs(t0) + std::abs(t1) + std::abs(t2);
    if (std::abs(det) > 1e-17L * mag) return det > 0 ? 1 : -1;

    __int128 exact = det3(to_grid(b.x) - to_grid(a.x), to_grid(b.y) - to_grid(a.y), to_grid(b.z) - to_grid(a.z),
                          to_grid(c.x) - to_grid(a.x), to_grid(c.y) - to_grid(a.y), to_grid(c.z) - to_grid(a.z),
                          to_grid(d.x) - to_grid(a.x), to_grid(d.y) - to_grid(a.y), to_grid(d.z) - to_grid(a.z));
    return exact > 0 ? 1 : (exact < 0 ? -1 : 0);
}

int insphere(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& e) {
    const Vec3* pts[4] = {&a, &b, &c, &d};
    long double rx[4], ry[4], rz[4], rw[4];
    for (int i = 0; i < 4; ++i) {
        rx[i] = pts[i]->x - e.x;
        ry[i] = pts[i]->y - e.y;
        rz[i] = pts[i]->z - e.z;
        rw[i] = rx[i] * rx[i] + ry[i] * ry[i] + rz[i] * rz[i];
    }
    // Expand the 4x4 determinant along the squared-norm column.
    auto minor3 = [&](int i, int j, int k) {
        return rx[i] * (ry[j] * rz[k] - rz[j] * ry[k]) -
               ry[i] * (rx[j] * rz[k] - rz[j] * rx[k]) +
               rz[i] * (rx[j] * ry[k] - ry[j] * rx[k]);
    };
    long double t0 = rw[0] * minor3(1, 2, 3);
    long double t1 = rw[1] * minor3(0, 2, 3);
    long double t2 = rw[2] * minor3(0, 1, 3);
    long double t3 = rw[3] * minor3(0, 1, 2);
    // With rows (p_i - e | squared norm) and positive orient3d(a, b, c, d),
    // the determinant is negative exactly when e is inside the sphere.
    long double det = -t0 + t1 - t2 + t3;
    long double mag = std::abs(t0) + std::abs(t1) + std::abs(t2) + std::abs(t3);
    if (std::abs(det) > 1e-16L * mag) return det < 0 ? 1 : -1;

    std::int64_t ix[4], iy[4], iz[4];
    __int128 iw[4];
    std::int64_t ex = to_grid(e.x), ey = to_grid(e.y), ez = to_grid(e.z);
    for (int i = 0; i < 4; ++i) {
        ix[i] = to_grid(pts[i]->x) - ex;
        iy[i] = to_grid(pts[i]->y) - ey;
        iz[i] = to_grid(pts[i]->z) - ez;
        iw[i] = static_cast<__int128>(ix[i]) * ix[i] + static_cast<__int128>(iy[i]) * iy[i] +
                static_cast<__int128>(iz[i]) * iz[i];
    }
    auto iminor = [&](int i, int j, int k) {
        return det3(ix[i], iy[i], iz[i], ix[j], iy[j], iz[j], ix[k], iy[k], iz[k]);
    };
    Int256 acc = mul_wide(-iw[0], iminor(1, 2, 3));
    acc_add(acc, mul_wide(iw[1], iminor(0, 2, 3)));
    acc_add(acc, mul_wide(-iw[2], iminor(0, 1, 3)));
    acc_add(acc, mul_wide(iw[3], iminor(0, 1, 2)));
    return -acc_sign(acc);
}

}  // namespace vlump::geom
