#pragma once

#include "srnf/core.hpp"
#include <cstdint>
#include <cmath>

namespace srnflab {

/* Deterministic RNG for seeded test batteries. splitmix64 core; the
   distributions below are written out explicitly so that streams are
   reproducible across standard libraries (std::normal_distribution is not). */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one value per call (the pair's partner is discarded to keep
    // the stream position independent of call parity).
    double normal() {
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    Vec3 normal3() {
        double a = normal(), b = normal(), c = normal();
        return Vec3(a, b, c);
    }

    /* Uniform random rotation via normalized quaternion. */
    Mat3 rotation() {
        double q[4];
        for (double& v : q) v = normal();
        double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        if (n < 1e-12) return Mat3::Identity();
        double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
        Mat3 R;
        R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
             2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
             2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
        return R;
    }

private:
    std::uint64_t state_;
};

} // namespace srnflab
