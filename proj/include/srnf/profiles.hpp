#pragma once

#include <cmath>

namespace srnflab {

/* Quintic smoothstep: C^2 on R, 0 for x<=0, 1 for x>=1.
   max |s'| = 15/8, max |s'''| = 60 (at the endpoints). */
inline double smoothstep5(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

inline double smoothstep5_d(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return x * x * (30.0 + x * (-60.0 + 30.0 * x));
}

/* Antiderivative of smoothstep5 with F(0)=0; F(x)-(x-1/2) -> 0 as x->1. */
inline double smoothstep5_int(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return x - 0.5;
    double x2 = x * x;
    return x2 * x2 * (2.5 + x * (-3.0 + x * 6.0 / 6.0)); // x^4(5/2 - 3x + x^2)
}

/* C-infinity step: 0 for x<=0, 1 for x>=1, flat to all orders at both ends.
   Built from phi(x) = exp(-1/x). */
inline double cinf_step(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double a = std::exp(-1.0 / x);
    double b = std::exp(-1.0 / (1.0 - x));
    return a / (a + b);
}

/* C-infinity bump on [0,1), value 1 at r=0, 0 for r>=1, flat at r=1.
   bump(r) = exp(1 - 1/(1-r^2)). */
inline double cinf_bump(double r) {
    double r2 = r * r;
    if (r2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - r2));
}

/* d/dr of cinf_bump. */
inline double cinf_bump_d(double r) {
    double r2 = r * r;
    if (r2 >= 1.0) return 0.0;
    double d = 1.0 - r2;
    return std::exp(1.0 - 1.0 / d) * (-2.0 * r) / (d * d);
}

} // namespace srnflab
