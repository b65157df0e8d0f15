#pragma once

namespace ermtree {

// Radial bump profile: 1 on [0, 1/4], 0 on [1/2, inf), quintic smoothstep in
// between. C^2 is plenty for Hoelder exponents <= 1, which is all the
// generators exercise; the flank is S(t) = 6t^5 - 15t^4 + 10t^3.
inline double bump_u(double t) {
    if (t <= 0.25) return 1.0;
    if (t >= 0.5) return 0.0;
    double v = 4.0 * (t - 0.25); // flank parameter in (0, 1)
    return 1.0 - v * v * v * (v * (6.0 * v - 15.0) + 10.0);
}

// calibration constant: the worst-case Hoelder ratio of bump_u over any
// exponent alpha in (0,1]. Equal to the peak slope 4 * S'(1/2) = 4 * 15/8:
// if the scaled step is >= 1 the unit range of u already bounds the ratio,
// otherwise the Lipschitz bound applies and t^alpha >= t on [0,1].
inline constexpr double kBumpCal = 7.5;

} // namespace ermtree
