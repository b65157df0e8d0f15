#include "ermtree/rng.hpp"

namespace ermtree {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform_pos();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

double Rng::gamma(double shape) {
    if (shape < 1.0) {
        // boost to shape+1, then scale back
        double u = uniform_pos();
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        double u = uniform_pos();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double Rng::student_t(double df) {
    double z = normal();
    double v = chi_squared(df);
    return z / std::sqrt(v / df);
}

double Rng::exp_power(double beta) {
    double g = gamma(1.0 / beta);
    double mag = std::pow(g, 1.0 / beta);
    return bernoulli(0.5) ? mag : -mag;
}

} // namespace ermtree
