#pragma once
#include <cstdint>
#include <cmath>

namespace ermtree {

// Counter-based generator: output i of stream (seed, stream) is a fixed mix of
// (key, i), so any draw can be reproduced without replaying the sequence and
// sub-streams can be split off a parent without coordination. std:: engines and
// distributions are avoided throughout because their output is
// implementation-defined and reruns must be byte-identical.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
  public:
    Rng() : key_(0) {}
    Rng(uint64_t seed, uint64_t stream)
        : key_(mix64(mix64(seed) ^ (0x6a09e667f3bcc909ULL + stream))) {}

    // child sub-stream; pure in (parent key, tag)
    Rng split(uint64_t tag) const {
        Rng r;
        r.key_ = mix64(key_ ^ mix64(0x9e3779b97f4a7c15ULL + tag));
        return r;
    }

    uint64_t next_u64() { return mix64(key_ + 0xd1342543de82ef95ULL * ++ctr_); }

    // uniform on [0,1), 53-bit resolution
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform on (0,1], never zero (safe for logs)
    double uniform_pos() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n), n >= 1, via rejection-free 128-bit multiply
    uint64_t below(uint64_t n) {
        return uint64_t((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal();                 // Box-Muller, spare cached
    double gamma(double shape);      // Marsaglia-Tsang, unit scale
    double chi_squared(double df) { return 2.0 * gamma(0.5 * df); }
    double student_t(double df);
    // symmetric density ~ exp(-|t|^beta); psi_beta Orlicz tails
    double exp_power(double beta);

  private:
    uint64_t key_;
    uint64_t ctr_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ermtree
