#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace hoig {

enum class QuadratureRule {
    RightHand, // t_m = m/M, m = 1..M, uniform weights 1/M
    Trapezoid, // t_m = m/M, m = 0..M, end weights 1/(2M)
};

struct QuadratureConfig {
    int points_per_level = 100;
    QuadratureRule rule = QuadratureRule::RightHand;
};

// One quadrature level on [0,1].  Node values are m/M for both rules, so node
// products across levels stay exact integer ratios (the engine exploits this).
struct QuadratureNodes {
    std::vector<double> t;
    std::vector<double> w;
    // integer numerator of each node: t[k] = numer[k] / M
    std::vector<int> numer;
    int denom = 1;
};

inline QuadratureNodes make_nodes(const QuadratureConfig& cfg) {
    if (cfg.points_per_level < 1) throw std::invalid_argument("quadrature needs at least one point");
    const int M = cfg.points_per_level;
    QuadratureNodes q;
    q.denom = M;
    if (cfg.rule == QuadratureRule::RightHand) {
        q.t.reserve(static_cast<std::size_t>(M));
        for (int m = 1; m <= M; ++m) {
            q.t.push_back(static_cast<double>(m) / M);
            q.w.push_back(1.0 / M);
            q.numer.push_back(m);
        }
    } else {
        q.t.reserve(static_cast<std::size_t>(M) + 1);
        for (int m = 0; m <= M; ++m) {
            q.t.push_back(static_cast<double>(m) / M);
            q.w.push_back((m == 0 || m == M) ? 0.5 / M : 1.0 / M);
            q.numer.push_back(m);
        }
    }
    return q;
}

// Kahan-compensated accumulator.  Keeps completeness defects of constant
// integrands at machine epsilon independent of M, and makes summation-order
// determinism cheap to reason about.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double v) {
        const double y = v - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

} // namespace hoig
