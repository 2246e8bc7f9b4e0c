#pragma once

#include <vector>

#include "hoig/core/errors.hpp"

namespace hoig {

// The straight line from the baseline to the input,
//   gamma(x, t) = t * x + (1 - t) * baseline,
// evaluated in exactly this algebraic form.  Nesting two path evaluations
// composes the parameters: gamma(gamma(x, s), t) = gamma(x, s*t), which is
// what lets stacked attribution operators share a single parameter grid.
class StraightLinePath {
public:
    StraightLinePath(std::vector<double> input, std::vector<double> baseline)
        : input_(std::move(input)), baseline_(std::move(baseline)) {
        if (input_.size() != baseline_.size())
            throw DimensionMismatch("path input and baseline lengths differ");
        if (input_.empty()) throw DimensionMismatch("path needs at least one coordinate");
    }

    int dim() const { return static_cast<int>(input_.size()); }
    const std::vector<double>& input() const { return input_; }
    const std::vector<double>& baseline() const { return baseline_; }

    void at(double t, std::vector<double>& out) const { at_from(input_, t, out); }

    std::vector<double> at(double t) const {
        std::vector<double> out(input_.size());
        at(t, out);
        return out;
    }

    // Same map anchored at an arbitrary point z (used by nested operators,
    // which walk from z toward the shared baseline).
    void at_from(const std::vector<double>& z, double t, std::vector<double>& out) const {
        if (z.size() != baseline_.size())
            throw DimensionMismatch("path evaluation point has wrong length");
        out.resize(z.size());
        for (std::size_t i = 0; i < z.size(); ++i)
            out[i] = t * z[i] + (1.0 - t) * baseline_[i];
    }

    std::vector<double> displacement() const {
        std::vector<double> d(input_.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = input_[i] - baseline_[i];
        return d;
    }

    bool degenerate() const { return input_ == baseline_; }

private:
    std::vector<double> input_;
    std::vector<double> baseline_;
};

} // namespace hoig
