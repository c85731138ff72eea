#pragma once

#include "giks/diffnet/tensor.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace giks::model {

/// Truncated power basis [1, t, …, t^p, (t−k₁)₊^p, …] on [0,1].
struct SplineBasis {
    int degree = 2;
    std::vector<double> knots{1.0 / 3.0, 2.0 / 3.0};

    std::size_t dim() const noexcept {
        return static_cast<std::size_t>(degree) + 1 + knots.size();
    }
    // Knots strictly increasing inside (0,1), degree >= 1.
    void validate() const;

    friend bool operator==(const SplineBasis&, const SplineBasis&) = default;
};

std::vector<double> spline_eval(const SplineBasis& basis, double t);
std::vector<double> spline_deriv(const SplineBasis& basis, double t);

// Row i holds spline_eval(t[i]) (resp. spline_deriv).
diffnet::Tensor2 spline_eval_rows(const SplineBasis& basis, std::span<const double> t);
diffnet::Tensor2 spline_deriv_rows(const SplineBasis& basis, std::span<const double> t);

} // namespace giks::model
