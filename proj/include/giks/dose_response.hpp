#pragma once

#include "giks/diffnet/tensor.hpp"

#include <functional>
#include <span>
#include <vector>

namespace giks {

/// Anything that maps (covariates, treatment) to a predicted outcome.
/// Metrics and diagnostics consume this interface.
class DoseResponse {
public:
    virtual ~DoseResponse() = default;

    // One prediction per row of x, row i evaluated at t[i].
    virtual std::vector<double> predict(const diffnet::Tensor2& x,
                                        std::span<const double> t) const = 0;

    // Result is rows(x) × grid.size(); entry (i, g) is the prediction for
    // row i at grid[g]. The default repeats predict() per grid point.
    virtual diffnet::Tensor2 predict_grid(const diffnet::Tensor2& x,
                                          std::span<const double> grid) const;
};

/// Adapts a plain function μ(x, t) to DoseResponse (fixtures, oracles).
class FunctionDoseResponse final : public DoseResponse {
public:
    using Fn = std::function<double(std::span<const double>, double)>;

    explicit FunctionDoseResponse(Fn fn) : fn_(std::move(fn)) {}

    std::vector<double> predict(const diffnet::Tensor2& x,
                                std::span<const double> t) const override;

private:
    Fn fn_;
};

} // namespace giks
