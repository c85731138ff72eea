#include "giks/dose_response.hpp"

#include "giks/errors.hpp"

namespace giks {

diffnet::Tensor2 DoseResponse::predict_grid(const diffnet::Tensor2& x,
                                            std::span<const double> grid) const {
    diffnet::Tensor2 out(x.rows(), grid.size());
    std::vector<double> t(x.rows());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::fill(t.begin(), t.end(), grid[g]);
        const auto col = predict(x, t);
        for (std::size_t i = 0; i < x.rows(); ++i) out(i, g) = col[i];
    }
    return out;
}

std::vector<double> FunctionDoseResponse::predict(const diffnet::Tensor2& x,
                                                  std::span<const double> t) const {
    if (t.size() != x.rows()) throw DimensionError("treatment count does not match rows");
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = fn_(x.row_span(i), t[i]);
    return out;
}

} // namespace giks
