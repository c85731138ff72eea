#include "giks/model/spline.hpp"

#include "giks/errors.hpp"

#include <cmath>
#include <string>

namespace giks::model {

namespace {

void check_t(double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DomainError("treatment " + std::to_string(t) + " outside [0,1]");
    }
}

void fill_eval(const SplineBasis& basis, double t, std::span<double> out) {
    double p = 1.0;
    for (int j = 0; j <= basis.degree; ++j) {
        out[static_cast<std::size_t>(j)] = p;
        p *= t;
    }
    const std::size_t off = static_cast<std::size_t>(basis.degree) + 1;
    for (std::size_t k = 0; k < basis.knots.size(); ++k) {
        const double z = t - basis.knots[k];
        out[off + k] = z > 0.0 ? std::pow(z, basis.degree) : 0.0;
    }
}

void fill_deriv(const SplineBasis& basis, double t, std::span<double> out) {
    out[0] = 0.0;
    double p = 1.0;
    for (int j = 1; j <= basis.degree; ++j) {
        out[static_cast<std::size_t>(j)] = j * p;
        p *= t;
    }
    const std::size_t off = static_cast<std::size_t>(basis.degree) + 1;
    for (std::size_t k = 0; k < basis.knots.size(); ++k) {
        const double z = t - basis.knots[k];
        out[off + k] = z > 0.0 ? basis.degree * std::pow(z, basis.degree - 1) : 0.0;
    }
}

} // namespace

void SplineBasis::validate() const {
    if (degree < 1) throw ConfigError("spline degree must be >= 1");
    for (std::size_t k = 0; k < knots.size(); ++k) {
        if (!(knots[k] > 0.0 && knots[k] < 1.0)) {
            throw ConfigError("spline knots must lie in (0,1)");
        }
        if (k > 0 && !(knots[k] > knots[k - 1])) {
            throw ConfigError("spline knots must be strictly increasing");
        }
    }
}

std::vector<double> spline_eval(const SplineBasis& basis, double t) {
    check_t(t);
    std::vector<double> out(basis.dim());
    fill_eval(basis, t, out);
    return out;
}

std::vector<double> spline_deriv(const SplineBasis& basis, double t) {
    check_t(t);
    std::vector<double> out(basis.dim());
    fill_deriv(basis, t, out);
    return out;
}

diffnet::Tensor2 spline_eval_rows(const SplineBasis& basis, std::span<const double> t) {
    diffnet::Tensor2 out(t.size(), basis.dim());
    for (std::size_t i = 0; i < t.size(); ++i) {
        check_t(t[i]);
        fill_eval(basis, t[i], out.row_span(i));
    }
    return out;
}

diffnet::Tensor2 spline_deriv_rows(const SplineBasis& basis, std::span<const double> t) {
    diffnet::Tensor2 out(t.size(), basis.dim());
    for (std::size_t i = 0; i < t.size(); ++i) {
        check_t(t[i]);
        fill_deriv(basis, t[i], out.row_span(i));
    }
    return out;
}

} // namespace giks::model
