#pragma once

#include "giks/diffnet/tensor.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace giks::gp {

enum class KernelKind { Cosine, DotProduct };

std::string to_string(KernelKind kind);
// Accepts "cosine" and "dot" / "dot-product"; ConfigError otherwise.
KernelKind parse_kernel(const std::string& name);

struct GPConfig {
    KernelKind kernel = KernelKind::Cosine;
    double sigma2 = 1.0;
    double eps_gp = 0.1;
    std::size_t max_neighbors = 200;

    void validate() const;
};

struct GPPosterior {
    double mean = 0.0;
    double variance = 0.0;
    std::size_t neighbor_count = 0;
};

// Norms below this make the cosine kernel 0.
inline constexpr double kZeroNorm = 1e-12;

double kernel_value(KernelKind kind, std::span<const double> a, std::span<const double> b);

/// Indices j with |t_cf − t_j| ≤ eps_gp, capped at the max_neighbors closest
/// treatments (ties go to the lower index). Returned in ascending index order.
std::vector<std::size_t> select_neighbors(std::span<const double> treatments, double t_cf,
                                          double eps_gp, std::size_t max_neighbors);

/// Posterior mean k*ᵀ(σ²I + K)⁻¹y and variance k(q,q) − k*ᵀ(σ²I + K)⁻¹k* given
/// precomputed kernel values. The variance is clamped at 0.
GPPosterior posterior_from_kernels(double k_qq, const Eigen::VectorXd& k_star,
                                   const Eigen::MatrixXd& gram, const Eigen::VectorXd& y,
                                   double sigma2);

// neighbor_embeds is m×d_e. Throws NoNeighborsError when m == 0.
GPPosterior gp_posterior(std::span<const double> query_embed,
                         const diffnet::Tensor2& neighbor_embeds,
                         std::span<const double> neighbor_y, const GPConfig& config);

/// softmax(−variance), with max-subtraction.
std::vector<double> ks_weights(std::span<const double> variances);

/// Snapshot of training embeddings, treatments and outcomes with a
/// precomputed Gram matrix, used to answer many posterior queries whose query
/// point is itself a training row.
class GpSmoother {
public:
    GpSmoother(const diffnet::Tensor2& embeddings, std::span<const double> treatments,
               std::span<const double> outcomes, GPConfig config);

    // Posterior for training row `row` at treatment t_cf; nullopt when no
    // training treatment lies within eps_gp of t_cf.
    std::optional<GPPosterior> query_row(std::size_t row, double t_cf) const;

    // Posterior for an arbitrary embedding at t_cf.
    std::optional<GPPosterior> query(std::span<const double> embedding, double t_cf) const;

    std::size_t size() const noexcept { return treatments_.size(); }
    const GPConfig& config() const noexcept { return config_; }

private:
    Eigen::VectorXd kernel_row(std::span<const double> embedding) const;
    GPPosterior solve(double k_qq, const Eigen::VectorXd& k_all,
                      const std::vector<std::size_t>& neighbors) const;

    GPConfig config_;
    // Rows normalized to unit length under the cosine kernel (zero rows stay 0).
    Eigen::MatrixXd features_;
    Eigen::MatrixXd gram_;
    std::vector<double> treatments_;
    std::vector<double> outcomes_;
};

} // namespace giks::gp
