#include "giks/gp/gp.hpp"

#include "giks/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace giks::gp {

std::string to_string(KernelKind kind) {
    return kind == KernelKind::Cosine ? "cosine" : "dot";
}

KernelKind parse_kernel(const std::string& name) {
    if (name == "cosine") return KernelKind::Cosine;
    if (name == "dot" || name == "dot-product") return KernelKind::DotProduct;
    throw ConfigError("unknown kernel '" + name + "'");
}

void GPConfig::validate() const {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ConfigError("sigma2 must be > 0");
    if (!(eps_gp > 0.0 && eps_gp <= 1.0)) throw ConfigError("eps_gp must be in (0, 1]");
    if (max_neighbors == 0) throw ConfigError("max_neighbors must be >= 1");
}

double kernel_value(KernelKind kind, std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("kernel arguments differ in length");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (kind == KernelKind::DotProduct) return dot;
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < kZeroNorm || nb < kZeroNorm) return 0.0;
    return dot / (na * nb);
}

std::vector<std::size_t> select_neighbors(std::span<const double> treatments, double t_cf,
                                          double eps_gp, std::size_t max_neighbors) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < treatments.size(); ++j)
        if (std::abs(t_cf - treatments[j]) <= eps_gp) out.push_back(j);
    if (out.size() > max_neighbors) {
        std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(t_cf - treatments[a]) < std::abs(t_cf - treatments[b]);
        });
        out.resize(max_neighbors);
        std::sort(out.begin(), out.end());
    }
    return out;
}

GPPosterior posterior_from_kernels(double k_qq, const Eigen::VectorXd& k_star,
                                   const Eigen::MatrixXd& gram, const Eigen::VectorXd& y,
                                   double sigma2) {
    const Eigen::Index m = k_star.size();
    if (m == 0) throw NoNeighborsError("GP posterior needs at least one neighbor");
    if (gram.rows() != m || gram.cols() != m || y.size() != m) {
        throw DimensionError("GP posterior inputs have inconsistent sizes");
    }
    Eigen::MatrixXd system = gram;
    system.diagonal().array() += sigma2;

    Eigen::LLT<Eigen::MatrixXd> llt(system);
    double jitter = 1e-8;
    for (int retry = 0; llt.info() != Eigen::Success; ++retry) {
        if (retry == 3) throw NumericalError("GP kernel matrix is not positive definite");
        system.diagonal().array() += jitter;
        llt.compute(system);
        jitter *= 10.0;
    }
    const Eigen::VectorXd v = llt.matrixL().solve(k_star);
    const Eigen::VectorXd w = llt.matrixL().solve(y);
    GPPosterior post;
    post.mean = v.dot(w);
    post.variance = std::max(0.0, k_qq - v.squaredNorm());
    post.neighbor_count = static_cast<std::size_t>(m);
    if (!std::isfinite(post.mean) || !std::isfinite(post.variance)) {
        throw NumericalError("GP posterior is not finite");
    }
    return post;
}

GPPosterior gp_posterior(std::span<const double> query_embed,
                         const diffnet::Tensor2& neighbor_embeds,
                         std::span<const double> neighbor_y, const GPConfig& config) {
    const std::size_t m = neighbor_embeds.rows();
    if (m == 0) throw NoNeighborsError("GP posterior needs at least one neighbor");
    if (neighbor_y.size() != m) throw DimensionError("neighbor outcome count mismatch");
    if (neighbor_embeds.cols() != query_embed.size()) {
        throw DimensionError("query and neighbor embeddings differ in width");
    }
    Eigen::VectorXd k_star(m);
    Eigen::MatrixXd gram(m, m);
    Eigen::VectorXd y(m);
    for (std::size_t i = 0; i < m; ++i) {
        k_star(i) = kernel_value(config.kernel, query_embed, neighbor_embeds.row_span(i));
        y(i) = neighbor_y[i];
        for (std::size_t j = 0; j <= i; ++j) {
            const double k =
                kernel_value(config.kernel, neighbor_embeds.row_span(i), neighbor_embeds.row_span(j));
            gram(i, j) = k;
            gram(j, i) = k;
        }
    }
    const double k_qq = kernel_value(config.kernel, query_embed, query_embed);
    return posterior_from_kernels(k_qq, k_star, gram, y, config.sigma2);
}

std::vector<double> ks_weights(std::span<const double> variances) {
    if (variances.empty()) return {};
    const double lowest = *std::min_element(variances.begin(), variances.end());
    std::vector<double> w(variances.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = std::exp(-(variances[i] - lowest));
        total += w[i];
    }
    for (double& v : w) v /= total;
    return w;
}

// ---------------------------------------------------------------------------

GpSmoother::GpSmoother(const diffnet::Tensor2& embeddings, std::span<const double> treatments,
                       std::span<const double> outcomes, GPConfig config)
    : config_(config),
      treatments_(treatments.begin(), treatments.end()),
      outcomes_(outcomes.begin(), outcomes.end()) {
    config_.validate();
    const std::size_t n = embeddings.rows();
    if (treatments.size() != n || outcomes.size() != n) {
        throw DimensionError("GP snapshot sizes do not match");
    }
    features_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(embeddings.cols()));
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = embeddings.row_span(i);
        double scale = 1.0;
        if (config_.kernel == KernelKind::Cosine) {
            double norm = 0.0;
            for (double v : row) norm += v * v;
            norm = std::sqrt(norm);
            scale = norm < kZeroNorm ? 0.0 : 1.0 / norm;
        }
        for (std::size_t j = 0; j < row.size(); ++j) features_(i, j) = row[j] * scale;
    }
    gram_ = features_ * features_.transpose();
}

Eigen::VectorXd GpSmoother::kernel_row(std::span<const double> embedding) const {
    if (embedding.size() != static_cast<std::size_t>(features_.cols())) {
        throw DimensionError("query embedding has the wrong width");
    }
    Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(embedding.data(), features_.cols());
    if (config_.kernel == KernelKind::Cosine) {
        const double norm = q.norm();
        q = norm < kZeroNorm ? Eigen::VectorXd::Zero(q.size()) : Eigen::VectorXd(q / norm);
    }
    return features_ * q;
}

GPPosterior GpSmoother::solve(double k_qq, const Eigen::VectorXd& k_all,
                              const std::vector<std::size_t>& neighbors) const {
    const auto m = static_cast<Eigen::Index>(neighbors.size());
    Eigen::VectorXd k_star(m);
    Eigen::VectorXd y(m);
    Eigen::MatrixXd gram(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        const auto i = static_cast<Eigen::Index>(neighbors[a]);
        k_star(a) = k_all(i);
        y(a) = outcomes_[neighbors[a]];
        for (Eigen::Index b = 0; b < m; ++b) gram(a, b) = gram_(i, static_cast<Eigen::Index>(neighbors[b]));
    }
    return posterior_from_kernels(k_qq, k_star, gram, y, config_.sigma2);
}

std::optional<GPPosterior> GpSmoother::query_row(std::size_t row, double t_cf) const {
    if (row >= treatments_.size()) throw DimensionError("GP query row out of range");
    const auto neighbors = select_neighbors(treatments_, t_cf, config_.eps_gp, config_.max_neighbors);
    if (neighbors.empty()) return std::nullopt;
    const auto r = static_cast<Eigen::Index>(row);
    return solve(gram_(r, r), gram_.col(r), neighbors);
}

std::optional<GPPosterior> GpSmoother::query(std::span<const double> embedding,
                                             double t_cf) const {
    const auto neighbors = select_neighbors(treatments_, t_cf, config_.eps_gp, config_.max_neighbors);
    if (neighbors.empty()) return std::nullopt;
    return solve(kernel_value(config_.kernel, embedding, embedding), kernel_row(embedding),
                 neighbors);
}

} // namespace giks::gp
