#include "giks/model/vcnet.hpp"

#include "giks/errors.hpp"

#include <cmath>
#include <string>

namespace giks::model {

using diffnet::NodeId;
using diffnet::ParamBlock;
using diffnet::Tape;
using diffnet::Tensor2;

namespace {

Tensor2 uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in,
                     std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor2 out(rows, cols);
    for (double& v : out.values()) v = dist(rng);
    return out;
}

// z_i = Σ_{a,k} h̃_ia · basis_ik · bank[a·dim+k, :], with h̃ = [h, 1] when
// with_bias, else [h, 0].
Tensor2 contract(const Tensor2& h, const Tensor2& basis, const Tensor2& bank, bool with_bias) {
    const std::size_t in = h.cols();
    const std::size_t dim = basis.cols();
    Tensor2 z(h.rows(), (in + 1) * dim);
    for (std::size_t i = 0; i < h.rows(); ++i) {
        const auto hrow = h.row_span(i);
        const auto brow = basis.row_span(i);
        auto zrow = z.row_span(i);
        for (std::size_t a = 0; a <= in; ++a) {
            const double ha = a < in ? hrow[a] : (with_bias ? 1.0 : 0.0);
            for (std::size_t k = 0; k < dim; ++k) zrow[a * dim + k] = ha * brow[k];
        }
    }
    return diffnet::matmul(z, bank);
}

} // namespace

void EncoderConfig::validate() const {
    if (input_dim == 0 || embed_dim == 0) throw ConfigError("encoder dims must be >= 1");
    for (std::size_t h : hidden_dims)
        if (h == 0) throw ConfigError("encoder hidden dims must be >= 1");
}

void ModelConfig::validate() const {
    encoder.validate();
    for (std::size_t h : head_hidden)
        if (h == 0) throw ConfigError("head hidden dims must be >= 1");
    basis.validate();
}

// ---------------------------------------------------------------------------
// Encoder

Encoder::Encoder(const EncoderConfig& config, std::mt19937_64& rng) {
    config.validate();
    std::vector<std::size_t> widths{config.input_dim};
    widths.insert(widths.end(), config.hidden_dims.begin(), config.hidden_dims.end());
    widths.push_back(config.embed_dim);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l];
        const std::size_t out = widths[l + 1];
        blocks_.emplace_back("encoder." + std::to_string(l) + ".weight",
                             uniform_init(in, out, in, rng));
        blocks_.emplace_back("encoder." + std::to_string(l) + ".bias",
                             uniform_init(1, out, in, rng));
    }
}

std::size_t Encoder::input_dim() const { return blocks_.empty() ? 0 : blocks_[0].value.rows(); }

std::size_t Encoder::output_dim() const {
    return blocks_.empty() ? 0 : blocks_.back().value.cols();
}

Tensor2 Encoder::forward(const Tensor2& x) const {
    Tensor2 h = x;
    for (std::size_t l = 0; l + 1 < blocks_.size(); l += 2) {
        const Tensor2& w = blocks_[l].value;
        const Tensor2& b = blocks_[l + 1].value;
        if (h.cols() != w.rows()) {
            throw DimensionError("encoder input has " + std::to_string(h.cols()) +
                                 " columns, expected " + std::to_string(w.rows()));
        }
        Tensor2 z = diffnet::matmul(h, w);
        for (std::size_t i = 0; i < z.rows(); ++i) {
            auto row = z.row_span(i);
            for (std::size_t j = 0; j < row.size(); ++j) {
                const double v = row[j] + b(0, j);
                row[j] = v > 0.0 ? v : 0.0;
            }
        }
        h = std::move(z);
    }
    return h;
}

NodeId Encoder::record(Tape& tape, NodeId x) {
    NodeId h = x;
    for (std::size_t l = 0; l + 1 < blocks_.size(); l += 2) {
        const NodeId w = tape.param(blocks_[l]);
        const NodeId b = tape.param(blocks_[l + 1]);
        h = tape.relu(tape.affine(h, w, b));
    }
    return h;
}

// ---------------------------------------------------------------------------
// VcHead

VcHead::VcHead(std::size_t embed_dim, const std::vector<std::size_t>& hidden, SplineBasis basis,
               std::mt19937_64& rng)
    : basis_(std::move(basis)) {
    basis_.validate();
    std::vector<std::size_t> widths{embed_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(1);
    const std::size_t dim = basis_.dim();
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l];
        const std::size_t out = widths[l + 1];
        shapes_.emplace_back(in, out);
        banks_.emplace_back("head." + std::to_string(l) + ".bank",
                            uniform_init((in + 1) * dim, out, in, rng));
    }
}

std::unique_ptr<TreatmentHead> VcHead::clone() const { return std::make_unique<VcHead>(*this); }

NodeId VcHead::record(Tape& tape, NodeId embedding, std::span<const double> t) {
    const Tensor2 basis = spline_eval_rows(basis_, t);
    NodeId h = embedding;
    for (std::size_t l = 0; l < banks_.size(); ++l) {
        const NodeId bank = tape.param(banks_[l]);
        h = tape.spline_contract(h, bank, basis);
        if (l + 1 < banks_.size()) h = tape.relu(h);
    }
    return h;
}

std::vector<double> VcHead::predict(const Tensor2& embedding, std::span<const double> t) const {
    const Tensor2 basis = spline_eval_rows(basis_, t);
    Tensor2 h = embedding;
    for (std::size_t l = 0; l < banks_.size(); ++l) {
        h = contract(h, basis, banks_[l].value, true);
        if (l + 1 < banks_.size())
            for (double& v : h.values()) v = v > 0.0 ? v : 0.0;
    }
    return h.storage();
}

// Forward-mode tangent propagation in t: layer output z(t) depends on t both
// through the basis (dbasis) and through its input h(t).
std::vector<double> VcHead::predict_dt(const Tensor2& embedding,
                                       std::span<const double> t) const {
    const Tensor2 basis = spline_eval_rows(basis_, t);
    const Tensor2 dbasis = spline_deriv_rows(basis_, t);
    Tensor2 h = embedding;
    Tensor2 dh;
    for (std::size_t l = 0; l < banks_.size(); ++l) {
        const Tensor2& bank = banks_[l].value;
        Tensor2 z = contract(h, basis, bank, true);
        Tensor2 dz = contract(h, dbasis, bank, true);
        if (!dh.empty()) {
            const Tensor2 through_input = contract(dh, basis, bank, false);
            auto d = dz.values();
            const auto s = through_input.values();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
        }
        if (l + 1 < banks_.size()) {
            auto zv = z.values();
            auto dzv = dz.values();
            for (std::size_t i = 0; i < zv.size(); ++i) {
                if (zv[i] > 0.0) continue;
                zv[i] = 0.0;
                dzv[i] = 0.0;
            }
        }
        h = std::move(z);
        dh = std::move(dz);
    }
    return dh.storage();
}

Tensor2 VcHead::predict_grid(const Tensor2& embedding, std::span<const double> grid) const {
    const Tensor2 grid_basis = spline_eval_rows(basis_, grid);
    const std::size_t dim = basis_.dim();
    const std::size_t g_count = grid.size();
    Tensor2 out(embedding.rows(), g_count);

    const Tensor2& first = banks_.front().value;
    const std::size_t in0 = shapes_.front().first;
    const std::size_t out0 = shapes_.front().second;
    Tensor2 coeff(dim, out0);
    for (std::size_t i = 0; i < embedding.rows(); ++i) {
        // First layer: W(t)ᵀẽ = Σ_k b_k(t) · coeff_k with coeff_k = Σ_a ẽ_a bank[a·dim+k].
        coeff.fill(0.0);
        const auto e = embedding.row_span(i);
        for (std::size_t a = 0; a <= in0; ++a) {
            const double ea = a < in0 ? e[a] : 1.0;
            if (ea == 0.0) continue;
            for (std::size_t k = 0; k < dim; ++k) {
                const auto brow = first.row_span(a * dim + k);
                auto crow = coeff.row_span(k);
                for (std::size_t c = 0; c < out0; ++c) crow[c] += ea * brow[c];
            }
        }
        Tensor2 h = diffnet::matmul(grid_basis, coeff);
        for (std::size_t l = 1; l < banks_.size(); ++l) {
            for (double& v : h.values()) v = v > 0.0 ? v : 0.0;
            h = contract(h, grid_basis, banks_[l].value, true);
        }
        for (std::size_t g = 0; g < g_count; ++g) out(i, g) = h(g, 0);
    }
    return out;
}

std::vector<ParamBlock*> VcHead::params() {
    std::vector<ParamBlock*> out;
    for (auto& b : banks_) out.push_back(&b);
    return out;
}

std::vector<const ParamBlock*> VcHead::params() const {
    std::vector<const ParamBlock*> out;
    for (const auto& b : banks_) out.push_back(&b);
    return out;
}

// ---------------------------------------------------------------------------
// ModelState

ModelState::ModelState(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    std::mt19937_64 rng(config_.seed);
    encoder_ = Encoder(config_.encoder, rng);
    head_ = std::make_unique<VcHead>(config_.encoder.embed_dim, config_.head_hidden,
                                     config_.basis, rng);
}

ModelState::ModelState(const ModelState& other)
    : outcome_scale(other.outcome_scale),
      config_(other.config_),
      encoder_(other.encoder_),
      head_(other.head_->clone()) {}

ModelState& ModelState::operator=(const ModelState& other) {
    if (this != &other) {
        outcome_scale = other.outcome_scale;
        config_ = other.config_;
        encoder_ = other.encoder_;
        head_ = other.head_->clone();
    }
    return *this;
}

void ModelState::check_inputs(const Tensor2& x, std::span<const double> t) const {
    if (x.cols() != config_.encoder.input_dim) {
        throw DimensionError("covariates have " + std::to_string(x.cols()) +
                             " columns, model expects " +
                             std::to_string(config_.encoder.input_dim));
    }
    if (t.size() != x.rows()) {
        throw DimensionError("treatment count " + std::to_string(t.size()) +
                             " does not match " + std::to_string(x.rows()) + " rows");
    }
}

Tensor2 ModelState::encode(const Tensor2& x) const {
    if (x.cols() != config_.encoder.input_dim) {
        throw DimensionError("covariates have " + std::to_string(x.cols()) +
                             " columns, model expects " +
                             std::to_string(config_.encoder.input_dim));
    }
    return encoder_.forward(x);
}

std::vector<double> ModelState::predict(const Tensor2& x, std::span<const double> t) const {
    check_inputs(x, t);
    return head_->predict(encoder_.forward(x), t);
}

std::vector<double> ModelState::predict_dt(const Tensor2& x, std::span<const double> t) const {
    check_inputs(x, t);
    return head_->predict_dt(encoder_.forward(x), t);
}

Tensor2 ModelState::predict_grid(const Tensor2& x, std::span<const double> grid) const {
    return head_->predict_grid(encode(x), grid);
}

NodeId ModelState::record_predict(Tape& tape, const Tensor2& x, std::span<const double> t) {
    check_inputs(x, t);
    const NodeId input = tape.constant(x);
    const NodeId embedding = encoder_.record(tape, input);
    return head_->record(tape, embedding, t);
}

std::vector<ParamBlock*> ModelState::params() {
    std::vector<ParamBlock*> out;
    for (auto& b : encoder_.blocks()) out.push_back(&b);
    for (ParamBlock* b : head_->params()) out.push_back(b);
    return out;
}

std::vector<const ParamBlock*> ModelState::params() const {
    std::vector<const ParamBlock*> out;
    for (const auto& b : encoder_.blocks()) out.push_back(&b);
    for (const ParamBlock* b : std::as_const(*head_).params()) out.push_back(b);
    return out;
}

std::size_t ModelState::parameter_count() const {
    std::size_t n = 0;
    for (const ParamBlock* b : params()) n += b->value.size();
    return n;
}

// ---------------------------------------------------------------------------
// Estimator

std::vector<double> Estimator::predict(const Tensor2& x, std::span<const double> t) const {
    auto out = model_->predict(x, t);
    const auto s = model_->outcome_scale;
    for (double& v : out) v = s.mean + s.scale * v;
    return out;
}

Tensor2 Estimator::predict_grid(const Tensor2& x, std::span<const double> grid) const {
    Tensor2 out = model_->predict_grid(x, grid);
    const auto s = model_->outcome_scale;
    for (double& v : out.values()) v = s.mean + s.scale * v;
    return out;
}

} // namespace giks::model
