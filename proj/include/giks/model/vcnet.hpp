#pragma once

#include "giks/diffnet/optimizer.hpp"
#include "giks/diffnet/tape.hpp"
#include "giks/diffnet/tensor.hpp"
#include "giks/dose_response.hpp"
#include "giks/model/spline.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace giks::model {

struct EncoderConfig {
    std::size_t input_dim = 1;
    // ReLU layers before the embedding layer; empty means a single layer.
    std::vector<std::size_t> hidden_dims{50, 50};
    std::size_t embed_dim = 50;

    void validate() const;
    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct ModelConfig {
    EncoderConfig encoder;
    // Hidden widths of the varying-coefficient head; the last layer outputs 1.
    std::vector<std::size_t> head_hidden{50};
    SplineBasis basis;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Maps network outputs back to outcome units: y = mean + scale · η.
struct OutcomeScale {
    double mean = 0.0;
    double scale = 1.0;
};

/// Covariate encoder Φ: a stack of affine + ReLU layers.
class Encoder {
public:
    Encoder() = default;
    Encoder(const EncoderConfig& config, std::mt19937_64& rng);

    diffnet::Tensor2 forward(const diffnet::Tensor2& x) const;
    diffnet::NodeId record(diffnet::Tape& tape, diffnet::NodeId x);

    std::size_t input_dim() const;
    std::size_t output_dim() const;

    // Alternating weight (in×out) and bias (1×out) blocks, one pair per layer.
    std::vector<diffnet::ParamBlock>& blocks() noexcept { return blocks_; }
    const std::vector<diffnet::ParamBlock>& blocks() const noexcept { return blocks_; }

private:
    std::vector<diffnet::ParamBlock> blocks_;
};

/// Prediction head η(embedding, t). Implementations also supply the analytic
/// derivative with respect to t.
class TreatmentHead {
public:
    virtual ~TreatmentHead() = default;

    virtual std::unique_ptr<TreatmentHead> clone() const = 0;
    virtual std::string kind() const = 0;

    virtual diffnet::NodeId record(diffnet::Tape& tape, diffnet::NodeId embedding,
                                   std::span<const double> t) = 0;
    virtual std::vector<double> predict(const diffnet::Tensor2& embedding,
                                        std::span<const double> t) const = 0;
    virtual std::vector<double> predict_dt(const diffnet::Tensor2& embedding,
                                           std::span<const double> t) const = 0;
    virtual diffnet::Tensor2 predict_grid(const diffnet::Tensor2& embedding,
                                          std::span<const double> grid) const = 0;

    virtual std::vector<diffnet::ParamBlock*> params() = 0;
    virtual std::vector<const diffnet::ParamBlock*> params() const = 0;
};

/// Varying-coefficient head: layer l uses weights W_l(t) = Σ_k b_k(t)·bank_l[k],
/// where b(t) is the spline basis. Banks are stored as ((in+1)·dim) × out with
/// row index a·dim + k; row a = in holds the bias coefficients.
class VcHead final : public TreatmentHead {
public:
    VcHead(std::size_t embed_dim, const std::vector<std::size_t>& hidden, SplineBasis basis,
           std::mt19937_64& rng);

    std::unique_ptr<TreatmentHead> clone() const override;
    std::string kind() const override { return "varying-coefficient"; }

    diffnet::NodeId record(diffnet::Tape& tape, diffnet::NodeId embedding,
                           std::span<const double> t) override;
    std::vector<double> predict(const diffnet::Tensor2& embedding,
                                std::span<const double> t) const override;
    std::vector<double> predict_dt(const diffnet::Tensor2& embedding,
                                   std::span<const double> t) const override;
    diffnet::Tensor2 predict_grid(const diffnet::Tensor2& embedding,
                                  std::span<const double> grid) const override;

    std::vector<diffnet::ParamBlock*> params() override;
    std::vector<const diffnet::ParamBlock*> params() const override;

    const SplineBasis& basis() const noexcept { return basis_; }
    // (in, out) per layer, ending in out = 1.
    const std::vector<std::pair<std::size_t, std::size_t>>& layer_shapes() const noexcept {
        return shapes_;
    }
    std::vector<diffnet::ParamBlock>& banks() noexcept { return banks_; }
    const std::vector<diffnet::ParamBlock>& banks() const noexcept { return banks_; }

private:
    SplineBasis basis_;
    std::vector<std::pair<std::size_t, std::size_t>> shapes_;
    std::vector<diffnet::ParamBlock> banks_;
};

/// The dose-response network μ(x,t) = η(Φ(x), t). predict() returns the raw
/// network output; outcome_scale converts it to outcome units (see Estimator).
class ModelState {
public:
    explicit ModelState(ModelConfig config);
    ModelState(const ModelState& other);
    ModelState& operator=(const ModelState& other);
    ModelState(ModelState&&) noexcept = default;
    ModelState& operator=(ModelState&&) noexcept = default;
    ~ModelState() = default;

    const ModelConfig& config() const noexcept { return config_; }

    diffnet::Tensor2 encode(const diffnet::Tensor2& x) const;
    std::vector<double> predict(const diffnet::Tensor2& x, std::span<const double> t) const;
    std::vector<double> predict_dt(const diffnet::Tensor2& x, std::span<const double> t) const;
    diffnet::Tensor2 predict_grid(const diffnet::Tensor2& x, std::span<const double> grid) const;

    // Records the forward pass; the returned node is n×1.
    diffnet::NodeId record_predict(diffnet::Tape& tape, const diffnet::Tensor2& x,
                                   std::span<const double> t);

    std::vector<diffnet::ParamBlock*> params();
    std::vector<const diffnet::ParamBlock*> params() const;
    std::size_t parameter_count() const;

    Encoder& encoder() noexcept { return encoder_; }
    const Encoder& encoder() const noexcept { return encoder_; }
    TreatmentHead& head() noexcept { return *head_; }
    const TreatmentHead& head() const noexcept { return *head_; }

    OutcomeScale outcome_scale;

private:
    void check_inputs(const diffnet::Tensor2& x, std::span<const double> t) const;

    ModelConfig config_;
    Encoder encoder_;
    std::unique_ptr<TreatmentHead> head_;
};

/// Outcome-unit view of a model for metrics: mean + scale · predict().
class Estimator final : public DoseResponse {
public:
    explicit Estimator(const ModelState& model) : model_(&model) {}

    std::vector<double> predict(const diffnet::Tensor2& x,
                                std::span<const double> t) const override;
    diffnet::Tensor2 predict_grid(const diffnet::Tensor2& x,
                                  std::span<const double> grid) const override;

private:
    const ModelState* model_;
};

} // namespace giks::model
