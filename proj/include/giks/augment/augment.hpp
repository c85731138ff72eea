#pragma once

#include "giks/diffnet/optimizer.hpp"
#include "giks/diffnet/tape.hpp"
#include "giks/diffnet/tensor.hpp"
#include "giks/gp/gp.hpp"
#include "giks/model/vcnet.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace giks::augment {

enum class SamplerKind { Uniform, Marginal, InversePropensity };

// Names: uniform, marginal, inverse-propensity.
std::string to_string(SamplerKind kind);
SamplerKind parse_sampler(const std::string& name);

inline constexpr std::size_t kPropensityBins = 10;
inline constexpr double kPropensityFloor = 0.01;

// min(floor(10 t), 9)
std::size_t treatment_bin(double t);

struct PropensityConfig {
    std::size_t hidden = 50;
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    double learning_rate = 1e-2;
    std::uint64_t seed = 0;
};

/// One-hidden-layer ReLU network with a softmax over the treatment bins.
class PropensityModel {
public:
    PropensityModel(std::size_t input_dim, std::size_t hidden, std::mt19937_64& rng);

    // n × kPropensityBins; rows sum to 1.
    diffnet::Tensor2 predict_proba(const diffnet::Tensor2& x) const;
    diffnet::NodeId record_logits(diffnet::Tape& tape, const diffnet::Tensor2& x);
    std::vector<diffnet::ParamBlock*> params();

private:
    diffnet::ParamBlock w1_;
    diffnet::ParamBlock b1_;
    diffnet::ParamBlock w2_;
    diffnet::ParamBlock b2_;
};

// Cross-entropy training on bin labels with AdamW mini-batches. n ≥ 10.
PropensityModel fit_propensity(const diffnet::Tensor2& x, std::span<const double> t,
                               const PropensityConfig& config);

/// Bin sampling probabilities ∝ 1 / max(π(b|x), 0.01).
std::vector<double> inverse_propensity_bin_probs(std::span<const double> bin_probs);

/// Draws one counterfactual treatment per training instance.
class TreatmentSampler {
public:
    // The inverse-propensity kind fits its classifier here.
    TreatmentSampler(SamplerKind kind, const diffnet::Tensor2& x_train,
                     std::span<const double> t_train, const PropensityConfig& propensity = {});

    std::vector<double> sample(std::mt19937_64& rng) const;
    SamplerKind kind() const noexcept { return kind_; }
    // Per-instance bin probabilities (inverse-propensity only; empty otherwise).
    const diffnet::Tensor2& bin_probabilities() const noexcept { return bin_probs_; }

private:
    SamplerKind kind_;
    std::vector<double> t_train_;
    diffnet::Tensor2 bin_probs_;
};

// Convenience form; the propensity classifier (if needed) is seeded from rng.
std::vector<double> sample_tcf(SamplerKind kind, const diffnet::Tensor2& x,
                               std::span<const double> t, std::mt19937_64& rng);

enum class Route { Near, Far };

// Near iff |t_cf − t| < delta; equality is Far.
Route route(double t, double t_cf, double delta);

// y − (t − t_cf)·∂η/∂t
double gi_pseudo_outcome(double y, double t, double t_cf, double dmu_dt);

/// One mini-batch of augmentation targets. Positions index into `indices`.
struct AugmentBatch {
    std::vector<std::size_t> indices;
    std::vector<double> t_cf;
    std::vector<Route> routes;

    std::vector<std::size_t> near;
    std::vector<double> near_targets;

    std::vector<std::size_t> far;
    std::vector<gp::GPPosterior> far_posteriors;
    std::vector<double> far_weights;
    // Far members dropped because no training treatment lay within eps_gp.
    std::size_t dropped_far = 0;
};

struct AugmentOptions {
    double delta = 0.05;
    bool use_gi = true;
    bool use_ks = true;
};

/// Routes a batch and computes frozen targets: GI pseudo-outcomes from the
/// current model's ∂η/∂t at the observed treatment, KS targets from `smoother`
/// (a snapshot of current training embeddings). Nothing here is recorded for
/// gradients. `smoother` may be null when use_ks is false.
AugmentBatch prepare_batch(const model::ModelState& model, const diffnet::Tensor2& x_train,
                           std::span<const double> t_train, std::span<const double> y_train,
                           std::span<const std::size_t> batch, std::span<const double> t_cf_all,
                           const AugmentOptions& options, const gp::GpSmoother* smoother);

// Mean squared error of predictions at t_cf against the GI targets; nullopt
// when the batch has no Near member.
std::optional<diffnet::NodeId> record_gi_loss(diffnet::Tape& tape, model::ModelState& model,
                                              const diffnet::Tensor2& x_train,
                                              const AugmentBatch& batch);
// Σ w_i (prediction − posterior mean)²; nullopt when no Far member survived.
std::optional<diffnet::NodeId> record_ks_loss(diffnet::Tape& tape, model::ModelState& model,
                                              const diffnet::Tensor2& x_train,
                                              const AugmentBatch& batch);

double gi_loss_value(const model::ModelState& model, const diffnet::Tensor2& x_train,
                     const AugmentBatch& batch);
double ks_loss_value(const model::ModelState& model, const diffnet::Tensor2& x_train,
                     const AugmentBatch& batch);

/// One row of the augmented-pairs export.
struct AugmentedPair {
    enum class Source { Observed, Gi, Ks };

    std::size_t instance_index = 0;
    Source source = Source::Observed;
    double t_value = 0.0;
    double pseudo_y = 0.0;
    // Set for KS rows only.
    std::optional<double> variance;
};

std::string to_string(AugmentedPair::Source source);

// Pairs produced by a batch: GI rows from `near`, KS rows from `far`.
// Observed rows are not included.
std::vector<AugmentedPair> batch_pairs(const AugmentBatch& batch);

// Header: instance_index,t_source,t_value,pseudo_y,variance
void write_augmented_csv(const std::string& path, std::span<const AugmentedPair> pairs);
std::vector<AugmentedPair> read_augmented_csv(const std::string& path);

} // namespace giks::augment
