#pragma once

#include "giks/augment/augment.hpp"
#include "giks/data/dataset.hpp"
#include "giks/data/generators.hpp"
#include "giks/errors.hpp"
#include "giks/gp/gp.hpp"
#include "giks/model/vcnet.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace giks::trainer {

struct GiksConfig {
    double learning_rate = 1e-3;
    double weight_decay = 0.01;
    double lambda_gi = 1e-2;
    double lambda_ks = 1e-2;
    std::size_t batch_size = 128;
    std::size_t pretrain_epochs = 100;
    std::size_t epochs = 400;
    std::size_t epoch_gi_start = 0;
    std::size_t epoch_gp_start = 0;
    augment::SamplerKind sampler = augment::SamplerKind::Uniform;
    std::vector<double> delta_grid{0.025, 0.05, 0.075, 0.1};
    std::vector<double> sigma2_grid{0.1, 0.5, 1.0};
    std::vector<double> eps_gp_grid{0.05, 0.1, 0.2};
    std::size_t patience = 30;
    std::uint64_t seed = 0;

    gp::KernelKind kernel = gp::KernelKind::Cosine;
    std::size_t max_neighbors = 200;

    // Network shape; the input width comes from the data.
    std::vector<std::size_t> encoder_hidden{50, 50};
    std::size_t embed_dim = 50;
    std::vector<std::size_t> head_hidden{50};

    // Used by callers that split one dataset into train and validation.
    double val_fraction = 0.3;

    void validate() const;
    model::ModelConfig model_config(std::size_t input_dim) const;

    friend bool operator==(const GiksConfig&, const GiksConfig&) = default;
};

// Per-dataset learning rate and loss weights; everything else stays default.
GiksConfig preset(data::GeneratorKind kind);

nlohmann::json to_json(const GiksConfig& config);
// Starts from `base` and overrides the keys present; unknown keys raise ConfigError.
GiksConfig giks_config_from_json(const nlohmann::json& doc, GiksConfig base = {});

// "factual", "gi", "ks" or "giks" by which loss weights are non-zero.
std::string run_label(const GiksConfig& config);

struct GiGpParams {
    double delta = 0.0;
    double sigma2 = 0.0;
    double eps_gp = 0.0;
    // Validation scores per grid cell; +inf marks an empty cell.
    std::vector<double> delta_scores;
    // Row-major over (sigma2_grid, eps_gp_grid).
    std::vector<double> gp_scores;
};

struct EpochRecord {
    std::size_t epoch = 0;
    // Means over the epoch's mini-batches, in standardized outcome units.
    double factual_loss = 0.0;
    double gi_loss = 0.0;
    double ks_loss = 0.0;
    double total_loss = 0.0;
    // Validation factual RMSE in outcome units.
    double val_rmse = 0.0;
    std::size_t near_count = 0;
    std::size_t far_count = 0;
    std::size_t dropped_far = 0;
};

struct TrainReport {
    std::string label;
    GiksConfig config;
    std::size_t train_size = 0;
    std::size_t val_size = 0;
    model::OutcomeScale outcome_scale;
    std::vector<double> pretrain_losses;
    std::optional<GiGpParams> gigp;
    // Entry 0 is the pretrained model before any combined-objective epoch.
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_val_rmse = std::numeric_limits<double>::infinity();
    bool stopped_early = false;
    std::size_t dropped_total = 0;
    // Epochs in which augmentation was active but no batch had a Near or Far member.
    std::size_t empty_augment_epochs = 0;
    std::string status = "ok";
    std::string abort_reason;
    double wall_clock_seconds = 0.0;
};

// Wall-clock time goes under "timing" so the rest is reproducible byte for byte.
nlohmann::json to_json(const TrainReport& report);

struct TrainResult {
    model::ModelState model;
    TrainReport report;
    // Observed rows plus the pseudo-outcomes produced by one augmentation
    // pass of the restored model, in outcome units. Observed rows only when
    // both loss weights are zero.
    std::vector<augment::AugmentedPair> augmented;
};

/// Raised when training hits a non-finite loss or gradient. Carries the
/// partial report with status "aborted".
class TrainingAborted : public TrainingError {
public:
    TrainingAborted(const std::string& what, std::string block, TrainReport report)
        : TrainingError(what, std::move(block)), report_(std::move(report)) {}
    const TrainReport& report() const noexcept { return report_; }

private:
    TrainReport report_;
};

// Mean and standard deviation of y (scale 1 when the spread is below 1e-12).
model::OutcomeScale fit_outcome_scale(std::span<const double> y);

/// Factual MSE training for config.pretrain_epochs, using model.outcome_scale
/// to standardize y. Returns the mean batch loss per epoch.
std::vector<double> pretrain_factual(model::ModelState& model, const data::Dataset& train,
                                     const GiksConfig& config);

/// Chooses (σ², ε_GP) by the variance-weighted validation loss of GP
/// posteriors at observed validation treatments, and δ by the error of
/// Taylor transfers from the nearest training embedding within δ. Ties go
/// to the smaller value. ConfigError when every cell of a grid is empty.
GiGpParams fix_gigp_params(const model::ModelState& model, const data::Dataset& train,
                           const data::Dataset& val, const GiksConfig& config);

// Validation RMSE in outcome units.
double validation_rmse(const model::ModelState& model, const data::Dataset& val);

/// Pretraining, parameter fixing and the combined-objective loop with early
/// stopping on validation RMSE. The best epoch's model is restored.
TrainResult train_giks(const data::Dataset& train, const data::Dataset& val,
                       const GiksConfig& config);

// train_giks with both loss weights set to zero.
TrainResult train_factual(const data::Dataset& train, const data::Dataset& val,
                          GiksConfig config);

/// Per-instance squared errors against the oracle at one sampled treatment
/// per training row: GP posterior means versus the model's own predictions.
/// Rows with no GP neighbors are skipped.
struct CounterfactualComparison {
    std::vector<std::size_t> rows;
    std::vector<double> t_cf;
    std::vector<double> gp_sq_error;
    std::vector<double> model_sq_error;
    // One-sided paired test of mean(model error) > mean(GP error).
    double p_value = 1.0;
};

CounterfactualComparison compare_gp_to_model(const model::ModelState& model,
                                             const data::Dataset& train,
                                             const data::ResponseOracle& oracle,
                                             const gp::GPConfig& gp_config, std::uint64_t seed);

} // namespace giks::trainer
