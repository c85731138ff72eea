#include "giks/trainer/trainer.hpp"

#include "giks/metrics/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace giks::trainer {

using diffnet::NodeId;
using diffnet::Tape;
using diffnet::Tensor2;
using nlohmann::json;

namespace {

// Independent generator per purpose, all derived from the run seed.
enum Stream : std::uint32_t { kShuffle = 1, kSampler = 2, kPropensity = 3, kExport = 4 };

std::mt19937_64 stream_rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

void check_grid(const std::vector<double>& grid, const char* name, bool allow_zero) {
    if (grid.empty()) throw ConfigError(std::string(name) + " must not be empty");
    for (double v : grid) {
        if (!std::isfinite(v) || v < 0.0 || (!allow_zero && v == 0.0)) {
            throw ConfigError(std::string(name) + " values must be positive and finite");
        }
    }
}

std::vector<double> standardize(std::span<const double> y, const model::OutcomeScale& s) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - s.mean) / s.scale;
    return out;
}

bool beats(double candidate, double best) {
    if (!std::isfinite(candidate)) return false;
    if (!std::isfinite(best)) return true;
    return candidate < best - (1e-12 + 1e-9 * std::abs(best));
}

bool ties(double candidate, double best) {
    if (!std::isfinite(candidate) || !std::isfinite(best)) return false;
    return std::abs(candidate - best) <= 1e-12 + 1e-9 * std::abs(best);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Mini-batch state shared by pretraining and the main loop.
struct Workspace {
    const Tensor2& x;
    std::span<const double> t;
    std::vector<double> y_std;
    std::vector<std::size_t> order;
};

NodeId record_factual(Tape& tape, model::ModelState& model, const Workspace& ws,
                      std::span<const std::size_t> rows) {
    std::vector<double> t_rows;
    std::vector<double> y_rows;
    t_rows.reserve(rows.size());
    y_rows.reserve(rows.size());
    for (std::size_t r : rows) {
        t_rows.push_back(ws.t[r]);
        y_rows.push_back(ws.y_std[r]);
    }
    const NodeId pred = model.record_predict(tape, diffnet::select_rows(ws.x, rows), t_rows);
    return tape.mean(tape.square(tape.sub(pred, tape.constant(Tensor2::column(y_rows)))));
}

void step(Tape& tape, NodeId loss, model::ModelState& model,
          const diffnet::OptimizerConfig& opt) {
    if (!std::isfinite(tape.scalar(loss))) throw TrainingError("non-finite training loss");
    tape.backward(loss);
    diffnet::adamw_step(model.params(), opt);
}

double factual_epoch(model::ModelState& model, Workspace& ws, const GiksConfig& config,
                     const diffnet::OptimizerConfig& opt, std::mt19937_64& shuffle_rng) {
    std::shuffle(ws.order.begin(), ws.order.end(), shuffle_rng);
    const auto params = model.params();
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < ws.order.size(); start += config.batch_size) {
        const std::size_t stop = std::min(ws.order.size(), start + config.batch_size);
        const std::span<const std::size_t> rows(ws.order.data() + start, stop - start);
        diffnet::zero_grads(params);
        Tape tape;
        const NodeId loss = record_factual(tape, model, ws, rows);
        total += tape.scalar(loss);
        step(tape, loss, model, opt);
        ++batches;
    }
    return total / static_cast<double>(batches);
}

diffnet::OptimizerConfig optimizer_for(const GiksConfig& config) {
    diffnet::OptimizerConfig opt;
    opt.learning_rate = config.learning_rate;
    opt.weight_decay = config.weight_decay;
    return opt;
}

std::vector<double> pretrain_with(model::ModelState& model, Workspace& ws,
                                  const GiksConfig& config, std::mt19937_64& shuffle_rng) {
    std::vector<double> losses;
    losses.reserve(config.pretrain_epochs);
    const auto opt = optimizer_for(config);
    for (std::size_t e = 0; e < config.pretrain_epochs; ++e)
        losses.push_back(factual_epoch(model, ws, config, opt, shuffle_rng));
    return losses;
}

gp::GPConfig gp_config(const GiksConfig& config, double sigma2, double eps_gp) {
    gp::GPConfig g;
    g.kernel = config.kernel;
    g.sigma2 = sigma2;
    g.eps_gp = eps_gp;
    g.max_neighbors = config.max_neighbors;
    return g;
}

} // namespace

// ---------------------------------------------------------------------------
// Configuration

void GiksConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("learning_rate must be positive");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
        throw ConfigError("weight_decay must be non-negative");
    if (!(lambda_gi >= 0.0) || !std::isfinite(lambda_gi))
        throw ConfigError("lambda_gi must be non-negative");
    if (!(lambda_ks >= 0.0) || !std::isfinite(lambda_ks))
        throw ConfigError("lambda_ks must be non-negative");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (patience == 0) throw ConfigError("patience must be >= 1");
    check_grid(delta_grid, "delta_grid", false);
    check_grid(sigma2_grid, "sigma2_grid", false);
    check_grid(eps_gp_grid, "eps_gp_grid", true);
    if (max_neighbors == 0) throw ConfigError("max_neighbors must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ConfigError("val_fraction must lie in (0,1)");
    model_config(1).validate();
}

model::ModelConfig GiksConfig::model_config(std::size_t input_dim) const {
    model::ModelConfig m;
    m.encoder.input_dim = input_dim;
    m.encoder.hidden_dims = encoder_hidden;
    m.encoder.embed_dim = embed_dim;
    m.head_hidden = head_hidden;
    m.seed = seed;
    return m;
}

GiksConfig preset(data::GeneratorKind kind) {
    GiksConfig c;
    switch (kind) {
    case data::GeneratorKind::Tcga0:
    case data::GeneratorKind::Tcga1:
    case data::GeneratorKind::Tcga2:
        c.learning_rate = 1e-4;
        c.lambda_gi = 1e-1;
        c.lambda_ks = 1e-2;
        break;
    case data::GeneratorKind::IhdpLike:
        c.learning_rate = 1e-2;
        c.lambda_gi = 1e-4;
        c.lambda_ks = 1e-1;
        break;
    case data::GeneratorKind::NewsLike:
        c.learning_rate = 1e-3;
        c.lambda_gi = 1e-2;
        c.lambda_ks = 1e-4;
        break;
    case data::GeneratorKind::SyntheticSimple:
        // sin(3πt) moves quickly, so the GP needs narrow treatment windows;
        // cosine similarity on ReLU embeddings is nearly flat here.
        c.learning_rate = 1e-3;
        c.lambda_gi = 1e-1;
        c.lambda_ks = 1.0;
        c.kernel = gp::KernelKind::DotProduct;
        c.eps_gp_grid = {0.01, 0.02, 0.05};
        break;
    }
    return c;
}

json to_json(const GiksConfig& c) {
    return json{
        {"learning_rate", c.learning_rate},
        {"weight_decay", c.weight_decay},
        {"lambda_gi", c.lambda_gi},
        {"lambda_ks", c.lambda_ks},
        {"batch_size", c.batch_size},
        {"pretrain_epochs", c.pretrain_epochs},
        {"epochs", c.epochs},
        {"epoch_gi_start", c.epoch_gi_start},
        {"epoch_gp_start", c.epoch_gp_start},
        {"sampler", augment::to_string(c.sampler)},
        {"delta_grid", c.delta_grid},
        {"sigma2_grid", c.sigma2_grid},
        {"eps_gp_grid", c.eps_gp_grid},
        {"patience", c.patience},
        {"seed", c.seed},
        {"kernel", gp::to_string(c.kernel)},
        {"max_neighbors", c.max_neighbors},
        {"encoder_hidden", c.encoder_hidden},
        {"embed_dim", c.embed_dim},
        {"head_hidden", c.head_hidden},
        {"val_fraction", c.val_fraction},
    };
}

GiksConfig giks_config_from_json(const json& doc, GiksConfig c) {
    if (!doc.is_object()) throw ConfigError("training config must be an object");
    try {
        for (const auto& [key, v] : doc.items()) {
            if (key == "learning_rate") c.learning_rate = v.get<double>();
            else if (key == "weight_decay") c.weight_decay = v.get<double>();
            else if (key == "lambda_gi") c.lambda_gi = v.get<double>();
            else if (key == "lambda_ks") c.lambda_ks = v.get<double>();
            else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
            else if (key == "pretrain_epochs") c.pretrain_epochs = v.get<std::size_t>();
            else if (key == "epochs") c.epochs = v.get<std::size_t>();
            else if (key == "epoch_gi_start") c.epoch_gi_start = v.get<std::size_t>();
            else if (key == "epoch_gp_start") c.epoch_gp_start = v.get<std::size_t>();
            else if (key == "sampler") c.sampler = augment::parse_sampler(v.get<std::string>());
            else if (key == "delta_grid") c.delta_grid = v.get<std::vector<double>>();
            else if (key == "sigma2_grid") c.sigma2_grid = v.get<std::vector<double>>();
            else if (key == "eps_gp_grid") c.eps_gp_grid = v.get<std::vector<double>>();
            else if (key == "patience") c.patience = v.get<std::size_t>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "kernel") c.kernel = gp::parse_kernel(v.get<std::string>());
            else if (key == "max_neighbors") c.max_neighbors = v.get<std::size_t>();
            else if (key == "encoder_hidden") c.encoder_hidden = v.get<std::vector<std::size_t>>();
            else if (key == "embed_dim") c.embed_dim = v.get<std::size_t>();
            else if (key == "head_hidden") c.head_hidden = v.get<std::vector<std::size_t>>();
            else if (key == "val_fraction") c.val_fraction = v.get<double>();
            else throw ConfigError("unknown training key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("training config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string run_label(const GiksConfig& c) {
    if (c.lambda_gi > 0.0 && c.lambda_ks > 0.0) return "giks";
    if (c.lambda_gi > 0.0) return "gi";
    if (c.lambda_ks > 0.0) return "ks";
    return "factual";
}

json to_json(const TrainReport& r) {
    json epochs = json::array();
    for (const auto& e : r.epochs) {
        epochs.push_back({
            {"epoch", e.epoch},
            {"factual_loss", e.factual_loss},
            {"gi_loss", e.gi_loss},
            {"ks_loss", e.ks_loss},
            {"total_loss", e.total_loss},
            {"val_rmse", e.val_rmse},
            {"near_count", e.near_count},
            {"far_count", e.far_count},
            {"dropped_far", e.dropped_far},
        });
    }
    json gigp = nullptr;
    if (r.gigp) {
        json ds = json::array();
        json gs = json::array();
        for (double v : r.gigp->delta_scores) ds.push_back(finite_or_null(v));
        for (double v : r.gigp->gp_scores) gs.push_back(finite_or_null(v));
        gigp = {{"delta", r.gigp->delta},
                {"sigma2", r.gigp->sigma2},
                {"eps_gp", r.gigp->eps_gp},
                {"delta_scores", ds},
                {"gp_scores", gs}};
    }
    json doc{
        {"format", "giks-train-report"},
        {"version", 1},
        {"label", r.label},
        {"status", r.status},
        {"config", to_json(r.config)},
        {"train_size", r.train_size},
        {"val_size", r.val_size},
        {"outcome_scale", {{"mean", r.outcome_scale.mean}, {"scale", r.outcome_scale.scale}}},
        {"pretrain_losses", r.pretrain_losses},
        {"gigp", gigp},
        {"epochs", epochs},
        {"best_epoch", r.best_epoch},
        {"best_val_rmse", finite_or_null(r.best_val_rmse)},
        {"stopped_early", r.stopped_early},
        {"dropped_total", r.dropped_total},
        {"empty_augment_epochs", r.empty_augment_epochs},
        {"timing", {{"wall_clock_seconds", r.wall_clock_seconds}}},
    };
    if (!r.abort_reason.empty()) doc["abort_reason"] = r.abort_reason;
    return doc;
}

// ---------------------------------------------------------------------------
// Training pieces

model::OutcomeScale fit_outcome_scale(std::span<const double> y) {
    if (y.empty()) throw ConfigError("cannot standardize an empty outcome vector");
    const double n = static_cast<double>(y.size());
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);
    return {mean, sd < 1e-12 ? 1.0 : sd};
}

std::vector<double> pretrain_factual(model::ModelState& model, const data::Dataset& train,
                                     const GiksConfig& config) {
    config.validate();
    train.validate();
    if (train.size() == 0) throw ConfigError("training set is empty");
    Workspace ws{train.x, train.t, standardize(train.y, model.outcome_scale), {}};
    ws.order.resize(train.size());
    std::iota(ws.order.begin(), ws.order.end(), std::size_t{0});
    auto rng = stream_rng(config.seed, kShuffle);
    return pretrain_with(model, ws, config, rng);
}

double validation_rmse(const model::ModelState& model, const data::Dataset& val) {
    return metrics::factual_rmse(model::Estimator(model), val);
}

GiGpParams fix_gigp_params(const model::ModelState& model, const data::Dataset& train,
                           const data::Dataset& val, const GiksConfig& config) {
    config.validate();
    if (train.size() == 0 || val.size() == 0) throw ConfigError("fix_gigp_params needs data");
    const auto y_train = standardize(train.y, model.outcome_scale);
    const auto y_val = standardize(val.y, model.outcome_scale);
    const Tensor2 emb_train = model.encode(train.x);
    const Tensor2 emb_val = model.encode(val.x);

    GiGpParams out;

    // (σ², ε_GP): variance-weighted validation loss of posteriors at observed t.
    const std::size_t n_eps = config.eps_gp_grid.size();
    out.gp_scores.assign(config.sigma2_grid.size() * n_eps,
                         std::numeric_limits<double>::infinity());
    std::optional<std::size_t> best_gp;
    for (std::size_t s = 0; s < config.sigma2_grid.size(); ++s) {
        for (std::size_t e = 0; e < n_eps; ++e) {
            const gp::GpSmoother smoother(
                emb_train, train.t, y_train,
                gp_config(config, config.sigma2_grid[s], config.eps_gp_grid[e]));
            double num = 0.0;
            double den = 0.0;
            for (std::size_t i = 0; i < val.size(); ++i) {
                const auto post = smoother.query(emb_val.row_span(i), val.t[i]);
                if (!post) continue;
                const double w = std::exp(-post->variance);
                const double r = y_val[i] - post->mean;
                num += w * r * r;
                den += w;
            }
            const std::size_t cell = s * n_eps + e;
            if (den > 0.0) out.gp_scores[cell] = num / den;
            if (!best_gp) {
                if (std::isfinite(out.gp_scores[cell])) best_gp = cell;
                continue;
            }
            const double score = out.gp_scores[cell];
            const double incumbent = out.gp_scores[*best_gp];
            const double cs = config.sigma2_grid[s];
            const double ce = config.eps_gp_grid[e];
            const double bs = config.sigma2_grid[*best_gp / n_eps];
            const double be = config.eps_gp_grid[*best_gp % n_eps];
            if (beats(score, incumbent) ||
                (ties(score, incumbent) && (cs < bs || (cs == bs && ce < be)))) {
                best_gp = cell;
            }
        }
    }
    if (!best_gp) throw ConfigError("no (sigma2, eps_gp) cell has GP neighbors for validation");
    out.sigma2 = config.sigma2_grid[*best_gp / n_eps];
    out.eps_gp = config.eps_gp_grid[*best_gp % n_eps];

    // δ: Taylor transfer from the closest training embedding within δ.
    const auto slope = model.predict_dt(train.x, train.t);
    out.delta_scores.assign(config.delta_grid.size(), std::numeric_limits<double>::infinity());
    std::optional<std::size_t> best_delta;
    for (std::size_t k = 0; k < config.delta_grid.size(); ++k) {
        const double delta = config.delta_grid[k];
        double sse = 0.0;
        std::size_t used = 0;
        for (std::size_t i = 0; i < val.size(); ++i) {
            const auto q = emb_val.row_span(i);
            std::optional<std::size_t> nearest;
            double nearest_d2 = 0.0;
            for (std::size_t j = 0; j < train.size(); ++j) {
                if (std::abs(train.t[j] - val.t[i]) > delta) continue;
                const auto r = emb_train.row_span(j);
                double d2 = 0.0;
                for (std::size_t a = 0; a < r.size(); ++a) d2 += (r[a] - q[a]) * (r[a] - q[a]);
                if (!nearest || d2 < nearest_d2) {
                    nearest = j;
                    nearest_d2 = d2;
                }
            }
            if (!nearest) continue;
            const std::size_t j = *nearest;
            const double pred =
                augment::gi_pseudo_outcome(y_train[j], train.t[j], val.t[i], slope[j]);
            sse += (pred - y_val[i]) * (pred - y_val[i]);
            ++used;
        }
        if (used > 0) out.delta_scores[k] = sse / static_cast<double>(used);
        if (!best_delta) {
            if (std::isfinite(out.delta_scores[k])) best_delta = k;
            continue;
        }
        const double score = out.delta_scores[k];
        const double incumbent = out.delta_scores[*best_delta];
        if (beats(score, incumbent) ||
            (ties(score, incumbent) && delta < config.delta_grid[*best_delta])) {
            best_delta = k;
        }
    }
    if (!best_delta) throw ConfigError("no delta in the grid reaches a training neighbor");
    out.delta = config.delta_grid[*best_delta];
    return out;
}

// ---------------------------------------------------------------------------
// Full run

TrainResult train_giks(const data::Dataset& train, const data::Dataset& val,
                       const GiksConfig& config) {
    const auto started = std::chrono::steady_clock::now();
    config.validate();
    train.validate();
    val.validate();
    if (train.size() == 0 || val.size() == 0) throw ConfigError("train and val must be non-empty");
    if (train.dim() != val.dim()) throw DimensionError("train and val covariate widths differ");

    model::ModelState model(config.model_config(train.dim()));
    model.outcome_scale = fit_outcome_scale(train.y);

    TrainReport report;
    report.label = run_label(config);
    report.config = config;
    report.train_size = train.size();
    report.val_size = val.size();
    report.outcome_scale = model.outcome_scale;

    auto finish_clock = [&] {
        report.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    };

    Workspace ws{train.x, train.t, standardize(train.y, model.outcome_scale), {}};
    ws.order.resize(train.size());
    std::iota(ws.order.begin(), ws.order.end(), std::size_t{0});
    auto shuffle_rng = stream_rng(config.seed, kShuffle);
    auto sampler_rng = stream_rng(config.seed, kSampler);

    const bool use_gi = config.lambda_gi > 0.0;
    const bool use_ks = config.lambda_ks > 0.0;

    try {
        report.pretrain_losses = pretrain_with(model, ws, config, shuffle_rng);

        std::optional<augment::TreatmentSampler> sampler;
        gp::GPConfig gpc;
        augment::AugmentOptions aug;
        if (use_gi || use_ks) {
            report.gigp = fix_gigp_params(model, train, val, config);
            gpc = gp_config(config, report.gigp->sigma2, report.gigp->eps_gp);
            aug.delta = report.gigp->delta;
            augment::PropensityConfig pc;
            pc.seed = stream_rng(config.seed, kPropensity)();
            sampler.emplace(config.sampler, train.x, train.t, pc);
        }

        EpochRecord baseline;
        baseline.val_rmse = validation_rmse(model, val);
        report.epochs.push_back(baseline);
        report.best_epoch = 0;
        report.best_val_rmse = baseline.val_rmse;
        model::ModelState best = model;

        const auto opt = optimizer_for(config);
        std::size_t since_best = 0;
        for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
            aug.use_gi = use_gi && epoch - 1 >= config.epoch_gi_start;
            aug.use_ks = use_ks && epoch - 1 >= config.epoch_gp_start;
            const bool augmenting = aug.use_gi || aug.use_ks;
            std::vector<double> t_cf;
            if (augmenting) t_cf = sampler->sample(sampler_rng);

            std::shuffle(ws.order.begin(), ws.order.end(), shuffle_rng);
            EpochRecord rec;
            rec.epoch = epoch;
            std::size_t batches = 0;
            const auto params = model.params();
            for (std::size_t start = 0; start < ws.order.size(); start += config.batch_size) {
                const std::size_t stop = std::min(ws.order.size(), start + config.batch_size);
                const std::span<const std::size_t> rows(ws.order.data() + start, stop - start);
                diffnet::zero_grads(params);
                Tape tape;
                const NodeId factual = record_factual(tape, model, ws, rows);
                NodeId total = factual;
                double gi_value = 0.0;
                double ks_value = 0.0;
                if (augmenting) {
                    std::optional<gp::GpSmoother> smoother;
                    if (aug.use_ks) smoother.emplace(model.encode(train.x), train.t, ws.y_std, gpc);
                    const auto batch =
                        augment::prepare_batch(model, train.x, train.t, ws.y_std, rows, t_cf, aug,
                                               smoother ? &*smoother : nullptr);
                    rec.near_count += batch.near.size();
                    rec.far_count += batch.far.size();
                    rec.dropped_far += batch.dropped_far;
                    if (const auto gi = augment::record_gi_loss(tape, model, train.x, batch)) {
                        gi_value = tape.scalar(*gi);
                        total = tape.add(total, tape.scale(*gi, config.lambda_gi));
                    }
                    if (const auto ks = augment::record_ks_loss(tape, model, train.x, batch)) {
                        ks_value = tape.scalar(*ks);
                        total = tape.add(total, tape.scale(*ks, config.lambda_ks));
                    }
                }
                rec.factual_loss += tape.scalar(factual);
                rec.gi_loss += gi_value;
                rec.ks_loss += ks_value;
                rec.total_loss += tape.scalar(total);
                step(tape, total, model, opt);
                ++batches;
            }
            const double nb = static_cast<double>(batches);
            rec.factual_loss /= nb;
            rec.gi_loss /= nb;
            rec.ks_loss /= nb;
            rec.total_loss /= nb;
            if (augmenting && rec.near_count == 0 && rec.far_count == 0)
                ++report.empty_augment_epochs;
            report.dropped_total += rec.dropped_far;

            rec.val_rmse = validation_rmse(model, val);
            if (!std::isfinite(rec.val_rmse)) throw TrainingError("non-finite validation error");
            report.epochs.push_back(rec);
            if (rec.val_rmse < report.best_val_rmse) {
                report.best_val_rmse = rec.val_rmse;
                report.best_epoch = epoch;
                best = model;
                since_best = 0;
            } else if (++since_best >= config.patience) {
                report.stopped_early = epoch < config.epochs;
                break;
            }
        }
        model = std::move(best);

        TrainResult result{std::move(model), std::move(report), {}};
        const auto& restored = result.model;
        const auto& scale = restored.outcome_scale;
        for (std::size_t i = 0; i < train.size(); ++i) {
            result.augmented.push_back(
                {i, augment::AugmentedPair::Source::Observed, train.t[i], train.y[i], std::nullopt});
        }
        if (use_gi || use_ks) {
            auto export_rng = stream_rng(config.seed, kExport);
            const auto t_cf = sampler->sample(export_rng);
            aug.use_gi = use_gi;
            aug.use_ks = use_ks;
            std::optional<gp::GpSmoother> smoother;
            if (use_ks) smoother.emplace(restored.encode(train.x), train.t, ws.y_std, gpc);
            std::vector<std::size_t> all(train.size());
            std::iota(all.begin(), all.end(), std::size_t{0});
            const auto batch = augment::prepare_batch(restored, train.x, train.t, ws.y_std, all,
                                                      t_cf, aug, smoother ? &*smoother : nullptr);
            for (auto p : augment::batch_pairs(batch)) {
                p.pseudo_y = scale.mean + scale.scale * p.pseudo_y;
                if (p.variance) *p.variance *= scale.scale * scale.scale;
                result.augmented.push_back(p);
            }
        }
        std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
        result.report.wall_clock_seconds = elapsed.count();
        return result;
    } catch (const TrainingError& e) {
        report.status = "aborted";
        report.abort_reason = e.block().empty() ? e.what() : std::string(e.what()) + " (" + e.block() + ")";
        finish_clock();
        throw TrainingAborted(e.what(), e.block(), std::move(report));
    }
}

TrainResult train_factual(const data::Dataset& train, const data::Dataset& val,
                          GiksConfig config) {
    config.lambda_gi = 0.0;
    config.lambda_ks = 0.0;
    return train_giks(train, val, config);
}

CounterfactualComparison compare_gp_to_model(const model::ModelState& model,
                                             const data::Dataset& train,
                                             const data::ResponseOracle& oracle,
                                             const gp::GPConfig& gp_config, std::uint64_t seed) {
    train.validate();
    const auto& scale = model.outcome_scale;
    const auto y_std = standardize(train.y, scale);
    const gp::GpSmoother smoother(model.encode(train.x), train.t, y_std, gp_config);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    CounterfactualComparison out;
    for (std::size_t i = 0; i < train.size(); ++i) {
        const double t_cf = unit(rng);
        const auto post = smoother.query_row(i, t_cf);
        if (!post) continue;
        out.rows.push_back(i);
        out.t_cf.push_back(t_cf);
        const double truth = oracle(train.x.row_span(i), t_cf);
        const double gp_value = scale.mean + scale.scale * post->mean;
        out.gp_sq_error.push_back((gp_value - truth) * (gp_value - truth));
    }
    if (out.rows.size() < 2) throw ConfigError("too few rows with GP neighbors to compare");
    const auto pred = model::Estimator(model).predict(diffnet::select_rows(train.x, out.rows),
                                                      out.t_cf);
    for (std::size_t k = 0; k < out.rows.size(); ++k) {
        const double truth = oracle(train.x.row_span(out.rows[k]), out.t_cf[k]);
        out.model_sq_error.push_back((pred[k] - truth) * (pred[k] - truth));
    }
    out.p_value = metrics::paired_ttest_onesided(out.model_sq_error, out.gp_sq_error);
    return out;
}

} // namespace giks::trainer
