#include "giks/augment/augment.hpp"

#include "giks/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace giks::augment {

using diffnet::NodeId;
using diffnet::ParamBlock;
using diffnet::Tape;
using diffnet::Tensor2;

std::string to_string(SamplerKind kind) {
    switch (kind) {
    case SamplerKind::Uniform: return "uniform";
    case SamplerKind::Marginal: return "marginal";
    case SamplerKind::InversePropensity: return "inverse-propensity";
    }
    return "unknown";
}

SamplerKind parse_sampler(const std::string& name) {
    if (name == "uniform") return SamplerKind::Uniform;
    if (name == "marginal") return SamplerKind::Marginal;
    if (name == "inverse-propensity" || name == "ipw") return SamplerKind::InversePropensity;
    throw ConfigError("unknown sampler '" + name + "'");
}

std::size_t treatment_bin(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("treatment outside [0,1]");
    const auto b = static_cast<std::size_t>(std::floor(10.0 * t));
    return std::min<std::size_t>(b, kPropensityBins - 1);
}

// ---------------------------------------------------------------------------
// Propensity classifier

namespace {

Tensor2 uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in,
                     std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor2 out(rows, cols);
    for (double& v : out.values()) v = dist(rng);
    return out;
}

Tensor2 add_bias_relu(Tensor2 z, const Tensor2& bias, bool relu) {
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto row = z.row_span(i);
        for (std::size_t j = 0; j < z.cols(); ++j) {
            row[j] += bias(0, j);
            if (relu && row[j] < 0.0) row[j] = 0.0;
        }
    }
    return z;
}

} // namespace

PropensityModel::PropensityModel(std::size_t input_dim, std::size_t hidden,
                                 std::mt19937_64& rng) {
    if (input_dim == 0 || hidden == 0) throw ConfigError("propensity dims must be >= 1");
    w1_ = ParamBlock("propensity.0.weight", uniform_init(input_dim, hidden, input_dim, rng));
    b1_ = ParamBlock("propensity.0.bias", uniform_init(1, hidden, input_dim, rng));
    w2_ = ParamBlock("propensity.1.weight", uniform_init(hidden, kPropensityBins, hidden, rng));
    b2_ = ParamBlock("propensity.1.bias", uniform_init(1, kPropensityBins, hidden, rng));
}

Tensor2 PropensityModel::predict_proba(const Tensor2& x) const {
    if (x.cols() != w1_.value.rows()) throw DimensionError("propensity input width mismatch");
    const Tensor2 h = add_bias_relu(diffnet::matmul(x, w1_.value), b1_.value, true);
    Tensor2 logits = add_bias_relu(diffnet::matmul(h, w2_.value), b2_.value, false);
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row_span(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            total += v;
        }
        for (double& v : row) v /= total;
    }
    return logits;
}

NodeId PropensityModel::record_logits(Tape& tape, const Tensor2& x) {
    const NodeId in = tape.constant(x);
    const NodeId h = tape.relu(tape.affine(in, tape.param(w1_), tape.param(b1_)));
    return tape.affine(h, tape.param(w2_), tape.param(b2_));
}

std::vector<ParamBlock*> PropensityModel::params() { return {&w1_, &b1_, &w2_, &b2_}; }

PropensityModel fit_propensity(const Tensor2& x, std::span<const double> t,
                               const PropensityConfig& config) {
    const std::size_t n = x.rows();
    if (t.size() != n) throw DimensionError("fit_propensity: x and t row counts differ");
    if (n < kPropensityBins) throw ConfigError("fit_propensity needs at least 10 rows");
    if (config.batch_size == 0) throw ConfigError("propensity batch size must be >= 1");

    std::mt19937_64 rng(config.seed);
    PropensityModel model(x.cols(), config.hidden, rng);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = treatment_bin(t[i]);

    diffnet::OptimizerConfig opt;
    opt.learning_rate = config.learning_rate;
    const auto params = model.params();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, stop - start);
            std::vector<std::size_t> batch_labels;
            batch_labels.reserve(rows.size());
            for (std::size_t r : rows) batch_labels.push_back(labels[r]);

            diffnet::zero_grads(params);
            Tape tape;
            const NodeId logits = model.record_logits(tape, diffnet::select_rows(x, rows));
            const NodeId loss = tape.softmax_cross_entropy(logits, std::move(batch_labels));
            if (!std::isfinite(tape.scalar(loss))) {
                throw TrainingError("propensity loss is not finite");
            }
            tape.backward(loss);
            diffnet::adamw_step(params, opt);
        }
    }
    return model;
}

std::vector<double> inverse_propensity_bin_probs(std::span<const double> bin_probs) {
    if (bin_probs.size() != kPropensityBins) throw DimensionError("expected 10 bin probabilities");
    std::vector<double> w(bin_probs.size());
    double total = 0.0;
    for (std::size_t b = 0; b < w.size(); ++b) {
        w[b] = 1.0 / std::max(bin_probs[b], kPropensityFloor);
        total += w[b];
    }
    for (double& v : w) v /= total;
    return w;
}

// ---------------------------------------------------------------------------
// Sampling

TreatmentSampler::TreatmentSampler(SamplerKind kind, const Tensor2& x_train,
                                   std::span<const double> t_train,
                                   const PropensityConfig& propensity)
    : kind_(kind), t_train_(t_train.begin(), t_train.end()) {
    if (t_train_.empty()) throw ConfigError("sampler needs a non-empty training set");
    if (x_train.rows() != t_train_.size()) throw DimensionError("sampler: x and t differ");
    if (kind_ != SamplerKind::InversePropensity) return;

    const PropensityModel model = fit_propensity(x_train, t_train_, propensity);
    const Tensor2 probs = model.predict_proba(x_train);
    bin_probs_ = Tensor2(probs.rows(), kPropensityBins);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const auto w = inverse_propensity_bin_probs(probs.row_span(i));
        std::copy(w.begin(), w.end(), bin_probs_.row_span(i).begin());
    }
}

std::vector<double> TreatmentSampler::sample(std::mt19937_64& rng) const {
    const std::size_t n = t_train_.size();
    std::vector<double> out(n);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    switch (kind_) {
    case SamplerKind::Uniform:
        for (double& v : out) v = unit(rng);
        break;
    case SamplerKind::Marginal: {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (double& v : out) v = t_train_[pick(rng)];
        break;
    }
    case SamplerKind::InversePropensity:
        for (std::size_t i = 0; i < n; ++i) {
            const auto w = bin_probs_.row_span(i);
            std::discrete_distribution<std::size_t> bin(w.begin(), w.end());
            const double b = static_cast<double>(bin(rng));
            out[i] = std::min(1.0, (b + unit(rng)) / static_cast<double>(kPropensityBins));
        }
        break;
    }
    return out;
}

std::vector<double> sample_tcf(SamplerKind kind, const Tensor2& x, std::span<const double> t,
                               std::mt19937_64& rng) {
    PropensityConfig propensity;
    if (kind == SamplerKind::InversePropensity) propensity.seed = rng();
    return TreatmentSampler(kind, x, t, propensity).sample(rng);
}

// ---------------------------------------------------------------------------
// Routing and targets

Route route(double t, double t_cf, double delta) {
    return std::abs(t_cf - t) < delta ? Route::Near : Route::Far;
}

double gi_pseudo_outcome(double y, double t, double t_cf, double dmu_dt) {
    return y - (t - t_cf) * dmu_dt;
}

AugmentBatch prepare_batch(const model::ModelState& model, const Tensor2& x_train,
                           std::span<const double> t_train, std::span<const double> y_train,
                           std::span<const std::size_t> batch, std::span<const double> t_cf_all,
                           const AugmentOptions& options, const gp::GpSmoother* smoother) {
    const std::size_t n = x_train.rows();
    if (t_train.size() != n || y_train.size() != n || t_cf_all.size() != n) {
        throw DimensionError("prepare_batch: training arrays differ in length");
    }
    if (options.use_ks && smoother == nullptr) {
        throw ContractError("prepare_batch: KS enabled without a GP smoother");
    }

    AugmentBatch out;
    out.indices.assign(batch.begin(), batch.end());
    out.t_cf.reserve(batch.size());
    out.routes.reserve(batch.size());
    std::vector<std::size_t> near_rows;
    for (std::size_t p = 0; p < batch.size(); ++p) {
        const std::size_t i = batch[p];
        if (i >= n) throw DimensionError("prepare_batch: index out of range");
        const double t_cf = t_cf_all[i];
        out.t_cf.push_back(t_cf);
        out.routes.push_back(route(t_train[i], t_cf, options.delta));
        if (out.routes.back() == Route::Near) {
            if (options.use_gi) {
                out.near.push_back(p);
                near_rows.push_back(i);
            }
        } else if (options.use_ks) {
            const auto post = smoother->query_row(i, t_cf);
            if (!post) {
                ++out.dropped_far;
                continue;
            }
            out.far.push_back(p);
            out.far_posteriors.push_back(*post);
        }
    }

    if (!near_rows.empty()) {
        std::vector<double> t_obs;
        t_obs.reserve(near_rows.size());
        for (std::size_t i : near_rows) t_obs.push_back(t_train[i]);
        const auto slope = model.predict_dt(diffnet::select_rows(x_train, near_rows), t_obs);
        out.near_targets.reserve(near_rows.size());
        for (std::size_t k = 0; k < near_rows.size(); ++k) {
            const std::size_t i = near_rows[k];
            out.near_targets.push_back(
                gi_pseudo_outcome(y_train[i], t_train[i], t_cf_all[i], slope[k]));
        }
    }

    if (!out.far.empty()) {
        std::vector<double> variances;
        variances.reserve(out.far.size());
        for (const auto& post : out.far_posteriors) variances.push_back(post.variance);
        out.far_weights = gp::ks_weights(variances);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Losses

namespace {

struct MemberView {
    Tensor2 x;
    std::vector<double> t;
};

MemberView members(const Tensor2& x_train, const AugmentBatch& batch,
                   const std::vector<std::size_t>& positions) {
    std::vector<std::size_t> rows;
    MemberView view;
    rows.reserve(positions.size());
    view.t.reserve(positions.size());
    for (std::size_t p : positions) {
        rows.push_back(batch.indices.at(p));
        view.t.push_back(batch.t_cf.at(p));
    }
    view.x = diffnet::select_rows(x_train, rows);
    return view;
}

std::vector<double> far_means(const AugmentBatch& batch) {
    std::vector<double> means;
    means.reserve(batch.far_posteriors.size());
    for (const auto& post : batch.far_posteriors) means.push_back(post.mean);
    return means;
}

} // namespace

std::optional<NodeId> record_gi_loss(Tape& tape, model::ModelState& model,
                                     const Tensor2& x_train, const AugmentBatch& batch) {
    if (batch.near.empty()) return std::nullopt;
    const MemberView view = members(x_train, batch, batch.near);
    const NodeId pred = model.record_predict(tape, view.x, view.t);
    const NodeId target = tape.constant(Tensor2::column(batch.near_targets));
    return tape.mean(tape.square(tape.sub(pred, target)));
}

std::optional<NodeId> record_ks_loss(Tape& tape, model::ModelState& model,
                                     const Tensor2& x_train, const AugmentBatch& batch) {
    if (batch.far.empty()) return std::nullopt;
    const MemberView view = members(x_train, batch, batch.far);
    const NodeId pred = model.record_predict(tape, view.x, view.t);
    const NodeId target = tape.constant(Tensor2::column(far_means(batch)));
    const NodeId weights = tape.constant(Tensor2::column(batch.far_weights));
    return tape.sum(tape.mul(tape.square(tape.sub(pred, target)), weights));
}

double gi_loss_value(const model::ModelState& model, const Tensor2& x_train,
                     const AugmentBatch& batch) {
    if (batch.near.empty()) return 0.0;
    const MemberView view = members(x_train, batch, batch.near);
    const auto pred = model.predict(view.x, view.t);
    double total = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double r = pred[k] - batch.near_targets[k];
        total += r * r;
    }
    return total / static_cast<double>(pred.size());
}

double ks_loss_value(const model::ModelState& model, const Tensor2& x_train,
                     const AugmentBatch& batch) {
    if (batch.far.empty()) return 0.0;
    const MemberView view = members(x_train, batch, batch.far);
    const auto pred = model.predict(view.x, view.t);
    double total = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double r = pred[k] - batch.far_posteriors[k].mean;
        total += batch.far_weights[k] * r * r;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Export

std::string to_string(AugmentedPair::Source source) {
    switch (source) {
    case AugmentedPair::Source::Observed: return "observed";
    case AugmentedPair::Source::Gi: return "gi";
    case AugmentedPair::Source::Ks: return "ks";
    }
    return "unknown";
}

std::vector<AugmentedPair> batch_pairs(const AugmentBatch& batch) {
    std::vector<AugmentedPair> out;
    out.reserve(batch.near.size() + batch.far.size());
    for (std::size_t k = 0; k < batch.near.size(); ++k) {
        const std::size_t p = batch.near[k];
        out.push_back({batch.indices[p], AugmentedPair::Source::Gi, batch.t_cf[p],
                       batch.near_targets[k], std::nullopt});
    }
    for (std::size_t k = 0; k < batch.far.size(); ++k) {
        const std::size_t p = batch.far[k];
        out.push_back({batch.indices[p], AugmentedPair::Source::Ks, batch.t_cf[p],
                       batch.far_posteriors[k].mean, batch.far_posteriors[k].variance});
    }
    return out;
}

void write_augmented_csv(const std::string& path, std::span<const AugmentedPair> pairs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IntegrityError("cannot write " + path);
    out << "instance_index,t_source,t_value,pseudo_y,variance\n";
    char buf[64];
    for (const auto& p : pairs) {
        out << p.instance_index << ',' << to_string(p.source) << ',';
        std::snprintf(buf, sizeof buf, "%.17g", p.t_value);
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", p.pseudo_y);
        out << buf << ',';
        if (p.variance) {
            std::snprintf(buf, sizeof buf, "%.17g", *p.variance);
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw IntegrityError("failed writing " + path);
}

std::vector<AugmentedPair> read_augmented_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string content = buffer.str();
    if (content.empty() || content.back() != '\n') {
        throw ParseError(path + ": truncated (no final newline)");
    }

    std::vector<AugmentedPair> out;
    std::istringstream lines(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (line_no == 1) {
            if (line != "instance_index,t_source,t_value,pseudo_y,variance") {
                throw ParseError(where + "unexpected augmented-pairs header");
            }
            continue;
        }
        std::vector<std::string> fields;
        std::istringstream fs(line);
        std::string f;
        while (std::getline(fs, f, ',')) fields.push_back(f);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        if (fields.size() != 5) throw ParseError(where + "expected 5 fields");
        AugmentedPair p;
        try {
            std::size_t used = 0;
            p.instance_index = std::stoull(fields[0], &used);
            if (used != fields[0].size()) throw std::invalid_argument("index");
            p.t_value = std::stod(fields[2]);
            p.pseudo_y = std::stod(fields[3]);
            if (!fields[4].empty()) p.variance = std::stod(fields[4]);
        } catch (const std::exception&) {
            throw ParseError(where + "unparseable number");
        }
        if (fields[1] == "observed") {
            p.source = AugmentedPair::Source::Observed;
        } else if (fields[1] == "gi") {
            p.source = AugmentedPair::Source::Gi;
        } else if (fields[1] == "ks") {
            p.source = AugmentedPair::Source::Ks;
        } else {
            throw ParseError(where + "unknown t_source '" + fields[1] + "'");
        }
        if (!(p.t_value >= 0.0 && p.t_value <= 1.0)) throw ParseError(where + "t outside [0,1]");
        out.push_back(p);
    }
    return out;
}

} // namespace giks::augment
