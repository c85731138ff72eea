#include "giks/cli/cli.hpp"

#include "giks/augment/augment.hpp"
#include "giks/data/io.hpp"
#include "giks/errors.hpp"
#include "giks/metrics/metrics.hpp"
#include "giks/model/checkpoint.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace giks::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Missing inputs and bad flag combinations.
class UsageError : public Error {
public:
    using Error::Error;
};

struct TrainingFlags {
    std::optional<std::uint64_t> seed;
    std::optional<double> lambda_gi;
    std::optional<double> lambda_ks;
    std::optional<double> learning_rate;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> pretrain_epochs;
    std::optional<std::size_t> patience;
    std::optional<std::size_t> batch_size;
    std::optional<std::string> sampler;
    std::optional<std::string> kernel;
    std::optional<double> val_fraction;
};

void add_training_flags(CLI::App* app, TrainingFlags& f) {
    app->add_option("--seed", f.seed, "Training seed (model init, shuffling, sampling, split)");
    app->add_option("--lambda-gi", f.lambda_gi, "Weight of the gradient-interpolation loss");
    app->add_option("--lambda-ks", f.lambda_ks, "Weight of the kernel-smoothing loss");
    app->add_option("--lr", f.learning_rate, "AdamW learning rate");
    app->add_option("--epochs", f.epochs, "Maximum combined-objective epochs");
    app->add_option("--pretrain-epochs", f.pretrain_epochs, "Factual pretraining epochs");
    app->add_option("--patience", f.patience, "Early-stopping patience in epochs");
    app->add_option("--batch-size", f.batch_size, "Mini-batch size");
    app->add_option("--sampler", f.sampler, "uniform | marginal | inverse-propensity");
    app->add_option("--kernel", f.kernel, "GP kernel: cosine | dot");
    app->add_option("--val-fraction", f.val_fraction, "Validation fraction of the dataset");
}

trainer::GiksConfig apply_flags(const trainer::GiksConfig& base, const TrainingFlags& f) {
    json o = json::object();
    if (f.seed) o["seed"] = *f.seed;
    if (f.lambda_gi) o["lambda_gi"] = *f.lambda_gi;
    if (f.lambda_ks) o["lambda_ks"] = *f.lambda_ks;
    if (f.learning_rate) o["learning_rate"] = *f.learning_rate;
    if (f.epochs) o["epochs"] = *f.epochs;
    if (f.pretrain_epochs) o["pretrain_epochs"] = *f.pretrain_epochs;
    if (f.patience) o["patience"] = *f.patience;
    if (f.batch_size) o["batch_size"] = *f.batch_size;
    if (f.sampler) o["sampler"] = *f.sampler;
    if (f.kernel) o["kernel"] = *f.kernel;
    if (f.val_fraction) o["val_fraction"] = *f.val_fraction;
    return trainer::giks_config_from_json(o, base);
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::is_regular_file(path)) throw UsageError(what + " not found: " + path.string());
}

fs::path sibling_meta(const fs::path& csv) { return csv.parent_path() / "meta.json"; }

// Maps training-row indices in an export back to dataset rows.
std::vector<augment::AugmentedPair> remap(std::vector<augment::AugmentedPair> pairs,
                                          const std::vector<std::size_t>& rows) {
    for (auto& p : pairs) p.instance_index = rows.at(p.instance_index);
    return pairs;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// gen

struct GenOptions {
    std::optional<std::string> config;
    std::optional<std::string> kind;
    std::optional<int> variant;
    std::optional<std::size_t> n;
    std::optional<std::size_t> d;
    std::optional<std::uint64_t> seed;
    std::optional<double> dosage_bias;
    std::optional<std::size_t> test_n;
    std::string out;
};

data::GeneratorKind resolve_kind(const std::string& kind, const std::optional<int>& variant) {
    if (kind == "tcga") {
        if (!variant) throw UsageError("--kind tcga needs --variant 0, 1 or 2");
        return data::parse_generator_kind("tcga-" + std::to_string(*variant));
    }
    if (variant) throw UsageError("--variant only applies to --kind tcga");
    try {
        return data::parse_generator_kind(kind);
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
}

data::GeneratorSpec generator_from(const GenOptions& o, std::optional<data::GeneratorSpec> base) {
    data::GeneratorSpec spec = base.value_or(data::GeneratorSpec{});
    if (o.kind) spec.kind = resolve_kind(*o.kind, o.variant);
    else if (!base) throw UsageError("--kind is required");
    else if (o.variant) throw UsageError("--variant needs --kind tcga");
    if (o.n) spec.n = *o.n;
    if (o.d) spec.d = *o.d;
    if (o.seed) spec.noise_seed = *o.seed;
    if (o.dosage_bias) spec.dosage_bias = *o.dosage_bias;
    if (o.test_n) spec.test_n = *o.test_n;
    spec.validate();
    return spec;
}

void write_generated(const fs::path& dir, const data::GeneratorSpec& spec,
                     const data::Dataset& d) {
    fs::create_directories(dir);
    data::write_csv(dir / "data.csv", d);
    data::write_meta(dir / "meta.json", d, spec);
}

int cmd_gen(const GenOptions& o, std::ostream& out) {
    std::optional<data::GeneratorSpec> base;
    if (o.config) base = load_run_config(*o.config).generator;
    const auto spec = generator_from(o, base);
    const auto g = data::generate(spec);
    write_generated(o.out, spec, g.data);
    out << "generated " << data::to_string(spec.kind) << " n=" << g.data.size()
        << " d=" << g.data.dim() << " -> " << (fs::path(o.out) / "data.csv").string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
    std::optional<std::string> config;
    std::optional<std::string> data;
    std::optional<std::string> meta;
    std::optional<std::string> out;
    TrainingFlags flags;
};

json checkpoint_extra(const trainer::TrainReport& report, const data::Split& s) {
    return {{"label", report.label},
            {"val_fraction", report.config.val_fraction},
            {"split_seed", report.config.seed},
            {"train_size", s.train.size()},
            {"val_size", s.val.size()},
            {"best_val_rmse", report.best_val_rmse}};
}

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
    const RunConfig rc = o.config ? load_run_config(*o.config) : RunConfig{};
    const auto out_dir = o.out ? std::optional<std::string>(o.out) : rc.output_dir;
    if (!out_dir) throw UsageError("an output directory is required (--out or output_dir)");
    fs::create_directories(*out_dir);

    data::LoadedDataset loaded;
    const auto data_path = o.data ? o.data : rc.dataset;
    if (data_path) {
        require_file(*data_path, "dataset");
        const fs::path meta = o.meta ? fs::path(*o.meta) : sibling_meta(*data_path);
        loaded = data::load_dataset(*data_path, meta);
        const fs::path copy = fs::path(*out_dir) / "data.csv";
        if (!fs::exists(copy) || !fs::equivalent(copy, *data_path)) {
            data::write_csv(copy, loaded.data);
            data::write_meta(fs::path(*out_dir) / "meta.json", loaded.data, loaded.generator);
        }
    } else if (rc.generator) {
        auto g = data::generate(*rc.generator);
        write_generated(*out_dir, *rc.generator, g.data);
        loaded.data = std::move(g.data);
        loaded.generator = rc.generator;
    } else {
        throw UsageError("no dataset: pass --data or set dataset/generator in the config");
    }

    std::optional<data::GeneratorKind> kind;
    if (loaded.generator) kind = loaded.generator->kind;
    const auto cfg = apply_flags(resolve_training(rc, kind), o.flags);
    const auto s = data::split(loaded.data, cfg.val_fraction, cfg.seed);

    const fs::path dir(*out_dir);
    try {
        const auto result = trainer::train_giks(s.train, s.val, cfg);
        model::save_checkpoint(dir / "model.json", result.model,
                               checkpoint_extra(result.report, s));
        write_json(dir / "report.json", trainer::to_json(result.report));
        const auto pairs = remap(result.augmented, s.train_rows);
        augment::write_augmented_csv((dir / "augmented.csv").string(), pairs);
        out << result.report.label << ": best epoch " << result.report.best_epoch
            << ", validation RMSE " << fmt_short(result.report.best_val_rmse) << " -> "
            << (dir / "model.json").string() << '\n';
    } catch (const trainer::TrainingAborted& e) {
        write_json(dir / "report.json", trainer::to_json(e.report()));
        err << "training aborted: " << e.what();
        if (!e.block().empty()) err << " (parameter block " << e.block() << ")";
        err << "; see " << (dir / "report.json").string() << '\n';
        return kExitTrainingAbort;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
    std::string model;
    std::string data;
    std::optional<std::string> meta;
    std::optional<std::string> out;
    std::optional<std::string> adrf_out;
    std::size_t grid_size = metrics::kDefaultGridSize;
    std::size_t amse_draws = metrics::kDefaultAmseDraws;
    std::uint64_t seed = 0;
};

bool same_rows(const data::Dataset& a, const data::Dataset& b) {
    return a.x == b.x && a.t == b.t && a.y == b.y;
}

void write_adrf(const fs::path& path, const model::ModelState& m, const data::Dataset& d,
                const data::ResponseOracle* oracle, std::size_t grid_size) {
    const auto grid = metrics::midpoint_grid(grid_size);
    const auto pred = model::Estimator(m).predict_grid(d.x, grid);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IntegrityError("cannot write " + path.string());
    out << "instance_index,t,prediction,oracle\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (std::size_t g = 0; g < grid.size(); ++g) {
            out << i << ',' << fmt(grid[g]) << ',' << fmt(pred(i, g)) << ',';
            if (oracle) out << fmt((*oracle)(d.x.row_span(i), grid[g]));
            out << '\n';
        }
    }
    if (!out) throw IntegrityError("failed writing " + path.string());
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
    require_file(o.model, "model");
    require_file(o.data, "dataset");
    if (o.grid_size == 0 || o.amse_draws == 0) throw UsageError("grid and draw counts must be >= 1");
    const auto ckpt = model::load_checkpoint(o.model);
    const fs::path meta = o.meta ? fs::path(*o.meta) : sibling_meta(o.data);
    const auto loaded = data::load_dataset(o.data, meta);
    const auto& d = loaded.data;
    if (d.dim() != ckpt.model.config().encoder.input_dim) {
        throw UsageError("dataset has " + std::to_string(d.dim()) + " covariates, model expects " +
                         std::to_string(ckpt.model.config().encoder.input_dim));
    }
    const model::Estimator est(ckpt.model);

    metrics::MetricsReport report;
    report.factual_rmse = metrics::factual_rmse(est, d);

    json doc;
    std::optional<double> val_rmse;
    const auto& extra = ckpt.extra;
    if (extra.is_object() && extra.contains("val_fraction") && extra.contains("split_seed") &&
        extra.contains("train_size") && extra.contains("val_size")) {
        const auto n_train = extra["train_size"].get<std::size_t>();
        const auto n_val = extra["val_size"].get<std::size_t>();
        if (n_train + n_val == d.size()) {
            const auto s = data::split(d, extra["val_fraction"].get<double>(),
                                       extra["split_seed"].get<std::uint64_t>());
            val_rmse = metrics::factual_rmse(est, s.val);
        }
    }

    std::string evaluated_on = "data";
    std::optional<data::GeneratedData> regenerated;
    const data::Dataset* eval_set = &d;
    if (loaded.generator) {
        regenerated = data::generate(*loaded.generator);
        if (!same_rows(regenerated->data, d)) {
            throw IntegrityError("dataset rows do not match their recorded generator");
        }
        if (regenerated->test.size() > 0) {
            eval_set = &regenerated->test;
            evaluated_on = "test";
        }
        const auto* oracle = &regenerated->oracle;
        report.cf_error = metrics::cf_error(est, *eval_set, oracle, o.grid_size);
        report.amse = metrics::amse(est, *eval_set, oracle, d.t, o.seed, o.amse_draws);
        report.dpe = metrics::dpe(est, *eval_set, oracle);
    } else {
        const std::string why = "no generator metadata; the response oracle is unknown";
        report.unavailable["cf_error"] = why;
        report.unavailable["amse"] = why;
        report.unavailable["dpe"] = why;
    }

    doc = metrics::to_json(report);
    doc["validation_rmse"] = val_rmse ? json(*val_rmse) : json(nullptr);
    doc["evaluated_on"] = evaluated_on;
    doc["eval_rows"] = eval_set->size();
    doc["data_rows"] = d.size();
    doc["grid_size"] = o.grid_size;

    const fs::path target =
        o.out ? fs::path(*o.out) : fs::path(o.model).parent_path() / "metrics.json";
    if (!target.parent_path().empty()) fs::create_directories(target.parent_path());
    write_json(target, doc);
    if (o.adrf_out) {
        write_adrf(*o.adrf_out, ckpt.model, *eval_set,
                   regenerated ? &regenerated->oracle : nullptr, o.grid_size);
    }
    out << "factual_rmse " << fmt_short(*report.factual_rmse);
    if (report.cf_error) out << ", cf_error " << fmt_short(*report.cf_error);
    out << " -> " << target.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions {
    std::optional<std::string> config;
    std::optional<std::string> kind;
    std::optional<int> variant;
    std::optional<std::size_t> n;
    std::optional<std::size_t> test_n;
    std::vector<std::uint64_t> seeds;
    std::optional<std::string> out;
    bool ablate = false;
    std::optional<std::size_t> threads;
    TrainingFlags flags;
};

struct ArmResult {
    std::string status = "ok";
    double cf_error = 0.0;
    double factual_rmse = 0.0;
    double amse = 0.0;
    double dpe = 0.0;
    std::size_t best_epoch = 0;
};

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::size_t sweep_threads(const std::optional<std::size_t>& flag, std::size_t jobs) {
    std::size_t cap = flag.value_or(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("GIKS_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) cap = std::min<std::size_t>(cap, v);
    }
    return std::max<std::size_t>(1, std::min(cap, jobs));
}

int cmd_sweep(const SweepOptions& o, std::ostream& out, std::ostream& err) {
    const RunConfig rc = o.config ? load_run_config(*o.config) : RunConfig{};
    GenOptions g;
    g.kind = o.kind;
    g.variant = o.variant;
    g.n = o.n;
    g.test_n = o.test_n;
    auto spec = generator_from(g, rc.generator);
    if (spec.test_n == 0) spec.test_n = 1000;
    const auto seeds = o.seeds.empty() ? rc.seeds : o.seeds;
    if (seeds.size() < 2) throw UsageError("a sweep needs at least two seeds");
    const auto out_dir = o.out ? o.out : rc.output_dir;
    if (!out_dir) throw UsageError("an output directory is required (--out or output_dir)");
    const auto base = apply_flags(resolve_training(rc, spec.kind), o.flags);

    std::vector<std::pair<std::string, trainer::GiksConfig>> arms;
    auto arm = [&](std::string name, double gi, double ks) {
        auto c = base;
        c.lambda_gi = gi;
        c.lambda_ks = ks;
        arms.emplace_back(std::move(name), c);
    };
    arm("factual", 0.0, 0.0);
    if (o.ablate) {
        arm("gi", base.lambda_gi, 0.0);
        arm("ks", 0.0, base.lambda_ks);
    }
    arm("giks", base.lambda_gi, base.lambda_ks);

    const fs::path root(*out_dir);
    fs::create_directories(root);
    std::vector<std::vector<ArmResult>> results(seeds.size(),
                                                std::vector<ArmResult>(arms.size()));
    std::mutex log_mutex;

    auto run_seed = [&](std::size_t k) {
        const std::uint64_t seed = seeds[k];
        const fs::path seed_dir = root / ("seed_" + std::to_string(seed));
        auto s_spec = spec;
        s_spec.noise_seed = seed;
        std::optional<data::GeneratedData> gen;
        try {
            gen = data::generate(s_spec);
            write_generated(seed_dir, s_spec, gen->data);
        } catch (const std::exception& e) {
            for (auto& r : results[k]) r.status = std::string("failed: ") + e.what();
            return;
        }
        for (std::size_t a = 0; a < arms.size(); ++a) {
            auto& r = results[k][a];
            auto cfg = arms[a].second;
            cfg.seed = seed;
            const fs::path arm_dir = seed_dir / arms[a].first;
            try {
                fs::create_directories(arm_dir);
                const auto s = data::split(gen->data, cfg.val_fraction, cfg.seed);
                const auto result = trainer::train_giks(s.train, s.val, cfg);
                model::save_checkpoint(arm_dir / "model.json", result.model,
                                       checkpoint_extra(result.report, s));
                write_json(arm_dir / "report.json", trainer::to_json(result.report));
                const model::Estimator est(result.model);
                r.cf_error = metrics::cf_error(est, gen->test, &gen->oracle);
                r.factual_rmse = metrics::factual_rmse(est, gen->test);
                r.amse = metrics::amse(est, gen->test, &gen->oracle, gen->data.t, seed);
                r.dpe = metrics::dpe(est, gen->test, &gen->oracle);
                r.best_epoch = result.report.best_epoch;
            } catch (const trainer::TrainingAborted& e) {
                r.status = std::string("failed: ") + e.what();
                try {
                    write_json(arm_dir / "report.json", trainer::to_json(e.report()));
                } catch (const std::exception&) {
                }
            } catch (const std::exception& e) {
                r.status = std::string("failed: ") + e.what();
            }
            std::lock_guard lock(log_mutex);
            err << "seed " << seed << " " << arms[a].first << ": "
                << (r.status == "ok" ? "cf_error " + fmt_short(r.cf_error) : r.status) << '\n';
        }
    };

    const std::size_t n_threads = sweep_threads(o.threads, seeds.size());
    if (n_threads == 1) {
        for (std::size_t k = 0; k < seeds.size(); ++k) run_seed(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < seeds.size(); k = next++) run_seed(k);
            });
        }
        for (auto& t : pool) t.join();
    }

    // Aggregate per arm; p-values pair each arm with GIKS on seeds where both ran.
    const std::size_t giks_arm = arms.size() - 1;
    bool partial = false;
    std::size_t failures = 0;
    json arms_json = json::object();
    json p_values = json::object();
    std::ofstream csv(root / "sweep.csv", std::ios::binary);
    if (!csv) throw IntegrityError("cannot write sweep.csv");
    csv << "arm,seed,status,cf_error,cf_error_std,factual_rmse,amse,dpe\n";
    for (std::size_t a = 0; a < arms.size(); ++a) {
        std::vector<double> cf;
        json per_seed = json::array();
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            const auto& r = results[k][a];
            csv << arms[a].first << ',' << seeds[k] << ',' << (r.status == "ok" ? "ok" : "failed");
            if (r.status == "ok") {
                cf.push_back(r.cf_error);
                csv << ',' << fmt(r.cf_error) << ",," << fmt(r.factual_rmse) << ',' << fmt(r.amse)
                    << ',' << fmt(r.dpe) << '\n';
                per_seed.push_back({{"seed", seeds[k]},
                                    {"status", "ok"},
                                    {"cf_error", r.cf_error},
                                    {"factual_rmse", r.factual_rmse},
                                    {"amse", r.amse},
                                    {"dpe", r.dpe},
                                    {"best_epoch", r.best_epoch}});
            } else {
                partial = true;
                ++failures;
                csv << ",,,,\n";
                per_seed.push_back({{"seed", seeds[k]}, {"status", r.status}});
            }
        }
        json summary = {{"runs", per_seed}, {"completed", cf.size()}};
        if (!cf.empty()) {
            summary["cf_error_mean"] = mean_of(cf);
            summary["cf_error_std"] = std_of(cf);
            csv << arms[a].first << ",aggregate," << (cf.size() == seeds.size() ? "ok" : "partial")
                << ',' << fmt(mean_of(cf)) << ',' << fmt(std_of(cf)) << ",,,\n";
        } else {
            csv << arms[a].first << ",aggregate,failed,,,,,\n";
        }
        arms_json[arms[a].first] = summary;

        if (a == giks_arm) continue;
        std::vector<double> mine;
        std::vector<double> theirs;
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            if (results[k][a].status == "ok" && results[k][giks_arm].status == "ok") {
                mine.push_back(results[k][a].cf_error);
                theirs.push_back(results[k][giks_arm].cf_error);
            }
        }
        const std::string name = arms[a].first + "_vs_giks";
        p_values[name] = mine.size() >= 2 ? json(metrics::paired_ttest_onesided(mine, theirs))
                                          : json(nullptr);
    }
    if (!csv) throw IntegrityError("failed writing sweep.csv");

    json arm_configs = json::object();
    for (const auto& [name, cfg] : arms) arm_configs[name] = trainer::to_json(cfg);
    write_json(root / "sweep.json", {{"generator", data::to_json(spec)},
                                     {"seeds", seeds},
                                     {"arm_configs", arm_configs},
                                     {"arms", arms_json},
                                     {"p_values", p_values},
                                     {"partial", partial},
                                     {"failures", failures}});

    for (std::size_t a = 0; a < arms.size(); ++a) {
        const auto& s = arms_json[arms[a].first];
        out << arms[a].first << ": ";
        if (s.contains("cf_error_mean")) {
            out << "cf_error " << fmt_short(s["cf_error_mean"].get<double>()) << " ("
                << fmt_short(s["cf_error_std"].get<double>()) << ")";
        } else {
            out << "no completed runs";
        }
        const std::string key = arms[a].first + "_vs_giks";
        if (p_values.contains(key) && p_values[key].is_number())
            out << ", p vs giks " << fmt_short(p_values[key].get<double>());
        out << '\n';
    }
    if (partial) out << "partial sweep: " << failures << " run(s) failed\n";
    return failures == seeds.size() * arms.size() ? kExitTrainingAbort : kExitOk;
}

// ---------------------------------------------------------------------------
// hsic

struct HsicOptions {
    std::string run;
    std::optional<std::string> out;
    std::size_t max_pairs = 3000;
    std::uint64_t seed = 0;
};

double hsic_of(const data::Dataset& d, const std::vector<std::size_t>& rows,
               const std::vector<double>& t, std::size_t max_pairs, std::uint64_t seed) {
    std::vector<std::size_t> pick(rows.size());
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    if (pick.size() > max_pairs) {
        std::mt19937_64 rng(seed);
        std::shuffle(pick.begin(), pick.end(), rng);
        pick.resize(max_pairs);
        std::sort(pick.begin(), pick.end());
    }
    diffnet::Tensor2 x(pick.size(), d.dim());
    diffnet::Tensor2 tt(pick.size(), 1);
    for (std::size_t k = 0; k < pick.size(); ++k) {
        const auto src = d.x.row_span(rows[pick[k]]);
        std::copy(src.begin(), src.end(), x.row_span(k).begin());
        tt(k, 0) = t[pick[k]];
    }
    return metrics::hsic(x, tt);
}

int cmd_hsic(const HsicOptions& o, std::ostream& out) {
    const fs::path dir(o.run);
    require_file(dir / "data.csv", "run dataset");
    require_file(dir / "augmented.csv", "augmented-pairs export");
    if (o.max_pairs < 4) throw UsageError("--max-pairs must be >= 4");
    const auto d = data::read_csv(dir / "data.csv");
    const auto pairs = augment::read_augmented_csv((dir / "augmented.csv").string());

    std::vector<std::size_t> obs_rows;
    std::vector<double> obs_t;
    std::vector<std::size_t> all_rows;
    std::vector<double> all_t;
    std::size_t gi = 0;
    std::size_t ks = 0;
    for (const auto& p : pairs) {
        if (p.instance_index >= d.size()) {
            throw IntegrityError("augmented pair refers to row " +
                                 std::to_string(p.instance_index) + " beyond the dataset");
        }
        all_rows.push_back(p.instance_index);
        all_t.push_back(p.t_value);
        switch (p.source) {
        case augment::AugmentedPair::Source::Observed:
            obs_rows.push_back(p.instance_index);
            obs_t.push_back(p.t_value);
            break;
        case augment::AugmentedPair::Source::Gi: ++gi; break;
        case augment::AugmentedPair::Source::Ks: ++ks; break;
        }
    }
    if (obs_rows.size() < 4) throw UsageError("the export needs at least four observed pairs");
    if (gi + ks == 0) throw UsageError("the export has no augmented pairs (factual run?)");

    const double h_obs = hsic_of(d, obs_rows, obs_t, o.max_pairs, o.seed);
    const double h_aug = hsic_of(d, all_rows, all_t, o.max_pairs, o.seed);
    const json doc{
        {"observed", {{"hsic", h_obs}, {"n", obs_rows.size()}}},
        {"augmented", {{"hsic", h_aug}, {"n", all_rows.size()}, {"gi", gi}, {"ks", ks}}},
        {"reduction_ratio", h_obs > 0.0 ? json(h_aug / h_obs) : json(nullptr)},
        {"max_pairs", o.max_pairs},
    };
    const fs::path target = o.out ? fs::path(*o.out) : dir / "hsic.json";
    write_json(target, doc);
    out << "hsic observed " << fmt_short(h_obs) << ", observed+augmented " << fmt_short(h_aug)
        << " -> " << target.string() << '\n';
    return kExitOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Continuous treatment effect estimation with counterfactual augmentation",
                 "giks"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic observational dataset");
    gen_cmd->add_option("--config", gen.config, "Run config JSON with a generator section");
    gen_cmd->add_option("--kind", gen.kind, "synthetic-simple | ihdp | news | tcga | tcga-0..2");
    gen_cmd->add_option("--variant", gen.variant, "TCGA variant")->check(CLI::Range(0, 2));
    gen_cmd->add_option("--n", gen.n, "Number of rows");
    gen_cmd->add_option("--d", gen.d, "Covariate count (0 = kind default)");
    gen_cmd->add_option("--seed", gen.seed, "Generator seed");
    gen_cmd->add_option("--dosage-bias", gen.dosage_bias, "TCGA dosage selection bias");
    gen_cmd->add_option("--test-n", gen.test_n, "Held-out rows regenerated for evaluation");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();

    TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
    train_cmd->add_option("--config", train.config, "Run config JSON");
    train_cmd->add_option("--data", train.data, "Dataset CSV");
    train_cmd->add_option("--meta", train.meta, "Dataset metadata (default: meta.json beside it)");
    train_cmd->add_option("--out", train.out, "Output directory");
    add_training_flags(train_cmd, train.flags);

    EvalOptions ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--model", ev.model, "Checkpoint (model.json)")->required();
    eval_cmd->add_option("--data", ev.data, "Dataset CSV")->required();
    eval_cmd->add_option("--meta", ev.meta, "Dataset metadata (default: meta.json beside it)");
    eval_cmd->add_option("--out", ev.out, "metrics.json path (default: beside the model)");
    eval_cmd->add_option("--adrf-out", ev.adrf_out, "Write per-instance curves on the grid");
    eval_cmd->add_option("--grid-size", ev.grid_size, "Treatment grid size for cf_error");
    eval_cmd->add_option("--amse-draws", ev.amse_draws, "Treatment draws per instance for AMSE");
    eval_cmd->add_option("--seed", ev.seed, "Seed for AMSE draws");

    SweepOptions sw;
    auto* sweep_cmd = app.add_subcommand("sweep", "Factual vs GIKS over several seeds");
    sweep_cmd->add_option("--config", sw.config, "Run config JSON");
    sweep_cmd->add_option("--kind", sw.kind, "Generator kind");
    sweep_cmd->add_option("--variant", sw.variant, "TCGA variant")->check(CLI::Range(0, 2));
    sweep_cmd->add_option("--n", sw.n, "Rows per dataset");
    sweep_cmd->add_option("--test-n", sw.test_n, "Held-out rows (default 1000)");
    sweep_cmd->add_option("--seeds", sw.seeds, "Seeds, e.g. --seeds 0 1 2 3 4")->delimiter(',');
    sweep_cmd->add_option("--out", sw.out, "Output directory");
    sweep_cmd->add_flag("--ablate-losses", sw.ablate, "Also train GI-only and KS-only arms");
    sweep_cmd->add_option("--threads", sw.threads, "Concurrent seeds (GIKS_THREADS also caps)");
    add_training_flags(sweep_cmd, sw.flags);

    HsicOptions hs;
    auto* hsic_cmd = app.add_subcommand("hsic", "HSIC(X, T) of observed vs augmented pairs");
    hsic_cmd->add_option("--run", hs.run, "Training output directory")->required();
    hsic_cmd->add_option("--out", hs.out, "hsic.json path (default: inside the run)");
    hsic_cmd->add_option("--max-pairs", hs.max_pairs, "Subsample larger pair sets to this size");
    hsic_cmd->add_option("--seed", hs.seed, "Subsampling seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (*gen_cmd) return cmd_gen(gen, out);
        if (*train_cmd) return cmd_train(train, out, err);
        if (*eval_cmd) return cmd_eval(ev, out);
        if (*sweep_cmd) return cmd_sweep(sw, out, err);
        if (*hsic_cmd) return cmd_hsic(hs, out);
    } catch (const TrainingError& e) {
        err << "error: " << e.what() << '\n';
        return kExitTrainingAbort;
    } catch (const IntegrityError& e) {
        err << "corrupt artifact: " << e.what() << '\n';
        return kExitCorrupt;
    } catch (const ParseError& e) {
        err << "corrupt artifact: " << e.what() << '\n';
        return kExitCorrupt;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitTrainingAbort;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace giks::cli
