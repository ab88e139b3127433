#include "fsel/fsel.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <new>
#include <string>

#include "encoder.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "external.hpp"
#include "manifest.hpp"
#include "strategies.hpp"
#include "synthetic.hpp"

struct fsel_manifest {
    fsel::DatasetManifest manifest;
    std::filesystem::path base_dir;
};

struct fsel_provider {
    std::shared_ptr<const fsel::EmbeddingProvider> impl;
};

struct fsel_selection {
    fsel::SelectionResult result;
};

struct fsel_report {
    fsel::EvalReport report;
    std::vector<fsel::EvalAggregate> aggregates;
};

namespace {

thread_local std::string g_last_error;

fsel_status to_status(fsel::ErrorCode code) {
    using fsel::ErrorCode;
    switch (code) {
        case ErrorCode::InvalidArgument: return FSEL_ERR_INVALID_ARGUMENT;
        case ErrorCode::Parse: return FSEL_ERR_PARSE;
        case ErrorCode::Io: return FSEL_ERR_IO;
        case ErrorCode::DuplicateId: return FSEL_ERR_DUPLICATE_ID;
        case ErrorCode::Budget: return FSEL_ERR_BUDGET;
        case ErrorCode::DimMismatch: return FSEL_ERR_DIM_MISMATCH;
        case ErrorCode::Degenerate: return FSEL_ERR_DEGENERATE;
        case ErrorCode::Provider: return FSEL_ERR_PROVIDER;
        case ErrorCode::Validation: return FSEL_ERR_VALIDATION;
        case ErrorCode::Diverged: return FSEL_ERR_DIVERGED;
    }
    return FSEL_ERR_INTERNAL;
}

fsel_status fail(fsel_status status, std::string message) {
    g_last_error = std::move(message);
    return status;
}

template <typename Fn>
fsel_status guarded(Fn&& fn) {
    try {
        fn();
        return FSEL_OK;
    } catch (const fsel::Error& e) {
        return fail(to_status(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(FSEL_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(FSEL_ERR_INTERNAL, e.what());
    }
}

void require(bool cond, const char* message) {
    if (!cond) throw fsel::Error(fsel::ErrorCode::InvalidArgument, message);
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

std::optional<fsel::Split> split_arg(const char* split) {
    if (split == nullptr) return std::nullopt;
    auto parsed = fsel::parse_split(split);
    if (!parsed) throw fsel::Error(fsel::ErrorCode::InvalidArgument, std::string("unknown split '") + split + "'");
    return parsed;
}

fsel::Metric metric_arg(const char* metric) {
    if (metric == nullptr || *metric == '\0') return fsel::Metric::Cosine;
    auto parsed = fsel::parse_metric(metric);
    if (!parsed) throw fsel::Error(fsel::ErrorCode::InvalidArgument, std::string("unknown metric '") + metric + "'");
    return *parsed;
}

fsel::Strategy strategy_arg(const char* name) {
    require(name != nullptr, "strategy is required");
    auto parsed = fsel::parse_strategy(name);
    if (!parsed) throw fsel::Error(fsel::ErrorCode::InvalidArgument, std::string("unknown strategy '") + name + "'");
    return *parsed;
}

fsel::LinearProbeConfig probe_arg(const fsel_probe_options* probe) {
    fsel::LinearProbeConfig cfg;
    if (probe != nullptr) {
        cfg.epochs = probe->epochs;
        cfg.learning_rate = probe->learning_rate;
        cfg.l2_penalty = probe->l2_penalty;
        cfg.seed = probe->seed;
    }
    cfg.validate();
    return cfg;
}

fsel::ClassPrototypes validation_prototypes(fsel::EmbeddingTable& table) {
    fsel::ClassPrototypes protos{{}, fsel::PrototypeSource::ValidationCentroids};
    for (auto& c : fsel::class_centroids(table.grouped(fsel::Split::Validation))) protos.per_class.push_back(std::move(c.centroid));
    return protos;
}

}  // namespace

extern "C" {

const char* fsel_version(void) { return "0.1.0"; }

const char* fsel_last_error(void) { return g_last_error.c_str(); }

const char* fsel_status_name(fsel_status status) {
    switch (status) {
        case FSEL_OK: return "ok";
        case FSEL_ERR_INVALID_ARGUMENT: return "invalid argument";
        case FSEL_ERR_PARSE: return "parse error";
        case FSEL_ERR_IO: return "i/o error";
        case FSEL_ERR_DUPLICATE_ID: return "duplicate id";
        case FSEL_ERR_BUDGET: return "budget violation";
        case FSEL_ERR_DIM_MISMATCH: return "dimension mismatch";
        case FSEL_ERR_DEGENERATE: return "degenerate embedding";
        case FSEL_ERR_PROVIDER: return "provider failure";
        case FSEL_ERR_VALIDATION: return "validation error";
        case FSEL_ERR_DIVERGED: return "training diverged";
        case FSEL_ERR_INTERNAL: return "internal error";
    }
    return "unknown";
}

void fsel_string_free(char* str) { std::free(str); }

// ---- manifests ------------------------------------------------------------

fsel_status fsel_manifest_load(const char* path, fsel_manifest** out) {
    return guarded([&] {
        require(path != nullptr && out != nullptr, "path and out are required");
        auto m = std::make_unique<fsel_manifest>();
        m->manifest = fsel::load_manifest(path);
        m->base_dir = std::filesystem::path(path).parent_path();
        *out = m.release();
    });
}

fsel_status fsel_manifest_save(const fsel_manifest* manifest, const char* path) {
    return guarded([&] {
        require(manifest != nullptr && path != nullptr, "manifest and path are required");
        fsel::save_manifest(path, manifest->manifest);
    });
}

fsel_status fsel_manifest_synthesize(const char* spec, fsel_manifest** out) {
    return guarded([&] {
        require(spec != nullptr && out != nullptr, "spec and out are required");
        auto m = std::make_unique<fsel_manifest>();
        m->manifest = fsel::generate_synthetic(fsel::load_synthetic_spec(spec));
        *out = m.release();
    });
}

void fsel_manifest_free(fsel_manifest* manifest) { delete manifest; }

size_t fsel_manifest_size(const fsel_manifest* manifest) { return manifest ? manifest->manifest.size() : 0; }

int fsel_manifest_num_classes(const fsel_manifest* manifest) { return manifest ? manifest->manifest.num_classes() : 0; }

size_t fsel_manifest_count(const fsel_manifest* manifest, const char* split, int label) {
    if (manifest == nullptr || split == nullptr) return 0;
    auto s = fsel::parse_split(split);
    if (!s) return 0;
    return label < 0 ? manifest->manifest.count(*s) : manifest->manifest.count(*s, label);
}

const char* fsel_manifest_item_id(const fsel_manifest* manifest, size_t index) {
    if (manifest == nullptr || index >= manifest->manifest.size()) return nullptr;
    return manifest->manifest.items()[index].id.c_str();
}

int fsel_manifest_item_label(const fsel_manifest* manifest, size_t index) {
    if (manifest == nullptr || index >= manifest->manifest.size()) return -1;
    return manifest->manifest.items()[index].label;
}

int fsel_manifest_item_is_outlier(const fsel_manifest* manifest, size_t index) {
    if (manifest == nullptr || index >= manifest->manifest.size()) return 0;
    return manifest->manifest.items()[index].outlier ? 1 : 0;
}

fsel_status fsel_manifest_validate_budget(const fsel_manifest* manifest, size_t shots) {
    return guarded([&] {
        require(manifest != nullptr, "manifest is required");
        fsel::validate_budget(manifest->manifest, {shots, manifest->manifest.num_classes()});
    });
}

// ---- providers ------------------------------------------------------------

fsel_status fsel_provider_reference(size_t dim, uint64_t proj_seed, fsel_provider** out) {
    return guarded([&] {
        require(out != nullptr, "out is required");
        auto p = std::make_unique<fsel_provider>();
        p->impl = std::make_shared<fsel::ReferenceEncoder>(fsel::ReferenceEncoderConfig{proj_seed, dim});
        *out = p.release();
    });
}

fsel_status fsel_provider_cache(const char* path, const fsel_provider* fallback, fsel_provider** out) {
    return guarded([&] {
        require(path != nullptr && out != nullptr, "path and out are required");
        auto cache = std::make_shared<const fsel::EmbeddingCache>(fsel::EmbeddingCache::read(path));
        auto p = std::make_unique<fsel_provider>();
        p->impl = std::make_shared<fsel::CacheProvider>(std::move(cache), fallback ? fallback->impl : nullptr);
        *out = p.release();
    });
}

void fsel_external_options_init(fsel_external_options* options) {
    if (options == nullptr) return;
    const fsel::ExternalConfig defaults;
    options->dim = defaults.dim;
    options->max_retries = defaults.max_retries;
    options->initial_backoff_ms = static_cast<uint32_t>(defaults.initial_backoff.count());
    options->timeout_ms = 0;
    options->batch_size = defaults.batch_size;
    options->max_in_flight = defaults.max_in_flight;
}

fsel_status fsel_provider_external(const char* url, const fsel_external_options* options, fsel_provider** out) {
    return guarded([&] {
        require(url != nullptr && out != nullptr, "url and out are required");
        fsel_external_options opts;
        fsel_external_options_init(&opts);
        if (options != nullptr) opts = *options;
        fsel::ExternalConfig cfg;
        cfg.url = url;
        cfg.dim = opts.dim;
        cfg.max_retries = opts.max_retries;
        cfg.initial_backoff = std::chrono::milliseconds(opts.initial_backoff_ms);
        cfg.timeout = opts.timeout_ms > 0 ? std::chrono::milliseconds(opts.timeout_ms) : fsel::embed_timeout_from_env();
        cfg.batch_size = opts.batch_size;
        cfg.max_in_flight = opts.max_in_flight;
        auto p = std::make_unique<fsel_provider>();
        p->impl = std::make_shared<fsel::ExternalEmbeddingClient>(std::move(cfg));
        *out = p.release();
    });
}

void fsel_provider_free(fsel_provider* provider) { delete provider; }

size_t fsel_provider_dim(const fsel_provider* provider) { return provider ? provider->impl->dim() : 0; }

fsel_status fsel_embed_item(const fsel_provider* provider, const fsel_manifest* manifest, size_t index, float* out,
                            size_t out_len) {
    return guarded([&] {
        require(provider != nullptr && manifest != nullptr && out != nullptr, "provider, manifest and out are required");
        require(index < manifest->manifest.size(), "item index out of range");
        const auto e = fsel::embed_item(*provider->impl, manifest->manifest.items()[index], manifest->base_dir);
        if (out_len < e.dim()) throw fsel::Error(fsel::ErrorCode::InvalidArgument, "output buffer smaller than provider dim");
        for (std::size_t k = 0; k < e.dim(); ++k) out[k] = static_cast<float>(e[k]);
    });
}

fsel_status fsel_embed_manifest(const fsel_provider* provider, const fsel_manifest* manifest, const char* cache_path,
                                int resume, fsel_embed_stats* stats) {
    return guarded([&] {
        require(provider != nullptr && manifest != nullptr && cache_path != nullptr, "provider, manifest and cache path are required");
        const auto& m = manifest->manifest;
        const std::size_t dim = provider->impl->dim();

        std::unique_ptr<fsel::EmbeddingCache> cache;
        if (resume != 0 && std::filesystem::exists(cache_path)) {
            cache = std::make_unique<fsel::EmbeddingCache>(fsel::EmbeddingCache::read(std::filesystem::path(cache_path)));
            if (cache->dim() != dim) {
                throw fsel::Error(fsel::ErrorCode::DimMismatch, "existing cache dim " + std::to_string(cache->dim()) +
                                                                    " does not match provider dim " + std::to_string(dim));
            }
        } else {
            cache = std::make_unique<fsel::EmbeddingCache>(dim);
        }

        std::vector<std::size_t> missing;
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (!cache->contains(m.items()[i].id)) missing.push_back(i);
        }
        const std::size_t reused = m.size() - missing.size();
        const auto embedded = fsel::embed_items(*provider->impl, m, missing, manifest->base_dir);
        for (std::size_t k = 0; k < missing.size(); ++k) cache->insert(m.items()[missing[k]].id, embedded[k]);
        cache->write(std::filesystem::path(cache_path));

        if (stats != nullptr) {
            stats->total = m.size();
            stats->embedded = missing.size();
            stats->reused = reused;
            stats->dim = dim;
        }
    });
}

// ---- selection ------------------------------------------------------------

void fsel_select_options_init(fsel_select_options* options) {
    if (options == nullptr) return;
    const fsel::NoiseConfig noise;
    options->strategy = "random";
    options->shots = 1;
    options->seed = 0;
    options->mu = noise.mu;
    options->sigma = noise.sigma;
    options->variants = noise.variants;
    options->noise_seed = noise.base_seed;
    options->temperature = 100.0;
    options->metric = "cosine";
    options->prototypes = nullptr;
    options->jobs = 1;
}

fsel_status fsel_select(const fsel_manifest* manifest, const fsel_provider* provider, const fsel_select_options* options,
                        fsel_selection** out) {
    return guarded([&] {
        require(manifest != nullptr && provider != nullptr && options != nullptr && out != nullptr,
                "manifest, provider, options and out are required");
        fsel::StrategyConfig cfg;
        cfg.strategy = strategy_arg(options->strategy);
        cfg.shots = options->shots;
        cfg.seed = options->seed;
        cfg.noise = {options->mu, options->sigma, options->variants, options->noise_seed};
        cfg.temperature = options->temperature;
        cfg.metric = metric_arg(options->metric);
        cfg.jobs = options->jobs;

        fsel::validate_budget(manifest->manifest, {cfg.shots, manifest->manifest.num_classes()});
        fsel::EmbeddingTable table(manifest->manifest, *provider->impl, manifest->base_dir);
        if (cfg.strategy == fsel::Strategy::Entropy || cfg.strategy == fsel::Strategy::Margin) {
            if (options->prototypes == nullptr || *options->prototypes == '\0') {
                throw fsel::Error(fsel::ErrorCode::InvalidArgument, "prototypes required for " + std::string(options->strategy));
            }
            cfg.prototypes = std::strcmp(options->prototypes, "validation") == 0
                                 ? validation_prototypes(table)
                                 : fsel::load_text_prototypes(options->prototypes, manifest->manifest.num_classes());
        }
        auto s = std::make_unique<fsel_selection>();
        s->result = fsel::select(table, cfg);
        fsel::check_selection(manifest->manifest, s->result, cfg.shots);
        *out = s.release();
    });
}

fsel_status fsel_selection_load(const char* path, fsel_selection** out) {
    return guarded([&] {
        require(path != nullptr && out != nullptr, "path and out are required");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw fsel::Error(fsel::ErrorCode::Io, std::string("cannot open selection '") + path + "'");
        const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        auto s = std::make_unique<fsel_selection>();
        s->result = fsel::selection_from_json(text);
        *out = s.release();
    });
}

fsel_status fsel_selection_to_json(const fsel_selection* selection, const char* generated_at, char** out) {
    return guarded([&] {
        require(selection != nullptr && out != nullptr, "selection and out are required");
        *out = dup_string(fsel::selection_to_json(selection->result, generated_at ? generated_at : ""));
    });
}

fsel_status fsel_selection_write(const fsel_selection* selection, const char* generated_at, const char* path) {
    return guarded([&] {
        require(selection != nullptr && path != nullptr, "selection and path are required");
        const auto text = fsel::selection_to_json(selection->result, generated_at ? generated_at : "");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw fsel::Error(fsel::ErrorCode::Io, std::string("cannot write '") + path + "'");
        out << text;
    });
}

size_t fsel_selection_class_size(const fsel_selection* selection, int class_id) {
    if (selection == nullptr) return 0;
    auto it = selection->result.classes.find(class_id);
    return it == selection->result.classes.end() ? 0 : it->second.size();
}

const char* fsel_selection_item_id(const fsel_selection* selection, int class_id, size_t rank) {
    if (rank >= fsel_selection_class_size(selection, class_id)) return nullptr;
    return selection->result.classes.at(class_id)[rank].id.c_str();
}

double fsel_selection_item_score(const fsel_selection* selection, int class_id, size_t rank) {
    if (rank >= fsel_selection_class_size(selection, class_id)) return std::numeric_limits<double>::quiet_NaN();
    return selection->result.classes.at(class_id)[rank].score;
}

void fsel_selection_free(fsel_selection* selection) { delete selection; }

// ---- evaluation -----------------------------------------------------------

void fsel_probe_options_init(fsel_probe_options* options) {
    if (options == nullptr) return;
    const fsel::LinearProbeConfig defaults;
    options->epochs = defaults.epochs;
    options->learning_rate = defaults.learning_rate;
    options->l2_penalty = defaults.l2_penalty;
    options->seed = defaults.seed;
}

fsel_status fsel_evaluate(const fsel_manifest* manifest, const fsel_provider* provider, const fsel_selection* selection,
                          const char* classifier, const fsel_probe_options* probe, double* accuracy) {
    return guarded([&] {
        require(manifest != nullptr && provider != nullptr && selection != nullptr && accuracy != nullptr,
                "manifest, provider, selection and accuracy are required");
        auto kind = fsel::parse_classifier(classifier ? classifier : "linear-probe");
        if (!kind) throw fsel::Error(fsel::ErrorCode::InvalidArgument, std::string("unknown classifier '") + classifier + "'");
        fsel::EmbeddingTable table(manifest->manifest, *provider->impl, manifest->base_dir);
        *accuracy = fsel::evaluate_selection(table, selection->result, *kind, probe_arg(probe));
    });
}

void fsel_benchmark_options_init(fsel_benchmark_options* options) {
    if (options == nullptr) return;
    std::memset(options, 0, sizeof *options);
    fsel_probe_options_init(&options->probe);
    const fsel::NoiseConfig noise;
    options->classifier = "linear-probe";
    options->mu = noise.mu;
    options->sigma = noise.sigma;
    options->variants = noise.variants;
    options->noise_seed = noise.base_seed;
    options->temperature = 100.0;
    options->metric = "cosine";
    options->jobs = 1;
}

fsel_status fsel_benchmark(const fsel_manifest* manifest, const fsel_provider* provider,
                           const fsel_benchmark_options* options, fsel_report** out) {
    return guarded([&] {
        require(manifest != nullptr && provider != nullptr && options != nullptr && out != nullptr,
                "manifest, provider, options and out are required");
        require(options->n_strategies == 0 || options->strategies != nullptr, "strategies array is null");
        require(options->n_shots == 0 || options->shots != nullptr, "shots array is null");
        require(options->n_seeds == 0 || options->seeds != nullptr, "seeds array is null");

        fsel::ExperimentConfig cfg;
        for (std::size_t i = 0; i < options->n_strategies; ++i) cfg.strategies.push_back(strategy_arg(options->strategies[i]));
        cfg.shots.assign(options->shots, options->shots + options->n_shots);
        cfg.seeds.assign(options->seeds, options->seeds + options->n_seeds);
        auto kind = fsel::parse_classifier(options->classifier ? options->classifier : "linear-probe");
        if (!kind) throw fsel::Error(fsel::ErrorCode::InvalidArgument, std::string("unknown classifier '") + options->classifier + "'");
        cfg.classifier = *kind;
        cfg.probe = probe_arg(&options->probe);
        cfg.noise = {options->mu, options->sigma, options->variants, options->noise_seed};
        cfg.temperature = options->temperature;
        cfg.metric = metric_arg(options->metric);
        if (options->prototypes != nullptr && *options->prototypes != '\0') {
            cfg.prototypes = fsel::load_text_prototypes(options->prototypes, manifest->manifest.num_classes());
        }
        cfg.jobs = options->jobs;

        fsel::EmbeddingTable table(manifest->manifest, *provider->impl, manifest->base_dir);
        auto r = std::make_unique<fsel_report>();
        r->report = fsel::run_experiment(table, cfg);
        r->aggregates = r->report.aggregates();
        *out = r.release();
    });
}

size_t fsel_report_row_count(const fsel_report* report) { return report ? report->report.rows.size() : 0; }

size_t fsel_report_failed_rows(const fsel_report* report) { return report ? report->report.failed_rows() : 0; }

fsel_status fsel_report_row(const fsel_report* report, size_t index, const char** strategy, size_t* shots,
                            uint64_t* seed, double* accuracy, const char** error) {
    return guarded([&] {
        require(report != nullptr && index < report->report.rows.size(), "row index out of range");
        const auto& row = report->report.rows[index];
        if (strategy) *strategy = row.strategy.c_str();
        if (shots) *shots = row.shots;
        if (seed) *seed = row.seed;
        if (accuracy) *accuracy = row.accuracy.value_or(std::numeric_limits<double>::quiet_NaN());
        if (error) *error = row.error.c_str();
    });
}

size_t fsel_report_aggregate_count(const fsel_report* report) { return report ? report->aggregates.size() : 0; }

fsel_status fsel_report_aggregate(const fsel_report* report, size_t index, const char** strategy, size_t* shots,
                                  double* mean, double* std, size_t* n_seeds) {
    return guarded([&] {
        require(report != nullptr && index < report->aggregates.size(), "aggregate index out of range");
        const auto& a = report->aggregates[index];
        if (strategy) *strategy = a.strategy.c_str();
        if (shots) *shots = a.shots;
        if (mean) *mean = a.mean;
        if (std) *std = a.std;
        if (n_seeds) *n_seeds = a.n_seeds;
    });
}

fsel_status fsel_report_csv(const fsel_report* report, int dedupe, char** out) {
    return guarded([&] {
        require(report != nullptr && out != nullptr, "report and out are required");
        *out = dup_string(report->report.to_csv(dedupe != 0));
    });
}

fsel_status fsel_report_json(const fsel_report* report, char** out) {
    return guarded([&] {
        require(report != nullptr && out != nullptr, "report and out are required");
        *out = dup_string(report->report.aggregates_json().dump(2) + "\n");
    });
}

void fsel_report_free(fsel_report* report) { delete report; }

fsel_status fsel_diagnose(const fsel_manifest* manifest, const fsel_provider* provider, const char* split, uint64_t seed,
                          fsel_generality* out) {
    return guarded([&] {
        require(manifest != nullptr && provider != nullptr && out != nullptr, "manifest, provider and out are required");
        const auto& m = manifest->manifest;
        std::vector<std::size_t> indices;
        if (auto s = split_arg(split)) {
            indices = m.indices(*s);
        } else {
            indices.resize(m.size());
            for (std::size_t i = 0; i < m.size(); ++i) indices[i] = i;
        }
        const auto embeddings = fsel::embed_items(*provider->impl, m, indices, manifest->base_dir);
        const auto g = fsel::generality_diagnostic(embeddings, seed);
        out->percent = g.percent;
        out->sampled = g.sampled ? 1 : 0;
        out->n_used = g.n_used;
        out->n_total = embeddings.size();
    });
}

}  // extern "C"
