/*
 * fsel: few-shot example selection in embedding space.
 *
 * C interface over the C++ core. Objects are opaque handles created by
 * fsel_*_create / fsel_*_load functions and released with the matching
 * fsel_*_free. Every fallible call returns an fsel_status; on failure the
 * message is available from fsel_last_error() on the same thread until the
 * next failing call.
 *
 * Strings returned through `char**` out-parameters are owned by the caller and
 * must be released with fsel_string_free.
 */
#ifndef FSEL_FSEL_H
#define FSEL_FSEL_H

#include <stddef.h>
#include <stdint.h>

#if defined(FSEL_BUILDING_LIBRARY)
#define FSEL_API __attribute__((visibility("default")))
#else
#define FSEL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fsel_status {
    FSEL_OK = 0,
    FSEL_ERR_INVALID_ARGUMENT = 1,
    FSEL_ERR_PARSE = 2,
    FSEL_ERR_IO = 3,
    FSEL_ERR_DUPLICATE_ID = 4,
    FSEL_ERR_BUDGET = 5,
    FSEL_ERR_DIM_MISMATCH = 6,
    FSEL_ERR_DEGENERATE = 7,
    FSEL_ERR_PROVIDER = 8,
    FSEL_ERR_VALIDATION = 9,
    FSEL_ERR_DIVERGED = 10,
    FSEL_ERR_INTERNAL = 99
} fsel_status;

typedef struct fsel_manifest fsel_manifest;
typedef struct fsel_provider fsel_provider;
typedef struct fsel_selection fsel_selection;
typedef struct fsel_report fsel_report;

FSEL_API const char* fsel_version(void);
FSEL_API const char* fsel_last_error(void);
FSEL_API const char* fsel_status_name(fsel_status status);
FSEL_API void fsel_string_free(char* str);

/* ---- manifests -------------------------------------------------------- */

FSEL_API fsel_status fsel_manifest_load(const char* path, fsel_manifest** out);
FSEL_API fsel_status fsel_manifest_save(const fsel_manifest* manifest, const char* path);
/* `spec` is "std-bench" or a path to a JSON synthetic spec. */
FSEL_API fsel_status fsel_manifest_synthesize(const char* spec, fsel_manifest** out);
FSEL_API void fsel_manifest_free(fsel_manifest* manifest);

FSEL_API size_t fsel_manifest_size(const fsel_manifest* manifest);
FSEL_API int fsel_manifest_num_classes(const fsel_manifest* manifest);
/* split: "pool", "validation" or "test"; label < 0 counts every class. */
FSEL_API size_t fsel_manifest_count(const fsel_manifest* manifest, const char* split, int label);
FSEL_API const char* fsel_manifest_item_id(const fsel_manifest* manifest, size_t index);
FSEL_API int fsel_manifest_item_label(const fsel_manifest* manifest, size_t index);
FSEL_API int fsel_manifest_item_is_outlier(const fsel_manifest* manifest, size_t index);
FSEL_API fsel_status fsel_manifest_validate_budget(const fsel_manifest* manifest, size_t shots);

/* ---- embedding providers ---------------------------------------------- */

FSEL_API fsel_status fsel_provider_reference(size_t dim, uint64_t proj_seed, fsel_provider** out);

/* Opens a cache file; `fallback` (nullable) serves misses and image
 * encoding and is not consumed. */
FSEL_API fsel_status fsel_provider_cache(const char* path, const fsel_provider* fallback, fsel_provider** out);

typedef struct fsel_external_options {
    size_t dim;
    int max_retries;
    uint32_t initial_backoff_ms;
    /* 0 reads FSEL_EMBED_TIMEOUT_MS, falling back to 30000. */
    uint32_t timeout_ms;
    size_t batch_size;
    size_t max_in_flight;
} fsel_external_options;

FSEL_API void fsel_external_options_init(fsel_external_options* options);
FSEL_API fsel_status fsel_provider_external(const char* url, const fsel_external_options* options, fsel_provider** out);
FSEL_API void fsel_provider_free(fsel_provider* provider);
FSEL_API size_t fsel_provider_dim(const fsel_provider* provider);

/* Writes provider.dim floats for one manifest item into `out`. */
FSEL_API fsel_status fsel_embed_item(const fsel_provider* provider, const fsel_manifest* manifest, size_t index,
                                     float* out, size_t out_len);

typedef struct fsel_embed_stats {
    size_t total;
    size_t embedded;
    size_t reused;
    size_t dim;
} fsel_embed_stats;

/* Embeds every manifest item into a cache file. With `resume`, ids already
 * present in an existing cache at `cache_path` are kept and not re-embedded. */
FSEL_API fsel_status fsel_embed_manifest(const fsel_provider* provider, const fsel_manifest* manifest,
                                         const char* cache_path, int resume, fsel_embed_stats* stats);

/* ---- selection -------------------------------------------------------- */

typedef struct fsel_select_options {
    const char* strategy; /* random | entropy | margin | montecarlo | repre */
    size_t shots;
    uint64_t seed;
    double mu;
    double sigma;
    size_t variants;
    uint64_t noise_seed;
    double temperature;
    const char* metric; /* cosine (default) | euclidean */
    /* Text-prototype file, the literal "validation" for validation-set
     * centroids, or NULL. */
    const char* prototypes;
    size_t jobs;
} fsel_select_options;

FSEL_API void fsel_select_options_init(fsel_select_options* options);
FSEL_API fsel_status fsel_select(const fsel_manifest* manifest, const fsel_provider* provider,
                                 const fsel_select_options* options, fsel_selection** out);
FSEL_API fsel_status fsel_selection_load(const char* path, fsel_selection** out);
/* `generated_at` may be NULL to omit the timestamp field. */
FSEL_API fsel_status fsel_selection_to_json(const fsel_selection* selection, const char* generated_at, char** out);
FSEL_API fsel_status fsel_selection_write(const fsel_selection* selection, const char* generated_at, const char* path);
FSEL_API size_t fsel_selection_class_size(const fsel_selection* selection, int class_id);
FSEL_API const char* fsel_selection_item_id(const fsel_selection* selection, int class_id, size_t rank);
FSEL_API double fsel_selection_item_score(const fsel_selection* selection, int class_id, size_t rank);
FSEL_API void fsel_selection_free(fsel_selection* selection);

/* ---- evaluation ------------------------------------------------------- */

typedef struct fsel_probe_options {
    size_t epochs;
    double learning_rate;
    double l2_penalty;
    uint64_t seed;
} fsel_probe_options;

FSEL_API void fsel_probe_options_init(fsel_probe_options* options);

/* classifier: "linear-probe" | "nearest-centroid" */
FSEL_API fsel_status fsel_evaluate(const fsel_manifest* manifest, const fsel_provider* provider,
                                   const fsel_selection* selection, const char* classifier,
                                   const fsel_probe_options* probe, double* accuracy);

typedef struct fsel_benchmark_options {
    const char* const* strategies;
    size_t n_strategies;
    const size_t* shots;
    size_t n_shots;
    const uint64_t* seeds;
    size_t n_seeds;
    const char* classifier;
    fsel_probe_options probe;
    double mu;
    double sigma;
    size_t variants;
    uint64_t noise_seed;
    double temperature;
    const char* metric;
    /* Text-prototype file or NULL (validation centroids). */
    const char* prototypes;
    size_t jobs;
} fsel_benchmark_options;

FSEL_API void fsel_benchmark_options_init(fsel_benchmark_options* options);
FSEL_API fsel_status fsel_benchmark(const fsel_manifest* manifest, const fsel_provider* provider,
                                    const fsel_benchmark_options* options, fsel_report** out);
FSEL_API size_t fsel_report_row_count(const fsel_report* report);
FSEL_API size_t fsel_report_failed_rows(const fsel_report* report);
/* accuracy is NaN for a failed row; error is "" for a successful one. */
FSEL_API fsel_status fsel_report_row(const fsel_report* report, size_t index, const char** strategy, size_t* shots,
                                     uint64_t* seed, double* accuracy, const char** error);
FSEL_API size_t fsel_report_aggregate_count(const fsel_report* report);
FSEL_API fsel_status fsel_report_aggregate(const fsel_report* report, size_t index, const char** strategy,
                                           size_t* shots, double* mean, double* std, size_t* n_seeds);
FSEL_API fsel_status fsel_report_csv(const fsel_report* report, int dedupe, char** out);
FSEL_API fsel_status fsel_report_json(const fsel_report* report, char** out);
FSEL_API void fsel_report_free(fsel_report* report);

typedef struct fsel_generality {
    double percent;
    int sampled;
    size_t n_used;
    size_t n_total;
} fsel_generality;

/* split may be NULL for every item. */
FSEL_API fsel_status fsel_diagnose(const fsel_manifest* manifest, const fsel_provider* provider, const char* split,
                                   uint64_t seed, fsel_generality* out);

#ifdef __cplusplus
}
#endif

#endif /* FSEL_FSEL_H */
