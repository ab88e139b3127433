// fsel command-line front end. Talks to the library only through the C API.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fsel/fsel.h"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kBudget = 2, kProvider = 3 };

struct CommandError {
    int exit_code;
    std::string message;
};

int exit_code_for(fsel_status status) {
    switch (status) {
        case FSEL_OK: return kOk;
        case FSEL_ERR_BUDGET: return kBudget;
        case FSEL_ERR_PROVIDER:
        case FSEL_ERR_VALIDATION:
        case FSEL_ERR_DIM_MISMATCH:
        case FSEL_ERR_DEGENERATE: return kProvider;
        default: return kFailure;
    }
}

void check(fsel_status status, const std::string& stage) {
    if (status == FSEL_OK) return;
    throw CommandError{exit_code_for(status),
                       stage + ": " + fsel_status_name(status) + ": " + fsel_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};
using ManifestPtr = std::unique_ptr<fsel_manifest, Deleter<fsel_manifest, fsel_manifest_free>>;
using ProviderPtr = std::unique_ptr<fsel_provider, Deleter<fsel_provider, fsel_provider_free>>;
using SelectionPtr = std::unique_ptr<fsel_selection, Deleter<fsel_selection, fsel_selection_free>>;
using ReportPtr = std::unique_ptr<fsel_report, Deleter<fsel_report, fsel_report_free>>;

struct OwnedString {
    char* ptr = nullptr;
    ~OwnedString() { fsel_string_free(ptr); }
    std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CommandError{kFailure, "cannot write '" + path.string() + "'"};
    out << text;
}

// ---------------------------------------------------------------------------
// Shared options

struct SharedOptions {
    std::string manifest;
    std::string synthetic;
    std::string provider = "reference";
    std::string fallback = "none";
    std::size_t dim = 64;
    std::uint64_t proj_seed = 42;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t jobs = 1;
    int retries = 3;
    std::size_t batch_size = 16;
};

void add_shared(CLI::App* cmd, SharedOptions& o, bool synthetic_input) {
    cmd->add_option("--manifest", o.manifest, "JSON-lines dataset manifest");
    if (synthetic_input) {
        cmd->add_option("--synthetic", o.synthetic, "Generate the dataset instead: 'std-bench' or a SyntheticSpec JSON file");
    }
    cmd->add_option("--provider", o.provider, "Embedding provider: reference | cache:PATH | external:URL")
        ->capture_default_str();
    cmd->add_option("--fallback", o.fallback, "Image encoder behind a cache provider: none | reference")
        ->check(CLI::IsMember({"none", "reference"}))
        ->capture_default_str();
    cmd->add_option("--dim", o.dim, "Embedding dimension (reference output dim / external declared dim)")
        ->capture_default_str();
    cmd->add_option("--proj-seed", o.proj_seed, "Projection seed of the reference encoder")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Selection / sampling seed")->capture_default_str();
    cmd->add_option("--jobs", o.jobs, "Worker threads (output is identical for any value)")->capture_default_str();
    cmd->add_option("--retries", o.retries, "External provider retries on transport failure")->capture_default_str();
    cmd->add_option("--batch-size", o.batch_size, "Images per external request")->capture_default_str();
}

ManifestPtr open_manifest(const SharedOptions& o) {
    fsel_manifest* m = nullptr;
    if (!o.synthetic.empty()) {
        check(fsel_manifest_synthesize(o.synthetic.c_str(), &m), "synthesize");
    } else if (!o.manifest.empty()) {
        check(fsel_manifest_load(o.manifest.c_str(), &m), "manifest");
    } else {
        throw CommandError{kFailure, "one of --manifest or --synthetic is required"};
    }
    return ManifestPtr(m);
}

ProviderPtr open_provider(const SharedOptions& o) {
    fsel_provider* p = nullptr;
    if (o.provider == "reference") {
        check(fsel_provider_reference(o.dim, o.proj_seed, &p), "provider");
    } else if (o.provider.rfind("cache:", 0) == 0) {
        ProviderPtr fallback;
        if (o.fallback == "reference") {
            fsel_provider* f = nullptr;
            check(fsel_provider_reference(o.dim, o.proj_seed, &f), "provider");
            fallback.reset(f);
        }
        check(fsel_provider_cache(o.provider.substr(6).c_str(), fallback.get(), &p), "provider");
    } else if (o.provider.rfind("external:", 0) == 0) {
        fsel_external_options ext;
        fsel_external_options_init(&ext);
        ext.dim = o.dim;
        ext.max_retries = o.retries;
        ext.batch_size = o.batch_size;
        ext.max_in_flight = o.jobs;
        check(fsel_provider_external(o.provider.substr(9).c_str(), &ext, &p), "provider");
    } else {
        throw CommandError{kFailure, "unknown provider '" + o.provider + "'"};
    }
    return ProviderPtr(p);
}

struct NoiseOptions {
    double sigma = 0.1;
    double mu = 0.0;
    std::size_t variants = 20;
    std::uint64_t noise_seed = 0;
    double temperature = 100.0;
    std::string prototypes;
    std::string metric = "cosine";
};

void add_strategy_knobs(CLI::App* cmd, NoiseOptions& n) {
    cmd->add_option("--sigma", n.sigma, "Montecarlo noise standard deviation (pixel units)")->capture_default_str();
    cmd->add_option("--mu", n.mu, "Montecarlo noise mean (pixel units)")->capture_default_str();
    cmd->add_option("--variants", n.variants, "Montecarlo noised variants per anchor")->capture_default_str();
    cmd->add_option("--noise-seed", n.noise_seed, "Montecarlo noise base seed")->capture_default_str();
    cmd->add_option("--temperature", n.temperature, "Zero-shot softmax temperature (entropy/margin)")->capture_default_str();
    cmd->add_option("--prototypes", n.prototypes,
                    "Class prototypes for entropy/margin: text-prototype cache file, or 'validation' for validation centroids");
    cmd->add_option("--metric", n.metric, "Distance: cosine | euclidean")
        ->check(CLI::IsMember({"cosine", "euclidean"}))
        ->capture_default_str();
}

struct ProbeOptions {
    std::string classifier = "linear-probe";
    std::size_t epochs = 200;
    double lr = 0.1;
    double l2 = 1e-4;
    std::uint64_t classifier_seed = 0;
};

void add_classifier(CLI::App* cmd, ProbeOptions& p) {
    cmd->add_option("--classifier", p.classifier, "linear-probe | nearest-centroid")
        ->check(CLI::IsMember({"linear-probe", "nearest-centroid"}))
        ->capture_default_str();
    cmd->add_option("--epochs", p.epochs, "Linear probe epochs")->capture_default_str();
    cmd->add_option("--lr", p.lr, "Linear probe learning rate")->capture_default_str();
    cmd->add_option("--l2", p.l2, "Linear probe L2 weight penalty")->capture_default_str();
    cmd->add_option("--classifier-seed", p.classifier_seed, "Linear probe init seed (independent of --seed)")
        ->capture_default_str();
}

fsel_probe_options probe_options(const ProbeOptions& p) {
    fsel_probe_options o;
    fsel_probe_options_init(&o);
    o.epochs = p.epochs;
    o.learning_rate = p.lr;
    o.l2_penalty = p.l2;
    o.seed = p.classifier_seed;
    return o;
}

// ---------------------------------------------------------------------------
// Commands

struct EmbedArgs {
    SharedOptions shared;
    bool resume = false;
};

void cmd_embed(const EmbedArgs& a) {
    if (a.shared.out.empty()) throw CommandError{kFailure, "--out (cache file) is required"};
    auto manifest = open_manifest(a.shared);
    auto provider = open_provider(a.shared);
    fsel_embed_stats stats{};
    check(fsel_embed_manifest(provider.get(), manifest.get(), a.shared.out.c_str(), a.resume ? 1 : 0, &stats), "embed");
    std::printf("wrote %s: count=%zu dim=%zu (embedded %zu, reused %zu)\n", a.shared.out.c_str(), stats.total, stats.dim,
                stats.embedded, stats.reused);
}

struct SelectArgs {
    SharedOptions shared;
    NoiseOptions noise;
    std::string strategy;
    std::size_t shots = 1;
};

void cmd_select(const SelectArgs& a) {
    if (a.shared.out.empty()) throw CommandError{kFailure, "--out (selection file) is required"};
    auto manifest = open_manifest(a.shared);
    check(fsel_manifest_validate_budget(manifest.get(), a.shots), "budget");
    auto provider = open_provider(a.shared);

    fsel_select_options o;
    fsel_select_options_init(&o);
    o.strategy = a.strategy.c_str();
    o.shots = a.shots;
    o.seed = a.shared.seed;
    o.mu = a.noise.mu;
    o.sigma = a.noise.sigma;
    o.variants = a.noise.variants;
    o.noise_seed = a.noise.noise_seed;
    o.temperature = a.noise.temperature;
    o.metric = a.noise.metric.c_str();
    o.prototypes = a.noise.prototypes.empty() ? nullptr : a.noise.prototypes.c_str();
    o.jobs = a.shared.jobs;

    fsel_selection* raw = nullptr;
    check(fsel_select(manifest.get(), provider.get(), &o, &raw), "select");
    SelectionPtr selection(raw);
    const auto ts = utc_timestamp();
    check(fsel_selection_write(selection.get(), ts.c_str(), a.shared.out.c_str()), "write");

    for (int c = 0; c < fsel_manifest_num_classes(manifest.get()); ++c) {
        std::printf("class %d:", c);
        for (std::size_t r = 0; r < fsel_selection_class_size(selection.get(), c); ++r) {
            std::printf(" %s(%.6g)", fsel_selection_item_id(selection.get(), c, r), fsel_selection_item_score(selection.get(), c, r));
        }
        std::printf("\n");
    }
}

struct EvaluateArgs {
    SharedOptions shared;
    ProbeOptions probe;
    std::string selection;
};

void cmd_evaluate(const EvaluateArgs& a) {
    auto manifest = open_manifest(a.shared);
    auto provider = open_provider(a.shared);
    fsel_selection* raw = nullptr;
    check(fsel_selection_load(a.selection.c_str(), &raw), "selection");
    SelectionPtr selection(raw);
    const auto probe = probe_options(a.probe);
    double acc = 0.0;
    check(fsel_evaluate(manifest.get(), provider.get(), selection.get(), a.probe.classifier.c_str(), &probe, &acc), "evaluate");
    std::printf("accuracy %.6f (%s)\n", acc, a.probe.classifier.c_str());
    if (!a.shared.out.empty()) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "{\n  \"accuracy\": %.17g,\n  \"classifier\": \"%s\"\n}\n", acc, a.probe.classifier.c_str());
        write_text(a.shared.out, buf);
    }
}

struct BenchmarkArgs {
    SharedOptions shared;
    NoiseOptions noise;
    ProbeOptions probe;
    std::vector<std::string> strategies{"random", "entropy", "margin", "montecarlo", "repre"};
    std::vector<std::size_t> shots{1, 2, 4, 8, 16};
    std::vector<std::uint64_t> seeds;
    std::size_t num_seeds = 3;
    bool dedupe = false;
    std::string csv;
};

int cmd_benchmark(const BenchmarkArgs& a) {
    if (a.shared.out.empty()) throw CommandError{kFailure, "--out (report directory) is required"};
    auto manifest = open_manifest(a.shared);
    auto provider = open_provider(a.shared);

    std::vector<std::uint64_t> seeds = a.seeds;
    if (seeds.empty()) {
        for (std::size_t i = 0; i < a.num_seeds; ++i) seeds.push_back(a.shared.seed + i);
    }
    std::vector<const char*> strategies;
    for (const auto& s : a.strategies) strategies.push_back(s.c_str());

    fsel_benchmark_options o;
    fsel_benchmark_options_init(&o);
    o.strategies = strategies.data();
    o.n_strategies = strategies.size();
    o.shots = a.shots.data();
    o.n_shots = a.shots.size();
    o.seeds = seeds.data();
    o.n_seeds = seeds.size();
    o.classifier = a.probe.classifier.c_str();
    o.probe = probe_options(a.probe);
    o.mu = a.noise.mu;
    o.sigma = a.noise.sigma;
    o.variants = a.noise.variants;
    o.noise_seed = a.noise.noise_seed;
    o.temperature = a.noise.temperature;
    o.metric = a.noise.metric.c_str();
    const bool file_prototypes = !a.noise.prototypes.empty() && a.noise.prototypes != "validation";
    o.prototypes = file_prototypes ? a.noise.prototypes.c_str() : nullptr;
    o.jobs = a.shared.jobs;

    fsel_report* raw = nullptr;
    check(fsel_benchmark(manifest.get(), provider.get(), &o, &raw), "benchmark");
    ReportPtr report(raw);

    const std::filesystem::path dir(a.shared.out);
    OwnedString csv;
    check(fsel_report_csv(report.get(), a.dedupe ? 1 : 0, &csv.ptr), "report");
    write_text(dir / "report.csv", csv.str());
    if (!a.csv.empty()) write_text(a.csv, csv.str());
    OwnedString json;
    check(fsel_report_json(report.get(), &json.ptr), "report");
    write_text(dir / "aggregates.json", json.str());

    // Ranking table per shot count, best mean first.
    struct Entry {
        std::string strategy;
        double mean, std;
        std::size_t n;
    };
    std::map<std::size_t, std::vector<Entry>> by_shots;
    for (std::size_t i = 0; i < fsel_report_aggregate_count(report.get()); ++i) {
        const char* s = nullptr;
        std::size_t k = 0, n = 0;
        double mean = 0, sd = 0;
        check(fsel_report_aggregate(report.get(), i, &s, &k, &mean, &sd, &n), "report");
        if (n > 0) by_shots[k].push_back({s, mean, sd, n});
    }
    for (auto& [k, entries] : by_shots) {
        std::stable_sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) { return x.mean > y.mean; });
        std::printf("%zu-shot\n", k);
        std::printf("  %-4s %-12s %10s %10s %6s\n", "rank", "strategy", "mean(%)", "std(%)", "seeds");
        int rank = 1;
        for (const auto& e : entries) {
            std::printf("  %-4d %-12s %10.2f %10.2f %6zu\n", rank++, e.strategy.c_str(), 100.0 * e.mean, 100.0 * e.std, e.n);
        }
    }

    const auto failed = fsel_report_failed_rows(report.get());
    if (failed > 0) {
        for (std::size_t i = 0; i < fsel_report_row_count(report.get()); ++i) {
            const char* s = nullptr;
            const char* err = nullptr;
            std::size_t k = 0;
            std::uint64_t seed = 0;
            double acc = 0;
            check(fsel_report_row(report.get(), i, &s, &k, &seed, &acc, &err), "report");
            if (std::isnan(acc)) std::fprintf(stderr, "row %s/%zu/%llu failed: %s\n", s, k, static_cast<unsigned long long>(seed), err);
        }
        std::fprintf(stderr, "%zu of %zu rows failed\n", failed, fsel_report_row_count(report.get()));
        return kFailure;
    }
    return kOk;
}

struct DiagnoseArgs {
    SharedOptions shared;
    std::string split;
};

void cmd_diagnose(const DiagnoseArgs& a) {
    auto manifest = open_manifest(a.shared);
    auto provider = open_provider(a.shared);
    fsel_generality g{};
    check(fsel_diagnose(manifest.get(), provider.get(), a.split.empty() ? nullptr : a.split.c_str(), a.shared.seed, &g),
          "diagnose");
    if (g.sampled) {
        std::printf("generality %.4f%% (sampled %zu of %zu items)\n", g.percent, g.n_used, g.n_total);
    } else {
        std::printf("generality %.4f%% (%zu items)\n", g.percent, g.n_used);
    }
    if (!a.shared.out.empty()) {
        char buf[512];
        std::snprintf(buf, sizeof buf,
                      "{\n  \"generality_percent\": %.17g,\n  \"sampled\": %s,\n  \"n_used\": %zu,\n  \"n_total\": %zu,\n"
                      "  \"split\": \"%s\",\n  \"generated_at\": \"%s\"\n}\n",
                      g.percent, g.sampled ? "true" : "false", g.n_used, g.n_total, a.split.empty() ? "all" : a.split.c_str(),
                      utc_timestamp().c_str());
        write_text(a.shared.out, buf);
    }
}

struct SynthArgs {
    std::string spec = "std-bench";
    std::string out;
};

void cmd_synth(const SynthArgs& a) {
    fsel_manifest* raw = nullptr;
    check(fsel_manifest_synthesize(a.spec.c_str(), &raw), "synthesize");
    ManifestPtr manifest(raw);
    if (std::filesystem::path(a.out).has_parent_path()) std::filesystem::create_directories(std::filesystem::path(a.out).parent_path());
    check(fsel_manifest_save(manifest.get(), a.out.c_str()), "write");
    std::printf("wrote %s: %zu items, %d classes (pool %zu, validation %zu, test %zu)\n", a.out.c_str(),
                fsel_manifest_size(manifest.get()), fsel_manifest_num_classes(manifest.get()),
                fsel_manifest_count(manifest.get(), "pool", -1), fsel_manifest_count(manifest.get(), "validation", -1),
                fsel_manifest_count(manifest.get(), "test", -1));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fsel: select few-shot examples in embedding space and evaluate them"};
    app.require_subcommand(1);

    EmbedArgs embed;
    auto* embed_cmd = app.add_subcommand("embed", "Embed every manifest item into a binary cache file");
    add_shared(embed_cmd, embed.shared, true);
    embed_cmd->add_option("--out", embed.shared.out, "Cache file to write")->required();
    embed_cmd->add_flag("--resume", embed.resume, "Keep ids already in --out and embed only the missing ones");

    SelectArgs sel;
    auto* select_cmd = app.add_subcommand("select", "Select K shots per class with one strategy");
    add_shared(select_cmd, sel.shared, true);
    add_strategy_knobs(select_cmd, sel.noise);
    select_cmd->add_option("--strategy", sel.strategy, "random | entropy | margin | montecarlo | repre")
        ->required()
        ->check(CLI::IsMember({"random", "entropy", "margin", "montecarlo", "repre"}));
    select_cmd->add_option("--shots", sel.shots, "Shots per class (K)")->capture_default_str();
    select_cmd->add_option("--out", sel.shared.out, "SelectionResult JSON file to write")->required();

    EvaluateArgs eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "Train a classifier on a selection and report test accuracy");
    add_shared(eval_cmd, eval.shared, true);
    add_classifier(eval_cmd, eval.probe);
    eval_cmd->add_option("--selection", eval.selection, "SelectionResult JSON file")->required();
    eval_cmd->add_option("--out", eval.shared.out, "Optional JSON file for the accuracy");

    BenchmarkArgs bench;
    auto* bench_cmd = app.add_subcommand("benchmark", "Run the strategies x shots x seeds grid");
    add_shared(bench_cmd, bench.shared, true);
    add_strategy_knobs(bench_cmd, bench.noise);
    add_classifier(bench_cmd, bench.probe);
    bench_cmd->add_option("--strategy,--strategies", bench.strategies, "Comma-separated strategies")
        ->delimiter(',')
        ->check(CLI::IsMember({"random", "entropy", "margin", "montecarlo", "repre"}))
        ->capture_default_str();
    bench_cmd->add_option("--shots", bench.shots, "Comma-separated shot counts")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--seeds", bench.seeds, "Comma-separated selection seeds (overrides --num-seeds)")->delimiter(',');
    bench_cmd->add_option("--num-seeds", bench.num_seeds, "Use seeds --seed .. --seed+N-1")->capture_default_str();
    bench_cmd->add_flag("--dedupe", bench.dedupe, "Write one CSV row per deterministic (strategy, shots) instead of one per seed");
    bench_cmd->add_option("--csv", bench.csv, "Also write the per-row CSV to this path");
    bench_cmd->add_option("--out", bench.shared.out, "Directory for report.csv and aggregates.json")->required();

    DiagnoseArgs diag;
    auto* diag_cmd = app.add_subcommand("diagnose", "Mean pairwise cosine similarity (percent) of a dataset");
    add_shared(diag_cmd, diag.shared, true);
    diag_cmd->add_option("--split", diag.split, "Restrict to one split")->check(CLI::IsMember({"pool", "validation", "test"}));
    diag_cmd->add_option("--out", diag.shared.out, "Optional JSON file for the result");

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic benchmark manifest");
    synth_cmd->add_option("--spec", synth.spec, "'std-bench' or a SyntheticSpec JSON file")->capture_default_str();
    synth_cmd->add_option("--out", synth.out, "Manifest file to write")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (embed_cmd->parsed()) cmd_embed(embed);
        if (select_cmd->parsed()) cmd_select(sel);
        if (eval_cmd->parsed()) cmd_evaluate(eval);
        if (bench_cmd->parsed()) return cmd_benchmark(bench);
        if (diag_cmd->parsed()) cmd_diagnose(diag);
        if (synth_cmd->parsed()) cmd_synth(synth);
    } catch (const CommandError& e) {
        std::fprintf(stderr, "fsel: %s\n", e.message.c_str());
        return e.exit_code;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fsel: %s\n", e.what());
        return kFailure;
    }
    return kOk;
}
