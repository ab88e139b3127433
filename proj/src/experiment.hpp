#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "classifiers.hpp"
#include "strategies.hpp"

namespace fsel {

enum class ClassifierKind { NearestCentroid, LinearProbe };

std::string_view to_string(ClassifierKind k);
std::optional<ClassifierKind> parse_classifier(std::string_view text);

struct ExperimentConfig {
    std::vector<Strategy> strategies;
    std::vector<std::size_t> shots;
    std::vector<std::uint64_t> seeds;
    ClassifierKind classifier = ClassifierKind::LinearProbe;
    // The probe seed stays fixed across selection seeds.
    LinearProbeConfig probe;
    NoiseConfig noise;
    double temperature = 100.0;
    Metric metric = Metric::Cosine;
    // Entropy/Margin fall back to validation centroids when absent.
    std::optional<ClassPrototypes> prototypes;
    std::size_t jobs = 1;
};

struct EvalRow {
    std::string strategy;
    std::size_t shots = 0;
    std::uint64_t seed = 0;
    std::optional<double> accuracy;
    std::string error;
    // Ids chosen for this cell, class-major.
    std::vector<std::string> selected;
};

struct EvalAggregate {
    std::string strategy;
    std::size_t shots = 0;
    double mean = 0.0;
    double std = 0.0;
    std::size_t n_seeds = 0;
};

// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
double sample_std(std::span<const double> values);

struct EvalReport {
    std::vector<EvalRow> rows;

    std::vector<EvalAggregate> aggregates() const;
    std::size_t failed_rows() const;
    // `strategy,shots,seed,accuracy`; failed rows leave accuracy empty. With
    // dedupe, deterministic strategies keep only their first seed's row.
    std::string to_csv(bool dedupe = false) const;
    nlohmann::json aggregates_json() const;
};

// Trains the configured classifier on the selected shots and scores it on the
// test split.
double evaluate_selection(EmbeddingTable& table, const SelectionResult& selection, ClassifierKind classifier,
                          const LinearProbeConfig& probe);

// Every (strategy, shots, seed) cell; a failing cell records its error and
// the rest still run. Output does not depend on `jobs`.
EvalReport run_experiment(EmbeddingTable& table, const ExperimentConfig& config);

struct GeneralityResult {
    double percent = 0.0;
    bool sampled = false;
    std::size_t n_used = 0;
};

inline constexpr std::size_t kGeneralitySampleCap = 5000;

// 100 * mean pairwise cosine over unordered pairs; above `cap` items a
// seeded uniform subsample of `cap` is used.
GeneralityResult generality_diagnostic(std::span<const Embedding> embeddings, std::uint64_t seed = 0,
                                       std::size_t cap = kGeneralitySampleCap);

}  // namespace fsel
