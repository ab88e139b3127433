#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "encoder.hpp"
#include "manifest.hpp"
#include "perturb.hpp"
#include "types.hpp"

namespace fsel {

enum class Direction { HigherIsBetter, LowerIsBetter };
enum class Metric { Cosine, Euclidean };
enum class Strategy { Random, Entropy, Margin, MonteCarlo, Repre };

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view text);
std::string_view to_string(Metric m);
std::optional<Metric> parse_metric(std::string_view text);
Direction preferred_direction(Strategy s);
inline bool is_deterministic(Strategy s) { return s != Strategy::Random; }

double distance(std::span<const double> a, std::span<const double> b, Metric metric);

class ProbabilityDistribution {
public:
    explicit ProbabilityDistribution(std::vector<double> probs);
    std::span<const double> probs() const noexcept { return probs_; }
    std::size_t size() const noexcept { return probs_.size(); }

private:
    std::vector<double> probs_;
};

enum class PrototypeSource { TextEmbeddingsFile, ValidationCentroids };

struct ClassPrototypes {
    std::vector<Embedding> per_class;
    PrototypeSource source = PrototypeSource::ValidationCentroids;
};

// Reads a text-prototype file (embedding-cache format, ids "0".."C-1").
ClassPrototypes load_text_prototypes(const std::filesystem::path& path, int num_classes);

struct ClassCentroid {
    int class_id = 0;
    Embedding centroid;
};

struct StrategyScore {
    std::string id;
    double score = 0.0;
    Direction direction = Direction::HigherIsBetter;
};

// softmax(temperature * cos(e, prototype_c)) over classes.
ProbabilityDistribution zero_shot_probs(const Embedding& item, const ClassPrototypes& prototypes, double temperature);

// Shannon entropy -sum p ln p, 0 ln 0 := 0. Higher is more uncertain.
double score_entropy(const ProbabilityDistribution& probs);

// Top probability minus runner-up. Lower is more uncertain.
double score_margin(const ProbabilityDistribution& probs);

// Mean distance between the anchor embedding and its T noised variants.
double score_montecarlo(const ImageTensor& anchor, std::string_view anchor_id, const EmbeddingProvider& provider,
                        const NoiseConfig& noise, Metric metric = Metric::Cosine);

// grouped[c] holds the validation embeddings of class c.
std::vector<ClassCentroid> class_centroids(std::span<const std::vector<Embedding>> grouped);

double score_repre(const Embedding& item, int item_label, const ClassCentroid& centroid, Metric metric = Metric::Cosine);

// Per class: best K by direction, ties broken by ascending id.
std::vector<std::vector<ScoredId>> select_top_k(std::span<const std::vector<StrategyScore>> scores_by_class,
                                                const SelectionBudget& budget);

// Uniform sample without replacement per class, stream seeded by
// (seed, class id). Output within a class is sorted by id.
std::vector<std::vector<ScoredId>> select_random(std::span<const std::vector<std::string>> pool_by_class,
                                                 const SelectionBudget& budget, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Whole-manifest selection

struct StrategyConfig {
    Strategy strategy = Strategy::Random;
    std::size_t shots = 1;
    std::uint64_t seed = 0;
    NoiseConfig noise;
    double temperature = 100.0;
    Metric metric = Metric::Cosine;
    std::optional<ClassPrototypes> prototypes;
    std::size_t jobs = 1;
};

// Embeddings aligned with manifest.items(); entries are filled lazily.
class EmbeddingTable {
public:
    EmbeddingTable(const DatasetManifest& manifest, const EmbeddingProvider& provider,
                   std::filesystem::path base_dir = {});

    // Embeds every item of `split` not embedded yet.
    void ensure(Split split);
    const Embedding& at(std::size_t index) const;
    std::vector<std::vector<Embedding>> grouped(Split split);

    const DatasetManifest& manifest() const noexcept { return manifest_; }
    const EmbeddingProvider& provider() const noexcept { return provider_; }
    const std::filesystem::path& base_dir() const noexcept { return base_dir_; }

private:
    const DatasetManifest& manifest_;
    const EmbeddingProvider& provider_;
    std::filesystem::path base_dir_;
    std::vector<std::optional<Embedding>> table_;
};

// Scores of every pool item, grouped by class, for a deterministic strategy.
std::vector<std::vector<StrategyScore>> compute_strategy_scores(EmbeddingTable& table, const StrategyConfig& config);

nlohmann::json strategy_config_json(const StrategyConfig& config);

SelectionResult select(EmbeddingTable& table, const StrategyConfig& config);

// Selection from precomputed scores (deterministic strategies) or the pool
// (Random); used by the experiment grid to score once and select many times.
SelectionResult assemble_selection(const DatasetManifest& manifest, const StrategyConfig& config,
                                   const std::vector<std::vector<StrategyScore>>* scores);

// Throws if any class lacks exactly K unique pool ids.
void check_selection(const DatasetManifest& manifest, const SelectionResult& result, std::size_t shots);

std::string selection_to_json(const SelectionResult& result, std::string_view generated_at);
SelectionResult selection_from_json(std::string_view text);

}  // namespace fsel
