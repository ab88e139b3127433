#include "strategies.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "error.hpp"
#include "rng.hpp"

namespace fsel {

using nlohmann::json;

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::Random: return "random";
        case Strategy::Entropy: return "entropy";
        case Strategy::Margin: return "margin";
        case Strategy::MonteCarlo: return "montecarlo";
        case Strategy::Repre: return "repre";
    }
    return "random";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
    for (auto s : {Strategy::Random, Strategy::Entropy, Strategy::Margin, Strategy::MonteCarlo, Strategy::Repre}) {
        if (text == to_string(s)) return s;
    }
    return std::nullopt;
}

std::string_view to_string(Metric m) { return m == Metric::Cosine ? "cosine" : "euclidean"; }

std::optional<Metric> parse_metric(std::string_view text) {
    if (text == "cosine") return Metric::Cosine;
    if (text == "euclidean") return Metric::Euclidean;
    return std::nullopt;
}

Direction preferred_direction(Strategy s) {
    switch (s) {
        case Strategy::Entropy:
        case Strategy::MonteCarlo: return Direction::HigherIsBetter;
        case Strategy::Margin:
        case Strategy::Repre: return Direction::LowerIsBetter;
        case Strategy::Random: break;
    }
    return Direction::HigherIsBetter;
}

double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
    return metric == Metric::Cosine ? cosine_distance(a, b) : euclidean_distance(a, b);
}

ProbabilityDistribution::ProbabilityDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw Error(ErrorCode::InvalidArgument, "probability distribution is empty");
    double sum = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorCode::InvalidArgument, "probabilities must be finite and >= 0");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::InvalidArgument, "probabilities sum to " + std::to_string(sum));
}

ClassPrototypes load_text_prototypes(const std::filesystem::path& path, int num_classes) {
    const auto cache = EmbeddingCache::read(path);
    ClassPrototypes out;
    out.source = PrototypeSource::TextEmbeddingsFile;
    for (int c = 0; c < num_classes; ++c) {
        const auto* e = cache.find(std::to_string(c));
        if (e == nullptr) throw Error(ErrorCode::InvalidArgument, "prototype file lacks class " + std::to_string(c));
        out.per_class.push_back(Embedding::normalized_from({e->values().begin(), e->values().end()}));
    }
    return out;
}

ProbabilityDistribution zero_shot_probs(const Embedding& item, const ClassPrototypes& prototypes, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw Error(ErrorCode::InvalidArgument, "temperature must be > 0");
    if (prototypes.per_class.empty()) throw Error(ErrorCode::InvalidArgument, "no class prototypes");
    std::vector<double> logits;
    logits.reserve(prototypes.per_class.size());
    for (const auto& proto : prototypes.per_class) {
        if (proto.dim() != item.dim()) {
            throw Error(ErrorCode::DimMismatch, "prototype dim " + std::to_string(proto.dim()) + " vs item dim " +
                                                    std::to_string(item.dim()));
        }
        const double c = cosine(item.values(), proto.values());
        if (!std::isfinite(c)) throw Error(ErrorCode::Degenerate, "non-finite cosine");
        logits.push_back(temperature * c);
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double& l : logits) {
        l = std::exp(l - top);
        z += l;
    }
    for (double& l : logits) l /= z;
    return ProbabilityDistribution(std::move(logits));
}

double score_entropy(const ProbabilityDistribution& probs) {
    // Uniform over its support: ln(m) exactly, which summation cannot promise.
    double common = 0.0;
    std::size_t support = 0;
    bool uniform = true;
    for (double p : probs.probs()) {
        if (p == 0.0) continue;
        if (support++ == 0) common = p;
        uniform = uniform && p == common;
    }
    if (uniform) return std::log(static_cast<double>(support));
    double h = 0.0;
    for (double p : probs.probs()) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

double score_margin(const ProbabilityDistribution& probs) {
    if (probs.size() < 2) throw Error(ErrorCode::InvalidArgument, "margin needs at least 2 classes");
    double first = -1.0;
    double second = -1.0;
    for (double p : probs.probs()) {
        if (p > first) {
            second = first;
            first = p;
        } else if (p > second) {
            second = p;
        }
    }
    return first - second;
}

double score_montecarlo(const ImageTensor& anchor, std::string_view anchor_id, const EmbeddingProvider& provider,
                        const NoiseConfig& noise, Metric metric) {
    noise.validate();
    if (!provider.can_encode_images()) {
        throw Error(ErrorCode::Provider, "montecarlo needs an image-capable provider, '" + provider.name() + "' is not");
    }
    const auto variants = noise_variants(anchor, anchor_id, noise);
    std::vector<ImageTensor> batch;
    batch.reserve(variants.size() + 1);
    batch.push_back(anchor);
    batch.insert(batch.end(), variants.begin(), variants.end());
    const auto embeddings = provider.encode_images(batch);
    if (embeddings.size() != batch.size()) throw Error(ErrorCode::Provider, "provider returned wrong batch size");

    double acc = 0.0;
    for (std::size_t t = 1; t < embeddings.size(); ++t) acc += distance(embeddings[0].values(), embeddings[t].values(), metric);
    return acc / static_cast<double>(variants.size());
}

std::vector<ClassCentroid> class_centroids(std::span<const std::vector<Embedding>> grouped) {
    std::vector<ClassCentroid> out;
    out.reserve(grouped.size());
    for (std::size_t c = 0; c < grouped.size(); ++c) {
        const auto& members = grouped[c];
        if (members.empty()) throw Error(ErrorCode::InvalidArgument, "class " + std::to_string(c) + " has no validation items");
        std::vector<double> mean(members.front().dim(), 0.0);
        for (const auto& e : members) {
            if (e.dim() != mean.size()) throw Error(ErrorCode::DimMismatch, "mixed embedding dims in class " + std::to_string(c));
            for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += e[k];
        }
        for (double& m : mean) m /= static_cast<double>(members.size());
        // Cancellation can leave ~1e-17 residue where the true mean is zero.
        double scale = 0.0;
        for (const auto& e : members) scale = std::max(scale, e.norm());
        if (!(l2_norm(mean) > 1e-12 * scale)) {
            throw Error(ErrorCode::Degenerate, "degenerate centroid for class " + std::to_string(c));
        }
        out.push_back({static_cast<int>(c), Embedding::normalized_from(std::move(mean))});
    }
    return out;
}

double score_repre(const Embedding& item, int item_label, const ClassCentroid& centroid, Metric metric) {
    if (item_label != centroid.class_id) {
        throw Error(ErrorCode::InvalidArgument, "item label " + std::to_string(item_label) + " does not match centroid class " +
                                                    std::to_string(centroid.class_id));
    }
    if (item.dim() != centroid.centroid.dim()) throw Error(ErrorCode::DimMismatch, "item and centroid dims differ");
    return distance(item.values(), centroid.centroid.values(), metric);
}

std::vector<std::vector<ScoredId>> select_top_k(std::span<const std::vector<StrategyScore>> scores_by_class,
                                                const SelectionBudget& budget) {
    if (budget.shots_per_class < 1) throw Error(ErrorCode::InvalidArgument, "shots per class must be >= 1");
    std::vector<std::vector<ScoredId>> out;
    out.reserve(scores_by_class.size());
    for (std::size_t c = 0; c < scores_by_class.size(); ++c) {
        const auto& scores = scores_by_class[c];
        if (scores.size() < budget.shots_per_class) {
            throw BudgetError(static_cast<int>(c), scores.size(), budget.shots_per_class);
        }
        std::vector<const StrategyScore*> order;
        order.reserve(scores.size());
        for (const auto& s : scores) {
            if (!std::isfinite(s.score)) throw Error(ErrorCode::InvalidArgument, "non-finite score for '" + s.id + "'");
            order.push_back(&s);
        }
        std::sort(order.begin(), order.end(), [](const StrategyScore* a, const StrategyScore* b) {
            if (a->score != b->score) {
                return a->direction == Direction::HigherIsBetter ? a->score > b->score : a->score < b->score;
            }
            return a->id < b->id;
        });
        std::vector<ScoredId> chosen;
        for (std::size_t k = 0; k < budget.shots_per_class; ++k) chosen.push_back({order[k]->id, order[k]->score});
        out.push_back(std::move(chosen));
    }
    return out;
}

std::vector<std::vector<ScoredId>> select_random(std::span<const std::vector<std::string>> pool_by_class,
                                                 const SelectionBudget& budget, std::uint64_t seed) {
    if (budget.shots_per_class < 1) throw Error(ErrorCode::InvalidArgument, "shots per class must be >= 1");
    std::vector<std::vector<ScoredId>> out;
    for (std::size_t c = 0; c < pool_by_class.size(); ++c) {
        auto ids = pool_by_class[c];
        if (ids.size() < budget.shots_per_class) throw BudgetError(static_cast<int>(c), ids.size(), budget.shots_per_class);
        // Canonical order first, so the draw does not depend on manifest order.
        std::sort(ids.begin(), ids.end());
        Engine engine(derive_seed(seed, static_cast<std::uint64_t>(c)));
        for (std::size_t k = 0; k < budget.shots_per_class; ++k) {
            const auto j = k + uniform_below(engine, ids.size() - k);
            std::swap(ids[k], ids[j]);
        }
        ids.resize(budget.shots_per_class);
        std::sort(ids.begin(), ids.end());
        std::vector<ScoredId> chosen;
        for (auto& id : ids) chosen.push_back({std::move(id), 0.0});
        out.push_back(std::move(chosen));
    }
    return out;
}

// ---------------------------------------------------------------------------

EmbeddingTable::EmbeddingTable(const DatasetManifest& manifest, const EmbeddingProvider& provider,
                               std::filesystem::path base_dir)
    : manifest_(manifest), provider_(provider), base_dir_(std::move(base_dir)), table_(manifest.size()) {}

void EmbeddingTable::ensure(Split split) {
    std::vector<std::size_t> missing;
    for (auto i : manifest_.indices(split)) {
        if (!table_[i]) missing.push_back(i);
    }
    if (missing.empty()) return;
    auto embedded = embed_items(provider_, manifest_, missing, base_dir_);
    for (std::size_t k = 0; k < missing.size(); ++k) table_[missing[k]] = std::move(embedded[k]);
}

const Embedding& EmbeddingTable::at(std::size_t index) const {
    if (!table_.at(index)) throw Error(ErrorCode::InvalidArgument, "item " + std::to_string(index) + " not embedded");
    return *table_[index];
}

std::vector<std::vector<Embedding>> EmbeddingTable::grouped(Split split) {
    ensure(split);
    std::vector<std::vector<Embedding>> out(static_cast<std::size_t>(manifest_.num_classes()));
    for (auto i : manifest_.indices(split)) out[static_cast<std::size_t>(manifest_.items()[i].label)].push_back(*table_[i]);
    return out;
}

namespace {

// Runs fn(i) for i in [0, n) on `jobs` threads; each slot is written by one
// thread only, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<std::vector<StrategyScore>> group_scores(const DatasetManifest& manifest, std::span<const std::size_t> pool,
                                                     std::span<const double> scores, Direction direction) {
    std::vector<std::vector<StrategyScore>> out(static_cast<std::size_t>(manifest.num_classes()));
    for (std::size_t k = 0; k < pool.size(); ++k) {
        const auto& item = manifest.items()[pool[k]];
        out[static_cast<std::size_t>(item.label)].push_back({item.id, scores[k], direction});
    }
    return out;
}

}  // namespace

std::vector<std::vector<StrategyScore>> compute_strategy_scores(EmbeddingTable& table, const StrategyConfig& config) {
    const auto& manifest = table.manifest();
    const auto pool = manifest.indices(Split::Pool);
    const auto direction = preferred_direction(config.strategy);
    std::vector<double> scores(pool.size());

    switch (config.strategy) {
        case Strategy::Random:
            throw Error(ErrorCode::InvalidArgument, "random selection has no scores");
        case Strategy::Entropy:
        case Strategy::Margin: {
            if (!config.prototypes) throw Error(ErrorCode::InvalidArgument, "prototypes required for " + std::string(to_string(config.strategy)));
            if (static_cast<int>(config.prototypes->per_class.size()) != manifest.num_classes()) {
                throw Error(ErrorCode::InvalidArgument, "prototype count does not match num_classes");
            }
            table.ensure(Split::Pool);
            for (std::size_t k = 0; k < pool.size(); ++k) {
                const auto probs = zero_shot_probs(table.at(pool[k]), *config.prototypes, config.temperature);
                scores[k] = config.strategy == Strategy::Entropy ? score_entropy(probs) : score_margin(probs);
            }
            break;
        }
        case Strategy::MonteCarlo: {
            config.noise.validate();
            const auto& provider = table.provider();
            if (!provider.can_encode_images()) {
                throw Error(ErrorCode::Provider, "montecarlo needs an image-capable provider, '" + provider.name() + "' is not");
            }
            parallel_for(pool.size(), config.jobs, [&](std::size_t k) {
                const auto& item = manifest.items()[pool[k]];
                scores[k] = score_montecarlo(item_image(item, table.base_dir()), item.id, provider, config.noise, config.metric);
            });
            break;
        }
        case Strategy::Repre: {
            const auto centroids = class_centroids(table.grouped(Split::Validation));
            table.ensure(Split::Pool);
            for (std::size_t k = 0; k < pool.size(); ++k) {
                const auto& item = manifest.items()[pool[k]];
                scores[k] = score_repre(table.at(pool[k]), item.label, centroids[static_cast<std::size_t>(item.label)], config.metric);
            }
            break;
        }
    }
    return group_scores(manifest, pool, scores, direction);
}

json strategy_config_json(const StrategyConfig& config) {
    json j{{"strategy", std::string(to_string(config.strategy))},
           {"shots", config.shots},
           {"seed", config.seed},
           {"metric", std::string(to_string(config.metric))}};
    if (config.strategy == Strategy::MonteCarlo) {
        j["mu"] = config.noise.mu;
        j["sigma"] = config.noise.sigma;
        j["variants"] = config.noise.variants;
        j["noise_seed"] = config.noise.base_seed;
    }
    if (config.strategy == Strategy::Entropy || config.strategy == Strategy::Margin) {
        j["temperature"] = config.temperature;
        if (config.prototypes) {
            j["prototypes"] = config.prototypes->source == PrototypeSource::TextEmbeddingsFile ? "text-embeddings-file"
                                                                                                 : "validation-centroids";
        }
    }
    return j;
}

SelectionResult assemble_selection(const DatasetManifest& manifest, const StrategyConfig& config,
                                   const std::vector<std::vector<StrategyScore>>* scores) {
    const SelectionBudget budget{config.shots, manifest.num_classes()};
    validate_budget(manifest, budget);

    std::vector<std::vector<ScoredId>> chosen;
    if (config.strategy == Strategy::Random) {
        std::vector<std::vector<std::string>> pool(static_cast<std::size_t>(manifest.num_classes()));
        for (auto i : manifest.indices(Split::Pool)) {
            const auto& item = manifest.items()[i];
            pool[static_cast<std::size_t>(item.label)].push_back(item.id);
        }
        chosen = select_random(pool, budget, config.seed);
    } else {
        if (scores == nullptr) throw Error(ErrorCode::InvalidArgument, "scores required for deterministic strategy");
        chosen = select_top_k(*scores, budget);
    }

    SelectionResult result;
    result.strategy = std::string(to_string(config.strategy));
    result.seed = config.seed;
    result.config = strategy_config_json(config);
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(result.config.dump())));
    result.config_hash = hash;
    for (std::size_t c = 0; c < chosen.size(); ++c) result.classes[static_cast<int>(c)] = std::move(chosen[c]);
    return result;
}

SelectionResult select(EmbeddingTable& table, const StrategyConfig& config) {
    validate_budget(table.manifest(), {config.shots, table.manifest().num_classes()});
    if (config.strategy == Strategy::Random) return assemble_selection(table.manifest(), config, nullptr);
    const auto scores = compute_strategy_scores(table, config);
    return assemble_selection(table.manifest(), config, &scores);
}

void check_selection(const DatasetManifest& manifest, const SelectionResult& result, std::size_t shots) {
    std::vector<std::string> seen;
    for (int c = 0; c < manifest.num_classes(); ++c) {
        auto it = result.classes.find(c);
        if (it == result.classes.end() || it->second.size() != shots) {
            throw Error(ErrorCode::Validation, "class " + std::to_string(c) + " does not have exactly " +
                                                   std::to_string(shots) + " selected items");
        }
        for (const auto& s : it->second) {
            const auto* item = manifest.find(s.id);
            if (item == nullptr || item->split != Split::Pool) throw Error(ErrorCode::Validation, "'" + s.id + "' is not a pool item");
            if (item->label != c) throw Error(ErrorCode::Validation, "'" + s.id + "' is not in class " + std::to_string(c));
            seen.push_back(s.id);
        }
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) throw Error(ErrorCode::Validation, "selection repeats an id");
}

std::string selection_to_json(const SelectionResult& result, std::string_view generated_at) {
    json classes = json::object();
    for (const auto& [c, items] : result.classes) {
        json arr = json::array();
        for (const auto& s : items) arr.push_back({{"id", s.id}, {"score", s.score}});
        classes[std::to_string(c)] = std::move(arr);
    }
    json doc{{"strategy", result.strategy},
             {"seed", result.seed},
             {"config_hash", result.config_hash},
             {"config", result.config},
             {"classes", std::move(classes)}};
    if (!generated_at.empty()) doc["generated_at"] = std::string(generated_at);
    return doc.dump(2) + "\n";
}

SelectionResult selection_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Parse, std::string("selection file: ") + e.what());
    }
    try {
        SelectionResult r;
        r.strategy = doc.at("strategy").get<std::string>();
        r.seed = doc.at("seed").get<std::uint64_t>();
        r.config_hash = doc.value("config_hash", std::string());
        r.config = doc.value("config", json::object());
        for (const auto& [key, arr] : doc.at("classes").items()) {
            std::vector<ScoredId> items;
            for (const auto& s : arr) items.push_back({s.at("id").get<std::string>(), s.at("score").get<double>()});
            r.classes[std::stoi(key)] = std::move(items);
        }
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("selection file: ") + e.what());
    }
}

}  // namespace fsel
