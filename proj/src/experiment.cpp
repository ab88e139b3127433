#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "error.hpp"
#include "rng.hpp"

namespace fsel {

using nlohmann::json;

std::string_view to_string(ClassifierKind k) {
    return k == ClassifierKind::NearestCentroid ? "nearest-centroid" : "linear-probe";
}

std::optional<ClassifierKind> parse_classifier(std::string_view text) {
    if (text == "nearest-centroid") return ClassifierKind::NearestCentroid;
    if (text == "linear-probe") return ClassifierKind::LinearProbe;
    return std::nullopt;
}

double sample_std(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    // Exactly zero for identical values; the mean can round away from them.
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) return 0.0;
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

std::vector<EvalAggregate> EvalReport::aggregates() const {
    std::vector<EvalAggregate> out;
    std::map<std::pair<std::string, std::size_t>, std::size_t> slot;
    std::vector<std::vector<double>> values;
    for (const auto& row : rows) {
        const auto key = std::make_pair(row.strategy, row.shots);
        auto [it, inserted] = slot.try_emplace(key, out.size());
        if (inserted) {
            out.push_back({row.strategy, row.shots, 0.0, 0.0, 0});
            values.emplace_back();
        }
        if (row.accuracy) values[it->second].push_back(*row.accuracy);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& v = values[i];
        out[i].n_seeds = v.size();
        if (!v.empty()) out[i].mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        // Identical values must give exactly zero, not rounding residue.
        const bool constant = std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
        out[i].std = constant ? 0.0 : sample_std(v);
    }
    return out;
}

std::size_t EvalReport::failed_rows() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const EvalRow& r) { return !r.accuracy; }));
}

std::string EvalReport::to_csv(bool dedupe) const {
    std::ostringstream out;
    out << "strategy,shots,seed,accuracy\n";
    std::map<std::pair<std::string, std::size_t>, bool> written;
    for (const auto& row : rows) {
        if (dedupe) {
            const auto strategy = parse_strategy(row.strategy);
            if (strategy && is_deterministic(*strategy) && row.accuracy) {
                auto& done = written[{row.strategy, row.shots}];
                if (done) continue;
                done = true;
            }
        }
        out << row.strategy << ',' << row.shots << ',' << row.seed << ',';
        if (row.accuracy) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6f", *row.accuracy);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

json EvalReport::aggregates_json() const {
    json aggregates = json::array();
    for (const auto& a : this->aggregates()) {
        aggregates.push_back({{"strategy", a.strategy}, {"shots", a.shots}, {"mean", a.mean}, {"std", a.std}, {"n_seeds", a.n_seeds}});
    }
    json failures = json::array();
    for (const auto& r : rows) {
        if (!r.accuracy) failures.push_back({{"strategy", r.strategy}, {"shots", r.shots}, {"seed", r.seed}, {"error", r.error}});
    }
    return json{{"aggregates", std::move(aggregates)}, {"failures", std::move(failures)}};
}

namespace {

std::vector<int> labels_of(const DatasetManifest& manifest, std::span<const std::size_t> indices) {
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(manifest.items()[i].label);
    return out;
}

double train_and_score(const EmbeddingTable& table, std::span<const std::size_t> train_idx,
                       std::span<const std::size_t> test_idx, ClassifierKind classifier, const LinearProbeConfig& probe) {
    const auto& manifest = table.manifest();
    std::vector<Embedding> train;
    for (auto i : train_idx) train.push_back(table.at(i));
    std::vector<Embedding> test;
    for (auto i : test_idx) test.push_back(table.at(i));
    const auto train_labels = labels_of(manifest, train_idx);
    const auto truth = labels_of(manifest, test_idx);

    std::vector<int> predicted;
    if (classifier == ClassifierKind::NearestCentroid) {
        predicted = nearest_centroid_classify(train, train_labels, manifest.num_classes(), test);
    } else {
        const auto fit = linear_probe_train(train, train_labels, manifest.num_classes(), probe);
        predicted = fit.model.predict(test);
    }
    return accuracy(predicted, truth);
}

std::vector<std::size_t> selection_indices(const DatasetManifest& manifest, const SelectionResult& selection) {
    std::vector<std::size_t> out;
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < manifest.size(); ++i) index.emplace(manifest.items()[i].id, i);
    for (const auto& [c, items] : selection.classes) {
        for (const auto& s : items) {
            auto it = index.find(s.id);
            if (it == index.end()) throw Error(ErrorCode::Validation, "selected id '" + s.id + "' not in manifest");
            out.push_back(it->second);
        }
    }
    return out;
}

}  // namespace

double evaluate_selection(EmbeddingTable& table, const SelectionResult& selection, ClassifierKind classifier,
                          const LinearProbeConfig& probe) {
    const auto& manifest = table.manifest();
    const auto train_idx = selection_indices(manifest, selection);
    const auto test_idx = manifest.indices(Split::Test);
    if (test_idx.empty()) throw Error(ErrorCode::InvalidArgument, "manifest has no test items");
    table.ensure(Split::Pool);
    table.ensure(Split::Test);
    return train_and_score(table, train_idx, test_idx, classifier, probe);
}

EvalReport run_experiment(EmbeddingTable& table, const ExperimentConfig& config) {
    const auto& manifest = table.manifest();
    if (config.strategies.empty() || config.shots.empty() || config.seeds.empty()) {
        throw Error(ErrorCode::InvalidArgument, "experiment needs at least one strategy, shot count, and seed");
    }
    const auto test_idx = manifest.indices(Split::Test);
    if (test_idx.empty()) throw Error(ErrorCode::InvalidArgument, "manifest has no test items");
    table.ensure(Split::Pool);
    table.ensure(Split::Test);

    StrategyConfig base;
    base.noise = config.noise;
    base.temperature = config.temperature;
    base.metric = config.metric;
    base.prototypes = config.prototypes;
    base.jobs = config.jobs;

    // Deterministic strategies are scored once; a scoring failure fails all
    // of that strategy's rows.
    struct Scored {
        std::vector<std::vector<StrategyScore>> scores;
        std::string error;
    };
    std::map<Strategy, Scored> scored;
    for (auto s : config.strategies) {
        if (!is_deterministic(s) || scored.contains(s)) continue;
        StrategyConfig sc = base;
        sc.strategy = s;
        if ((s == Strategy::Entropy || s == Strategy::Margin) && !sc.prototypes) {
            try {
                sc.prototypes = ClassPrototypes{{}, PrototypeSource::ValidationCentroids};
                for (auto& c : class_centroids(table.grouped(Split::Validation))) sc.prototypes->per_class.push_back(std::move(c.centroid));
            } catch (const std::exception& e) {
                scored[s].error = e.what();
                continue;
            }
        }
        try {
            scored[s].scores = compute_strategy_scores(table, sc);
        } catch (const std::exception& e) {
            scored[s].error = e.what();
        }
    }

    struct Cell {
        Strategy strategy;
        std::size_t shots;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (auto s : config.strategies) {
        for (auto k : config.shots) {
            for (auto seed : config.seeds) cells.push_back({s, k, seed});
        }
    }

    EvalReport report;
    report.rows.resize(cells.size());
    auto run_cell = [&](std::size_t i) {
        const auto& cell = cells[i];
        auto& row = report.rows[i];
        row.strategy = std::string(to_string(cell.strategy));
        row.shots = cell.shots;
        row.seed = cell.seed;
        try {
            StrategyConfig sc = base;
            sc.strategy = cell.strategy;
            sc.shots = cell.shots;
            sc.seed = cell.seed;
            const std::vector<std::vector<StrategyScore>>* scores = nullptr;
            if (is_deterministic(cell.strategy)) {
                const auto& entry = scored.at(cell.strategy);
                if (!entry.error.empty()) throw Error(ErrorCode::InvalidArgument, entry.error);
                scores = &entry.scores;
            }
            const auto selection = assemble_selection(manifest, sc, scores);
            const auto train_idx = selection_indices(manifest, selection);
            for (auto t : train_idx) row.selected.push_back(manifest.items()[t].id);
            row.accuracy = train_and_score(table, train_idx, test_idx, config.classifier, config.probe);
        } catch (const std::exception& e) {
            row.accuracy.reset();
            row.error = e.what();
        }
    };

    const std::size_t jobs = std::max<std::size_t>(1, std::min(config.jobs, cells.size()));
    if (jobs == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
            });
        }
        for (auto& t : workers) t.join();
    }
    return report;
}

GeneralityResult generality_diagnostic(std::span<const Embedding> embeddings, std::uint64_t seed, std::size_t cap) {
    if (embeddings.size() < 2) throw Error(ErrorCode::InvalidArgument, "generality needs at least 2 embeddings");
    if (cap < 2) cap = 2;
    std::vector<std::size_t> chosen(embeddings.size());
    std::iota(chosen.begin(), chosen.end(), 0);
    GeneralityResult result;
    if (chosen.size() > cap) {
        Engine engine(seed);
        for (std::size_t k = 0; k < cap; ++k) std::swap(chosen[k], chosen[k + uniform_below(engine, chosen.size() - k)]);
        chosen.resize(cap);
        std::sort(chosen.begin(), chosen.end());
        result.sampled = true;
    }
    result.n_used = chosen.size();

    std::vector<std::vector<double>> unit;
    unit.reserve(chosen.size());
    for (auto i : chosen) {
        const auto& e = embeddings[i];
        const double n = e.norm();
        if (!(n > 0.0)) throw Error(ErrorCode::Degenerate, "zero-norm embedding in generality diagnostic");
        std::vector<double> v(e.values().begin(), e.values().end());
        for (double& x : v) x /= n;
        unit.push_back(std::move(v));
    }
    // Exact pair loop: the (||sum u||^2 - n) / 2 shortcut cancels near 0%.
    double acc = 0.0;
    for (std::size_t i = 0; i < unit.size(); ++i) {
        for (std::size_t j = i + 1; j < unit.size(); ++j) acc += std::clamp(dot(unit[i], unit[j]), -1.0, 1.0);
    }
    const double pairs = static_cast<double>(unit.size()) * static_cast<double>(unit.size() - 1) / 2.0;
    result.percent = 100.0 * acc / pairs;
    return result;
}

}  // namespace fsel
