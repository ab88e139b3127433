#include "synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "error.hpp"
#include "rng.hpp"

namespace fsel {

using nlohmann::json;

void SyntheticSpec::validate() const {
    if (num_classes < 1) throw Error(ErrorCode::InvalidArgument, "num_classes must be >= 1");
    if (dim < 1) throw Error(ErrorCode::InvalidArgument, "dim must be >= 1");
    if (dim < static_cast<std::size_t>(num_classes)) {
        throw Error(ErrorCode::InvalidArgument, "dim " + std::to_string(dim) + " too small for " +
                                                    std::to_string(num_classes) + " class directions");
    }
    if (!(separation > 0.0)) throw Error(ErrorCode::InvalidArgument, "separation must be > 0");
    if (!(within_std > 0.0)) throw Error(ErrorCode::InvalidArgument, "within_std must be > 0");
    if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0)) throw Error(ErrorCode::InvalidArgument, "outlier_fraction must be in [0,1)");
    if (!(outlier_multiplier >= 1.0)) throw Error(ErrorCode::InvalidArgument, "outlier_multiplier must be >= 1");
}

json to_json(const SyntheticSpec& s) {
    return json{{"num_classes", s.num_classes},
                {"dim", s.dim},
                {"pool_per_class", s.pool_per_class},
                {"validation_per_class", s.validation_per_class},
                {"test_per_class", s.test_per_class},
                {"separation", s.separation},
                {"within_std", s.within_std},
                {"outlier_fraction", s.outlier_fraction},
                {"outlier_multiplier", s.outlier_multiplier},
                {"seed", s.seed}};
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Parse, "synthetic spec must be a JSON object");
    SyntheticSpec s;
    try {
        s.num_classes = j.value("num_classes", s.num_classes);
        s.dim = j.value("dim", s.dim);
        s.pool_per_class = j.value("pool_per_class", s.pool_per_class);
        s.validation_per_class = j.value("validation_per_class", s.validation_per_class);
        s.test_per_class = j.value("test_per_class", s.test_per_class);
        s.separation = j.value("separation", s.separation);
        s.within_std = j.value("within_std", s.within_std);
        s.outlier_fraction = j.value("outlier_fraction", s.outlier_fraction);
        s.outlier_multiplier = j.value("outlier_multiplier", s.outlier_multiplier);
        s.seed = j.value("seed", s.seed);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("synthetic spec: ") + e.what());
    }
    s.validate();
    return s;
}

SyntheticSpec load_synthetic_spec(std::string_view name_or_path) {
    if (name_or_path == "std-bench") return SyntheticSpec::std_bench();
    std::ifstream in{std::string(name_or_path)};
    if (!in) throw Error(ErrorCode::Io, "cannot open synthetic spec '" + std::string(name_or_path) + "'");
    try {
        return synthetic_spec_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Parse, std::string("synthetic spec: ") + e.what());
    }
}

namespace {

std::vector<std::vector<double>> class_directions(const SyntheticSpec& spec, Engine& engine) {
    std::vector<std::vector<double>> basis;
    while (basis.size() < static_cast<std::size_t>(spec.num_classes)) {
        std::vector<double> v(spec.dim);
        for (double& x : v) x = standard_normal(engine);
        for (const auto& b : basis) {
            const double proj = dot(v, b);
            for (std::size_t k = 0; k < v.size(); ++k) v[k] -= proj * b[k];
        }
        const double n = l2_norm(v);
        if (n < 1e-8) continue;
        for (double& x : v) x /= n;
        basis.push_back(std::move(v));
    }
    return basis;
}

std::size_t per_class(const SyntheticSpec& spec, Split split) {
    switch (split) {
        case Split::Pool: return spec.pool_per_class;
        case Split::Validation: return spec.validation_per_class;
        case Split::Test: return spec.test_per_class;
    }
    return 0;
}

}  // namespace

DatasetManifest generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Engine direction_engine(derive_seed(spec.seed, 0));
    const auto directions = class_directions(spec, direction_engine);

    std::vector<DatasetItem> items;
    for (int c = 0; c < spec.num_classes; ++c) {
        std::vector<double> mean(spec.dim);
        for (std::size_t k = 0; k < spec.dim; ++k) mean[k] = spec.separation * directions[static_cast<std::size_t>(c)][k];

        for (auto split : {Split::Pool, Split::Validation, Split::Test}) {
            const std::size_t n = per_class(spec, split);
            Engine engine(derive_seed(spec.seed, 1 + static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(split)));

            std::vector<bool> is_outlier(n, false);
            const auto n_out = static_cast<std::size_t>(std::llround(spec.outlier_fraction * static_cast<double>(n)));
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            for (std::size_t k = 0; k < n_out; ++k) {
                std::swap(order[k], order[k + uniform_below(engine, n - k)]);
                is_outlier[order[k]] = true;
            }

            for (std::size_t i = 0; i < n; ++i) {
                const double sd = is_outlier[i] ? spec.within_std * spec.outlier_multiplier : spec.within_std;
                RawFeatures f;
                f.values.resize(spec.dim);
                for (std::size_t k = 0; k < spec.dim; ++k) f.values[k] = mean[k] + sd * standard_normal(engine);
                char id[64];
                std::snprintf(id, sizeof id, "c%d_%s_%04zu", c, std::string(to_string(split)).c_str(), i);
                items.push_back(DatasetItem{id, std::move(f), c, split, is_outlier[i]});
            }
        }
    }
    return DatasetManifest(std::move(items), spec.num_classes);
}

}  // namespace fsel
