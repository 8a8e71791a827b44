// SPDX-License-Identifier: Apache-2.0

#include "overgen/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "overgen/error.hpp"
#include "overgen/hash.hpp"
#include "overgen/text.hpp"

namespace overgen {

namespace {

template <class Fn>
void for_each_gram(std::string_view s, int min_n, int max_n, Fn&& fn) {
    const auto cps = text::code_points(s);
    for (int n = min_n; n <= max_n; ++n) {
        const auto len = static_cast<std::size_t>(n);
        if (cps.size() < len) break;
        for (std::size_t i = 0; i + len <= cps.size(); ++i) {
            const char* begin = cps[i].data();
            const char* end = cps[i + len - 1].data() + cps[i + len - 1].size();
            fn(std::string_view(begin, static_cast<std::size_t>(end - begin)));
        }
    }
}

std::set<std::string_view> trigram_set(std::string_view s) {
    std::set<std::string_view> out;
    for_each_gram(s, 3, 3, [&](std::string_view g) { out.insert(g); });
    return out;
}

SparseFeatures from_map(const std::map<std::uint32_t, double>& m) {
    SparseFeatures f;
    f.indices.reserve(m.size());
    f.values.reserve(m.size());
    for (const auto& [i, v] : m) {
        f.indices.push_back(i);
        f.values.push_back(v);
    }
    return f;
}

void require_text(std::string_view s, const char* what) {
    if (text::is_blank(s)) throw ValidationError(std::string("empty ") + what);
}

}  // namespace

void validate(const FeatureConfig& config) {
    if (config.dim < kScalarFeatures + 2) throw ValidationError("feature dimension too small");
    if (config.dim > (1u << 30)) throw ValidationError("feature dimension too large");
    if (config.min_n < 1 || config.max_n < config.min_n) {
        throw ValidationError("invalid n-gram range");
    }
}

nlohmann::json to_json(const FeatureConfig& config) {
    return {{"dim", config.dim}, {"min_n", config.min_n}, {"max_n", config.max_n}};
}

FeatureConfig feature_config_from_json(const nlohmann::json& j) {
    FeatureConfig c;
    c.dim = j.at("dim").get<std::size_t>();
    c.min_n = j.at("min_n").get<int>();
    c.max_n = j.at("max_n").get<int>();
    validate(c);
    return c;
}

nlohmann::json to_json(const FeatureStats& stats) {
    return {{"mean", stats.mean}, {"sd", stats.sd}};
}

FeatureStats feature_stats_from_json(const nlohmann::json& j) {
    FeatureStats s;
    s.mean = j.at("mean").get<std::array<double, kScalarFeatures>>();
    s.sd = j.at("sd").get<std::array<double, kScalarFeatures>>();
    return s;
}

double SparseFeatures::dot(std::span<const double> dense) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < indices.size(); ++i) acc += values[i] * dense[indices[i]];
    return acc;
}

void SparseFeatures::add_scaled_to(std::span<double> dense, double scale) const {
    for (std::size_t i = 0; i < indices.size(); ++i) dense[indices[i]] += scale * values[i];
}

double SparseFeatures::squared_norm() const {
    double acc = 0.0;
    for (double v : values) acc += v * v;
    return acc;
}

std::size_t hashed_half(const FeatureConfig& config) {
    return (config.dim - kScalarFeatures) / 2;
}

std::size_t context_gram_index(std::string_view gram, const FeatureConfig& config) {
    return fnv1a64(gram) % hashed_half(config);
}

std::size_t response_gram_index(std::string_view gram, const FeatureConfig& config) {
    const auto half = hashed_half(config);
    return half + fnv1a64(gram) % half;
}

std::array<double, kScalarFeatures> pair_scalars(std::string_view context, std::string_view response,
                                                 const FeatureConfig&) {
    const auto context_len = static_cast<double>(text::code_point_count(context));
    const auto response_len = static_cast<double>(text::code_point_count(response));
    const auto ctx_tri = trigram_set(context);
    std::size_t overlap = 0;
    for (auto g : trigram_set(response)) overlap += ctx_tri.count(g);
    return {context_len, response_len, response_len / std::max(context_len, 1.0),
            static_cast<double>(overlap)};
}

SparseFeatures featurize_sparse(std::string_view context, std::string_view response,
                                const FeatureConfig& config, const FeatureStats& stats) {
    validate(config);
    require_text(context, "context");
    require_text(response, "response");
    std::map<std::uint32_t, double> counts;
    for_each_gram(context, config.min_n, config.max_n, [&](std::string_view g) {
        counts[static_cast<std::uint32_t>(context_gram_index(g, config))] += 1.0;
    });
    for_each_gram(response, config.min_n, config.max_n, [&](std::string_view g) {
        counts[static_cast<std::uint32_t>(response_gram_index(g, config))] += 1.0;
    });
    const auto scalars = pair_scalars(context, response, config);
    const auto base = static_cast<std::uint32_t>(config.dim - kScalarFeatures);
    for (std::size_t i = 0; i < kScalarFeatures; ++i) {
        const double z = (scalars[i] - stats.mean[i]) / stats.sd[i];
        if (z != 0.0) counts[base + static_cast<std::uint32_t>(i)] = z;
    }
    return from_map(counts);
}

FeatureVector featurize(std::string_view context, std::string_view response,
                        const FeatureConfig& config, const FeatureStats& stats) {
    const auto sparse = featurize_sparse(context, response, config, stats);
    FeatureVector dense(config.dim, 0.0);
    sparse.add_scaled_to(dense, 1.0);
    return dense;
}

SparseFeatures featurize_response(std::string_view response, const FeatureConfig& config) {
    validate(config);
    require_text(response, "response");
    std::map<std::uint32_t, double> counts;
    for_each_gram(response, config.min_n, config.max_n, [&](std::string_view g) {
        counts[static_cast<std::uint32_t>(fnv1a64(g) % config.dim)] += 1.0;
    });
    return from_map(counts);
}

FeatureStats fit_feature_stats(std::span<const std::array<double, kScalarFeatures>> scalars) {
    FeatureStats stats;
    if (scalars.empty()) return stats;
    const auto n = static_cast<double>(scalars.size());
    for (std::size_t k = 0; k < kScalarFeatures; ++k) {
        double sum = 0.0;
        for (const auto& s : scalars) sum += s[k];
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& s : scalars) ss += (s[k] - mean) * (s[k] - mean);
        const double sd = std::sqrt(ss / n);
        stats.mean[k] = mean;
        stats.sd[k] = sd > 1e-12 ? sd : 1.0;
    }
    return stats;
}

}  // namespace overgen
