// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace overgen {

/// Hashed character n-gram layout.
///
/// Pair features (evaluator), dimension D:
///   [0, H)      context n-gram counts,  index = fnv1a64(utf8 gram) % H
///   [H, 2H)     response n-gram counts, index = H + fnv1a64(utf8 gram) % H
///   [D-4, D)    context length, response length, response/context length
///               ratio (all in code points) and the number of distinct
///               character trigrams shared by context and response
/// with H = (D - 4) / 2. Grams are runs of min_n..max_n consecutive code
/// points. The four scalars are standardized by training-set statistics.
///
/// Response-only features (DA classifiers): index = fnv1a64(gram) % D.
struct FeatureConfig {
    std::size_t dim = 4096;
    int min_n = 1;
    int max_n = 3;

    bool operator==(const FeatureConfig&) const = default;
};

inline constexpr std::size_t kScalarFeatures = 4;

void validate(const FeatureConfig& config);
nlohmann::json to_json(const FeatureConfig& config);
FeatureConfig feature_config_from_json(const nlohmann::json& j);

/// Per-scalar mean and standard deviation; sd 0 is stored as 1.
struct FeatureStats {
    std::array<double, kScalarFeatures> mean{};
    std::array<double, kScalarFeatures> sd{1.0, 1.0, 1.0, 1.0};

    bool operator==(const FeatureStats&) const = default;
};

nlohmann::json to_json(const FeatureStats& stats);
FeatureStats feature_stats_from_json(const nlohmann::json& j);

/// Sorted, duplicate-free (index, value) list.
struct SparseFeatures {
    std::vector<std::uint32_t> indices;
    std::vector<double> values;

    double dot(std::span<const double> dense) const;
    void add_scaled_to(std::span<double> dense, double scale) const;
    double squared_norm() const;
};

using FeatureVector = std::vector<double>;

std::size_t hashed_half(const FeatureConfig& config);
std::size_t context_gram_index(std::string_view gram, const FeatureConfig& config);
std::size_t response_gram_index(std::string_view gram, const FeatureConfig& config);

/// Raw (unstandardized) scalars for a pair.
std::array<double, kScalarFeatures> pair_scalars(std::string_view context, std::string_view response,
                                                 const FeatureConfig& config);

SparseFeatures featurize_sparse(std::string_view context, std::string_view response,
                                const FeatureConfig& config, const FeatureStats& stats = {});

/// Dense form of featurize_sparse.
FeatureVector featurize(std::string_view context, std::string_view response,
                        const FeatureConfig& config, const FeatureStats& stats = {});

SparseFeatures featurize_response(std::string_view response, const FeatureConfig& config);

/// Mean/sd of the scalar block over a training set.
FeatureStats fit_feature_stats(std::span<const std::array<double, kScalarFeatures>> scalars);

}  // namespace overgen
