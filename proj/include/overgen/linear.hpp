// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "overgen/features.hpp"

namespace overgen {

struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;

    double predict(const SparseFeatures& x) const { return x.dot(weights) + bias; }
};

struct Objective {
    double loss = 0.0;
    std::vector<double> grad_weights;
    double grad_bias = 0.0;
};

enum class LossKind { Squared, Logistic };

// mean((w.x + b - y)^2) + lambda * |w|^2
Objective squared_error_objective(std::span<const SparseFeatures> xs, std::span<const double> ys,
                                  const LinearModel& model, double lambda);

// mean(log(1 + exp(-s * (w.x + b)))) + lambda * |w|^2, s = +1 for y = 1, -1 for y = 0
Objective logistic_objective(std::span<const SparseFeatures> xs, std::span<const double> ys,
                             const LinearModel& model, double lambda);

Objective evaluate_objective(LossKind kind, std::span<const SparseFeatures> xs,
                             std::span<const double> ys, const LinearModel& model, double lambda);

double sigmoid(double z);

struct OptimizerOptions {
    int max_iters = 4000;
    double grad_tol = 1e-10;  // stop when |grad|_inf falls below this
};

/// Upper bound on the gradient's Lipschitz constant, from a seeded power
/// iteration on the bias-augmented Gram matrix.
double lipschitz_bound(LossKind kind, std::span<const SparseFeatures> xs, std::size_t dim,
                       double lambda, std::uint64_t seed);

/// Full-batch Nesterov-accelerated gradient descent with fixed step 1/L and
/// gradient-based restarts. Starts from w = 0 with the loss-optimal bias for
/// zero weights, and returns the lowest-loss iterate seen.
LinearModel fit_linear(LossKind kind, std::span<const SparseFeatures> xs, std::span<const double> ys,
                       std::size_t dim, double lambda, std::uint64_t seed,
                       const OptimizerOptions& options = {});

}  // namespace overgen
