// SPDX-License-Identifier: Apache-2.0

#include "overgen/linear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "overgen/error.hpp"
#include "overgen/random.hpp"

namespace overgen {

namespace {

double l2_squared(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return acc;
}

void check_shapes(std::span<const SparseFeatures> xs, std::span<const double> ys,
                  const LinearModel& model) {
    if (xs.empty()) throw ValidationError("empty training data");
    if (xs.size() != ys.size()) throw ValidationError("feature/target count mismatch");
    for (const auto& x : xs) {
        if (!x.indices.empty() && x.indices.back() >= model.weights.size()) {
            throw ValidationError("feature index exceeds model dimension");
        }
    }
}

// log(1 + exp(-m)) without overflow.
double softplus_neg(double m) {
    return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

}  // namespace

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Objective squared_error_objective(std::span<const SparseFeatures> xs, std::span<const double> ys,
                                  const LinearModel& model, double lambda) {
    check_shapes(xs, ys, model);
    const auto n = static_cast<double>(xs.size());
    Objective out;
    out.grad_weights.assign(model.weights.size(), 0.0);
    double sse = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = model.predict(xs[i]) - ys[i];
        sse += r * r;
        xs[i].add_scaled_to(out.grad_weights, 2.0 * r / n);
        out.grad_bias += 2.0 * r / n;
    }
    out.loss = sse / n + lambda * l2_squared(model.weights);
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
        out.grad_weights[j] += 2.0 * lambda * model.weights[j];
    }
    return out;
}

Objective logistic_objective(std::span<const SparseFeatures> xs, std::span<const double> ys,
                             const LinearModel& model, double lambda) {
    check_shapes(xs, ys, model);
    const auto n = static_cast<double>(xs.size());
    Objective out;
    out.grad_weights.assign(model.weights.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double z = model.predict(xs[i]);
        const double s = ys[i] > 0.5 ? 1.0 : -1.0;
        total += softplus_neg(s * z);
        const double dz = sigmoid(z) - (ys[i] > 0.5 ? 1.0 : 0.0);
        xs[i].add_scaled_to(out.grad_weights, dz / n);
        out.grad_bias += dz / n;
    }
    out.loss = total / n + lambda * l2_squared(model.weights);
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
        out.grad_weights[j] += 2.0 * lambda * model.weights[j];
    }
    return out;
}

Objective evaluate_objective(LossKind kind, std::span<const SparseFeatures> xs,
                             std::span<const double> ys, const LinearModel& model, double lambda) {
    return kind == LossKind::Squared ? squared_error_objective(xs, ys, model, lambda)
                                     : logistic_objective(xs, ys, model, lambda);
}

double lipschitz_bound(LossKind kind, std::span<const SparseFeatures> xs, std::size_t dim,
                       double lambda, std::uint64_t seed) {
    if (xs.empty()) throw ValidationError("empty training data");
    const auto n = static_cast<double>(xs.size());
    // Trace of the Gram matrix bounds its largest eigenvalue from above.
    double trace = 0.0;
    for (const auto& x : xs) trace += (x.squared_norm() + 1.0) / n;

    Rng rng(seed);
    std::vector<double> v(dim + 1);
    for (auto& e : v) e = rng.normal();
    double eig = 0.0;
    std::vector<double> u(dim + 1);
    for (int it = 0; it < 60; ++it) {
        const double norm = std::sqrt(l2_squared(v));
        if (norm == 0.0) break;
        for (auto& e : v) e /= norm;
        std::fill(u.begin(), u.end(), 0.0);
        for (const auto& x : xs) {
            const double av = x.dot(v) + v[dim];
            x.add_scaled_to(u, av / n);
            u[dim] += av / n;
        }
        eig = std::sqrt(l2_squared(u));
        std::swap(u, v);
    }
    const double gram = std::min(trace, 1.2 * eig + 1e-12);
    const double curvature = kind == LossKind::Squared ? 2.0 : 0.25;
    return curvature * gram + 2.0 * lambda;
}

LinearModel fit_linear(LossKind kind, std::span<const SparseFeatures> xs, std::span<const double> ys,
                       std::size_t dim, double lambda, std::uint64_t seed,
                       const OptimizerOptions& options) {
    if (xs.empty()) throw ValidationError("empty training data");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be >= 0");

    LinearModel x_prev{std::vector<double>(dim, 0.0), 0.0};
    double mean_y = 0.0;
    for (double y : ys) mean_y += y;
    mean_y /= static_cast<double>(ys.size());
    if (kind == LossKind::Squared) {
        x_prev.bias = mean_y;
    } else {
        const double p = std::clamp(mean_y, 1e-6, 1.0 - 1e-6);
        x_prev.bias = std::log(p / (1.0 - p));
    }

    const double step = 1.0 / lipschitz_bound(kind, xs, dim, lambda, seed);
    LinearModel y = x_prev;
    LinearModel x = x_prev;
    LinearModel best = x_prev;
    double best_loss = std::numeric_limits<double>::infinity();
    double t = 1.0;

    for (int it = 0; it < options.max_iters; ++it) {
        const auto obj = evaluate_objective(kind, xs, ys, y, lambda);
        if (!std::isfinite(obj.loss)) throw Error("training loss became non-finite");
        if (obj.loss < best_loss) {
            best_loss = obj.loss;
            best = y;
        }
        double gmax = std::abs(obj.grad_bias);
        for (double g : obj.grad_weights) gmax = std::max(gmax, std::abs(g));
        if (gmax < options.grad_tol) break;

        double progress = 0.0;  // grad . (x_new - x_prev)
        for (std::size_t j = 0; j < dim; ++j) {
            x.weights[j] = y.weights[j] - step * obj.grad_weights[j];
            progress += obj.grad_weights[j] * (x.weights[j] - x_prev.weights[j]);
        }
        x.bias = y.bias - step * obj.grad_bias;
        progress += obj.grad_bias * (x.bias - x_prev.bias);

        if (progress > 0.0) {
            t = 1.0;
            y = x;
        } else {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            const double momentum = (t - 1.0) / t_next;
            for (std::size_t j = 0; j < dim; ++j) {
                y.weights[j] = x.weights[j] + momentum * (x.weights[j] - x_prev.weights[j]);
            }
            y.bias = x.bias + momentum * (x.bias - x_prev.bias);
            t = t_next;
        }
        std::swap(x_prev, x);
    }
    const auto final_obj = evaluate_objective(kind, xs, ys, x_prev, lambda);
    if (final_obj.loss < best_loss) best = x_prev;
    return best;
}

}  // namespace overgen
