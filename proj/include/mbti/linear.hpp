#pragma once

#include <array>
#include <span>

#include <Eigen/Core>

#include "mbti/lbfgs.hpp"
#include "mbti/sparse.hpp"

namespace mbti {

/// Weight for class 0 and class 1.
using ClassWeights = std::array<double, 2>;

/// weight(c) = N / (2 * count(c)). Throws ConfigError on a single class.
ClassWeights balanced_weights(std::span<const int> y);

struct TrainConfig {
    double l2_lambda = 1.0;
    double tol = 1e-4;
    int max_iter = 200;
    int memory = 10;
    /// Balanced weights are derived from the training labels when set;
    /// otherwise `class_weights` is used as given.
    bool balanced = true;
    ClassWeights class_weights{1.0, 1.0};
};

struct Prediction {
    double p1 = 0.5;
    int label = 0;
};

struct LogisticModel {
    Eigen::VectorXd w;
    double b = 0.0;

    double decision(const SparseVector& x) const;
    /// label 1 iff p1 > 0.5; an exact tie predicts 0.
    Prediction predict(const SparseVector& x) const;
};

double sigmoid(double z);
/// log(1 + exp(z)) without overflow.
double softplus(double z);

/// Weighted logistic loss with L2 penalty on w (bias unpenalised):
///   sum_i cw(y_i) log(1 + exp(-s_i (w.x_i + b))) + lambda/2 ||w||^2,  s_i = 2 y_i - 1.
/// `params` is [w; b]; `grad` receives the analytic gradient. Throws
/// NumericError on a non-finite result.
double logistic_objective(const Eigen::VectorXd& params, const SparseMatrix& X,
                          std::span<const int> y, double l2_lambda, const ClassWeights& weights,
                          Eigen::VectorXd& grad);

struct FitReport {
    int iterations = 0;
    bool converged = false;
    int linesearch_failures = 0;
    double grad_inf = 0.0;
};

LogisticModel fit_logreg(const SparseMatrix& X, std::span<const int> y, const TrainConfig& config,
                         FitReport* report = nullptr);

} // namespace mbti
