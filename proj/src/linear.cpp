#include "mbti/linear.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mbti/error.hpp"

namespace mbti {

ClassWeights balanced_weights(std::span<const int> y) {
    std::array<std::size_t, 2> count{};
    for (int v : y) ++count[v ? 1 : 0];
    if (count[0] == 0 || count[1] == 0)
        throw ConfigError("balanced class weights need both classes present");
    const auto n = static_cast<double>(y.size());
    return {n / (2.0 * static_cast<double>(count[0])), n / (2.0 * static_cast<double>(count[1]))};
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double LogisticModel::decision(const SparseVector& x) const {
    return x.dot(std::span<const double>(w.data(), static_cast<std::size_t>(w.size()))) + b;
}

Prediction LogisticModel::predict(const SparseVector& x) const {
    const double z = decision(x);
    return {sigmoid(z), z > 0.0 ? 1 : 0};
}

double logistic_objective(const Eigen::VectorXd& params, const SparseMatrix& X,
                          std::span<const int> y, double l2_lambda, const ClassWeights& weights,
                          Eigen::VectorXd& grad) {
    const auto dim = static_cast<Eigen::Index>(X.cols);
    if (params.size() != dim + 1 || X.size() != y.size())
        throw ConfigError("logistic objective: dimension mismatch");
    grad.setZero(dim + 1);
    const double b = params[dim];
    const std::span<const double> w(params.data(), X.cols);

    double loss = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const auto& row = X.rows[i];
        const double s = y[i] ? 1.0 : -1.0;
        const double cw = weights[y[i] ? 1 : 0];
        const double margin = s * (row.dot(w) + b);
        loss += cw * softplus(-margin);
        // d/dz of softplus(-s z) = -s * sigmoid(-s z)
        const double dz = -s * cw * sigmoid(-margin);
        for (std::size_t k = 0; k < row.nnz(); ++k) grad[row.indices[k]] += dz * row.values[k];
        grad[dim] += dz;
    }
    const auto wv = params.head(dim);
    loss += 0.5 * l2_lambda * wv.squaredNorm();
    grad.head(dim) += l2_lambda * wv;

    if (!std::isfinite(loss) || !grad.allFinite())
        throw NumericError("logistic objective produced a non-finite value");
    return loss;
}

LogisticModel fit_logreg(const SparseMatrix& X, std::span<const int> y, const TrainConfig& config,
                         FitReport* report) {
    if (X.size() == 0) throw ConfigError("cannot fit a logistic model on zero rows");
    const ClassWeights weights = config.balanced ? balanced_weights(y) : config.class_weights;
    Objective fun = [&](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
        return logistic_objective(p, X, y, config.l2_lambda, weights, g);
    };
    LbfgsOptions opts;
    opts.tol = config.tol;
    opts.max_iter = config.max_iter;
    opts.memory = config.memory;
    const auto res = lbfgs_minimize(fun, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(X.cols) + 1), opts);
    if (report) *report = {res.iterations, res.converged, res.linesearch_failures, res.grad_inf};

    LogisticModel model;
    model.w = res.x.head(static_cast<Eigen::Index>(X.cols));
    model.b = res.x[static_cast<Eigen::Index>(X.cols)];
    return model;
}

} // namespace mbti
