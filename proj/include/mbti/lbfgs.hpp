#pragma once

#include <deque>
#include <functional>

#include <Eigen/Core>

namespace mbti {

/// Objective callback: returns f(x) and writes the gradient into `grad`
/// (already sized like x).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsOptions {
    double tol = 1e-4;    // stop when ||grad||_inf <= tol
    int memory = 10;      // stored correction pairs
    int max_iter = 200;
    double c1 = 1e-4;     // sufficient decrease
    double c2 = 0.9;      // curvature (strong Wolfe)
    int max_linesearch = 20;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double f = 0.0;
    double grad_inf = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    /// Line searches that failed and fell back to a steepest-descent step.
    int linesearch_failures = 0;
};

/// Curvature pairs kept by the two-loop recursion.
class LbfgsState {
public:
    explicit LbfgsState(int memory) : memory_(memory) {}

    /// Stores (s, y) if s'y > 1e-12; returns whether it was kept.
    bool push(const Eigen::VectorXd& s, const Eigen::VectorXd& y);
    /// -H * g using the two-loop recursion with H0 = s'y / y'y.
    Eigen::VectorXd direction(const Eigen::VectorXd& g) const;
    void clear() { pairs_.clear(); }
    std::size_t size() const { return pairs_.size(); }

private:
    struct Pair {
        Eigen::VectorXd s, y;
        double rho;
    };
    int memory_;
    std::deque<Pair> pairs_;
};

struct LineSearchResult {
    bool ok = false;
    double step = 0.0;
    double f = 0.0;
    int evaluations = 0;
};

/// Strong-Wolfe line search (bracketing + zoom with cubic interpolation).
/// On success x, f and g hold the accepted point.
LineSearchResult strong_wolfe_search(const Objective& fun, Eigen::VectorXd& x, double& f,
                                     Eigen::VectorXd& g, const Eigen::VectorXd& direction,
                                     double initial_step, const LbfgsOptions& options);

/// Limited-memory BFGS. The first step is scaled by 1/||grad||_2; a failed
/// line search drops the memory and retries along the steepest-descent
/// direction, counting the failure.
LbfgsResult lbfgs_minimize(const Objective& fun, Eigen::VectorXd x0, const LbfgsOptions& options = {});

} // namespace mbti
