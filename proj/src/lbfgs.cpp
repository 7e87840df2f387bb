#include "mbti/lbfgs.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "mbti/error.hpp"

namespace mbti {

bool LbfgsState::push(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
    const double sy = s.dot(y);
    if (!(sy > 1e-12)) return false;
    if (static_cast<int>(pairs_.size()) == memory_) pairs_.pop_front();
    pairs_.push_back(Pair{s, y, 1.0 / sy});
    return true;
}

Eigen::VectorXd LbfgsState::direction(const Eigen::VectorXd& g) const {
    Eigen::VectorXd q = g;
    std::vector<double> alpha(pairs_.size());
    for (std::size_t i = pairs_.size(); i-- > 0;) {
        alpha[i] = pairs_[i].rho * pairs_[i].s.dot(q);
        q -= alpha[i] * pairs_[i].y;
    }
    if (!pairs_.empty()) {
        const auto& last = pairs_.back();
        q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
        const double beta = pairs_[i].rho * pairs_[i].y.dot(q);
        q += (alpha[i] - beta) * pairs_[i].s;
    }
    return -q;
}

namespace {

// Minimiser of the cubic interpolating (a, fa, da) and (b, fb, db), or the
// midpoint when the interpolant is unusable. Kept 10% away from both ends.
double cubic_step(double a, double fa, double da, double b, double fb, double db) {
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const double width = hi - lo;
    const double mid = 0.5 * (a + b);
    const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - da * db;
    if (!(disc >= 0.0) || !std::isfinite(d1)) return mid;
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = db - da + 2.0 * d2;
    if (denom == 0.0 || !std::isfinite(denom)) return mid;
    const double t = b - (b - a) * (db + d2 - d1) / denom;
    if (!std::isfinite(t) || t < lo + 0.1 * width || t > hi - 0.1 * width) return mid;
    return t;
}

} // namespace

LineSearchResult strong_wolfe_search(const Objective& fun, Eigen::VectorXd& x, double& f,
                                     Eigen::VectorXd& g, const Eigen::VectorXd& direction,
                                     double initial_step, const LbfgsOptions& options) {
    LineSearchResult res;
    const double f0 = f;
    const double dphi0 = g.dot(direction);
    if (!(dphi0 < 0.0)) return res;

    const Eigen::VectorXd x0 = x;
    Eigen::VectorXd xa(x.size()), ga(x.size());
    int trials = 0;

    auto evaluate = [&](double step, double& dphi) {
        xa = x0 + step * direction;
        const double fa = fun(xa, ga);
        ++res.evaluations;
        ++trials;
        dphi = ga.dot(direction);
        return fa;
    };
    auto accept = [&](double step, double fa) {
        x = xa;
        g = ga;
        f = fa;
        res.ok = true;
        res.step = step;
        res.f = fa;
        return res;
    };
    // f differences below this are rounding noise
    const double f_noise = 4.0 * std::numeric_limits<double>::epsilon() * std::abs(f0);
    auto armijo_fails = [&](double step, double fa) { return fa > f0 + options.c1 * step * dphi0 + f_noise; };
    auto curvature_ok = [&](double dphi) { return std::abs(dphi) <= -options.c2 * dphi0; };

    double lo = 0.0, f_lo = f0, d_lo = dphi0;
    double hi = 0.0, f_hi = 0.0, d_hi = 0.0;
    bool bracketed = false;
    double step = initial_step;

    while (trials < options.max_linesearch) {
        double dphi;
        const double fa = evaluate(step, dphi);
        if (!std::isfinite(fa) || !std::isfinite(dphi)) {
            // overshoot into a non-finite region: treat as a failed decrease
            hi = step;
            f_hi = std::numeric_limits<double>::infinity();
            d_hi = 0.0;
            bracketed = true;
            break;
        }
        if (armijo_fails(step, fa) || (trials > 1 && fa > f_lo + f_noise)) {
            hi = step;
            f_hi = fa;
            d_hi = dphi;
            bracketed = true;
            break;
        }
        if (curvature_ok(dphi)) return accept(step, fa);
        if (dphi >= 0.0) {
            hi = lo;
            f_hi = f_lo;
            d_hi = d_lo;
            lo = step;
            f_lo = fa;
            d_lo = dphi;
            bracketed = true;
            break;
        }
        lo = step;
        f_lo = fa;
        d_lo = dphi;
        step *= 2.0;
    }
    if (!bracketed) return res;

    // zoom: lo satisfies sufficient decrease, the minimiser lies between lo and hi
    while (trials < options.max_linesearch) {
        double trial;
        if (std::isfinite(f_hi))
            trial = cubic_step(lo, f_lo, d_lo, hi, f_hi, d_hi);
        else
            trial = 0.5 * (lo + hi);
        double dphi;
        const double fa = evaluate(trial, dphi);
        if (!std::isfinite(fa) || !std::isfinite(dphi)) {
            hi = trial;
            f_hi = std::numeric_limits<double>::infinity();
            continue;
        }
        if (armijo_fails(trial, fa) || fa > f_lo + f_noise) {
            hi = trial;
            f_hi = fa;
            d_hi = dphi;
        } else {
            if (curvature_ok(dphi)) return accept(trial, fa);
            if (dphi * (hi - lo) >= 0.0) {
                hi = lo;
                f_hi = f_lo;
                d_hi = d_lo;
            }
            lo = trial;
            f_lo = fa;
            d_lo = dphi;
        }
        if (std::abs(hi - lo) <= 1e-16 * std::max(1.0, std::abs(lo))) break;
    }
    return res;
}

LbfgsResult lbfgs_minimize(const Objective& fun, Eigen::VectorXd x0, const LbfgsOptions& options) {
    LbfgsResult out;
    Eigen::VectorXd x = std::move(x0);
    Eigen::VectorXd g(x.size());
    double f = fun(x, g);
    ++out.evaluations;
    if (!std::isfinite(f) || !g.allFinite())
        throw NumericError("objective is not finite at the starting point");

    LbfgsState state(options.memory);
    for (int iter = 0; iter < options.max_iter; ++iter) {
        if (g.lpNorm<Eigen::Infinity>() <= options.tol) break;

        Eigen::VectorXd d;
        double step0 = 1.0;
        if (state.size() == 0) {
            d = -g;
            step0 = 1.0 / g.norm();
        } else {
            d = state.direction(g);
            if (!(g.dot(d) < 0.0)) {
                state.clear();
                d = -g;
                step0 = 1.0 / g.norm();
            }
        }

        const Eigen::VectorXd x_old = x;
        const Eigen::VectorXd g_old = g;
        auto ls = strong_wolfe_search(fun, x, f, g, d, step0, options);
        out.evaluations += ls.evaluations;
        if (!ls.ok) {
            ++out.linesearch_failures;
            state.clear();
            d = -g;
            ls = strong_wolfe_search(fun, x, f, g, d, 1.0 / g.norm(), options);
            out.evaluations += ls.evaluations;
            if (!ls.ok) {
                ++out.iterations;
                break;
            }
        }
        state.push(x - x_old, g - g_old);
        ++out.iterations;
    }

    out.grad_inf = g.lpNorm<Eigen::Infinity>();
    out.converged = out.grad_inf <= options.tol;
    out.f = f;
    out.x = std::move(x);
    return out;
}

} // namespace mbti
