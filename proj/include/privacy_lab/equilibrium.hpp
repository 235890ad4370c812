#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "privacy_lab/params.hpp"

namespace privacy_lab {

enum class SolveMethod { ClosedForm, FixedPoint };

inline const char* to_string(SolveMethod m) {
    return m == SolveMethod::ClosedForm ? "closed_form" : "fixed_point";
}

/// Linear strategy profile: the maker quotes p = p0 + lambda * y_tilde and the
/// informed trader submits x = beta * (v - p0).
struct Equilibrium {
    double lambda = 0.0;
    double beta = 0.0;
    SolveMethod method = SolveMethod::ClosedForm;
};

class NoConvergence : public std::runtime_error {
public:
    explicit NoConvergence(int max_iter)
        : std::runtime_error("fixed point did not converge in " + std::to_string(max_iter) +
                             " iterations"),
          max_iter_(max_iter) {}
    int max_iter() const noexcept { return max_iter_; }

private:
    int max_iter_;
};

inline Equilibrium solve_closed_form(const MarketParams& raw) {
    const MarketParams p = validate_params(raw);
    const double s = effective_noise(p);
    return {p.sigma_v / (2.0 * s), s / p.sigma_v, SolveMethod::ClosedForm};
}

/// Slope of E[v | y_tilde] when the informed trader plays beta:
/// beta sigma_v^2 / (beta^2 sigma_v^2 + sigma_u^2 + sigma_eps^2).
inline double projection_coefficient(const MarketParams& p, double beta) {
    const double sv2 = p.sigma_v * p.sigma_v;
    return beta * sv2 /
           (beta * beta * sv2 + p.sigma_u * p.sigma_u + p.sigma_eps * p.sigma_eps);
}

inline double posterior_price(const MarketParams& p, double beta, double y_tilde) {
    if (!(beta > 0.0))
        throw ParamError(ParamErrorCode::InvalidArgument, "beta", "must be > 0");
    return p.p0 + projection_coefficient(p, beta) * y_tilde;
}

/// Maximizer of (v - p0) x - lambda x^2.
inline double informed_best_response(double lambda, double p0, double v) {
    if (!(lambda > 0.0))
        throw ParamError(ParamErrorCode::InvalidArgument, "lambda", "must be > 0");
    return (v - p0) / (2.0 * lambda);
}

/// E[(v - p(y_tilde)) x | v] for a fixed order x against the linear schedule.
inline double informed_expected_profit(double lambda, double p0, double v, double x) {
    if (!(lambda > 0.0))
        throw ParamError(ParamErrorCode::InvalidArgument, "lambda", "must be > 0");
    return (v - p0) * x - lambda * x * x;
}

/// Numerical equilibrium from the two defining conditions, used as an oracle
/// against solve_closed_form. Bisects h(lambda) = lambda - Proj(1/(2 lambda))
/// on a bracket where h changes sign; never evaluates the closed form.
inline Equilibrium solve_fixed_point(const MarketParams& raw, double tol = 1e-12,
                                     int max_iter = 200) {
    const MarketParams p = validate_params(raw);
    if (!(tol > 0.0))
        throw ParamError(ParamErrorCode::InvalidArgument, "tol", "must be > 0");
    if (max_iter < 1)
        throw ParamError(ParamErrorCode::InvalidArgument, "max_iter", "must be >= 1");

    auto h = [&](double lambda) {
        return lambda - projection_coefficient(p, 1.0 / (2.0 * lambda));
    };

    double lo = p.sigma_v / (2.0 * 10.0 * (p.sigma_u + p.sigma_eps + p.sigma_v));
    double hi = 10.0 * p.sigma_v / (2.0 * p.sigma_u);
    double h_lo = h(lo);
    // h < 0 below the root and > 0 above it.
    if (!(h_lo < 0.0) || !(h(hi) > 0.0))
        throw NoConvergence(0);

    for (int it = 0; it < max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (hi - lo <= 0.25 * tol * mid || mid == lo || mid == hi) {
            return {mid, 1.0 / (2.0 * mid), SolveMethod::FixedPoint};
        }
        const double h_mid = h(mid);
        if (h_mid == 0.0)
            return {mid, 1.0 / (2.0 * mid), SolveMethod::FixedPoint};
        if ((h_mid < 0.0) == (h_lo < 0.0)) {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
        }
    }
    throw NoConvergence(max_iter);
}

/// Real-flow zero-profit slope sigma_v / (2 sigma_u). Not implementable by a
/// maker observing only y_tilde; exposed for comparison output only.
inline double zero_profit_lambda_unconditional(const MarketParams& raw) {
    const MarketParams p = validate_params(raw);
    return p.sigma_v / (2.0 * p.sigma_u);
}

/// Batched swaps: the maker sees the exact aggregate over tau periods, which is
/// textbook Kyle with sigma_u -> sigma_u sqrt(tau) and no privacy noise.
inline Equilibrium batched_equilibrium(const BatchParams& raw) {
    const BatchParams bp = validate_batch(raw);
    MarketParams m = bp.base;
    m.sigma_u = bp.base.sigma_u * std::sqrt(static_cast<double>(bp.tau));
    m.sigma_eps = 0.0;
    return solve_closed_form(m);
}

}  // namespace privacy_lab
