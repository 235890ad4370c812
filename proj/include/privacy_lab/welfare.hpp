#pragma once

#include <cmath>
#include <numbers>

#include "privacy_lab/equilibrium.hpp"
#include "privacy_lab/params.hpp"

namespace privacy_lab {

/// Per-period expected P&L against the terminal value, at the linear
/// equilibrium. Sign convention: pi_M <= 0 and the subsidy is -pi_M.
struct WelfareDecomposition {
    double pi_I = 0.0;  // E[(v - p) x]
    double pi_N = 0.0;  // E[(v - p) u]
    double pi_M = 0.0;  // E[(p - v)(x + u)]

    double subsidy() const { return -pi_M; }
};

struct SubsidyAnalysis {
    double subsidy = 0.0;
    double d1 = 0.0;  // d|pi_M| / d sigma_eps
    double d2 = 0.0;  // d^2|pi_M| / d sigma_eps^2
    double inflection = 0.0;
    double low_privacy_coeff = 0.0;   // |pi_M| ~ coeff * sigma_eps^2 near 0
    double high_privacy_slope = 0.0;  // |pi_M| ~ slope * sigma_eps for large sigma_eps
};

struct IncrementalGains {
    double informed = 0.0;  // pi_I(sigma_eps) - pi_I(0)
    double noise = 0.0;     // pi_N(sigma_eps) - pi_N(0)
};

struct FeeBreakEven {
    double e_abs_x = 0.0;
    double e_abs_u = 0.0;
    double q_total = 0.0;
    double fee_rate = 0.0;
    double fee_on_informed = 0.0;
    double fee_on_noise = 0.0;
    double net_pi_I = 0.0;
    double net_pi_N = 0.0;
};

inline WelfareDecomposition welfare_decomposition(const MarketParams& raw) {
    const MarketParams p = validate_params(raw);
    const double s = effective_noise(p);
    return {
        0.5 * p.sigma_v * s,
        -p.sigma_v * p.sigma_u * p.sigma_u / (2.0 * s),
        -p.sigma_v * p.sigma_eps * p.sigma_eps / (2.0 * s),
    };
}

inline double privacy_subsidy(const MarketParams& raw) {
    const MarketParams p = validate_params(raw);
    return p.sigma_v * p.sigma_eps * p.sigma_eps / (2.0 * effective_noise(p));
}

inline SubsidyAnalysis subsidy_analysis(const MarketParams& raw) {
    const MarketParams p = validate_params(raw);
    const double su2 = p.sigma_u * p.sigma_u;
    const double se2 = p.sigma_eps * p.sigma_eps;
    const double s2 = su2 + se2;
    const double s = std::sqrt(s2);

    SubsidyAnalysis out;
    out.subsidy = p.sigma_v * se2 / (2.0 * s);
    out.d1 = p.sigma_v * p.sigma_eps * (2.0 * su2 + se2) / (2.0 * s2 * s);
    out.d2 = p.sigma_v * su2 * (2.0 * su2 - se2) / (2.0 * s2 * s2 * s);
    out.inflection = std::numbers::sqrt2 * p.sigma_u;
    out.low_privacy_coeff = p.sigma_v / (2.0 * p.sigma_u);
    out.high_privacy_slope = 0.5 * p.sigma_v;
    return out;
}

/// d pi_N / d sigma_eps; noise traders lose strictly less as privacy grows.
inline double noise_pnl_derivative(const MarketParams& raw) {
    const MarketParams p = validate_params(raw);
    const double s2 = p.sigma_u * p.sigma_u + p.sigma_eps * p.sigma_eps;
    return p.sigma_v * p.sigma_u * p.sigma_u * p.sigma_eps / (2.0 * s2 * std::sqrt(s2));
}

/// Exact gains of each trader type over the sigma_eps = 0 baseline.
inline IncrementalGains incremental_gains(const MarketParams& raw) {
    const MarketParams p = validate_params(raw);
    const double s = effective_noise(p);
    // s - sigma_u without cancellation for small sigma_eps.
    const double excess = p.sigma_eps * p.sigma_eps / (s + p.sigma_u);
    return {
        0.5 * p.sigma_v * excess,
        p.sigma_v * p.sigma_u * excess / (2.0 * s),
    };
}

/// Volume-proportional break-even fee at no-fee equilibrium volumes. Fee
/// revenue is credited to the maker within the same period.
inline FeeBreakEven break_even_fee(const MarketParams& raw) {
    const MarketParams p = validate_params(raw);
    const Equilibrium eq = solve_closed_form(p);
    const WelfareDecomposition w = welfare_decomposition(p);
    constexpr double abs_gauss = 0.7978845608028654;  // sqrt(2/pi) = E|Z|

    FeeBreakEven f;
    f.e_abs_x = p.sigma_v / (2.0 * eq.lambda) * abs_gauss;
    f.e_abs_u = p.sigma_u * abs_gauss;
    f.q_total = f.e_abs_x + f.e_abs_u;
    f.fee_rate = w.subsidy() / f.q_total;
    f.fee_on_informed = f.fee_rate * f.e_abs_x;
    f.fee_on_noise = f.fee_rate * f.e_abs_u;
    f.net_pi_I = w.pi_I - f.fee_on_informed;
    f.net_pi_N = w.pi_N - f.fee_on_noise;
    return f;
}

}  // namespace privacy_lab
