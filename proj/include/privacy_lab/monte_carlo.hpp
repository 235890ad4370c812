#pragma once

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "privacy_lab/equilibrium.hpp"
#include "privacy_lab/params.hpp"
#include "privacy_lab/stats.hpp"

namespace privacy_lab {

/// Version of the (seed -> draws) mapping. Bump whenever the stream
/// derivation, engine or Gaussian transform changes.
///
/// v1: for chunk c and stream s (0 = v, 1 = u, 2 = eps) the engine is
/// std::mt19937_64 seeded with splitmix64(splitmix64(splitmix64(seed) ^ c) ^ s),
/// and draws come from std::normal_distribution<double> on that engine,
/// consumed in path order within the chunk.
inline constexpr int kRngSchemeVersion = 1;

enum class StorageMode { Auto, Materialized, SummaryOnly };

struct SimConfig {
    std::uint64_t n_paths = 1'000'000;
    std::uint64_t seed = 0;
    std::uint64_t chunk_size = 65'536;
    unsigned threads = 0;  // 0 = hardware concurrency
    StorageMode storage = StorageMode::Auto;
    std::uint64_t memory_budget_bytes = std::uint64_t{512} << 20;
};

/// Auto storage keeps individual paths only up to this count.
inline constexpr std::uint64_t kAutoMaterializeLimit = 10'000'000;

class ResourceLimit : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InconclusiveResolution : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PathRealization {
    double v = 0.0;
    double u = 0.0;
    double eps = 0.0;
    double x = 0.0;
    double y = 0.0;
    double y_tilde = 0.0;
    double p = 0.0;
};

/// Streaming statistics of a simulated sample; everything the estimators need.
struct SampleSummary {
    Moments pi_I;
    Moments pi_N;
    Moments pi_M;
    CoMoments price_on_value;   // (v, p)
    CoMoments value_on_signal;  // (y_tilde, v - p0)

    void add(const PathRealization& r, double p0) {
        const double edge = r.v - r.p;
        const double pnl_i = edge * r.x;
        const double pnl_n = edge * r.u;
        const double pnl_m = (r.p - r.v) * r.y;
        assert(std::abs(pnl_i + pnl_n + pnl_m) <=
               1e-9 * (std::abs(pnl_i) + std::abs(pnl_n) + std::abs(pnl_m)) + 1e-300);
        pi_I.add(pnl_i);
        pi_N.add(pnl_n);
        pi_M.add(pnl_m);
        price_on_value.add(r.v, r.p);
        value_on_signal.add(r.y_tilde, r.v - p0);
    }

    void merge(const SampleSummary& o) {
        pi_I.merge(o.pi_I);
        pi_N.merge(o.pi_N);
        pi_M.merge(o.pi_M);
        price_on_value.merge(o.price_on_value);
        value_on_signal.merge(o.value_on_signal);
    }
};

struct PathSample {
    MarketParams params;
    Equilibrium eq;
    std::uint64_t n = 0;
    SampleSummary summary;
    std::vector<PathRealization> paths;  // empty unless materialized

    bool materialized() const { return !paths.empty() || n == 0; }
};

struct WelfareEstimate {
    double mean_pi_I = 0.0;
    double mean_pi_N = 0.0;
    double mean_pi_M = 0.0;
    double se_pi_I = 0.0;
    double se_pi_N = 0.0;
    double se_pi_M = 0.0;
    std::uint64_t n = 0;
};

struct PriceMoments {
    LinearFit fit;  // p regressed on v
    double residual_variance_se = 0.0;
    double expected_slope = 0.5;
    double expected_intercept = 0.0;
    double expected_residual_variance = 0.0;
};

struct RegressionSlope {
    double slope = 0.0;
    double se = 0.0;
    std::uint64_t n = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

enum Stream : std::uint64_t { kValue = 0, kNoise = 1, kPrivacy = 2 };

class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, std::uint64_t chunk, std::uint64_t stream)
        : engine_(splitmix64(splitmix64(splitmix64(seed) ^ chunk) ^ stream)) {}

    double operator()(double mean, double sd) { return mean + sd * dist_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

inline void check_config(const SimConfig& cfg) {
    if (cfg.n_paths < 1)
        throw ParamError(ParamErrorCode::InvalidArgument, "n_paths", "must be >= 1");
    if (cfg.chunk_size < 1)
        throw ParamError(ParamErrorCode::InvalidArgument, "chunk_size", "must be >= 1");
}

inline unsigned worker_count(const SimConfig& cfg, std::uint64_t n_chunks) {
    unsigned t = cfg.threads;
    if (t == 0) t = std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::uint64_t>(t, n_chunks));
}

/// Runs body(chunk, begin, end) -> Acc for every chunk and reduces the
/// per-chunk results with a fixed merge tree.
template <class Acc, class Body>
Acc run_chunked(const SimConfig& cfg, std::uint64_t n, Body body) {
    const std::uint64_t n_chunks = (n + cfg.chunk_size - 1) / cfg.chunk_size;
    std::vector<Acc> parts(n_chunks);
    std::atomic<std::uint64_t> next{0};
    auto work = [&] {
        for (std::uint64_t c = next++; c < n_chunks; c = next++) {
            const std::uint64_t begin = c * cfg.chunk_size;
            const std::uint64_t end = std::min(n, begin + cfg.chunk_size);
            parts[c] = body(c, begin, end);
        }
    };
    const unsigned workers = worker_count(cfg, n_chunks);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    return tree_reduce(std::move(parts));
}

}  // namespace detail

/// Draws n_paths independent plays of the one-period game. The maker prices at
/// eq.lambda and the informed trader plays eq.beta, which need not be the
/// equilibrium pair (off-equilibrium conjectures are allowed).
inline PathSample simulate(const MarketParams& raw, const Equilibrium& eq, const SimConfig& cfg) {
    const MarketParams params = validate_params(raw);
    detail::check_config(cfg);
    if (!(eq.lambda > 0.0) || !(eq.beta > 0.0) || !std::isfinite(eq.lambda) ||
        !std::isfinite(eq.beta))
        throw ParamError(ParamErrorCode::InvalidArgument, "equilibrium",
                         "lambda and beta must be finite and > 0");

    const std::uint64_t n = cfg.n_paths;
    const std::uint64_t bytes = n * sizeof(PathRealization);
    bool keep = false;
    switch (cfg.storage) {
        case StorageMode::Materialized:
            if (bytes > cfg.memory_budget_bytes)
                throw ResourceLimit("materializing " + std::to_string(n) + " paths needs " +
                                    std::to_string(bytes) + " bytes, budget is " +
                                    std::to_string(cfg.memory_budget_bytes));
            keep = true;
            break;
        case StorageMode::Auto:
            keep = n <= kAutoMaterializeLimit && bytes <= cfg.memory_budget_bytes;
            break;
        case StorageMode::SummaryOnly:
            break;
    }

    PathSample sample{params, eq, n, {}, {}};
    if (keep) sample.paths.resize(n);
    PathRealization* out = keep ? sample.paths.data() : nullptr;
    const bool noisy = params.sigma_eps > 0.0;

    sample.summary = detail::run_chunked<SampleSummary>(
        cfg, n, [&](std::uint64_t chunk, std::uint64_t begin, std::uint64_t end) {
            detail::GaussianStream value(cfg.seed, chunk, detail::kValue);
            detail::GaussianStream noise(cfg.seed, chunk, detail::kNoise);
            std::optional<detail::GaussianStream> privacy;
            if (noisy) privacy.emplace(cfg.seed, chunk, detail::kPrivacy);

            SampleSummary acc;
            for (std::uint64_t i = begin; i < end; ++i) {
                PathRealization r;
                r.v = value(params.p0, params.sigma_v);
                r.u = noise(0.0, params.sigma_u);
                r.eps = noisy ? (*privacy)(0.0, params.sigma_eps) : 0.0;
                r.x = eq.beta * (r.v - params.p0);
                r.y = r.x + r.u;
                r.y_tilde = r.y + r.eps;
                r.p = params.p0 + eq.lambda * r.y_tilde;
                acc.add(r, params.p0);
                if (out) out[i] = r;
            }
            return acc;
        });
    return sample;
}

inline WelfareEstimate welfare_from(const SampleSummary& s) {
    return {s.pi_I.mean,        s.pi_N.mean,        s.pi_M.mean,  s.pi_I.std_error(),
            s.pi_N.std_error(), s.pi_M.std_error(), s.pi_I.n};
}

inline WelfareEstimate estimate_welfare(const PathSample& sample) {
    if (sample.n < 2)
        throw ParamError(ParamErrorCode::InvalidArgument, "n", "welfare estimate needs n >= 2");
    return welfare_from(sample.summary);
}

/// Regresses p on v. With Gaussian residuals the residual-variance standard
/// error is s^2 sqrt(2 / (n - 2)).
inline PriceMoments estimate_price_moments(const PathSample& sample, const MarketParams& params) {
    if (sample.n < 100)
        throw ParamError(ParamErrorCode::InvalidArgument, "n", "price moments need n >= 100");
    PriceMoments m;
    m.fit = fit_linear(sample.summary.price_on_value);
    m.residual_variance_se =
        m.fit.residual_variance * std::sqrt(2.0 / (static_cast<double>(sample.n) - 2.0));
    m.expected_slope = 0.5;
    m.expected_intercept = 0.5 * params.p0;
    m.expected_residual_variance = 0.25 * params.sigma_v * params.sigma_v;
    return m;
}

/// OLS slope of (v - p0) on y_tilde: the empirical posterior coefficient.
inline RegressionSlope estimate_lambda_regression(const PathSample& sample) {
    if (sample.n < 100)
        throw ParamError(ParamErrorCode::InvalidArgument, "n", "regression needs n >= 100");
    const LinearFit f = fit_linear(sample.summary.value_on_signal);
    return {f.slope, f.slope_se, f.n};
}

struct BestResponseCheck {
    double x_star = 0.0;
    double argmax = 0.0;
    double step = 0.0;
    double adjacent_gap = 0.0;  // lambda * step^2
    double max_se = 0.0;        // largest se among the center and its neighbours
    std::vector<double> grid;
    std::vector<double> estimate;
    std::vector<double> se;
    std::vector<double> analytic;

    bool within_one_step() const { return std::abs(argmax - x_star) <= step * (1.0 + 1e-12); }
};

namespace detail {

struct GridAccumulator {
    std::vector<Moments> cells;
    void merge(const GridAccumulator& o) {
        if (cells.empty()) {
            cells = o.cells;
            return;
        }
        for (std::size_t i = 0; i < cells.size(); ++i) cells[i].merge(o.cells[i]);
    }
};

}  // namespace detail

/// Monte Carlo profit curve E[(v - p(y_tilde)) x | v] on a grid centred at
/// x* = (v - p0) / (2 lambda), all grid points sharing the same (u, eps) draws.
/// The grid spans x* +/- grid_halfwidth * |x*|; when x* = 0 the scale is
/// beta * sigma_v instead. Throws InconclusiveResolution if 3 se at the centre
/// or its neighbours is not below the adjacent-point profit gap.
inline BestResponseCheck verify_best_response(const MarketParams& raw, const Equilibrium& eq,
                                              double v, double grid_halfwidth, int n_grid,
                                              const SimConfig& cfg) {
    const MarketParams params = validate_params(raw);
    detail::check_config(cfg);
    if (n_grid < 3 || n_grid % 2 == 0)
        throw ParamError(ParamErrorCode::InvalidArgument, "n_grid", "must be odd and >= 3");
    if (!(grid_halfwidth > 0.0))
        throw ParamError(ParamErrorCode::InvalidArgument, "grid_halfwidth", "must be > 0");

    BestResponseCheck out;
    out.x_star = informed_best_response(eq.lambda, params.p0, v);
    const double scale = out.x_star != 0.0 ? std::abs(out.x_star) : eq.beta * params.sigma_v;
    const double half = grid_halfwidth * scale;
    const int mid = n_grid / 2;
    out.step = half / mid;
    out.adjacent_gap = eq.lambda * out.step * out.step;
    out.grid.resize(n_grid);
    for (int k = 0; k < n_grid; ++k) out.grid[k] = out.x_star + (k - mid) * out.step;
    out.grid[mid] = out.x_star;

    const bool noisy = params.sigma_eps > 0.0;
    const auto acc = detail::run_chunked<detail::GridAccumulator>(
        cfg, cfg.n_paths, [&](std::uint64_t chunk, std::uint64_t begin, std::uint64_t end) {
            detail::GaussianStream noise(cfg.seed, chunk, detail::kNoise);
            std::optional<detail::GaussianStream> privacy;
            if (noisy) privacy.emplace(cfg.seed, chunk, detail::kPrivacy);
            detail::GridAccumulator a;
            a.cells.resize(out.grid.size());
            for (std::uint64_t i = begin; i < end; ++i) {
                const double u = noise(0.0, params.sigma_u);
                const double e = noisy ? (*privacy)(0.0, params.sigma_eps) : 0.0;
                for (std::size_t k = 0; k < out.grid.size(); ++k) {
                    const double x = out.grid[k];
                    const double price = params.p0 + eq.lambda * (x + u + e);
                    a.cells[k].add((v - price) * x);
                }
            }
            return a;
        });

    std::size_t best = 0;
    for (std::size_t k = 0; k < out.grid.size(); ++k) {
        out.estimate.push_back(acc.cells[k].mean);
        out.se.push_back(acc.cells[k].std_error());
        out.analytic.push_back(informed_expected_profit(eq.lambda, params.p0, v, out.grid[k]));
        if (out.estimate[k] > out.estimate[best]) best = k;
    }
    out.argmax = out.grid[best];
    out.max_se = std::max({out.se[mid - 1], out.se[mid], out.se[mid + 1]});
    if (!(3.0 * out.max_se < out.adjacent_gap))
        throw InconclusiveResolution("3*se = " + std::to_string(3.0 * out.max_se) +
                                     " exceeds adjacent-point gap " +
                                     std::to_string(out.adjacent_gap) +
                                     "; increase n_paths or widen the grid");
    return out;
}

/// Batched swaps: each path is one batch of tau noise increments and one
/// informed batch-total order; the maker prices on the exact aggregate.
inline WelfareEstimate simulate_batched(const BatchParams& raw, const Equilibrium& eq,
                                        const SimConfig& cfg) {
    const BatchParams bp = validate_batch(raw);
    detail::check_config(cfg);
    const MarketParams& m = bp.base;
    const auto summary = detail::run_chunked<SampleSummary>(
        cfg, cfg.n_paths, [&](std::uint64_t chunk, std::uint64_t begin, std::uint64_t end) {
            detail::GaussianStream value(cfg.seed, chunk, detail::kValue);
            detail::GaussianStream noise(cfg.seed, chunk, detail::kNoise);
            SampleSummary acc;
            for (std::uint64_t i = begin; i < end; ++i) {
                PathRealization r;
                r.v = value(m.p0, m.sigma_v);
                for (std::int64_t t = 0; t < bp.tau; ++t) r.u += noise(0.0, m.sigma_u);
                r.x = eq.beta * (r.v - m.p0);
                r.y = r.x + r.u;
                r.y_tilde = r.y;
                r.p = m.p0 + eq.lambda * r.y;
                acc.add(r, m.p0);
            }
            return acc;
        });
    WelfareEstimate w = welfare_from(summary);
    if (w.n < 2)
        throw ParamError(ParamErrorCode::InvalidArgument, "n", "welfare estimate needs n >= 2");
    return w;
}

}  // namespace privacy_lab
