#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace privacy_lab {

/// One-pass mean/variance accumulator with an associative merge.
struct Moments {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }

    void merge(const Moments& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n);
        const double nb = static_cast<double>(o.n);
        const double nt = na + nb;
        const double d = o.mean - mean;
        mean += d * nb / nt;
        m2 += o.m2 + d * d * na * nb / nt;
        n += o.n;
    }

    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double stddev() const { return std::sqrt(variance()); }
    double std_error() const { return n > 0 ? stddev() / std::sqrt(static_cast<double>(n)) : 0.0; }
};

/// Bivariate version of Moments: tracks the cross moment of (a, b).
struct CoMoments {
    std::uint64_t n = 0;
    double mean_a = 0.0;
    double mean_b = 0.0;
    double m2_a = 0.0;
    double m2_b = 0.0;
    double c_ab = 0.0;

    void add(double a, double b) {
        ++n;
        const double inv = 1.0 / static_cast<double>(n);
        const double da = a - mean_a;
        const double db = b - mean_b;
        mean_a += da * inv;
        mean_b += db * inv;
        m2_a += da * (a - mean_a);
        m2_b += db * (b - mean_b);
        c_ab += da * (b - mean_b);
    }

    void merge(const CoMoments& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n);
        const double nb = static_cast<double>(o.n);
        const double nt = na + nb;
        const double da = o.mean_a - mean_a;
        const double db = o.mean_b - mean_b;
        const double w = na * nb / nt;
        mean_a += da * nb / nt;
        mean_b += db * nb / nt;
        m2_a += o.m2_a + da * da * w;
        m2_b += o.m2_b + db * db * w;
        c_ab += o.c_ab + da * db * w;
        n += o.n;
    }
};

/// OLS fit of b on a with classical standard errors.
struct LinearFit {
    double slope = 0.0;
    double slope_se = 0.0;
    double intercept = 0.0;
    double intercept_se = 0.0;
    double residual_variance = 0.0;
    std::uint64_t n = 0;
};

inline LinearFit fit_linear(const CoMoments& m) {
    LinearFit f;
    f.n = m.n;
    if (m.n < 3 || m.m2_a <= 0.0) return f;
    const double n = static_cast<double>(m.n);
    f.slope = m.c_ab / m.m2_a;
    f.intercept = m.mean_b - f.slope * m.mean_a;
    const double ssr = std::max(m.m2_b - f.slope * m.c_ab, 0.0);
    f.residual_variance = ssr / (n - 2.0);
    f.slope_se = std::sqrt(f.residual_variance / m.m2_a);
    f.intercept_se = std::sqrt(f.residual_variance * (1.0 / n + m.mean_a * m.mean_a / m.m2_a));
    return f;
}

/// Pairwise reduction in index order. The merge tree depends only on the
/// number of parts, so the result is independent of how parts were produced.
template <class Acc>
Acc tree_reduce(std::vector<Acc> parts) {
    if (parts.empty()) return Acc{};
    while (parts.size() > 1) {
        std::vector<Acc> next;
        next.reserve((parts.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < parts.size(); i += 2) {
            Acc a = std::move(parts[i]);
            a.merge(parts[i + 1]);
            next.push_back(std::move(a));
        }
        if (parts.size() % 2 == 1) next.push_back(std::move(parts.back()));
        parts = std::move(next);
    }
    return std::move(parts.front());
}

}  // namespace privacy_lab
