#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mammo_eval/error.hpp"

namespace mammo::stats {

/// log B(a, b)
inline double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

namespace detail {

/// Continued fraction for I_x(a, b), modified Lentz. Converges quickly for
/// x < (a + 1) / (a + b + 2).
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1, qam = a - 1;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    return h;
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b) for a, b > 0.
inline double incomplete_beta(double a, double b, double x) {
    if (!(a > 0) || !(b > 0)) fail(ErrorCode::ValidationFailed, "incomplete_beta requires a, b > 0");
    if (x <= 0) return 0.0;
    if (x >= 1) return 1.0;
    const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
    if (x < (a + 1) / (a + b + 2)) return front * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1 - x) / b;
}

inline double beta_pdf(double a, double b, double x) {
    if (x <= 0 || x >= 1) return 0.0;
    return std::exp((a - 1) * std::log(x) + (b - 1) * std::log1p(-x) - log_beta(a, b));
}

/// Inverse of I_x(a, b) in x: bracketed Newton with bisection fallback,
/// stopping once |I_x - q| <= tol or the bracket collapses.
inline double inverse_incomplete_beta(double a, double b, double q, double tol = 1e-10) {
    if (q <= 0) return 0.0;
    if (q >= 1) return 1.0;
    double lo = 0.0, hi = 1.0;
    double x = a / (a + b);
    for (int iter = 0; iter < 400; ++iter) {
        const double f = incomplete_beta(a, b, x) - q;
        if (std::abs(f) <= tol) return x;
        if (f < 0)
            lo = x;
        else
            hi = x;
        if (hi - lo <= std::numeric_limits<double>::epsilon() * std::max(1.0, x)) return x;
        const double pdf = beta_pdf(a, b, x);
        double next = pdf > 0 ? x - f / pdf : -1.0;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
    }
    return x;
}

/// Student-t CDF with `dof` degrees of freedom.
inline double student_t_cdf(double t, double dof) {
    const double x = dof / (dof + t * t);
    const double tail = 0.5 * incomplete_beta(dof / 2, 0.5, x);
    return t >= 0 ? 1 - tail : tail;
}

/// Student-t quantile for probability p in (0, 1).
inline double student_t_quantile(double p, double dof) {
    if (!(p > 0 && p < 1)) fail(ErrorCode::ValidationFailed, "t quantile needs p in (0,1)");
    if (p == 0.5) return 0.0;
    const double tail = p < 0.5 ? p : 1 - p;
    const double x = inverse_incomplete_beta(dof / 2, 0.5, 2 * tail, 1e-14);
    const double t = std::sqrt(dof * (1 - x) / x);
    return p < 0.5 ? -t : t;
}

/// SplitMix64: a tiny, splittable generator. `stream(seed, k)` gives
/// independent reproducible substreams for parallel bootstrap replicates.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static SplitMix64 stream(std::uint64_t seed, std::uint64_t index) {
        SplitMix64 mixer(seed ^ (0x9E3779B97F4A7C15ull * (index + 1)));
        return SplitMix64(mixer.next());
    }

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform integer in [0, n) via the multiply-shift reduction.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// Percentile by linear interpolation between order statistics (type 7).
inline double quantile(std::vector<double> values, double p) {
    if (values.empty()) fail(ErrorCode::ValidationFailed, "quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace mammo::stats
