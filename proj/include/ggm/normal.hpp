#pragma once

#include <cmath>
#include <array>
#include <limits>

#include "ggm/errors.hpp"

namespace ggm {

inline double norm_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// Standard normal CDF through the complementary error function. erfc keeps
// full relative accuracy in the lower tail where 1 - erf(x) would cancel.
inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

namespace detail {

// Gauss-Legendre nodes/weights on [-1, 1], computed once by Newton iteration
// on the Legendre recurrence.
template <int N>
struct GaussLegendre {
    std::array<double, N> node{};
    std::array<double, N> weight{};

    GaussLegendre() {
        const int m = (N + 1) / 2;
        for (int i = 0; i < m; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (N + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 0; j < N; ++j) {
                    double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
                }
                dp = N * (x * p0 - p1) / (x * x - 1.0);
                double dx = p0 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            node[i] = -x;
            node[N - 1 - i] = x;
            weight[i] = 2.0 / ((1.0 - x * x) * dp * dp);
            weight[N - 1 - i] = weight[i];
        }
    }
};

inline const GaussLegendre<64>& gl64() {
    static const GaussLegendre<64> table;
    return table;
}

}  // namespace detail

// P[Z1 <= a, Z2 <= b] for standard bivariate normal with correlation rho.
// Uses the Drezner tetrachoric integral over the correlation parameter; the
// integrand is smooth for |rho| < 1 so a fixed Gauss-Legendre rule reaches
// near machine accuracy.
inline double binorm_cdf(double a, double b, double rho) {
    if (std::isnan(a) || std::isnan(b) || std::isnan(rho))
        return std::numeric_limits<double>::quiet_NaN();
    if (rho >= 1.0 - 1e-12) return norm_cdf(std::min(a, b));
    if (rho <= -1.0 + 1e-12) return std::max(0.0, norm_cdf(a) + norm_cdf(b) - 1.0);
    if (std::abs(rho) > 0.999)
        throw NumericalError("binorm_cdf: correlation too close to +-1");

    const auto& gl = detail::gl64();
    double sum = 0.0;
    // int_0^rho exp(-(a^2 - 2 r a b + b^2)/(2(1-r^2))) / sqrt(1-r^2) dr
    for (int i = 0; i < 64; ++i) {
        double r = 0.5 * rho * (gl.node[i] + 1.0);
        double omr2 = 1.0 - r * r;
        double f = std::exp(-(a * a - 2.0 * r * a * b + b * b) / (2.0 * omr2)) / std::sqrt(omr2);
        sum += gl.weight[i] * f;
    }
    sum *= 0.5 * rho / (2.0 * M_PI);
    return norm_cdf(a) * norm_cdf(b) + sum;
}

}  // namespace ggm
