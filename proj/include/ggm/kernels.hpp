#pragma once

#include <Eigen/Dense>

#include "ggm/normal.hpp"
#include "ggm/errors.hpp"

namespace ggm {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

enum class CallPut { Call, Put };

// Variances below this are treated as a point mass and priced by the
// deterministic-payoff branch instead of evaluating Phi at +-inf.
inline constexpr double kDegenerateVariance = 1e-14;

// E[(e^X - K)^+] and E[(K - e^X)^+] for X ~ N(mu, sigma2):
//   call = e^{mu + sigma2/2} Phi(d1) - K Phi(d2),
//   put  = K Phi(-d2) - e^{mu + sigma2/2} Phi(-d1),
// d1 = (mu + sigma2 - ln K)/sigma, d2 = d1 - sigma. K == 0 is the forward
// limit (Phi -> 1).
inline double lognormal_call_put(double mu, double sigma2, double K, CallPut kind) {
    if (K < 0.0) throw InputError("lognormal kernel: negative strike");
    if (sigma2 <= 0.0)
        throw NumericalError("lognormal kernel: degenerate distribution (sigma2 <= 0)");
    if (K == 0.0) return kind == CallPut::Call ? std::exp(mu + 0.5 * sigma2) : 0.0;
    if (sigma2 < kDegenerateVariance) {
        double intrinsic = std::exp(mu) - K;
        if (kind == CallPut::Call) return std::max(intrinsic, 0.0);
        return std::max(-intrinsic, 0.0);
    }
    double s = std::sqrt(sigma2);
    double d1 = (mu + sigma2 - std::log(K)) / s;
    double d2 = d1 - s;
    double fwd = std::exp(mu + 0.5 * sigma2);
    if (kind == CallPut::Call) return fwd * norm_cdf(d1) - K * norm_cdf(d2);
    return K * norm_cdf(-d2) - fwd * norm_cdf(-d1);
}

// E[exp(alpha X + beta) 1{A X + b > c}] for X ~ N(mu, Sigma):
//   exp(alpha mu + beta + alpha Sigma alpha'/2) P[A X + b > c - A Sigma alpha'].
// The tilted probability is a Gaussian orthant; closed for one constraint,
// quadrature-backed for two, unsupported beyond that.
inline double exp_indicator(const RowVectorXd& alpha, double beta, const MatrixXd& A,
                            const VectorXd& b, const VectorXd& c, const VectorXd& mu,
                            const MatrixXd& Sigma) {
    const int n = int(mu.size());
    const int mdim = int(A.rows());
    if (alpha.size() != n || Sigma.rows() != n || Sigma.cols() != n || A.cols() != n ||
        b.size() != mdim || c.size() != mdim)
        throw InputError("exp_indicator: dimension mismatch");

    double tilt = alpha * mu + beta + 0.5 * alpha * Sigma * alpha.transpose();
    VectorXd shift = A * (Sigma * alpha.transpose());
    VectorXd mean = A * mu + b;
    VectorXd thresh = c - shift;
    MatrixXd V = A * Sigma * A.transpose();

    double prob;
    if (mdim == 0) {
        prob = 1.0;
    } else if (mdim == 1) {
        double v = V(0, 0);
        if (v < kDegenerateVariance) {
            prob = mean(0) > thresh(0) ? 1.0 : 0.0;
        } else {
            prob = norm_cdf((mean(0) - thresh(0)) / std::sqrt(v));
        }
    } else if (mdim == 2) {
        double v0 = V(0, 0), v1 = V(1, 1);
        if (v0 < kDegenerateVariance || v1 < kDegenerateVariance)
            throw NumericalError("exp_indicator: degenerate constraint variance");
        double rho = V(0, 1) / std::sqrt(v0 * v1);
        double a0 = (thresh(0) - mean(0)) / std::sqrt(v0);
        double a1 = (thresh(1) - mean(1)) / std::sqrt(v1);
        // P[Z0 > a0, Z1 > a1] = Phi2(-a0, -a1; rho)
        prob = binorm_cdf(-a0, -a1, rho);
    } else {
        throw InputError("exp_indicator: more than two constraints not supported");
    }
    return std::exp(tilt) * prob;
}

namespace detail {

// Shared core of the paired lognormal kernels. sign = +1 computes
// E[e^{X1} ((e^{X2} - L)^+)'], sign = -1 the (L - e^{X2})^+ counterpart.
inline MatrixXd psi_kernel(int sign, const VectorXd& L, const VectorXd& mu1,
                           const VectorXd& mu2, const MatrixXd& S11, const MatrixXd& S12,
                           const MatrixXd& S22) {
    const int n1 = int(mu1.size());
    const int n2 = int(mu2.size());
    if (S11.rows() != n1 || S11.cols() != n1 || S22.rows() != n2 || S22.cols() != n2 ||
        S12.rows() != n1 || S12.cols() != n2 || L.size() != n2)
        throw InputError("psi kernel: dimension mismatch");
    if (L.minCoeff() < 0.0) throw InputError("psi kernel: negative level");

    MatrixXd out(n1, n2);
    for (int a = 0; a < n1; ++a) {
        double e1 = std::exp(mu1(a) + 0.5 * S11(a, a));
        for (int b = 0; b < n2; ++b) {
            double v = S22(b, b);
            double e2 = std::exp(mu2(b) + 0.5 * v);
            if (v < kDegenerateVariance) {
                // point-mass second leg; PSD forces the cross term to zero
                double intrinsic = sign > 0 ? e2 - L(b) : L(b) - e2;
                out(a, b) = e1 * std::max(intrinsic, 0.0);
                continue;
            }
            double s = std::sqrt(v);
            double cross = S12(a, b);
            if (L(b) == 0.0) {
                out(a, b) = sign > 0 ? e1 * e2 * std::exp(cross) : 0.0;
                continue;
            }
            double d1 = (mu2(b) + v - std::log(L(b))) / s;
            double d2 = d1 - s;
            double shift = cross / s;
            if (sign > 0) {
                out(a, b) = e1 * e2 * std::exp(cross) * norm_cdf(d1 + shift) -
                            e1 * L(b) * norm_cdf(d2 + shift);
            } else {
                out(a, b) = e1 * L(b) * norm_cdf(-d2 - shift) -
                            e1 * e2 * std::exp(cross) * norm_cdf(-d1 - shift);
            }
        }
    }
    return out;
}

}  // namespace detail

// E[e^{X1} ((e^{X2} - L)^+)'] for jointly normal (X1, X2); n1 x n2.
inline MatrixXd psi_plus(const VectorXd& L, const VectorXd& mu1, const VectorXd& mu2,
                         const MatrixXd& S11, const MatrixXd& S12, const MatrixXd& S22) {
    return detail::psi_kernel(+1, L, mu1, mu2, S11, S12, S22);
}

// E[e^{X1} ((L - e^{X2})^+)'].
inline MatrixXd psi_minus(const VectorXd& L, const VectorXd& mu1, const VectorXd& mu2,
                          const MatrixXd& S11, const MatrixXd& S12, const MatrixXd& S22) {
    return detail::psi_kernel(-1, L, mu1, mu2, S11, S12, S22);
}

}  // namespace ggm
