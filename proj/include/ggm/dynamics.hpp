#pragma once

#include <cmath>

#include "ggm/model.hpp"

namespace ggm {

enum class Measure { Real, RiskNeutral };

// One period of the stacked system in VAR(1) form,
//
//   q0 x_t = nu + q1 x_{t-1} + shock_scale xi_t,
//
// with blocks (price, y):
//   q0 = [[I_n, H_t], [0, I_{n+1}]],          H_t = [G_t - I_n : 0]
//   shock_scale = diag(G_t, I_{n+1})
// real measure:         q1 = [[G_t, 0], [0, I_{n+1}]],  E = I
// risk-neutral measure: q1 = [[G_t, G_t i j_r'], [0, E_t]],
//   E_t = I_{n+1} + Sigma_eta_u Sigma_uu^{-1} i j_r'.
// The risk-neutral price line compensates the period-t return at the rate
// carried in x_{t-1}: the rate component of the state is the rate set for
// the following period, so the discount process stays predictable.
struct StepMatrices {
    MatrixXd q0;           // ntilde x ntilde, unit upper block triangular
    MatrixXd q1;           // ntilde x ntilde
    MatrixXd shock_scale;  // ntilde x ntilde (the paper-style G block matrix)
    MatrixXd E;            // (n+1) x (n+1) rate feedback in the y block
    MatrixXd H;            // n x (n+1) dividend coupling
    VectorXd nu;           // intercept
};

namespace detail {

// Sigma_eta_u Sigma_uu^{-1}, (n+1) x n. Throws on singular Sigma_uu.
inline MatrixXd eta_u_regression(const ModelSpec& m, int regime) {
    const int n = m.n;
    MatrixXd Suu = m.Sigma[regime].topLeftCorner(n, n);
    MatrixXd Seta_u = m.Sigma[regime].bottomLeftCorner(n + 1, n);
    Eigen::LLT<MatrixXd> llt(Suu);
    if (llt.info() != Eigen::Success)
        throw NumericalError("invalid model: Sigma_uu is singular");
    return llt.solve(Seta_u.transpose()).transpose();
}

inline VectorXd sigma_uu_diag(const ModelSpec& m, int regime) {
    return m.Sigma[regime].topLeftCorner(m.n, m.n).diagonal();
}

}  // namespace detail

// Intercept of the y block under the risk-neutral measure:
//   Cy psi_y - Sigma_eta_u Sigma_uu^{-1} (Ck psi_k + (1/2) diag(Sigma_uu)).
inline VectorXd risk_neutral_intercept_y(const ModelSpec& m, const Linearization& lin,
                                         int t, int regime) {
    (void)lin;
    VectorXd base = m.Cy[regime] * m.psi_y[t - 1];
    VectorXd adj = m.Ck[regime] * m.psi_k[t - 1] + 0.5 * detail::sigma_uu_diag(m, regime);
    return base - detail::eta_u_regression(m, regime) * adj;
}

// Intercept of the price block under the risk-neutral measure:
//   -(1/2) G_t diag(Sigma_uu) - h_t.
inline VectorXd risk_neutral_intercept_price(const ModelSpec& m, const Linearization& lin,
                                             int t, int regime) {
    return -0.5 * lin.g_at(t).cwiseProduct(detail::sigma_uu_diag(m, regime)) - lin.h_at(t);
}

inline StepMatrices step_matrices(const ModelSpec& m, const Linearization& lin, int t,
                                  int regime, Measure measure) {
    if (t < 1 || t > m.T) throw InputError("step_matrices: t out of range");
    if (regime < 0 || regime >= m.N) throw InputError("step_matrices: bad regime");
    const int n = m.n;
    const int nt = m.ntilde();
    const VectorXd& g = lin.g_at(t);

    StepMatrices s;
    s.H = MatrixXd::Zero(n, n + 1);
    s.H.leftCols(n) = MatrixXd((g.array() - 1.0).matrix().asDiagonal());

    s.q0 = MatrixXd::Identity(nt, nt);
    s.q0.topRightCorner(n, n + 1) = s.H;

    s.shock_scale = MatrixXd::Identity(nt, nt);
    s.shock_scale.topLeftCorner(n, n) = MatrixXd(g.asDiagonal());

    s.q1 = MatrixXd::Zero(nt, nt);
    s.q1.topLeftCorner(n, n) = MatrixXd(g.asDiagonal());
    s.nu = VectorXd(nt);

    if (measure == Measure::Real) {
        s.E = MatrixXd::Identity(n + 1, n + 1);
        s.q1.bottomRightCorner(n + 1, n + 1) = s.E;
        s.nu.head(n) = lin.G_at(t) * (m.Ck[regime] * m.psi_k[t - 1]) - lin.h_at(t);
        s.nu.tail(n + 1) = m.Cy[regime] * m.psi_y[t - 1];
    } else {
        MatrixXd reg = detail::eta_u_regression(m, regime);
        s.E = MatrixXd::Identity(n + 1, n + 1);
        s.E.col(n) += reg.rowwise().sum();  // reg * i_n in the rate column
        s.q1.bottomRightCorner(n + 1, n + 1) = s.E;
        s.q1.block(0, 2 * n, n, 1) = g;  // G i_n j_r': lagged rate feeds prices
        s.nu.head(n) = risk_neutral_intercept_price(m, lin, t, regime);
        s.nu.tail(n + 1) = risk_neutral_intercept_y(m, lin, t, regime);
    }
    return s;
}

namespace detail {

// Shared one-period transition: y first, then the price line with the
// contemporaneous dividend.
inline VectorXd advance(const ModelSpec& m, const Linearization& lin, int t,
                        const VectorXd& x_prev, const VectorXd& xi,
                        const VectorXd& nu_price, const VectorXd& nu_y, const MatrixXd& E,
                        bool rate_feedback) {
    const int n = m.n;
    const VectorXd& g = lin.g_at(t);
    VectorXd y_prev = x_prev.tail(n + 1);
    VectorXd y = nu_y + E * y_prev + xi.tail(n + 1);
    VectorXd d = y.head(n);
    VectorXd p = nu_price - (g.array() - 1.0).matrix().cwiseProduct(d) +
                 g.cwiseProduct(x_prev.head(n)) + g.cwiseProduct(xi.head(n));
    if (rate_feedback) p += g * y_prev(n);
    VectorXd x(m.ntilde());
    x << p, y;
    return x;
}

}  // namespace detail

// One step of the physical-measure system.
inline VectorXd step_real(const ModelSpec& m, const Linearization& lin, int t, int regime,
                          const VectorXd& x_prev, const VectorXd& xi) {
    if (t < 1 || t > m.T) throw InputError("step_real: t out of range");
    if (regime < 0 || regime >= m.N) throw InputError("step_real: bad regime");
    if (x_prev.size() != m.ntilde() || xi.size() != m.ntilde())
        throw InputError("step_real: bad vector length");
    VectorXd nu_p = lin.G_at(t) * (m.Ck[regime] * m.psi_k[t - 1]) - lin.h_at(t);
    VectorXd nu_y = m.Cy[regime] * m.psi_y[t - 1];
    return detail::advance(m, lin, t, x_prev, xi, nu_p, nu_y,
                           MatrixXd::Identity(m.n + 1, m.n + 1), false);
}

// One step of the risk-neutral system.
inline VectorXd step_risk_neutral(const ModelSpec& m, const Linearization& lin, int t,
                                  int regime, const VectorXd& x_prev, const VectorXd& xi) {
    if (t < 1 || t > m.T) throw InputError("step_risk_neutral: t out of range");
    if (regime < 0 || regime >= m.N) throw InputError("step_risk_neutral: bad regime");
    if (x_prev.size() != m.ntilde() || xi.size() != m.ntilde())
        throw InputError("step_risk_neutral: bad vector length");
    VectorXd nu_p = risk_neutral_intercept_price(m, lin, t, regime);
    VectorXd nu_y = risk_neutral_intercept_y(m, lin, t, regime);
    MatrixXd reg = detail::eta_u_regression(m, regime);
    MatrixXd E = MatrixXd::Identity(m.n + 1, m.n + 1);
    E.col(m.n) += reg.rowwise().sum();
    return detail::advance(m, lin, t, x_prev, xi, nu_p, nu_y, E, true);
}

// Optimal Girsanov kernel theta_t = Theta_t (r i_n - Ck psi_k - diag(Sigma_uu)/2)
// with Theta_t = [G_t : (Sigma_eta_u Sigma_uu^{-1})']'. r is the rate the
// period-t return compensates, i.e. the rate component of x_{t-1}.
inline VectorXd girsanov_kernel(const ModelSpec& m, const Linearization& lin, int t,
                                int regime, double log_rate_prev) {
    if (t < 1 || t > m.T) throw InputError("girsanov_kernel: t out of range");
    if (regime < 0 || regime >= m.N) throw InputError("girsanov_kernel: bad regime");
    const int n = m.n;
    VectorXd arg = VectorXd::Constant(n, log_rate_prev) - m.Ck[regime] * m.psi_k[t - 1] -
                   0.5 * detail::sigma_uu_diag(m, regime);
    VectorXd theta(m.ntilde());
    theta.head(n) = lin.g_at(t).cwiseProduct(arg);
    theta.tail(n + 1) = detail::eta_u_regression(m, regime) * arg;
    return theta;
}

// Linearized log gross return over (t-1, t] from log levels (used directly on
// simulated states):
//   k_t = logP_t - logP_{t-1} + ln g_t + (I - G^{-1})(logd_t - logP_t - mu_t).
inline VectorXd log_return_from_logs(const VectorXd& logP, const VectorXd& logd,
                                     const VectorXd& logP_prev, const Linearization& lin,
                                     int t) {
    const VectorXd& g = lin.g_at(t);
    VectorXd w = (VectorXd::Ones(g.size()) - g.cwiseInverse());
    return logP - logP_prev + g.array().log().matrix() +
           w.cwiseProduct(logd - logP - lin.mu_at(t));
}

// Same from price/dividend levels.
inline VectorXd log_return_approx(const VectorXd& price, const VectorXd& dividend,
                                  const VectorXd& price_prev, const Linearization& lin,
                                  int t) {
    if (price.minCoeff() <= 0.0 || dividend.minCoeff() <= 0.0 || price_prev.minCoeff() <= 0.0)
        throw InputError("log_return_approx: levels must be strictly positive");
    VectorXd lp = price.array().log();
    VectorXd ld = dividend.array().log();
    VectorXd lp0 = price_prev.array().log();
    return log_return_from_logs(lp, ld, lp0, lin, t);
}

// Solves mu = a + ln(1 + e^mu). A root exists iff a < 0 (the map mu ->
// mu - ln(1+e^mu) has range (-inf, 0)); it is -ln(e^{-a} - 1) in closed form,
// polished by Newton to guard against roundoff in expm1 for a near 0.
inline double solve_mu_fixed_point(double a, int max_iter = 200, double tol = 1e-12) {
    if (!(a < 0.0))
        throw ConvergenceError("mu fixed point: no solution, drift term is >= 0");
    double x = -std::log(std::expm1(-a));
    for (int it = 0; it < max_iter; ++it) {
        double f = x - a - std::log1p(std::exp(x));
        double fp = 1.0 - 1.0 / (1.0 + std::exp(-x));  // 1 - sigmoid(x)
        if (fp <= 0.0) break;
        double dx = f / fp;
        x -= dx;
        if (std::abs(dx) < tol) return x;
    }
    if (std::abs(x - a - std::log1p(std::exp(x))) > 1e-9)
        throw ConvergenceError("mu fixed point: did not converge");
    return x;
}

// Mean log dividend-to-price schedule implied by the parameters:
//   mu_0 = logd_0 - logP_0,
//   mu_t = mu_{t-1} + ln(g_t) + J_d Cy psi_y,t - Ck psi_k,t,
// solved per component through the fixed point above. Defined for a single
// regime (coefficients must not depend on the hidden chain).
inline std::vector<VectorXd> mu_recursion(const ModelSpec& m) {
    if (m.N != 1)
        throw InputError("mu schedule: derivation from parameters needs N = 1; "
                         "supply mu explicitly for multi-regime models");
    const int n = m.n;
    VectorXd mu_prev = m.x0.segment(n, n) - m.x0.head(n);
    std::vector<VectorXd> out;
    out.reserve(m.T);
    for (int t = 1; t <= m.T; ++t) {
        VectorXd drift = (m.Cy[0] * m.psi_y[t - 1]).head(n) - m.Ck[0] * m.psi_k[t - 1];
        VectorXd mu_t(n);
        for (int a = 0; a < n; ++a) {
            try {
                mu_t(a) = solve_mu_fixed_point(mu_prev(a) + drift(a));
            } catch (const ConvergenceError& e) {
                throw ConvergenceError("mu schedule at t=" + std::to_string(t) +
                                       ", component " + std::to_string(a) + ": " + e.what());
            }
        }
        out.push_back(mu_t);
        mu_prev = mu_t;
    }
    return out;
}

// Linearization attached to a model: explicit schedule when given, otherwise
// derived from the parameters.
inline Linearization linearization_for(const ModelSpec& m) {
    if (m.mu) return build_linearization(*m.mu);
    return build_linearization(mu_recursion(m));
}

}  // namespace ggm
