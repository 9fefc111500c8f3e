#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ggm/errors.hpp"

namespace ggm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Regime-switching dynamic Gordon growth model over t = 1..T:
//
//   state x_t = (logP_t', logd_t', logr_t)'   with dim ntilde = 2n+1
//
//   logP_t = G_t (logP_{t-1} - logd_t + k_t) + logd_t - h_t     (price recursion)
//   k_t    = Ck(s_t) psi_k,t + u_t                              (required return)
//   y_t    = Cy(s_t) psi_y,t + y_{t-1} + eta_t,  y = (logd', logr)'
//
// shocks xi_t = (u_t', eta_t')' ~ N(0, Sigma(s_t)), s_t a Markov chain on
// {0..N-1} with transition matrix P and initial distribution p1. The
// linearization parameters (mu, g, G, h) come with the model: g = 1 + e^mu,
// h = G(ln g - mu) + mu, where mu_t is the mean log dividend-to-price vector.
struct ModelSpec {
    int n = 0;    // assets
    int N = 0;    // regimes
    int T = 0;    // horizon (periods)
    int l_k = 0;  // exogenous dim in the return equation
    int l_y = 0;  // exogenous dim in the dividend/rate equation

    std::vector<MatrixXd> Ck;     // per regime, n x l_k
    std::vector<MatrixXd> Cy;     // per regime, (n+1) x l_y; rows 0..n-1 drive
                                  // dividends, row n drives the rate
    std::vector<MatrixXd> Sigma;  // per regime, ntilde x ntilde
    MatrixXd P;                   // N x N transition matrix
    VectorXd p1;                  // initial regime distribution
    std::vector<VectorXd> psi_k;  // t = 1..T at index t-1
    std::vector<VectorXd> psi_y;
    VectorXd x0;                  // initial state (logP_0, logd_0, logr_0)

    // Per-period mean log dividend-to-price schedule, t = 1..T. Optional: when
    // absent and N == 1 it is derived from the parameters (see mu_recursion).
    std::optional<std::vector<VectorXd>> mu;

    int ntilde() const { return 2 * n + 1; }

    void validate() const;
};

// Per-period Campbell-Shiller linearization: g = 1 + e^mu (> 1 elementwise),
// G = diag(g), h = G(ln g - mu) + mu.
struct Linearization {
    std::vector<VectorXd> mu;  // t = 1..T at index t-1
    std::vector<VectorXd> g;
    std::vector<VectorXd> h;

    int horizon() const { return int(mu.size()); }
    const VectorXd& mu_at(int t) const { return mu[t - 1]; }
    const VectorXd& g_at(int t) const { return g[t - 1]; }
    const VectorXd& h_at(int t) const { return h[t - 1]; }
    Eigen::DiagonalMatrix<double, Eigen::Dynamic> G_at(int t) const {
        return g[t - 1].asDiagonal();
    }
};

inline Linearization build_linearization(const std::vector<VectorXd>& mu_schedule) {
    Linearization lin;
    lin.mu = mu_schedule;
    lin.g.reserve(mu_schedule.size());
    lin.h.reserve(mu_schedule.size());
    for (const auto& m : mu_schedule) {
        if (!m.allFinite()) throw InputError("linearization: non-finite mu");
        VectorXd g = VectorXd::Ones(m.size()) + m.array().exp().matrix();
        VectorXd h = g.cwiseProduct(g.array().log().matrix() - m) + m;
        lin.g.push_back(std::move(g));
        lin.h.push_back(std::move(h));
    }
    return lin;
}

// State block selectors. The state is ordered (logP', logd', logr).
struct StateVector {
    VectorXd x;
    int n = 0;

    StateVector() = default;
    StateVector(VectorXd v, int n_assets) : x(std::move(v)), n(n_assets) {
        if (x.size() != 2 * n + 1) throw InputError("state vector: wrong length");
    }

    VectorXd log_prices() const { return x.head(n); }
    VectorXd log_dividends() const { return x.segment(n, n); }
    VectorXd y() const { return x.tail(n + 1); }
    double log_rate() const { return x(2 * n); }

    static StateVector assemble(const VectorXd& logP, const VectorXd& logd, double logr) {
        int n = int(logP.size());
        VectorXd x(2 * n + 1);
        x << logP, logd, logr;
        return StateVector(x, n);
    }
};

inline double state_log_rate(const VectorXd& x) { return x(x.size() - 1); }

// J_P = [I_n : 0], n x ntilde
inline MatrixXd selector_price(int n) {
    MatrixXd J = MatrixXd::Zero(n, 2 * n + 1);
    J.leftCols(n).setIdentity();
    return J;
}

// J_y = [0 : I_{n+1}], (n+1) x ntilde
inline MatrixXd selector_y(int n) {
    MatrixXd J = MatrixXd::Zero(n + 1, 2 * n + 1);
    J.rightCols(n + 1).setIdentity();
    return J;
}

// J_d = [I_n : 0], n x (n+1): dividend block of y
inline MatrixXd selector_dividend_of_y(int n) {
    MatrixXd J = MatrixXd::Zero(n, n + 1);
    J.leftCols(n).setIdentity();
    return J;
}

// Last unit vector of length n+1: extracts the log rate from y.
inline VectorXd rate_unit_of_y(int n) {
    VectorXd j = VectorXd::Zero(n + 1);
    j(n) = 1.0;
    return j;
}

// A regime assignment for consecutive periods [first, first + size - 1] and
// its probability weight within an enumerated family.
struct RegimePath {
    int first = 1;
    std::vector<int> regimes;
    double weight = 1.0;

    int regime_at(int t) const {
        int i = t - first;
        if (i < 0 || i >= int(regimes.size()))
            throw InputError("regime path: period out of range");
        return regimes[i];
    }
    int last_period() const { return first + int(regimes.size()) - 1; }
};

namespace detail {

inline void check_symmetric(const MatrixXd& S, double tol, const std::string& what) {
    if (S.rows() != S.cols()) throw InputError(what + ": not square");
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > tol)
        throw InputError(what + ": not symmetric");
}

inline Eigen::LLT<MatrixXd> checked_llt(const MatrixXd& S, const std::string& what) {
    Eigen::LLT<MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw NumericalError(what + ": Cholesky failed (matrix not positive definite)");
    return llt;
}

}  // namespace detail

inline void ModelSpec::validate() const {
    if (n < 1) throw InputError("model: need at least one asset");
    if (N < 1) throw InputError("model: need at least one regime");
    if (T < 1) throw InputError("model: horizon must be >= 1");
    if (l_k < 0 || l_y < 0) throw InputError("model: negative exogenous dimension");
    const int nt = ntilde();

    auto check_family = [&](const std::vector<MatrixXd>& v, int r, int c, const std::string& name) {
        if (int(v.size()) != N) throw InputError("model: " + name + " needs one matrix per regime");
        for (const auto& M : v) {
            if (M.rows() != r || M.cols() != c)
                throw InputError("model: " + name + " has wrong dimensions");
            if (!M.allFinite()) throw InputError("model: " + name + " has non-finite entries");
        }
    };
    check_family(Ck, n, l_k, "Ck");
    check_family(Cy, n + 1, l_y, "Cy");
    check_family(Sigma, nt, nt, "Sigma");
    for (int j = 0; j < N; ++j) {
        detail::check_symmetric(Sigma[j], 1e-12, "model: Sigma");
        detail::checked_llt(Sigma[j], "model: Sigma");
    }

    if (P.rows() != N || P.cols() != N) throw InputError("model: transition matrix must be N x N");
    for (int i = 0; i < N; ++i) {
        if (P.row(i).minCoeff() < 0.0) throw InputError("model: negative transition probability");
        if (std::abs(P.row(i).sum() - 1.0) > 1e-12)
            throw InputError("model: transition matrix row does not sum to 1");
    }
    if (p1.size() != N || p1.minCoeff() < 0.0 || std::abs(p1.sum() - 1.0) > 1e-12)
        throw InputError("model: initial regime distribution invalid");

    if (int(psi_k.size()) != T || int(psi_y.size()) != T)
        throw InputError("model: exogenous series must cover t = 1..T");
    for (const auto& v : psi_k)
        if (v.size() != l_k || !v.allFinite()) throw InputError("model: psi_k invalid");
    for (const auto& v : psi_y)
        if (v.size() != l_y || !v.allFinite()) throw InputError("model: psi_y invalid");

    if (x0.size() != nt || !x0.allFinite()) throw InputError("model: x0 invalid");

    if (mu) {
        if (int(mu->size()) != T) throw InputError("model: mu schedule must cover t = 1..T");
        for (const auto& v : *mu)
            if (v.size() != n || !v.allFinite()) throw InputError("model: mu schedule invalid");
    }
}

}  // namespace ggm
