#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ggm/dynamics.hpp"

namespace ggm {

// Observed panel in logs: prices/dividends/rate for t = 0..T, exogenous
// series for t = 1..T. Estimation runs on the single-regime system with
// deterministic coefficients.
struct PanelData {
    MatrixXd logP;   // (T+1) x n
    MatrixXd logd;   // (T+1) x n
    VectorXd logr;   // T+1
    MatrixXd psi_k;  // T x l_k, row t-1 holds psi_{k,t}
    MatrixXd psi_y;  // T x l_y

    int T() const { return int(psi_k.rows()); }
    int n() const { return int(logP.cols()); }
    int l_k() const { return int(psi_k.cols()); }
    int l_y() const { return int(psi_y.cols()); }
    int ntilde() const { return 2 * n() + 1; }

    void validate() const {
        const int Tn = T();
        if (Tn < 1) throw InputError("panel: empty");
        if (logP.rows() != Tn + 1 || logd.rows() != Tn + 1 || logr.size() != Tn + 1 ||
            psi_y.rows() != Tn)
            throw InputError("panel: inconsistent lengths");
        if (logd.cols() != n()) throw InputError("panel: dividend column count != n");
        if (!logP.allFinite() || !logd.allFinite() || !logr.allFinite() ||
            !psi_k.allFinite() || !psi_y.allFinite())
            throw InputError("panel: non-finite values");
    }
};

struct EstimationParams {
    MatrixXd Ck;     // n x l_k
    MatrixXd Cy;     // (n+1) x l_y
    MatrixXd Sigma;  // ntilde x ntilde

    VectorXd ck_vec() const { return Eigen::Map<const VectorXd>(Ck.data(), Ck.size()); }
    VectorXd cy_vec() const { return Eigen::Map<const VectorXd>(Cy.data(), Cy.size()); }
};

// Per-period linearization quantities implied by the parameters and the
// initial observation: mu_0 = logd_0 - logP_0 and
//   mu_t = mu_{t-1} + ln(g_t) + J_d Cy psi_y,t - Ck psi_k,t,
// solved componentwise through the scalar fixed point.
struct MuSchedule {
    MatrixXd mu;  // T x n, row t-1
    MatrixXd g;
    MatrixXd h;
};

inline MuSchedule mu_schedule(const EstimationParams& p, const PanelData& d) {
    const int T = d.T(), n = d.n();
    MuSchedule s;
    s.mu.resize(T, n);
    s.g.resize(T, n);
    s.h.resize(T, n);
    VectorXd mu_prev = (d.logd.row(0) - d.logP.row(0)).transpose();
    for (int t = 1; t <= T; ++t) {
        VectorXd drift = (p.Cy * d.psi_y.row(t - 1).transpose()).head(n) -
                         p.Ck * d.psi_k.row(t - 1).transpose();
        for (int a = 0; a < n; ++a) {
            double root;
            try {
                root = solve_mu_fixed_point(mu_prev(a) + drift(a));
            } catch (const ConvergenceError& e) {
                throw ConvergenceError("mu schedule at t=" + std::to_string(t) +
                                       ", component " + std::to_string(a) + ": " + e.what());
            }
            s.mu(t - 1, a) = root;
            double g = 1.0 + std::exp(root);
            s.g(t - 1, a) = g;
            s.h(t - 1, a) = g * (std::log(g) - root) + root;
        }
        mu_prev = s.mu.row(t - 1).transpose();
    }
    return s;
}

struct ResidualPanel {
    MatrixXd u;    // T x n
    MatrixXd eta;  // T x (n+1)

    VectorXd xi_at(int t) const {
        VectorXd v(u.cols() + eta.cols());
        v << u.row(t - 1).transpose(), eta.row(t - 1).transpose();
        return v;
    }
};

//   u_t   = (logP_t - logd_t) (/) g_t - logP_{t-1} + logd_t - Ck psi_k,t + h_t (/) g_t
//   eta_t = y_t - y_{t-1} - Cy psi_y,t
inline ResidualPanel residuals(const EstimationParams& p, const PanelData& d,
                               const MuSchedule& s) {
    const int T = d.T(), n = d.n();
    ResidualPanel r;
    r.u.resize(T, n);
    r.eta.resize(T, n + 1);
    for (int t = 1; t <= T; ++t) {
        VectorXd g = s.g.row(t - 1).transpose();
        VectorXd pd = (d.logP.row(t) - d.logd.row(t)).transpose();
        VectorXd u = pd.cwiseQuotient(g) - d.logP.row(t - 1).transpose() +
                     d.logd.row(t).transpose() - p.Ck * d.psi_k.row(t - 1).transpose() +
                     s.h.row(t - 1).transpose().cwiseQuotient(g);
        r.u.row(t - 1) = u.transpose();
        VectorXd y(n + 1), y_prev(n + 1);
        y << d.logd.row(t).transpose(), d.logr(t);
        y_prev << d.logd.row(t - 1).transpose(), d.logr(t - 1);
        r.eta.row(t - 1) =
            (y - y_prev - p.Cy * d.psi_y.row(t - 1).transpose()).transpose();
    }
    return r;
}

// Log-likelihood of the system; the change of variables from shocks to
// observables contributes -sum_t ln|G_t|.
inline double loglik(const EstimationParams& p, const PanelData& d) {
    d.validate();
    MuSchedule s = mu_schedule(p, d);
    ResidualPanel r = residuals(p, d, s);
    const int T = d.T();
    const int nt = d.ntilde();
    Eigen::LLT<MatrixXd> llt(p.Sigma);
    if (llt.info() != Eigen::Success)
        throw NumericalError("loglik: Sigma not positive definite");
    double logdet = 0.0;
    for (int i = 0; i < nt; ++i) logdet += std::log(llt.matrixL()(i, i));
    logdet *= 2.0;
    double quad = 0.0;
    for (int t = 1; t <= T; ++t) {
        VectorXd xi = r.xi_at(t);
        quad += xi.dot(llt.solve(xi));
    }
    double jac = s.g.array().log().sum();
    return -0.5 * nt * T * std::log(2.0 * M_PI) - 0.5 * T * logdet - 0.5 * quad - jac;
}

namespace detail {

// kron(psi', I_rows): rows x (rows * len)
inline MatrixXd kron_row_identity(const VectorXd& psi, int rows) {
    MatrixXd out(rows, rows * psi.size());
    for (int j = 0; j < psi.size(); ++j)
        out.middleCols(j * rows, rows) = psi(j) * MatrixXd::Identity(rows, rows);
    return out;
}

// kron(psi', J_d): n x ((n+1) * len), J_d = [I_n : 0]
inline MatrixXd kron_row_jd(const VectorXd& psi, int n) {
    MatrixXd jd = MatrixXd::Zero(n, n + 1);
    jd.leftCols(n).setIdentity();
    MatrixXd out(n, (n + 1) * psi.size());
    for (int j = 0; j < psi.size(); ++j) out.middleCols(j * (n + 1), n + 1) = psi(j) * jd;
    return out;
}

// Chain-rule pieces shared by the score and the zig-zag sweeps.
struct ScoreWork {
    MuSchedule sched;
    ResidualPanel resid;
    std::vector<MatrixXd> dmu_ck;  // per t: n x (n l_k)
    std::vector<MatrixXd> dmu_cy;  // per t: n x ((n+1) l_y)
    std::vector<MatrixXd> du_ck;
    std::vector<MatrixXd> du_cy;
    MatrixXd omega;                // Sigma^{-1}
};

inline ScoreWork score_work(const EstimationParams& p, const PanelData& d) {
    const int T = d.T(), n = d.n();
    ScoreWork w;
    w.sched = mu_schedule(p, d);
    w.resid = residuals(p, d, w.sched);
    Eigen::LLT<MatrixXd> llt(p.Sigma);
    if (llt.info() != Eigen::Success)
        throw NumericalError("score: Sigma not positive definite");
    w.omega = llt.solve(MatrixXd::Identity(d.ntilde(), d.ntilde()));

    // dmu_t = G_t (dmu_{t-1} - df_t) with df_t = kron(psi_k', I) for ck and
    // -kron(psi_y', J_d) for cy
    MatrixXd dk_prev = MatrixXd::Zero(n, n * d.l_k());
    MatrixXd dy_prev = MatrixXd::Zero(n, (n + 1) * d.l_y());
    for (int t = 1; t <= T; ++t) {
        VectorXd g = w.sched.g.row(t - 1).transpose();
        MatrixXd dk = g.asDiagonal() *
                      MatrixXd(dk_prev - kron_row_identity(d.psi_k.row(t - 1).transpose(), n));
        MatrixXd dy = g.asDiagonal() *
                      MatrixXd(dy_prev + kron_row_jd(d.psi_y.row(t - 1).transpose(), n));
        w.dmu_ck.push_back(dk);
        w.dmu_cy.push_back(dy);

        // du_t/dmu_t = diag(logd - logP - mu)(I - G^{-1}) G^{-1}
        VectorXd dev = (d.logd.row(t) - d.logP.row(t)).transpose() -
                       w.sched.mu.row(t - 1).transpose();
        VectorXd coef = dev.array() * (1.0 - g.array().inverse()) / g.array();
        w.du_ck.push_back(coef.asDiagonal() * dk -
                          kron_row_identity(d.psi_k.row(t - 1).transpose(), n));
        w.du_cy.push_back(MatrixXd(coef.asDiagonal() * dy));

        dk_prev = w.dmu_ck.back();
        dy_prev = w.dmu_cy.back();
    }
    return w;
}

}  // namespace detail

struct Score {
    VectorXd ck;      // n l_k
    VectorXd cy;      // (n+1) l_y
    MatrixXd sigma;   // ntilde x ntilde (entrywise derivative)
};

// Analytic gradient of the log-likelihood. The Jacobian term differentiates
// to -(1 - 1/g_t)' dmu_t, summed over t.
inline Score score(const EstimationParams& p, const PanelData& d) {
    d.validate();
    detail::ScoreWork w = detail::score_work(p, d);
    const int T = d.T(), n = d.n();
    const MatrixXd Ouu = w.omega.topLeftCorner(n, n);
    const MatrixXd Oue = w.omega.topRightCorner(n, n + 1);
    const MatrixXd Oeu = w.omega.bottomLeftCorner(n + 1, n);
    const MatrixXd Oee = w.omega.bottomRightCorner(n + 1, n + 1);

    Score s;
    s.ck = VectorXd::Zero(n * d.l_k());
    s.cy = VectorXd::Zero((n + 1) * d.l_y());
    MatrixXd outer = MatrixXd::Zero(d.ntilde(), d.ntilde());
    for (int t = 1; t <= T; ++t) {
        VectorXd u = w.resid.u.row(t - 1).transpose();
        VectorXd eta = w.resid.eta.row(t - 1).transpose();
        VectorXd gu = Ouu * u + Oue * eta;   // d quad / d u_t
        VectorXd ge = Oeu * u + Oee * eta;   // d quad / d eta_t
        VectorXd jac = VectorXd::Ones(n) -
                       w.sched.g.row(t - 1).transpose().cwiseInverse();

        s.ck -= w.du_ck[size_t(t - 1)].transpose() * gu;
        s.ck -= w.dmu_ck[size_t(t - 1)].transpose() * jac;
        s.cy -= w.du_cy[size_t(t - 1)].transpose() * gu;
        // d eta / d cy = -kron(psi_y', I_{n+1})
        s.cy += detail::kron_row_identity(d.psi_y.row(t - 1).transpose(), n + 1)
                    .transpose() * ge;
        s.cy -= w.dmu_cy[size_t(t - 1)].transpose() * jac;

        VectorXd xi = w.resid.xi_at(t);
        outer += xi * xi.transpose();
    }
    s.sigma = -0.5 * T * w.omega + 0.5 * w.omega * outer * w.omega;
    return s;
}

struct EstimationResult {
    EstimationParams params;
    double loglik = 0.0;
    int iterations = 0;
    bool converged = false;
    MatrixXd mu_path;     // T x n at the optimum
    VectorXd se_ck;       // asymptotic standard errors (observed information)
    VectorXd se_cy;
};

struct ZigZagOptions {
    double tol = 1e-8;
    double loglik_tol = 1e-10;
    int max_iter = 500;
    bool standard_errors = true;
};

// Least-squares initialization: Cy from the random-walk increments, Ck from
// the linearized-return regression with the empirical dividend-to-price ratio
// as the mu proxy, Sigma from the implied residuals.
inline EstimationParams zigzag_init(const PanelData& d) {
    const int T = d.T(), n = d.n();
    EstimationParams p;

    MatrixXd psipsi_y = MatrixXd::Zero(d.l_y(), d.l_y());
    MatrixXd dy_psi = MatrixXd::Zero(n + 1, d.l_y());
    for (int t = 1; t <= T; ++t) {
        VectorXd psi = d.psi_y.row(t - 1).transpose();
        VectorXd dy(n + 1);
        dy << (d.logd.row(t) - d.logd.row(t - 1)).transpose(), d.logr(t) - d.logr(t - 1);
        psipsi_y += psi * psi.transpose();
        dy_psi += dy * psi.transpose();
    }
    p.Cy = psipsi_y.ldlt().solve(dy_psi.transpose()).transpose();

    MatrixXd psipsi_k = MatrixXd::Zero(d.l_k(), d.l_k());
    MatrixXd k_psi = MatrixXd::Zero(n, d.l_k());
    for (int t = 1; t <= T; ++t) {
        VectorXd mu_emp = (d.logd.row(t) - d.logP.row(t)).transpose();
        VectorXd g = (mu_emp.array().exp() + 1.0).matrix();
        // linearized return with the empirical ratio: correction term vanishes
        VectorXd k = (d.logP.row(t) - d.logP.row(t - 1)).transpose() +
                     g.array().log().matrix();
        VectorXd psi = d.psi_k.row(t - 1).transpose();
        psipsi_k += psi * psi.transpose();
        k_psi += k * psi.transpose();
    }
    p.Ck = psipsi_k.ldlt().solve(k_psi.transpose()).transpose();

    MuSchedule s = mu_schedule(p, d);
    ResidualPanel r = residuals(p, d, s);
    MatrixXd outer = MatrixXd::Zero(d.ntilde(), d.ntilde());
    for (int t = 1; t <= T; ++t) {
        VectorXd xi = r.xi_at(t);
        outer += xi * xi.transpose();
    }
    p.Sigma = outer / double(T);
    return p;
}

namespace detail {

inline VectorXd solve_named(const MatrixXd& A, const VectorXd& b, const std::string& block) {
    Eigen::FullPivLU<MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw NumericalError("zigzag: " + block + " normal equations are singular");
    return lu.solve(b);
}

}  // namespace detail

// Coordinate sweeps on the first-order conditions: solve the ck system, the
// cy system, refresh Sigma with the residual outer product, then recompute
// the mu schedule. At a fixed point every analytic score block vanishes.
inline EstimationResult zigzag_estimate(const PanelData& d,
                                        std::optional<EstimationParams> init = std::nullopt,
                                        const ZigZagOptions& opt = {}) {
    d.validate();
    const int T = d.T(), n = d.n();
    EstimationParams p = init ? *init : zigzag_init(d);

    double prev_ll = loglik(p, d);
    int it = 0;
    bool converged = false;
    for (; it < opt.max_iter; ++it) {
        const MatrixXd Ck_old = p.Ck;
        const MatrixXd Cy_old = p.Cy;
        const MatrixXd Sigma_old = p.Sigma;
        detail::ScoreWork w = detail::score_work(p, d);
        const MatrixXd Ouu = w.omega.topLeftCorner(n, n);
        const MatrixXd Oue = w.omega.topRightCorner(n, n + 1);
        const MatrixXd Oeu = w.omega.bottomLeftCorner(n + 1, n);
        const MatrixXd Oee = w.omega.bottomRightCorner(n + 1, n + 1);

        // ck' M = rhs with M = sum kron(psi_k, I) Ouu du/dck
        MatrixXd Mk = MatrixXd::Zero(n * d.l_k(), n * d.l_k());
        VectorXd rk = VectorXd::Zero(n * d.l_k());
        for (int t = 1; t <= T; ++t) {
            MatrixXd kron = detail::kron_row_identity(d.psi_k.row(t - 1).transpose(), n);
            const MatrixXd& du = w.du_ck[size_t(t - 1)];
            VectorXd u_k = w.resid.u.row(t - 1).transpose() +
                           p.Ck * d.psi_k.row(t - 1).transpose();  // u without the ck term
            VectorXd eta = w.resid.eta.row(t - 1).transpose();
            VectorXd jac = VectorXd::Ones(n) -
                           w.sched.g.row(t - 1).transpose().cwiseInverse();
            Mk += kron.transpose() * Ouu * du;
            rk += du.transpose() * (Ouu * u_k + Oue * eta);
            rk += w.dmu_ck[size_t(t - 1)].transpose() * jac;
        }
        VectorXd ck_new = detail::solve_named(Mk.transpose(), rk, "c_k");
        p.Ck = Eigen::Map<const MatrixXd>(ck_new.data(), n, d.l_k());

        // refresh residual pieces at the new ck before the cy sweep
        w = detail::score_work(p, d);
        MatrixXd My = MatrixXd::Zero((n + 1) * d.l_y(), (n + 1) * d.l_y());
        VectorXd ry = VectorXd::Zero((n + 1) * d.l_y());
        for (int t = 1; t <= T; ++t) {
            MatrixXd kron = detail::kron_row_identity(d.psi_y.row(t - 1).transpose(), n + 1);
            MatrixXd deta = -kron;
            const MatrixXd& du = w.du_cy[size_t(t - 1)];
            VectorXd u = w.resid.u.row(t - 1).transpose();
            VectorXd eta = w.resid.eta.row(t - 1).transpose();
            VectorXd eta_y = eta + p.Cy * d.psi_y.row(t - 1).transpose();
            VectorXd jac = VectorXd::Ones(n) -
                           w.sched.g.row(t - 1).transpose().cwiseInverse();
            My += kron.transpose() * Oee * deta;
            ry += du.transpose() * (Ouu * u + Oue * eta);
            ry += deta.transpose() * (Oee * eta_y + Oeu * u);
            ry += w.dmu_cy[size_t(t - 1)].transpose() * jac;
        }
        VectorXd cy_new = detail::solve_named(My.transpose(), ry, "c_y");
        p.Cy = Eigen::Map<const MatrixXd>(cy_new.data(), n + 1, d.l_y());

        // Sigma update from the refreshed residuals
        MuSchedule sched = mu_schedule(p, d);
        ResidualPanel resid = residuals(p, d, sched);
        MatrixXd outer = MatrixXd::Zero(d.ntilde(), d.ntilde());
        for (int t = 1; t <= T; ++t) {
            VectorXd xi = resid.xi_at(t);
            outer += xi * xi.transpose();
        }
        p.Sigma = outer / double(T);

        double change = std::max({(p.Ck - Ck_old).cwiseAbs().maxCoeff(),
                                  (p.Cy - Cy_old).cwiseAbs().maxCoeff(),
                                  (p.Sigma - Sigma_old).cwiseAbs().maxCoeff()});

        double ll = loglik(p, d);
        double ll_change = std::abs(ll - prev_ll) / (1.0 + std::abs(ll));
        prev_ll = ll;
        if (change < opt.tol && ll_change < opt.loglik_tol) {
            converged = true;
            ++it;
            break;
        }
    }

    EstimationResult res;
    res.params = p;
    res.loglik = prev_ll;
    res.iterations = it;
    res.converged = converged;
    res.mu_path = mu_schedule(p, d).mu;
    if (opt.standard_errors) {
        // observed information of the concentrated likelihood (Sigma profiled out)
        auto concentrated = [&](const VectorXd& theta) {
            EstimationParams q = p;
            q.Ck = Eigen::Map<const MatrixXd>(theta.data(), n, d.l_k());
            q.Cy = Eigen::Map<const MatrixXd>(theta.data() + n * d.l_k(), n + 1, d.l_y());
            MuSchedule sc = mu_schedule(q, d);
            ResidualPanel rr = residuals(q, d, sc);
            MatrixXd outer = MatrixXd::Zero(d.ntilde(), d.ntilde());
            for (int t = 1; t <= T; ++t) {
                VectorXd xi = rr.xi_at(t);
                outer += xi * xi.transpose();
            }
            q.Sigma = outer / double(T);
            return loglik(q, d);
        };
        const int dim = n * d.l_k() + (n + 1) * d.l_y();
        VectorXd theta(dim);
        theta << p.ck_vec(), p.cy_vec();
        MatrixXd hess(dim, dim);
        for (int i = 0; i < dim; ++i) {
            double hi = 1e-4 * (1.0 + std::abs(theta(i)));
            for (int j = i; j < dim; ++j) {
                double hj = 1e-4 * (1.0 + std::abs(theta(j)));
                VectorXd tpp = theta, tpm = theta, tmp = theta, tmm = theta;
                tpp(i) += hi; tpp(j) += hj;
                tpm(i) += hi; tpm(j) -= hj;
                tmp(i) -= hi; tmp(j) += hj;
                tmm(i) -= hi; tmm(j) -= hj;
                double v = (concentrated(tpp) - concentrated(tpm) - concentrated(tmp) +
                            concentrated(tmm)) / (4.0 * hi * hj);
                hess(i, j) = v;
                hess(j, i) = v;
            }
        }
        MatrixXd info = -hess;
        Eigen::FullPivLU<MatrixXd> lu(info);
        if (lu.isInvertible()) {
            VectorXd var = lu.inverse().diagonal().cwiseMax(0.0);
            res.se_ck = var.head(n * d.l_k()).cwiseSqrt();
            res.se_cy = var.tail((n + 1) * d.l_y()).cwiseSqrt();
        } else {
            res.se_ck = VectorXd::Constant(n * d.l_k(),
                                           std::numeric_limits<double>::quiet_NaN());
            res.se_cy = VectorXd::Constant((n + 1) * d.l_y(),
                                           std::numeric_limits<double>::quiet_NaN());
        }
    }
    return res;
}

}  // namespace ggm
