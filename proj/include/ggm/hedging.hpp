#pragma once

#include <variant>

#include "ggm/insurance.hpp"
#include "ggm/mc.hpp"

namespace ggm {

// A hedgeable claim: a European option/exchange payoff or an equity-linked
// insurance product (with its mortality table).
struct ClaimSpec {
    std::variant<OptionSpec, ProductSpec> payoff;
    MortalityTable table;  // used by product claims only

    bool is_option() const { return std::holds_alternative<OptionSpec>(payoff); }
    const OptionSpec& option() const { return std::get<OptionSpec>(payoff); }
    const ProductSpec& product() const { return std::get<ProductSpec>(payoff); }

    int dim(const ModelSpec& m) const {
        if (is_option())
            return option().kind == OptionSpec::Kind::Exchange ? 1 : m.n;
        return m.n;
    }
    int maturity() const { return is_option() ? option().maturity : product().T; }
};

// Second moment of the one-period discounted gain increment around its
// martingale mean, conditional on the next period's regime:
//   Omega = (exp(Sigma_uu) - 1) (.) Pbar Pbar'.
inline MatrixXd omega_bar_conditional(const ModelSpec& m, const Linearization& lin, int t,
                                      const VectorXd& x_t, int regime_next,
                                      double discount_t = 1.0) {
    (void)lin;
    if (t < 0 || t >= m.T) throw InputError("omega: t out of range");
    if (regime_next < 0 || regime_next >= m.N) throw InputError("omega: bad regime");
    const int n = m.n;
    VectorXd p_bar = discount_t * x_t.head(n).array().exp();
    MatrixXd suu = m.Sigma[regime_next].topLeftCorner(n, n);
    return (suu.array().exp() - 1.0).matrix().cwiseProduct(p_bar * p_bar.transpose());
}

// Moment bundle of the gain exponent pi = ln((Pbar_{t+1} + dbar_{t+1}) / D_t)
// and its maturity companions, under a (t,u)-forward measure. The gain
// discounts the step at the rate set at the hedge date (the rate component of
// x_t), so pi = W applied to (logP_{t+1}, logd_{t+1}, logr_t) plus
// G_{t+1}^{-1} h_{t+1}; on the stacked vector that is a selector touching the
// price/dividend blocks of x_{t+1} plus a known shift.
struct PiPhiMoments {
    VectorXd mu_pi;                 // n
    MatrixXd S_pi;                  // n x n
    MatrixXd S_pi_Pk;               // n x n, Cov[pi, logP_k]
    std::vector<VectorXd> mu_phi;   // per requested leg
    std::vector<MatrixXd> S_phi;
    MatrixXd W;                     // [G^{-1} : I - G^{-1} : -i_n], n x ntilde
};

namespace detail {

struct GainSelector {
    MatrixXd R;        // n x (ntilde * horizon), hits the x_{t+1} block
    VectorXd shift;    // G^{-1} h_{t+1} - i_n r_t
    MatrixXd W;        // canonical W matrix
};

inline GainSelector gain_selector(const ModelSpec& m, const Linearization& lin, int t,
                                  const VectorXd& x_t, int horizon) {
    const int n = m.n;
    const int nt = m.ntilde();
    VectorXd ginv = lin.g_at(t + 1).cwiseInverse();

    GainSelector gs;
    gs.W = MatrixXd::Zero(n, nt);
    gs.W.leftCols(n) = MatrixXd(ginv.asDiagonal());
    gs.W.block(0, n, n, n) =
        MatrixXd((VectorXd::Ones(n) - ginv).asDiagonal());
    gs.W.col(2 * n) = -VectorXd::Ones(n);

    gs.R = MatrixXd::Zero(n, nt * horizon);
    gs.R.leftCols(2 * n) = gs.W.leftCols(2 * n);  // rate column retimed to x_t
    gs.shift = ginv.cwiseProduct(lin.h_at(t + 1)) -
               VectorXd::Constant(n, state_log_rate(x_t));
    return gs;
}

inline MatrixXd price_selector_at(const ModelSpec& m, const ForwardMoments& fm, int k) {
    MatrixXd J = MatrixXd::Zero(m.n, fm.mean.size());
    J.block(0, fm.offset(k), m.n, m.n).setIdentity();
    return J;
}

}  // namespace detail

inline PiPhiMoments pi_phi_moments(const ModelSpec& m, const Linearization& lin, int t,
                                   const VectorXd& x_t, const ForwardMoments& fm, int k,
                                   const std::vector<int>& legs = {}) {
    if (fm.t != t) throw InputError("pi_phi_moments: forward moments for a different time");
    detail::GainSelector gs = detail::gain_selector(m, lin, t, x_t, fm.last - fm.t);
    MatrixXd Jk = detail::price_selector_at(m, fm, k);

    PiPhiMoments out;
    out.W = gs.W;
    out.mu_pi = gs.R * fm.mean + gs.shift;
    out.S_pi = gs.R * fm.cov * gs.R.transpose();
    out.S_pi_Pk = gs.R * fm.cov * Jk.transpose();
    MatrixXd Ju = detail::price_selector_at(m, fm, fm.u);
    for (int leg : legs) {
        MatrixXd Rphi = gs.R + VectorXd::Ones(m.n) * Ju.row(leg);
        out.mu_phi.push_back(Rphi * fm.mean + gs.shift);
        out.S_phi.push_back(Rphi * fm.cov * Rphi.transpose());
    }
    return out;
}

// Time-t value of a claim conditional on a continuation regime path (the
// ingredients of the hedge's cash leg come from the pricing modules).
inline VectorXd claim_value_conditional(const ModelSpec& m, const Linearization& lin,
                                        const ClaimSpec& claim, int t, const VectorXd& x_t,
                                        const RegimePath& path) {
    if (claim.is_option())
        return price_option_conditional(m, lin, claim.option(), t, x_t, path);
    return premium_conditional(m, lin, claim.table, claim.product(), t, x_t, path);
}

// Terminal payoff at the claim's maturity (intrinsic values from the state).
inline VectorXd claim_terminal_payoff(const ModelSpec& m, const ClaimSpec& claim,
                                      const VectorXd& x_T) {
    VectorXd P = x_T.head(m.n).array().exp();
    if (claim.is_option()) {
        const OptionSpec& o = claim.option();
        if (o.kind == OptionSpec::Kind::Exchange) {
            VectorXd out(1);
            out(0) = std::max(o.w_i * P(o.leg_i) - o.w_j * P(o.leg_j), 0.0);
            return out;
        }
        VectorXd diff = P - o.strike;
        return o.kind == OptionSpec::Kind::Call ? diff.cwiseMax(0.0)
                                                : VectorXd(-diff).cwiseMax(0.0);
    }
    const ProductSpec& pr = claim.product();
    VectorXd K = pr.G_at(pr.T).cwiseQuotient(pr.F_at(pr.T));
    if (pr.kind == ProductSpec::Kind::Term) return VectorXd::Zero(m.n);
    if (pr.variant == ProductSpec::Variant::Segregated)
        return pr.F_at(pr.T).cwiseProduct((K - P).cwiseMax(0.0));
    return pr.F_at(pr.T).cwiseProduct((P - K).cwiseMax(0.0)) + pr.G_at(pr.T);
}

// Cov[gain increment, discounted claim] conditional on a regime path, through
// the log-normal kernels:
//   Lambda = D_t^2 sum_k B_{t,k} Psi(+-)(...) [diag F_k] [+ guarantee leg]
//            * mortality factor    -  Pbar_t Vbar_t'.
inline MatrixXd lambda_conditional(const ModelSpec& m, const Linearization& lin,
                                   const ClaimSpec& claim, int t, const VectorXd& x_t,
                                   const RegimePath& path, double discount_t = 1.0) {
    const int n = m.n;
    const int mat = claim.maturity();
    if (mat <= t) throw InputError("lambda: claim matured");
    ConditionalMoments cm = conditional_moments(m, lin, t, x_t, path, Measure::RiskNeutral);
    const double r_next = state_log_rate(x_t);
    VectorXd p_bar = discount_t * x_t.head(n).array().exp();
    VectorXd value = claim_value_conditional(m, lin, claim, t, x_t, path);
    const double d2 = discount_t * discount_t;

    if (claim.is_option()) {
        const OptionSpec& o = claim.option();
        ForwardMoments fm = forward_adjust(cm, o.maturity);
        const double B = bond_price(cm, r_next, o.maturity);
        VectorXd muP = fm.mean_block(o.maturity).head(n);
        MatrixXd SP = fm.cov_block(o.maturity, o.maturity).topLeftCorner(n, n);

        if (o.kind == OptionSpec::Kind::Exchange) {
            PiPhiMoments pm = pi_phi_moments(m, lin, t, x_t, fm, o.maturity,
                                             {o.leg_i, o.leg_j});
            VectorXd spread = VectorXd::Zero(n);
            spread(o.leg_i) = 1.0;
            spread(o.leg_j) = -1.0;
            double v = spread.dot(SP * spread);
            if (v < kDegenerateVariance)
                throw NumericalError("lambda: degenerate exchange spread");
            double s = std::sqrt(v);
            double d1 = (spread.dot(muP) + spread.dot(SP.col(o.leg_i)) -
                         std::log(o.w_j / o.w_i)) / s;
            VectorXd tilt = (pm.S_pi_Pk * spread) / s;
            MatrixXd lam(n, 1);
            for (int kk = 0; kk < n; ++kk) {
                double a = o.w_i * std::exp(pm.mu_phi[0](kk) + 0.5 * pm.S_phi[0](kk, kk)) *
                           norm_cdf(d1 + tilt(kk));
                double b = o.w_j * std::exp(pm.mu_phi[1](kk) + 0.5 * pm.S_phi[1](kk, kk)) *
                           norm_cdf(d1 - s + tilt(kk));
                lam(kk, 0) = d2 * B * (a - b);
            }
            return lam - p_bar * (discount_t * value).transpose();
        }

        PiPhiMoments pm = pi_phi_moments(m, lin, t, x_t, fm, o.maturity);
        MatrixXd psi = o.kind == OptionSpec::Kind::Call
                           ? psi_plus(o.strike, pm.mu_pi, muP, pm.S_pi, pm.S_pi_Pk, SP)
                           : psi_minus(o.strike, pm.mu_pi, muP, pm.S_pi, pm.S_pi_Pk, SP);
        return d2 * B * psi - p_bar * (discount_t * value).transpose();
    }

    const ProductSpec& pr = claim.product();
    SurvivalFactors sf = survival_factors(claim.table, pr.age, t, pr.T);
    const bool unit_linked = pr.variant == ProductSpec::Variant::UnitLinked;

    auto block_at = [&](int k) {
        ForwardMoments fm = forward_adjust(cm, k);
        const double B = bond_price(cm, r_next, k);
        VectorXd muP = fm.mean_block(k).head(n);
        MatrixXd SP = fm.cov_block(k, k).topLeftCorner(n, n);
        PiPhiMoments pm = pi_phi_moments(m, lin, t, x_t, fm, k);
        VectorXd K = pr.G_at(k).cwiseQuotient(pr.F_at(k));
        MatrixXd psi = unit_linked
                           ? psi_plus(K, pm.mu_pi, muP, pm.S_pi, pm.S_pi_Pk, SP)
                           : psi_minus(K, pm.mu_pi, muP, pm.S_pi, pm.S_pi_Pk, SP);
        MatrixXd blk = psi * MatrixXd(pr.F_at(k).asDiagonal());
        if (unit_linked) {
            VectorXd egain = (pm.mu_pi + 0.5 * pm.S_pi.diagonal()).array().exp();
            blk += egain * pr.G_at(k).transpose();
        }
        return MatrixXd(B * blk);
    };

    MatrixXd lam = MatrixXd::Zero(n, n);
    if (pr.kind == ProductSpec::Kind::Term) {
        for (int k = t; k <= pr.T - 1; ++k) lam += block_at(k + 1) * sf.death[size_t(k - t)];
    } else {
        lam = block_at(pr.T) * sf.terminal;
    }
    return d2 * lam - p_bar * (discount_t * value).transpose();
}

inline MatrixXd omega_mixture(const ModelSpec& m, const Linearization& lin, int t,
                              const VectorXd& x_t, const RegimeAnchor& anchor,
                              double discount_t = 1.0) {
    MatrixXd out = MatrixXd::Zero(m.n, m.n);
    for (int j = 0; j < m.N; ++j)
        out += anchor.dist(j) * omega_bar_conditional(m, lin, t, x_t, j, discount_t);
    return out;
}

inline MatrixXd lambda_mixture(const ModelSpec& m, const Linearization& lin,
                               const ClaimSpec& claim, int t, const VectorXd& x_t,
                               const RegimeAnchor& anchor, double discount_t = 1.0) {
    MatrixXd out;
    auto ladder = mixture_over_paths(m, t, m.T, anchor, [&](const RegimePath& p) {
        MatrixXd lam = lambda_conditional(m, lin, claim, t, x_t, p, discount_t);
        return VectorXd(Eigen::Map<VectorXd>(lam.data(), lam.size()));
    });
    out = Eigen::Map<const MatrixXd>(ladder.total.data(), m.n,
                                     ladder.total.size() / m.n);
    return out;
}

// One entry of the locally risk-minimizing plan: shares h solve
// Omega h = Lambda (per claim column); the cash leg closes the position at
// the next period's value.
struct HedgeStep {
    MatrixXd shares;      // n x m
    VectorXd cash;        // m
    bool ill_conditioned = false;
};

inline HedgeStep hedge_step(const MatrixXd& omega, const MatrixXd& lambda,
                            const VectorXd& value_next, const VectorXd& gain_next) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(omega);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
        throw NumericalError(
            "hedge: gain second-moment matrix is singular (redundant correlated assets)");
    HedgeStep out;
    out.ill_conditioned =
        es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff() > 1e12;
    out.shares = omega.llt().solve(lambda);
    out.cash = value_next - out.shares.transpose() * gain_next;
    return out;
}

// Replayed plan over a realized path: at each t the shares come from time-t
// data only; cash and cost increments are filled once t+1 is revealed. Cost
// increments are reported in time-0 discounted units. Insurance claims embed
// the analytic mortality weights: the step pays the death-probability-
// weighted benefit and carries the survivor-weighted value forward.
struct HedgePlanRow {
    int period = 0;          // position held over (period-1, period]
    MatrixXd shares;
    VectorXd cash;
    VectorXd value;          // claim value at period
    VectorXd cost_increment;
};

inline std::vector<HedgePlanRow> replay_hedge(const ModelSpec& m, const Linearization& lin,
                                              const ClaimSpec& claim, const SimPath& path) {
    const int n = m.n;
    const int mat = claim.maturity();
    if (path.t0 != 0 || path.last() < mat)
        throw InputError("hedge replay: path must cover 0..maturity");

    std::vector<HedgePlanRow> rows;
    double disc = 1.0;  // D_t along the path
    for (int t = 0; t < mat; ++t) {
        const VectorXd& x_t = path.state_at(t);
        RegimePath cont;
        cont.first = t + 1;
        cont.regimes.assign(path.regimes.begin() + t,
                            path.regimes.begin() + mat);
        MatrixXd omega = omega_bar_conditional(m, lin, t, x_t, cont.regime_at(t + 1));
        MatrixXd lambda = lambda_conditional(m, lin, claim, t, x_t, cont);

        const VectorXd& x_next = path.state_at(t + 1);
        VectorXd k_next = log_return_from_logs(x_next.head(n), x_next.segment(n, n),
                                               x_t.head(n), lin, t + 1);
        // P_{t+1} + d_{t+1} in levels, through the linearized return
        VectorXd gain = (x_t.head(n).array().exp() * k_next.array().exp()).matrix();

        VectorXd value_t = claim_value_conditional(m, lin, claim, t, x_t, cont);
        VectorXd value_next;
        if (t + 1 == mat) {
            value_next = claim_terminal_payoff(m, claim, x_next);
        } else {
            RegimePath cont_next;
            cont_next.first = t + 2;
            cont_next.regimes.assign(path.regimes.begin() + t + 1,
                                     path.regimes.begin() + mat);
            value_next = claim_value_conditional(m, lin, claim, t + 1, x_next, cont_next);
        }

        HedgeStep step = hedge_step(omega, lambda, value_next, gain);

        // value flowing back to the hedger over (t, t+1], in time-t units
        VectorXd carried = value_next;
        if (!claim.is_option()) {
            const ProductSpec& pr = claim.product();
            double q = claim.table.q_at(pr.age + t);
            VectorXd benefit = VectorXd::Zero(n);
            if (pr.kind == ProductSpec::Kind::Term) {
                VectorXd P = x_next.head(n).array().exp();
                VectorXd K = pr.G_at(t + 1).cwiseQuotient(pr.F_at(t + 1));
                benefit = pr.variant == ProductSpec::Variant::Segregated
                              ? VectorXd(pr.F_at(t + 1).cwiseProduct((K - P).cwiseMax(0.0)))
                              : VectorXd(pr.F_at(t + 1).cwiseProduct((P - K).cwiseMax(0.0)) +
                                         pr.G_at(t + 1));
            }
            carried = q * benefit + (1.0 - q) * value_next;
        }

        double step_disc = std::exp(-state_log_rate(x_t));
        VectorXd prices_t = x_t.head(n).array().exp();
        VectorXd local_cost = step_disc * carried - value_t -
                              step.shares.transpose() * VectorXd(step_disc * gain - prices_t);
        HedgePlanRow row;
        row.period = t + 1;
        row.shares = step.shares;
        row.cash = step.cash;
        row.value = value_next;
        row.cost_increment = disc * local_cost;
        rows.push_back(std::move(row));
        disc *= step_disc;
    }
    return rows;
}

}  // namespace ggm
