#pragma once

#include "ggm/dynamics.hpp"

namespace ggm {

// Stacked conditional moments of (x_{t+1}, ..., x_{last}) given time-t
// information and a regime path:
//
//   mean_i  = Pi_{t,i} x_t + sum_b A_{b,i} nu_b
//   cov_{i1,i2} = sum_b A_{b,i1} S_b Sb' A_{b,i2}'
//
// where A_{b,i} is the coefficient of the period-b shock/intercept in x_i.
// Computed by forward recursion, which is the same object evaluated without
// explicit matrix products.
struct ConditionalMoments {
    int t = 0;     // conditioning time
    int last = 0;  // final period covered
    int nt = 0;    // state dimension
    VectorXd mean;
    MatrixXd cov;

    int horizon() const { return last - t; }
    int offset(int i) const {
        if (i <= t || i > last) throw InputError("conditional moments: period out of range");
        return (i - t - 1) * nt;
    }
    VectorXd mean_block(int i) const { return mean.segment(offset(i), nt); }
    MatrixXd cov_block(int i1, int i2) const {
        return cov.block(offset(i1), offset(i2), nt, nt);
    }
};

// Q0^{-1} = [[I, -H], [0, I]].
inline MatrixXd q0_inverse(const StepMatrices& s) {
    const int nt = int(s.q0.rows());
    const int n = int(s.H.rows());
    MatrixXd inv = MatrixXd::Identity(nt, nt);
    inv.topRightCorner(n, n + 1) = -s.H;
    return inv;
}

// Transition product Pi_{beta,i} for a regime path: Q0_i^{-1} for beta == i,
// otherwise prod_{a=beta+1}^{i} Q0_a^{-1} Q1_a applied latest-first.
inline MatrixXd pi_matrix(const ModelSpec& m, const Linearization& lin, int beta, int i,
                          const RegimePath& path, Measure measure) {
    if (beta < 0 || beta > i || i > m.T) throw InputError("pi_matrix: index out of range");
    if (beta == i) {
        if (i == 0) return MatrixXd::Identity(m.ntilde(), m.ntilde());
        return q0_inverse(step_matrices(m, lin, i, path.regime_at(i), measure));
    }
    MatrixXd prod = MatrixXd::Identity(m.ntilde(), m.ntilde());
    for (int a = i; a > beta; --a) {
        StepMatrices s = step_matrices(m, lin, a, path.regime_at(a), measure);
        prod = prod * (q0_inverse(s) * s.q1);
    }
    return prod;
}

// Coefficient of the period-b intercept/shock in x_i (b <= i): the transition
// product times the contemporaneous solve Q0_b^{-1}.
inline MatrixXd shock_coefficient(const ModelSpec& m, const Linearization& lin, int b, int i,
                                  const RegimePath& path, Measure measure) {
    MatrixXd inner = q0_inverse(step_matrices(m, lin, b, path.regime_at(b), measure));
    if (b == i) return inner;
    return pi_matrix(m, lin, b, i, path, measure) * inner;
}

inline ConditionalMoments conditional_moments(const ModelSpec& m, const Linearization& lin,
                                              int t, const VectorXd& x_t,
                                              const RegimePath& path,
                                              Measure measure = Measure::RiskNeutral) {
    if (t < 0 || t >= m.T) throw InputError("conditional_moments: t out of range");
    if (x_t.size() != m.ntilde()) throw InputError("conditional_moments: bad state length");
    const int last = path.last_period();
    if (path.first != t + 1 || last > m.T)
        throw InputError("conditional_moments: path must cover t+1..last");
    const int nt = m.ntilde();
    const int H = last - t;

    ConditionalMoments cm;
    cm.t = t;
    cm.last = last;
    cm.nt = nt;
    cm.mean = VectorXd::Zero(nt * H);
    cm.cov = MatrixXd::Zero(nt * H, nt * H);

    VectorXd mean_prev = x_t;
    for (int i = t + 1; i <= last; ++i) {
        StepMatrices s = step_matrices(m, lin, i, path.regime_at(i), measure);
        MatrixXd q0inv = q0_inverse(s);
        MatrixXd trans = q0inv * s.q1;
        MatrixXd innov = q0inv * s.shock_scale * m.Sigma[path.regime_at(i)] *
                         s.shock_scale.transpose() * q0inv.transpose();

        const int oi = (i - t - 1) * nt;
        VectorXd mean_i = q0inv * s.nu + trans * mean_prev;
        cm.mean.segment(oi, nt) = mean_i;
        mean_prev = mean_i;

        // diagonal block: propagate previous variance and add the new shock
        if (i == t + 1) {
            cm.cov.block(oi, oi, nt, nt) = innov;
        } else {
            const int op = oi - nt;
            cm.cov.block(oi, oi, nt, nt) =
                trans * cm.cov.block(op, op, nt, nt) * trans.transpose() + innov;
            // cross blocks with every earlier period
            for (int j = t + 1; j < i; ++j) {
                const int oj = (j - t - 1) * nt;
                MatrixXd cross = cm.cov.block(oj, oi - nt, nt, nt) * trans.transpose();
                cm.cov.block(oj, oi, nt, nt) = cross;
                cm.cov.block(oi, oj, nt, nt) = cross.transpose();
            }
        }
    }
    return cm;
}

// Moments of the stacked vector under the (t,u)-forward measure: the mean
// shifts by -cov * gamma, the covariance is untouched. gamma sums the rate
// rows of periods t+1..u-1.
struct ForwardMoments {
    int t = 0;
    int u = 0;
    int nt = 0;
    int last = 0;
    VectorXd mean;  // shifted stacked mean
    MatrixXd cov;   // identical to the conditional covariance
    VectorXd gamma;

    int offset(int i) const {
        if (i <= t || i > last) throw InputError("forward moments: period out of range");
        return (i - t - 1) * nt;
    }
    VectorXd mean_block(int i) const { return mean.segment(offset(i), nt); }
    MatrixXd cov_block(int i1, int i2) const {
        return cov.block(offset(i1), offset(i2), nt, nt);
    }
};

inline ForwardMoments forward_adjust(const ConditionalMoments& cm, int u) {
    if (u <= cm.t || u > cm.last) throw InputError("forward_adjust: u out of range");
    ForwardMoments fm;
    fm.t = cm.t;
    fm.u = u;
    fm.nt = cm.nt;
    fm.last = cm.last;
    fm.cov = cm.cov;
    fm.gamma = VectorXd::Zero(cm.mean.size());
    for (int b = cm.t + 1; b <= u - 1; ++b) fm.gamma(cm.offset(b) + cm.nt - 1) = 1.0;
    fm.mean = cm.mean - cm.cov * fm.gamma;
    return fm;
}

// Zero-coupon bond paying 1 at u, valued at t with the known next-period rate
// r_next (the rate component of x_t under the predictable-rate convention):
//   B = exp{ -r_next - sum_b E[rate_b] + (1/2) sum_{a,b} Cov[rate_a, rate_b] }
// over b = t+1..u-1.
inline double bond_price(const ConditionalMoments& cm, double r_next, int u) {
    if (u <= cm.t || u > cm.last) throw InputError("bond_price: u out of range");
    const int r = cm.nt - 1;
    double expo = -r_next;
    for (int b = cm.t + 1; b <= u - 1; ++b) expo -= cm.mean_block(b)(r);
    for (int a = cm.t + 1; a <= u - 1; ++a)
        for (int b = cm.t + 1; b <= u - 1; ++b) expo += 0.5 * cm.cov_block(a, b)(r, r);
    return std::exp(expo);
}

}  // namespace ggm
