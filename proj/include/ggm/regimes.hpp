#pragma once

#include <cstdint>
#include <vector>

#include "ggm/moments.hpp"

namespace ggm {

// Exact enumeration over regime continuations is exponential; refuse beyond
// this many paths rather than approximate silently.
inline constexpr std::uint64_t kMaxRegimePaths = 1'000'000;

inline std::uint64_t regime_path_count(int N, int horizon) {
    std::uint64_t c = 1;
    for (int i = 0; i < horizon; ++i) {
        c *= std::uint64_t(N);
        if (c > kMaxRegimePaths) return c;
    }
    return c;
}

// Distribution of the first continuation regime s_{t+1}: the chain's initial
// distribution at t = 0, or the transition row(s) from the time-t regime
// (known exactly or as a filtered posterior).
struct RegimeAnchor {
    VectorXd dist;  // over regimes, length N

    static RegimeAnchor initial(const ModelSpec& m) { return {m.p1}; }
    static RegimeAnchor known(const ModelSpec& m, int s_t) {
        if (s_t < 0 || s_t >= m.N) throw InputError("regime anchor: bad regime index");
        return {m.P.row(s_t).transpose()};
    }
    static RegimeAnchor posterior(const ModelSpec& m, const VectorXd& post) {
        if (post.size() != m.N || post.minCoeff() < -1e-12)
            throw InputError("regime anchor: bad posterior");
        VectorXd d = m.P.transpose() * post;
        d /= d.sum();
        return {d};
    }
};

// All continuation paths (s_{t+1}, ..., s_last) with weights
//   anchor(s_{t+1}) * prod p_{s_{m-1} s_m}.
// Weights sum to one by the chain's row-stochasticity.
inline std::vector<RegimePath> enumerate_regime_paths(const ModelSpec& m, int t, int last,
                                                      const RegimeAnchor& anchor) {
    if (last < t + 1 || last > m.T) throw InputError("regime paths: bad horizon");
    const int H = last - t;
    std::uint64_t count = regime_path_count(m.N, H);
    if (count > kMaxRegimePaths)
        throw InputError("regime paths: " + std::to_string(count) +
                         " paths exceed the enumeration guard of " +
                         std::to_string(kMaxRegimePaths));

    std::vector<RegimePath> out;
    out.reserve(size_t(count));
    std::vector<int> cur(H, 0);
    while (true) {
        double w = anchor.dist(cur[0]);
        for (int i = 1; i < H; ++i) w *= m.P(cur[i - 1], cur[i]);
        RegimePath p;
        p.first = t + 1;
        p.regimes = cur;
        p.weight = w;
        out.push_back(std::move(p));
        // odometer increment
        int pos = H - 1;
        while (pos >= 0 && ++cur[pos] == m.N) {
            cur[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return out;
}

// Weight of one continuation path given the time-t regime (Markov property:
// only the last observed regime matters).
inline double continuation_weight(const ModelSpec& m, int s_t, const std::vector<int>& cont) {
    double w = m.P(s_t, cont[0]);
    for (size_t i = 1; i < cont.size(); ++i) w *= m.P(cont[i - 1], cont[i]);
    return w;
}

namespace detail {

// Log density of x_t given x_{t-1} under the physical measure and regime j:
// Gaussian with mean Q0^{-1}(nu + Q1 x_prev) and covariance
// Q0^{-1} Gs Sigma_j Gs' Q0^{-T}.
inline double log_emission(const ModelSpec& m, const Linearization& lin, int t, int j,
                           const VectorXd& x_prev, const VectorXd& x_t) {
    StepMatrices s = step_matrices(m, lin, t, j, Measure::Real);
    MatrixXd q0inv = q0_inverse(s);
    VectorXd mean = q0inv * (s.nu + s.q1 * x_prev);
    MatrixXd cov = q0inv * s.shock_scale * m.Sigma[j] * s.shock_scale.transpose() *
                   q0inv.transpose();
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw NumericalError("regime filter: transition covariance not PD");
    VectorXd z = llt.matrixL().solve(x_t - mean);
    double logdet = 0.0;
    for (int i = 0; i < cov.rows(); ++i) logdet += std::log(llt.matrixL()(i, i));
    return -0.5 * z.squaredNorm() - logdet - 0.5 * cov.rows() * std::log(2.0 * M_PI);
}

}  // namespace detail

struct FilterResult {
    std::vector<VectorXd> marginals;  // P[s_m = j | data to t], m = 1..t
    double log_likelihood = 0.0;
    VectorXd current() const { return marginals.back(); }
};

// Forward algorithm over the hidden chain with Gaussian transition emissions.
// observations holds x_0, ..., x_t. Scaled per step; a zero total step
// likelihood is reported instead of silently renormalising garbage.
inline FilterResult filter_regime_posterior(const ModelSpec& m, const Linearization& lin,
                                            const std::vector<VectorXd>& observations) {
    const int t = int(observations.size()) - 1;
    if (t < 1) throw InputError("regime filter: need at least x_0 and x_1");
    if (t > m.T) throw InputError("regime filter: more observations than horizon");
    for (const auto& x : observations)
        if (x.size() != m.ntilde()) throw InputError("regime filter: bad state length");

    FilterResult res;
    VectorXd alpha(m.N);
    double loglik = 0.0;
    for (int s = 1; s <= t; ++s) {
        VectorXd prior = (s == 1) ? m.p1 : VectorXd(m.P.transpose() * alpha);
        VectorXd dens(m.N);
        for (int j = 0; j < m.N; ++j)
            dens(j) = detail::log_emission(m, lin, s, j, observations[s - 1], observations[s]);
        double dmax = dens.maxCoeff();
        VectorXd unnorm = prior.array() * (dens.array() - dmax).exp();
        double total = unnorm.sum();
        if (!(total > 0.0) || !std::isfinite(total))
            throw NumericalError("regime filter: zero step likelihood at t=" +
                                 std::to_string(s));
        loglik += std::log(total) + dmax;
        alpha = unnorm / total;
        res.marginals.push_back(alpha);
    }
    res.log_likelihood = loglik;
    return res;
}

// Posterior over full regime paths s_1..s_t (enumeration, guarded). Returned
// paths carry normalized weights.
inline std::vector<RegimePath> filter_regime_path_posterior(
    const ModelSpec& m, const Linearization& lin, const std::vector<VectorXd>& observations) {
    const int t = int(observations.size()) - 1;
    if (t < 1) throw InputError("regime filter: need at least x_0 and x_1");
    std::uint64_t count = regime_path_count(m.N, t);
    if (count > kMaxRegimePaths)
        throw InputError("regime filter: path enumeration guard exceeded");

    std::vector<RegimePath> paths;
    paths.reserve(size_t(count));
    std::vector<int> cur(t, 0);
    std::vector<double> logw;
    logw.reserve(size_t(count));
    while (true) {
        double lw = std::log(m.p1(cur[0]));
        for (int s = 2; s <= t; ++s) lw += std::log(m.P(cur[s - 2], cur[s - 1]));
        for (int s = 1; s <= t; ++s)
            lw += detail::log_emission(m, lin, s, cur[s - 1], observations[s - 1],
                                       observations[s]);
        RegimePath p;
        p.first = 1;
        p.regimes = cur;
        paths.push_back(std::move(p));
        logw.push_back(lw);
        int pos = t - 1;
        while (pos >= 0 && ++cur[pos] == m.N) {
            cur[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    double lmax = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    for (double lw : logw) total += std::exp(lw - lmax);
    if (!(total > 0.0) || !std::isfinite(total))
        throw NumericalError("regime filter: zero path likelihood");
    for (size_t i = 0; i < paths.size(); ++i) paths[i].weight = std::exp(logw[i] - lmax) / total;
    return paths;
}

}  // namespace ggm
