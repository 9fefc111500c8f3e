#pragma once

#include <functional>
#include <thread>
#include <vector>

#include "ggm/moments.hpp"
#include "ggm/regimes.hpp"
#include "ggm/rng.hpp"

namespace ggm {

struct SimConfig {
    std::int64_t paths = 100000;
    std::uint64_t seed = 1;
    Measure measure = Measure::RiskNeutral;
    bool antithetic = false;
    int threads = 1;

    void validate() const {
        if (paths < 1) throw InputError("sim config: need at least one path");
        if (antithetic && paths % 2 != 0)
            throw InputError("sim config: antithetic runs need an even path count");
        if (threads < 1) throw InputError("sim config: threads must be >= 1");
    }
};

// One simulated trajectory: states at absolute times t0..last (index i holds
// x_{t0+i}) and the regimes of periods t0+1..last.
struct SimPath {
    int t0 = 0;
    std::vector<VectorXd> states;
    std::vector<int> regimes;

    const VectorXd& state_at(int t) const { return states[size_t(t - t0)]; }
    int regime_at(int t) const { return regimes[size_t(t - t0 - 1)]; }
    int last() const { return t0 + int(states.size()) - 1; }

    // exp(-sum of one-period rates) over (from, to]; the rate for (b, b+1] is
    // the rate component of x_b, so the first factor is known at `from`.
    double discount(int from, int to) const {
        double s = 0.0;
        for (int b = from; b < to; ++b) s += state_log_rate(state_at(b));
        return std::exp(-s);
    }
};

struct MeanSE {
    VectorXd mean;
    VectorXd se;
};

namespace detail {

// Per-period, per-regime affine transition x_t = trans x_{t-1} + offset + load z,
// z a standard normal vector.
struct AffineStep {
    MatrixXd trans;
    VectorXd offset;
    MatrixXd load;
};

inline std::vector<std::vector<AffineStep>> build_steps(const ModelSpec& m,
                                                        const Linearization& lin,
                                                        int t0, int last, Measure measure) {
    std::vector<std::vector<AffineStep>> steps(size_t(last - t0));
    for (int t = t0 + 1; t <= last; ++t) {
        auto& per_regime = steps[size_t(t - t0 - 1)];
        per_regime.resize(size_t(m.N));
        for (int j = 0; j < m.N; ++j) {
            StepMatrices s = step_matrices(m, lin, t, j, measure);
            MatrixXd q0inv = q0_inverse(s);
            Eigen::LLT<MatrixXd> llt(m.Sigma[j]);
            if (llt.info() != Eigen::Success)
                throw NumericalError("simulate: Sigma not positive definite");
            per_regime[j] = {q0inv * s.q1, q0inv * s.nu,
                             q0inv * s.shock_scale * MatrixXd(llt.matrixL())};
        }
    }
    return steps;
}

inline int sample_index(const VectorXd& dist, double u) {
    double acc = 0.0;
    for (int j = 0; j < dist.size(); ++j) {
        acc += dist(j);
        if (u <= acc) return j;
    }
    return int(dist.size()) - 1;
}

}  // namespace detail

// Regime source for a simulation: a fixed path, or draws from the chain
// anchored at the valuation time.
struct RegimeSource {
    std::optional<RegimePath> fixed;
    std::optional<RegimeAnchor> chain;

    static RegimeSource fixed_path(RegimePath p) { return {std::move(p), std::nullopt}; }
    static RegimeSource from_chain(RegimeAnchor a) { return {std::nullopt, std::move(a)}; }
};

// Streams simulated paths through `consume(path_index, SimPath)`. Draws are
// addressed by (seed, pair index), so results do not depend on scheduling;
// antithetic partners share regimes and flip shock signs.
inline void simulate_paths(const ModelSpec& m, const Linearization& lin, const SimConfig& cfg,
                           int t0, const VectorXd& x0, int last, const RegimeSource& src,
                           const std::function<void(std::int64_t, const SimPath&)>& consume) {
    cfg.validate();
    if (t0 < 0 || last > m.T || last <= t0) throw InputError("simulate: bad time range");
    if (x0.size() != m.ntilde()) throw InputError("simulate: bad initial state");
    if (src.chain && src.chain->dist.size() != m.N)
        throw InputError("simulate: bad regime anchor");

    const auto steps = detail::build_steps(m, lin, t0, last, cfg.measure);
    const int H = last - t0;
    const int nt = m.ntilde();

    auto run_range = [&](std::int64_t lo, std::int64_t hi) {
        SimPath path;
        path.t0 = t0;
        path.states.assign(size_t(H) + 1, VectorXd(nt));
        path.regimes.assign(size_t(H), 0);
        VectorXd z(nt);
        for (std::int64_t p = lo; p < hi; ++p) {
            const std::uint64_t pair = cfg.antithetic ? std::uint64_t(p / 2) : std::uint64_t(p);
            const double sign = (cfg.antithetic && (p % 2 == 1)) ? -1.0 : 1.0;
            NormalStream shocks(cfg.seed, pair, 1);
            NormalStream chain(cfg.seed, pair, 2);

            if (src.fixed) {
                for (int i = 0; i < H; ++i) path.regimes[size_t(i)] = src.fixed->regime_at(t0 + 1 + i);
            } else {
                int s = detail::sample_index(src.chain->dist, chain.next_uniform());
                path.regimes[0] = s;
                for (int i = 1; i < H; ++i) {
                    s = detail::sample_index(m.P.row(s).transpose(), chain.next_uniform());
                    path.regimes[size_t(i)] = s;
                }
            }

            path.states[0] = x0;
            for (int i = 0; i < H; ++i) {
                const auto& st = steps[size_t(i)][size_t(path.regimes[size_t(i)])];
                for (int k = 0; k < nt; ++k) z(k) = sign * shocks.next();
                path.states[size_t(i) + 1] =
                    st.trans * path.states[size_t(i)] + st.offset + st.load * z;
            }
            consume(p, path);
        }
    };

    if (cfg.threads == 1) {
        run_range(0, cfg.paths);
    } else {
        std::vector<std::thread> pool;
        std::int64_t chunk = (cfg.paths + cfg.threads - 1) / cfg.threads;
        if (cfg.antithetic && chunk % 2 != 0) ++chunk;  // keep pairs on one thread
        for (int w = 0; w < cfg.threads; ++w) {
            std::int64_t lo = std::min<std::int64_t>(w * chunk, cfg.paths);
            std::int64_t hi = std::min<std::int64_t>(lo + chunk, cfg.paths);
            if (lo < hi) pool.emplace_back(run_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
}

// Materialized ensemble, for the CLI and small studies.
inline std::vector<SimPath> simulate(const ModelSpec& m, const Linearization& lin,
                                     const SimConfig& cfg, int t0, const VectorXd& x0,
                                     int last, const RegimeSource& src) {
    const double bytes = double(cfg.paths) * (last - t0 + 1) * m.ntilde() * 8.0;
    if (bytes > 2e8)
        throw InputError("simulate: ensemble too large to materialize; reduce paths");
    std::vector<SimPath> out(size_t(cfg.paths));
    simulate_paths(m, lin, cfg, t0, x0, last, src,
                   [&](std::int64_t p, const SimPath& path) { out[size_t(p)] = path; });
    return out;
}

namespace detail {

// Deterministic reduction: per-path rows are filled in place (threads touch
// disjoint rows), then summed in path order. Antithetic runs reduce over pair
// means so the standard error reflects independent pairs.
inline MeanSE reduce_rows(MatrixXd& values, bool antithetic) {
    if (antithetic) {
        MatrixXd pairs(values.rows() / 2, values.cols());
        for (Eigen::Index i = 0; i < pairs.rows(); ++i)
            pairs.row(i) = 0.5 * (values.row(2 * i) + values.row(2 * i + 1));
        values.swap(pairs);
    }
    const Eigen::Index M = values.rows();
    MeanSE r;
    r.mean = VectorXd::Zero(values.cols());
    for (Eigen::Index i = 0; i < M; ++i) r.mean += values.row(i).transpose();
    r.mean /= double(M);
    VectorXd ss = VectorXd::Zero(values.cols());
    for (Eigen::Index i = 0; i < M; ++i) {
        VectorXd d = values.row(i).transpose() - r.mean;
        ss += d.cwiseProduct(d);
    }
    r.se = (M > 1) ? VectorXd((ss / double(M - 1) / double(M)).cwiseSqrt())
                   : VectorXd::Zero(values.cols());
    return r;
}

}  // namespace detail

// Mean and standard error of a per-path statistic.
inline MeanSE estimate(const ModelSpec& m, const Linearization& lin, const SimConfig& cfg,
                       int t0, const VectorXd& x0, int last, const RegimeSource& src,
                       int dim, const std::function<VectorXd(const SimPath&)>& statistic) {
    MatrixXd values(cfg.paths, dim);
    simulate_paths(m, lin, cfg, t0, x0, last, src,
                   [&](std::int64_t p, const SimPath& path) {
                       values.row(p) = statistic(path).transpose();
                   });
    return detail::reduce_rows(values, cfg.antithetic);
}

// Discounted-payoff estimator: payoff pays at `maturity`, discounted to t0
// with the shared convention.
inline MeanSE estimate_price(const ModelSpec& m, const Linearization& lin,
                             const SimConfig& cfg, int t0, const VectorXd& x0, int maturity,
                             const RegimeSource& src, int dim,
                             const std::function<VectorXd(const SimPath&)>& payoff) {
    return estimate(m, lin, cfg, t0, x0, maturity, src, dim, [&](const SimPath& p) {
        return VectorXd(p.discount(t0, maturity) * payoff(p));
    });
}

// Sample moments feeding the hedge recursion: the one-step discounted gain
//   gain = P_t (.) exp(k_{t+1} - r_t)        (n-vector, D_t taken as 1)
// against a discounted claim functional. Omega_hat estimates
// E[(gain - P_t)(gain - P_t)'], Lambda_hat the covariance with the claim.
struct HedgeMomentsMC {
    MatrixXd omega, omega_se;    // n x n
    MatrixXd lambda, lambda_se;  // n x m
};

inline HedgeMomentsMC estimate_hedge_moments(
    const ModelSpec& m, const Linearization& lin, const SimConfig& cfg, int t0,
    const VectorXd& x0, int last, const RegimeSource& src, int claim_dim,
    const std::function<VectorXd(const SimPath&)>& discounted_claim) {
    const int n = m.n;
    const VectorXd p_bar = x0.head(n).array().exp();

    MatrixXd gains(cfg.paths, n);
    MatrixXd claims(cfg.paths, claim_dim);
    simulate_paths(m, lin, cfg, t0, x0, last, src, [&](std::int64_t p, const SimPath& path) {
        VectorXd k = log_return_from_logs(path.state_at(t0 + 1).head(n),
                                          path.state_at(t0 + 1).segment(n, n),
                                          path.state_at(t0).head(n), lin, t0 + 1);
        double disc = std::exp(-state_log_rate(x0));
        gains.row(p) = (p_bar.array() * k.array().exp() * disc).matrix().transpose();
        claims.row(p) = discounted_claim(path).transpose();
    });

    if (cfg.antithetic) {
        auto fold = [](MatrixXd& v) {
            MatrixXd pairs(v.rows() / 2, v.cols());
            for (Eigen::Index i = 0; i < pairs.rows(); ++i)
                pairs.row(i) = 0.5 * (v.row(2 * i) + v.row(2 * i + 1));
            v.swap(pairs);
        };
        fold(gains);
        fold(claims);
    }
    const Eigen::Index M = gains.rows();

    VectorXd gain_mean = gains.colwise().mean().transpose();
    VectorXd claim_mean = claims.colwise().mean().transpose();

    HedgeMomentsMC out;
    out.omega = MatrixXd::Zero(n, n);
    out.omega_se = MatrixXd::Zero(n, n);
    out.lambda = MatrixXd::Zero(n, claim_dim);
    out.lambda_se = MatrixXd::Zero(n, claim_dim);

    MatrixXd om_ss = MatrixXd::Zero(n, n);
    MatrixXd la_ss = MatrixXd::Zero(n, claim_dim);
    for (Eigen::Index i = 0; i < M; ++i) {
        VectorXd d = gains.row(i).transpose() - p_bar;  // increment around the martingale mean
        VectorXd dc = gains.row(i).transpose() - gain_mean;
        VectorXd hc = claims.row(i).transpose() - claim_mean;
        out.omega += d * d.transpose();
        out.lambda += dc * hc.transpose();
    }
    out.omega /= double(M);
    out.lambda /= double(M - 1);
    for (Eigen::Index i = 0; i < M; ++i) {
        VectorXd d = gains.row(i).transpose() - p_bar;
        VectorXd dc = gains.row(i).transpose() - gain_mean;
        VectorXd hc = claims.row(i).transpose() - claim_mean;
        om_ss += ((d * d.transpose()) - out.omega).cwiseAbs2();
        la_ss += ((dc * hc.transpose()) - out.lambda).cwiseAbs2();
    }
    out.omega_se = (om_ss / double(M - 1) / double(M)).cwiseSqrt();
    out.lambda_se = (la_ss / double(M - 1) / double(M)).cwiseSqrt();
    return out;
}

}  // namespace ggm
