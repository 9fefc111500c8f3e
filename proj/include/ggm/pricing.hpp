#pragma once

#include <functional>

#include "ggm/kernels.hpp"
#include "ggm/regimes.hpp"

namespace ggm {

struct OptionSpec {
    enum class Kind { Call, Put, Exchange };
    Kind kind = Kind::Call;
    VectorXd strike;   // per asset, call/put
    int leg_i = 0;     // exchange: receive w_i units of asset i ...
    int leg_j = 1;     // ... for w_j units of asset j
    double w_i = 1.0;
    double w_j = 1.0;
    int maturity = 1;  // period index <= model horizon

    void validate(const ModelSpec& m) const {
        if (maturity < 1 || maturity > m.T) throw InputError("option: maturity out of range");
        if (kind == Kind::Exchange) {
            if (leg_i == leg_j) throw InputError("option: exchange legs must differ");
            if (leg_i < 0 || leg_i >= m.n || leg_j < 0 || leg_j >= m.n)
                throw InputError("option: exchange leg out of range");
            if (!(w_i > 0.0) || !(w_j > 0.0)) throw InputError("option: weights must be positive");
        } else {
            if (strike.size() != m.n) throw InputError("option: strike vector length != n");
            if (strike.minCoeff() <= 0.0) throw InputError("option: strikes must be positive");
        }
    }
};

// Mixture decomposition of a value: conditional values per enumerated regime
// path with their weights, plus the weighted total.
struct PriceLadder {
    std::vector<RegimePath> paths;
    std::vector<VectorXd> conditional;
    VectorXd total;

    void finalize() {
        if (paths.empty()) throw NumericalError("price ladder: empty mixture");
        total = VectorXd::Zero(conditional.front().size());
        for (size_t i = 0; i < paths.size(); ++i) total += paths[i].weight * conditional[i];
    }
};

// Forward mean/covariance of the log price block at the option maturity.
struct ForwardPriceLaw {
    VectorXd mean;  // n
    MatrixXd cov;   // n x n
    double bond = 1.0;
};

inline ForwardPriceLaw forward_price_law(const ModelSpec& m, const ConditionalMoments& cm,
                                         const VectorXd& x_t, int maturity) {
    ForwardMoments fm = forward_adjust(cm, maturity);
    ForwardPriceLaw law;
    law.mean = fm.mean_block(maturity).head(m.n);
    law.cov = fm.cov_block(maturity, maturity).topLeftCorner(m.n, m.n);
    law.bond = bond_price(cm, state_log_rate(x_t), maturity);
    return law;
}

// Price conditional on a full continuation regime path. Call/put return one
// price per asset; the exchange option returns a single value.
inline VectorXd price_option_conditional(const ModelSpec& m, const Linearization& lin,
                                         const OptionSpec& opt, int t, const VectorXd& x_t,
                                         const RegimePath& path) {
    opt.validate(m);
    if (opt.maturity <= t) throw InputError("option: maturity must exceed valuation time");
    ConditionalMoments cm = conditional_moments(m, lin, t, x_t, path, Measure::RiskNeutral);
    ForwardPriceLaw law = forward_price_law(m, cm, x_t, opt.maturity);

    if (opt.kind == OptionSpec::Kind::Exchange) {
        VectorXd spread = VectorXd::Zero(m.n);
        spread(opt.leg_i) = 1.0;
        spread(opt.leg_j) = -1.0;
        double v = spread.dot(law.cov * spread);
        if (v < kDegenerateVariance)
            throw NumericalError("exchange option: degenerate spread variance");
        double s = std::sqrt(v);
        double d1 = (spread.dot(law.mean) + spread.dot(law.cov.col(opt.leg_i)) -
                     std::log(opt.w_j / opt.w_i)) / s;
        double d2 = d1 - s;
        double lega = opt.w_i *
                      std::exp(law.mean(opt.leg_i) + 0.5 * law.cov(opt.leg_i, opt.leg_i)) *
                      norm_cdf(d1);
        double legb = opt.w_j *
                      std::exp(law.mean(opt.leg_j) + 0.5 * law.cov(opt.leg_j, opt.leg_j)) *
                      norm_cdf(d2);
        VectorXd out(1);
        out(0) = law.bond * (lega - legb);
        return out;
    }

    CallPut kind = opt.kind == OptionSpec::Kind::Call ? CallPut::Call : CallPut::Put;
    VectorXd out(m.n);
    for (int a = 0; a < m.n; ++a)
        out(a) = law.bond *
                 lognormal_call_put(law.mean(a), law.cov(a, a), opt.strike(a), kind);
    return out;
}

// Generic mixture over enumerated continuation paths.
inline PriceLadder mixture_over_paths(
    const ModelSpec& m, int t, int last, const RegimeAnchor& anchor,
    const std::function<VectorXd(const RegimePath&)>& conditional_value) {
    PriceLadder ladder;
    ladder.paths = enumerate_regime_paths(m, t, last, anchor);
    ladder.conditional.reserve(ladder.paths.size());
    for (const auto& p : ladder.paths) ladder.conditional.push_back(conditional_value(p));
    ladder.finalize();
    return ladder;
}

inline PriceLadder price_option_mixture(const ModelSpec& m, const Linearization& lin,
                                        const OptionSpec& opt, int t, const VectorXd& x_t,
                                        const RegimeAnchor& anchor) {
    opt.validate(m);
    return mixture_over_paths(m, t, m.T, anchor, [&](const RegimePath& p) {
        return price_option_conditional(m, lin, opt, t, x_t, p);
    });
}

// Mixture bond price (the conditional bond depends on the path through the
// rate moments).
inline PriceLadder bond_price_mixture(const ModelSpec& m, const Linearization& lin, int t,
                                      const VectorXd& x_t, int u, const RegimeAnchor& anchor) {
    if (u <= t || u > m.T) throw InputError("bond: u out of range");
    return mixture_over_paths(m, t, m.T, anchor, [&](const RegimePath& p) {
        ConditionalMoments cm = conditional_moments(m, lin, t, x_t, p, Measure::RiskNeutral);
        VectorXd out(1);
        out(0) = bond_price(cm, state_log_rate(x_t), u);
        return out;
    });
}

}  // namespace ggm
