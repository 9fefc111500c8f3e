#pragma once

#include "ggm/pricing.hpp"

namespace ggm {

// One-year death probabilities q_x by integer age.
struct MortalityTable {
    int first_age = 0;
    std::vector<double> q;

    double q_at(int age) const {
        int i = age - first_age;
        if (i < 0 || i >= int(q.size()))
            throw InputError("mortality table: age " + std::to_string(age) + " not covered");
        return q[size_t(i)];
    }

    // k-year survival of a life aged x: prod_{m=0}^{k-1} (1 - q_{x+m}).
    double survival(int x, int k) const {
        double p = 1.0;
        for (int mAge = 0; mAge < k; ++mAge) p *= 1.0 - q_at(x + mAge);
        return p;
    }

    void validate() const {
        if (q.empty()) throw InputError("mortality table: empty");
        for (double v : q)
            if (v < 0.0 || v > 1.0) throw InputError("mortality table: qx outside [0,1]");
    }
};

// Death/survival weights of the benefit stream between t and T for a life
// aged x at time 0: term_factor[k - t] = P[death in year k+1 | alive at t]
// for k = t..T-1, terminal = P[alive at T | alive at t].
struct SurvivalFactors {
    std::vector<double> death;  // indexed k - t
    double terminal = 1.0;
};

inline SurvivalFactors survival_factors(const MortalityTable& table, int x, int t, int T) {
    if (t < 0 || T <= t) throw InputError("survival factors: need t < T");
    SurvivalFactors f;
    f.death.reserve(size_t(T - t));
    for (int k = t; k <= T - 1; ++k)
        f.death.push_back(table.survival(x + t, k - t) * table.q_at(x + k));
    f.terminal = table.survival(x + t, T - t);
    return f;
}

struct ProductSpec {
    enum class Kind { Term, Endowment };
    enum class Variant { Segregated, UnitLinked };
    Kind kind = Kind::Term;
    Variant variant = Variant::Segregated;
    int age = 0;
    int T = 1;                  // contract horizon (periods)
    std::vector<VectorXd> F;    // fund units per period, index t-1 for t = 1..T
    std::vector<VectorXd> G;    // guarantee amounts per period

    const VectorXd& F_at(int t) const { return F[size_t(t - 1)]; }
    const VectorXd& G_at(int t) const { return G[size_t(t - 1)]; }

    void validate(const ModelSpec& m) const {
        if (T < 1 || T > m.T) throw InputError("product: horizon out of range");
        if (int(F.size()) != T || int(G.size()) != T)
            throw InputError("product: schedules must cover t = 1..T");
        for (const auto& v : F) {
            if (v.size() != m.n) throw InputError("product: fund schedule length != n");
            if (v.minCoeff() <= 0.0)
                throw InputError("invalid product: fund units must be positive where a "
                                 "strike is formed");
        }
        for (const auto& v : G) {
            if (v.size() != m.n) throw InputError("product: guarantee schedule length != n");
            if (v.minCoeff() < 0.0) throw InputError("product: guarantees must be >= 0");
        }
    }
};

// Net single premium conditional on a continuation regime path. Building
// blocks are the maturity-k call/put values with strike G_k (/) F_k:
//   segregated:   sum_k F_k (.) Put_{k|t} * death weight   (+ endowment leg)
//   unit-linked:  sum_k [F_k (.) Call_{k|t} + B_{t,k} G_k] * death weight
// with the endowment using the T-maturity block and the terminal survival.
inline VectorXd premium_conditional(const ModelSpec& m, const Linearization& lin,
                                    const MortalityTable& table, const ProductSpec& prod,
                                    int t, const VectorXd& x_t, const RegimePath& path) {
    prod.validate(m);
    table.validate();
    if (t < 0 || t >= prod.T) throw InputError("premium: valuation time outside contract");
    SurvivalFactors sf = survival_factors(table, prod.age, t, prod.T);

    ConditionalMoments cm = conditional_moments(m, lin, t, x_t, path, Measure::RiskNeutral);
    const bool unit_linked = prod.variant == ProductSpec::Variant::UnitLinked;
    const CallPut block_kind = unit_linked ? CallPut::Call : CallPut::Put;

    auto maturity_block = [&](int k) {
        ForwardPriceLaw law = forward_price_law(m, cm, x_t, k);
        VectorXd strike = prod.G_at(k).cwiseQuotient(prod.F_at(k));
        VectorXd block(m.n);
        for (int a = 0; a < m.n; ++a)
            block(a) = law.bond *
                       lognormal_call_put(law.mean(a), law.cov(a, a), strike(a), block_kind);
        VectorXd value = prod.F_at(k).cwiseProduct(block);
        if (unit_linked) value += law.bond * prod.G_at(k);
        return value;
    };

    VectorXd premium = VectorXd::Zero(m.n);
    if (prod.kind == ProductSpec::Kind::Term) {
        for (int k = t; k <= prod.T - 1; ++k)
            premium += maturity_block(k + 1) * sf.death[size_t(k - t)];
    } else {
        premium = maturity_block(prod.T) * sf.terminal;
    }
    return premium;
}

inline PriceLadder premium_mixture(const ModelSpec& m, const Linearization& lin,
                                   const MortalityTable& table, const ProductSpec& prod,
                                   int t, const VectorXd& x_t, const RegimeAnchor& anchor) {
    prod.validate(m);
    return mixture_over_paths(m, t, m.T, anchor, [&](const RegimePath& p) {
        return premium_conditional(m, lin, table, prod, t, x_t, p);
    });
}

}  // namespace ggm
