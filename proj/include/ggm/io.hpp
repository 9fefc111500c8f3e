#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "ggm/estimation.hpp"
#include "ggm/hedging.hpp"

namespace ggm {

using nlohmann::json;

// Numbers are serialized with 17 significant digits so a rewritten file
// round-trips to the same doubles.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline json to_json(const VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline json to_json(const MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace detail {

inline VectorXd vector_from(const json& a, const std::string& what) {
    if (!a.is_array()) throw InputError(what + ": expected an array");
    VectorXd v(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number()) throw InputError(what + ": expected numbers");
        v(Eigen::Index(i)) = a[i].get<double>();
    }
    return v;
}

inline MatrixXd matrix_from(const json& a, const std::string& what) {
    if (!a.is_array() || a.empty()) throw InputError(what + ": expected an array of rows");
    size_t cols = a[0].is_array() ? a[0].size() : 0;
    if (cols == 0) throw InputError(what + ": expected nested row arrays");
    MatrixXd m(a.size(), cols);
    for (size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_array() || a[i].size() != cols)
            throw InputError(what + ": ragged rows");
        for (size_t j = 0; j < cols; ++j) m(Eigen::Index(i), Eigen::Index(j)) = a[i][j].get<double>();
    }
    return m;
}

inline const json& require(const json& j, const std::string& key, const std::string& what) {
    auto it = j.find(key);
    if (it == j.end()) throw InputError(what + ": missing field '" + key + "'");
    return *it;
}

}  // namespace detail

// Model JSON schema: dimensions, per-regime coefficient/covariance matrices
// as nested row arrays, transition matrix, exogenous series, initial state,
// optional mu schedule.
inline ModelSpec model_from_json(const json& j) {
    ModelSpec m;
    m.n = detail::require(j, "n", "model").get<int>();
    m.N = detail::require(j, "regimes", "model").get<int>();
    m.T = detail::require(j, "horizon", "model").get<int>();
    m.l_k = detail::require(j, "l_k", "model").get<int>();
    m.l_y = detail::require(j, "l_y", "model").get<int>();

    auto family = [&](const char* key, std::vector<MatrixXd>& out) {
        const json& arr = detail::require(j, key, "model");
        if (!arr.is_array()) throw InputError(std::string("model: ") + key + " must be an array");
        for (const auto& e : arr) out.push_back(detail::matrix_from(e, std::string("model: ") + key));
    };
    family("Ck", m.Ck);
    family("Cy", m.Cy);
    family("Sigma", m.Sigma);
    m.P = detail::matrix_from(detail::require(j, "transition", "model"), "model: transition");
    m.p1 = detail::vector_from(detail::require(j, "initial_regime_probs", "model"),
                               "model: initial_regime_probs");

    const json& pk = detail::require(j, "psi_k", "model");
    for (const auto& e : pk) m.psi_k.push_back(detail::vector_from(e, "model: psi_k"));
    const json& py = detail::require(j, "psi_y", "model");
    for (const auto& e : py) m.psi_y.push_back(detail::vector_from(e, "model: psi_y"));

    m.x0 = detail::vector_from(detail::require(j, "x0", "model"), "model: x0");
    if (j.contains("mu")) {
        std::vector<VectorXd> mu;
        for (const auto& e : j["mu"]) mu.push_back(detail::vector_from(e, "model: mu"));
        m.mu = std::move(mu);
    }
    m.validate();
    return m;
}

inline json model_to_json(const ModelSpec& m) {
    json j;
    j["n"] = m.n;
    j["regimes"] = m.N;
    j["horizon"] = m.T;
    j["l_k"] = m.l_k;
    j["l_y"] = m.l_y;
    json ck = json::array(), cy = json::array(), sg = json::array();
    for (const auto& M : m.Ck) ck.push_back(to_json(M));
    for (const auto& M : m.Cy) cy.push_back(to_json(M));
    for (const auto& M : m.Sigma) sg.push_back(to_json(M));
    j["Ck"] = ck;
    j["Cy"] = cy;
    j["Sigma"] = sg;
    j["transition"] = to_json(m.P);
    j["initial_regime_probs"] = to_json(m.p1);
    json pk = json::array(), py = json::array();
    for (const auto& v : m.psi_k) pk.push_back(to_json(v));
    for (const auto& v : m.psi_y) py.push_back(to_json(v));
    j["psi_k"] = pk;
    j["psi_y"] = py;
    j["x0"] = to_json(m.x0);
    if (m.mu) {
        json mu = json::array();
        for (const auto& v : *m.mu) mu.push_back(to_json(v));
        j["mu"] = mu;
    }
    return j;
}

inline OptionSpec option_from_json(const json& j, const ModelSpec& m) {
    OptionSpec o;
    std::string kind = detail::require(j, "kind", "option").get<std::string>();
    if (kind == "call") o.kind = OptionSpec::Kind::Call;
    else if (kind == "put") o.kind = OptionSpec::Kind::Put;
    else if (kind == "exchange") o.kind = OptionSpec::Kind::Exchange;
    else throw InputError("option: kind must be call, put, or exchange");
    o.maturity = detail::require(j, "maturity", "option").get<int>();
    if (o.kind == OptionSpec::Kind::Exchange) {
        o.leg_i = detail::require(j, "i", "option").get<int>();
        o.leg_j = detail::require(j, "j", "option").get<int>();
        o.w_i = detail::require(j, "w_i", "option").get<double>();
        o.w_j = detail::require(j, "w_j", "option").get<double>();
    } else {
        o.strike = detail::vector_from(detail::require(j, "strike", "option"), "option: strike");
    }
    o.validate(m);
    return o;
}

inline ProductSpec product_from_json(const json& j, const ModelSpec& m) {
    ProductSpec p;
    std::string kind = detail::require(j, "kind", "product").get<std::string>();
    if (kind == "term") p.kind = ProductSpec::Kind::Term;
    else if (kind == "endowment") p.kind = ProductSpec::Kind::Endowment;
    else throw InputError("product: kind must be term or endowment");
    std::string variant = detail::require(j, "variant", "product").get<std::string>();
    if (variant == "segregated") p.variant = ProductSpec::Variant::Segregated;
    else if (variant == "unit_linked") p.variant = ProductSpec::Variant::UnitLinked;
    else throw InputError("product: variant must be segregated or unit_linked");
    p.age = detail::require(j, "age", "product").get<int>();
    p.T = detail::require(j, "T", "product").get<int>();

    auto schedule = [&](const char* key) {
        const json& e = detail::require(j, key, "product");
        std::vector<VectorXd> out;
        if (e.is_array() && !e.empty() && e[0].is_array()) {
            for (const auto& row : e)
                out.push_back(detail::vector_from(row, std::string("product: ") + key));
        } else {
            // single vector (or scalar) broadcast over every period
            VectorXd v = e.is_array() ? detail::vector_from(e, std::string("product: ") + key)
                                      : VectorXd::Constant(m.n, e.get<double>());
            out.assign(size_t(p.T), v);
        }
        return out;
    };
    p.F = schedule("F");
    p.G = schedule("G");
    p.validate(m);
    return p;
}

inline MortalityTable mortality_from_csv(std::istream& in) {
    MortalityTable t;
    std::string line;
    if (!std::getline(in, line)) throw InputError("mortality: empty file");
    if (line.rfind("age,qx", 0) != 0)
        throw InputError("mortality: expected header 'age,qx'");
    bool first = true;
    int prev_age = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string age_s, q_s;
        if (!std::getline(ss, age_s, ',') || !std::getline(ss, q_s, ','))
            throw InputError("mortality: bad row '" + line + "'");
        int age = std::stoi(age_s);
        double q = std::stod(q_s);
        if (first) {
            t.first_age = age;
            first = false;
        } else if (age != prev_age + 1) {
            throw InputError("mortality: ages must be consecutive");
        }
        prev_age = age;
        t.q.push_back(q);
    }
    t.validate();
    return t;
}

// Panel CSV: date, P_1..P_n, d_1..d_n, r, psi_k_1.., psi_y_1.. in levels;
// logs are taken on ingestion (r as log(1+r)). Row 0 is the initial
// observation; its psi entries are ignored.
inline PanelData panel_from_csv(std::istream& in, int n, int l_k, int l_y) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("panel: empty file");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> row;
        bool first = true;
        while (std::getline(ss, cell, ',')) {
            if (first) {
                first = false;  // date column, unused in the math
                continue;
            }
            row.push_back(std::stod(cell));
        }
        if (int(row.size()) != 2 * n + 1 + l_k + l_y)
            throw InputError("panel: row has wrong column count");
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) throw InputError("panel: need at least two rows");
    const int T = int(rows.size()) - 1;
    PanelData d;
    d.logP.resize(T + 1, n);
    d.logd.resize(T + 1, n);
    d.logr.resize(T + 1);
    d.psi_k.resize(T, l_k);
    d.psi_y.resize(T, l_y);
    for (int t = 0; t <= T; ++t) {
        const auto& row = rows[size_t(t)];
        for (int a = 0; a < n; ++a) {
            if (row[size_t(a)] <= 0.0 || row[size_t(n + a)] <= 0.0)
                throw InputError("panel: prices and dividends must be positive");
            d.logP(t, a) = std::log(row[size_t(a)]);
            d.logd(t, a) = std::log(row[size_t(n + a)]);
        }
        d.logr(t) = std::log1p(row[size_t(2 * n)]);
        if (t >= 1) {
            for (int i = 0; i < l_k; ++i) d.psi_k(t - 1, i) = row[size_t(2 * n + 1 + i)];
            for (int i = 0; i < l_y; ++i) d.psi_y(t - 1, i) = row[size_t(2 * n + 1 + l_k + i)];
        }
    }
    d.validate();
    return d;
}

inline void panel_to_csv(std::ostream& out, const PanelData& d,
                         const std::string& manifest_comment = "") {
    const int n = d.n();
    if (!manifest_comment.empty()) out << "# " << manifest_comment << "\n";
    out << "date";
    for (int a = 1; a <= n; ++a) out << ",P_" << a;
    for (int a = 1; a <= n; ++a) out << ",d_" << a;
    out << ",r";
    for (int i = 1; i <= d.l_k(); ++i) out << ",psi_k_" << i;
    for (int i = 1; i <= d.l_y(); ++i) out << ",psi_y_" << i;
    out << "\n";
    for (int t = 0; t <= d.T(); ++t) {
        out << t;
        for (int a = 0; a < n; ++a) out << "," << fmt17(std::exp(d.logP(t, a)));
        for (int a = 0; a < n; ++a) out << "," << fmt17(std::exp(d.logd(t, a)));
        out << "," << fmt17(std::expm1(d.logr(t)));
        int ts = std::max(t, 1);  // row 0 echoes the first period's exogenous values
        for (int i = 0; i < d.l_k(); ++i) out << "," << fmt17(d.psi_k(ts - 1, i));
        for (int i = 0; i < d.l_y(); ++i) out << "," << fmt17(d.psi_y(ts - 1, i));
        out << "\n";
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw InputError(path + ": " + e.what());
    }
    return j;
}

// Serialize with deterministic layout and 17-digit doubles.
inline std::string dump_deterministic(const json& j) {
    std::ostringstream out;
    std::function<void(const json&, int)> emit = [&](const json& v, int indent) {
        std::string pad(size_t(indent), ' ');
        std::string pad2(size_t(indent + 2), ' ');
        if (v.is_object()) {
            out << "{\n";
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (!first) out << ",\n";
                first = false;
                out << pad2 << '"' << it.key() << "\": ";
                emit(it.value(), indent + 2);
            }
            out << "\n" << pad << "}";
        } else if (v.is_array()) {
            out << "[";
            for (size_t i = 0; i < v.size(); ++i) {
                if (i) out << ", ";
                emit(v[i], indent + 2);
            }
            out << "]";
        } else if (v.is_number_float()) {
            out << fmt17(v.get<double>());
        } else {
            out << v.dump();
        }
    };
    emit(j, 0);
    out << "\n";
    return out.str();
}

}  // namespace ggm
