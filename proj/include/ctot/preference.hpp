#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace ctot {

enum class ModelKind { linear, btl, matrix };

/// Simulated ground truth for pairwise comparisons: a ranking (via utilities)
/// and a win-probability matrix with p(i,j) + p(j,i) = 1 and p(i,i) = 1/2.
class PreferenceModel {
public:
    /// Builds from an explicit matrix. Only the entries above the diagonal are
    /// read; the lower triangle is filled as the exact complement.
    static PreferenceModel from_matrix(const std::vector<std::vector<double>>& p, double gamma = 1.0) {
        const auto n = p.size();
        for (const auto& row : p)
            if (row.size() != n) throw std::invalid_argument("preference matrix must be square");
        PreferenceModel m(n, ModelKind::matrix, gamma);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double v = p[i][j];
                if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                    throw std::invalid_argument("preference matrix entries must lie in [0,1]");
                m.set_pair(i, j, v);
            }
        // Ranking for a bare matrix: Borda score (row sum of win probabilities).
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < n; ++j) s += m.p(i, j);
            m.utilities_[i] = s;
        }
        return m;
    }

    std::size_t size() const noexcept { return utilities_.size(); }
    ModelKind kind() const noexcept { return kind_; }
    double gamma() const noexcept { return gamma_; }
    double slope() const noexcept { return slope_; }
    std::span<const double> utilities() const noexcept { return utilities_; }
    std::span<const double> weights() const noexcept { return weights_; }

    double p(std::size_t i, std::size_t j) const { return p_.at(i * size() + j); }
    double advantage(std::size_t i, std::size_t j) const { return p(i, j) - 0.5; }

    /// Index of the best item (highest utility; lowest index on ties).
    std::size_t best() const {
        if (utilities_.empty()) throw std::logic_error("empty preference model");
        return static_cast<std::size_t>(std::max_element(utilities_.begin(), utilities_.end()) - utilities_.begin());
    }

    /// w is an epsilon-maximum iff p(best, w) <= 1/2 + eps.
    bool is_epsilon_maximum(std::size_t w, double eps) const { return advantage(best(), w) <= eps + 1e-12; }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        switch (kind_) {
        case ModelKind::linear:
            j["kind"] = "linear";
            j["utilities"] = utilities_;
            j["slope"] = slope_;
            break;
        case ModelKind::btl:
            j["kind"] = "btl";
            j["weights"] = weights_;
            break;
        case ModelKind::matrix: {
            j["kind"] = "matrix";
            std::vector<std::vector<double>> rows(size(), std::vector<double>(size()));
            for (std::size_t i = 0; i < size(); ++i)
                for (std::size_t k = 0; k < size(); ++k) rows[i][k] = p(i, k);
            j["p"] = rows;
            break;
        }
        }
        j["gamma"] = gamma_;
        return j;
    }

    static PreferenceModel from_json(const nlohmann::json& j);

private:
    friend PreferenceModel build_linear_model(std::vector<double> utilities, double slope);
    friend PreferenceModel build_btl_model(std::vector<double> weights);

    PreferenceModel(std::size_t n, ModelKind kind, double gamma)
        : kind_(kind), gamma_(gamma), utilities_(n, 0.0), p_(n * n, 0.5) {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be positive");
    }

    // Stores the larger of (v, 1-v) directly so the complement is exact.
    void set_pair(std::size_t i, std::size_t j, double v) {
        const auto n = size();
        if (v >= 0.5) {
            p_[i * n + j] = v;
            p_[j * n + i] = 1.0 - v;
        } else {
            const double w = 1.0 - v;
            p_[j * n + i] = w;
            p_[i * n + j] = 1.0 - w;
        }
    }

    ModelKind kind_;
    double gamma_;
    double slope_ = 0.0;
    std::vector<double> utilities_;
    std::vector<double> weights_;
    std::vector<double> p_;
};

/// p(i,j) = clamp(1/2 + slope * (u_i - u_j), 0, 1), gamma = 1.
inline PreferenceModel build_linear_model(std::vector<double> utilities, double slope) {
    for (double u : utilities)
        if (!std::isfinite(u)) throw std::invalid_argument("linear model: non-finite utility");
    if (!(slope > 0.0) || !std::isfinite(slope)) throw std::invalid_argument("linear model: slope must be positive");
    PreferenceModel m(utilities.size(), ModelKind::linear, 1.0);
    m.slope_ = slope;
    const auto n = utilities.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double gap = utilities[i] >= utilities[j] ? utilities[i] - utilities[j] : utilities[j] - utilities[i];
            const double hi = std::min(1.0, 0.5 + slope * gap);
            if (utilities[i] >= utilities[j])
                m.set_pair(i, j, hi);
            else
                m.set_pair(j, i, hi);
        }
    m.utilities_ = std::move(utilities);
    return m;
}

/// Bradley-Terry-Luce: p(i,j) = w_i / (w_i + w_j).
inline PreferenceModel build_btl_model(std::vector<double> weights) {
    for (double w : weights)
        if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("btl model: weights must be positive");
    PreferenceModel m(weights.size(), ModelKind::btl, 1.0);
    const auto n = weights.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) m.set_pair(i, j, weights[i] / (weights[i] + weights[j]));
    m.utilities_.resize(n);
    std::transform(weights.begin(), weights.end(), m.utilities_.begin(), [](double w) { return std::log(w); });
    m.weights_ = std::move(weights);
    return m;
}

inline PreferenceModel PreferenceModel::from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    PreferenceModel m = [&] {
        if (kind == "linear") return build_linear_model(j.at("utilities").get<std::vector<double>>(), j.value("slope", 0.05));
        if (kind == "btl") return build_btl_model(j.at("weights").get<std::vector<double>>());
        if (kind == "matrix") return from_matrix(j.at("p").get<std::vector<std::vector<double>>>());
        throw std::invalid_argument("unknown preference model kind: " + kind);
    }();
    if (j.contains("gamma")) {
        const double g = j.at("gamma").get<double>();
        if (!(g > 0.0)) throw std::invalid_argument("gamma must be positive");
        m.gamma_ = g;
    }
    return m;
}

struct TransitivityWitness {
    std::size_t i, j, k; // r(i) better than r(j) better than r(k)
    bool sst_violated;
    bool triangle_violated;
};

struct TransitivityReport {
    bool sst_gamma_ok = true;
    bool triangle_ok = true;
    std::vector<TransitivityWitness> witnesses; // truncated at max_witnesses
};

/// Exhaustive scan over strictly ranked triples (i above j above k):
///   relaxed SST:   adv(i,k) >= max(adv(i,j), adv(j,k)) / gamma
///   triangle:      adv(i,k) <= adv(i,j) + adv(j,k)
inline TransitivityReport check_transitivity(const PreferenceModel& model, std::size_t max_witnesses = 64) {
    constexpr double tol = 1e-12;
    const auto n = model.size();
    if (n > 1000) throw std::invalid_argument("check_transitivity supports at most 1000 items");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto u = model.utilities();
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return u[a] > u[b]; });

    TransitivityReport report;
    const double inv_gamma = 1.0 / model.gamma();
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            const auto i = order[a], j = order[b];
            if (!(u[i] > u[j])) continue;
            const double ij = model.advantage(i, j);
            for (std::size_t c = b + 1; c < n; ++c) {
                const auto k = order[c];
                if (!(u[j] > u[k])) continue;
                const double jk = model.advantage(j, k);
                const double ik = model.advantage(i, k);
                const bool sst_bad = ik + tol < inv_gamma * std::max(ij, jk);
                const bool tri_bad = ik > ij + jk + tol;
                if (sst_bad) report.sst_gamma_ok = false;
                if (tri_bad) report.triangle_ok = false;
                if ((sst_bad || tri_bad) && report.witnesses.size() < max_witnesses)
                    report.witnesses.push_back({i, j, k, sst_bad, tri_bad});
            }
        }
    return report;
}

} // namespace ctot
