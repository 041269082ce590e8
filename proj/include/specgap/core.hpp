#ifndef SPECGAP_CORE_HPP
#define SPECGAP_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

// Finite-state representations of weighted function/measure spaces.
//
// Functions live in B(phi) with norm  ||f|| = max_i |f(i)|/phi(i),
// measures in M(phi) with norm       ||mu|| = mu_+(phi) + mu_-(phi).
// The two norms are dual to each other.

namespace specgap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Ordered, uniquely labelled finite state space.
class StateSpace {
public:
    explicit StateSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
        if (labels_.empty()) throw std::invalid_argument("StateSpace: empty state space");
        std::unordered_set<std::string> seen;
        for (const auto& l : labels_) {
            if (!seen.insert(l).second)
                throw std::invalid_argument("StateSpace: duplicate label '" + l + "'");
        }
    }

    static StateSpace indexed(Index n) {
        if (n <= 0) throw std::invalid_argument("StateSpace: size must be positive");
        std::vector<std::string> labels;
        labels.reserve(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) labels.push_back(std::to_string(i));
        return StateSpace(std::move(labels));
    }

    Index size() const { return static_cast<Index>(labels_.size()); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& label(Index i) const { return labels_.at(static_cast<std::size_t>(i)); }

private:
    std::vector<std::string> labels_;
};

namespace detail {

inline void require_same_size(const Vector& a, const Vector& b, const char* where) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(where) + ": dimension mismatch");
}

inline void require_positive(const Vector& phi, const char* where) {
    for (Index i = 0; i < phi.size(); ++i) {
        if (!(phi[i] > 0.0) || !std::isfinite(phi[i]))
            throw std::invalid_argument(std::string(where) +
                                        ": weight must be strictly positive and finite");
    }
}

inline void require_finite(const Vector& v, const char* where) {
    for (Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw std::invalid_argument(std::string(where) + ": non-finite entry");
    }
}

}  // namespace detail

/// The pair (V, psi) of strictly positive weights with psi <= V entrywise.
struct WeightPair {
    Vector V;
    Vector psi;

    WeightPair(Vector V_in, Vector psi_in) : V(std::move(V_in)), psi(std::move(psi_in)) {
        detail::require_same_size(V, psi, "WeightPair");
        detail::require_positive(V, "WeightPair.V");
        detail::require_positive(psi, "WeightPair.psi");
        for (Index i = 0; i < V.size(); ++i) {
            if (psi[i] > V[i])
                throw std::invalid_argument("WeightPair: psi must not exceed V");
        }
    }

    Index size() const { return V.size(); }
};

/// Signed measure in Hahn-Jordan normal form: min(plus, minus) == 0 componentwise.
struct SignedMeasure {
    Vector plus;
    Vector minus;

    SignedMeasure(Vector plus_in, Vector minus_in)
        : plus(std::move(plus_in)), minus(std::move(minus_in)) {
        detail::require_same_size(plus, minus, "SignedMeasure");
        for (Index i = 0; i < plus.size(); ++i) {
            if (plus[i] < 0.0 || minus[i] < 0.0)
                throw std::invalid_argument("SignedMeasure: parts must be nonnegative");
            if (std::min(plus[i], minus[i]) != 0.0)
                throw std::invalid_argument("SignedMeasure: parts must be mutually singular");
        }
    }

    Index size() const { return plus.size(); }
    Vector net() const { return plus - minus; }
    double operator()(const Vector& f) const {
        detail::require_same_size(plus, f, "SignedMeasure::operator()");
        return plus.dot(f) - minus.dot(f);
    }
};

/// Hahn-Jordan decomposition of a raw density vector.
inline SignedMeasure hahn_jordan(const Vector& raw) {
    detail::require_finite(raw, "hahn_jordan");
    Vector plus = raw.cwiseMax(0.0);
    Vector minus = (-raw).cwiseMax(0.0);
    return SignedMeasure(std::move(plus), std::move(minus));
}

/// ||f||_{B(phi)} = max_i |f(i)| / phi(i).
inline double weighted_sup_norm(const Vector& f, const Vector& phi) {
    detail::require_same_size(f, phi, "weighted_sup_norm");
    detail::require_positive(phi, "weighted_sup_norm");
    return (f.cwiseQuotient(phi)).cwiseAbs().maxCoeff();
}

/// ||mu||_{M(phi)} = mu_+(phi) + mu_-(phi).
inline double weighted_tv_norm(const SignedMeasure& mu, const Vector& phi) {
    detail::require_same_size(mu.plus, phi, "weighted_tv_norm");
    return (mu.plus + mu.minus).dot(phi);
}

/// Convenience overload for a raw density (normalised internally).
inline double weighted_tv_norm(const Vector& raw, const Vector& phi) {
    detail::require_same_size(raw, phi, "weighted_tv_norm");
    return raw.cwiseAbs().dot(phi);
}

}  // namespace specgap

#endif  // SPECGAP_CORE_HPP
