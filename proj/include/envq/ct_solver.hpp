#pragma once

#include "envq/env_core.hpp"
#include "envq/numerics.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace envq {

enum class Verdict { ProductForm, NotProductForm, NotErgodic };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::ProductForm: return "ProductForm";
    case Verdict::NotProductForm: return "NotProductForm";
    case Verdict::NotErgodic: return "NotErgodic";
    }
    return "?";
}

// xi(n) = C^{-1} prod_{i<n} lambda(i)/mu(i+1). Weights are stored up to the
// tail index; beyond it they decay geometrically with ratio rho_tail.
struct ProductFormSolution {
    Verdict verdict = Verdict::NotProductForm;
    std::string reason;
    RowVector theta;
    double C = 0.0;
    std::vector<double> weights; // unnormalized xi for n = 0..weights.size()-1
    double rho_tail = 0.0;
    std::optional<std::size_t> capacity;

    bool ok() const { return verdict == Verdict::ProductForm; }

    double xi(std::size_t n) const {
        if (capacity && n > *capacity + 1) return 0.0;
        if (n < weights.size()) return weights[n] / C;
        return weights.back() * std::pow(rho_tail, static_cast<double>(n - weights.size() + 1)) / C;
    }
    double pi(std::size_t n, std::size_t k) const { return xi(n) * theta(static_cast<Eigen::Index>(k)); }

    // Probability of levels > n.
    double tail_mass(std::size_t n) const {
        double head = 0.0;
        for (std::size_t m = 0; m <= n; ++m) head += xi(m);
        return std::max(0.0, 1.0 - head);
    }
};

// Q~(n) = lambda(n) I_W (R - I) + V.
inline Matrix q_tilde(const ModelSpec& model, std::size_t n) {
    const auto& env = model.env;
    const auto d = static_cast<Eigen::Index>(env.size());
    Matrix Q = model.queue.arrival(n) * i_w(env) * (env.R() - Matrix::Identity(d, d)) + env.V();
    return Q;
}

namespace detail {

// Level weights prod_{i<n} lambda(i)/mu(i+1) for n = 0..last.
inline std::vector<double> level_weights(const QueueSpec& q, std::size_t last) {
    std::vector<double> w{1.0};
    for (std::size_t n = 1; n <= last; ++n) w.push_back(w.back() * q.arrival(n - 1) / q.service(n));
    return w;
}

inline bool strictly_positive(const RowVector& x, std::size_t& where) {
    for (Eigen::Index k = 0; k < x.size(); ++k)
        if (!(x(k) > 0.0)) {
            where = static_cast<std::size_t>(k);
            return false;
        }
    return true;
}

} // namespace detail

// Infinite waiting room. theta solves theta Q~(0) = 0 and must annihilate every
// Q~(n). Since lambda(n) is constant from n_tail on, checking n <= n_tail is
// exhaustive.
inline ProductFormSolution solve_product_form(const ModelSpec& model, double tol = EPS_PRODUCT_FORM) {
    ProductFormSolution sol;
    const auto& q = model.queue;
    try {
        sol.theta = stationary_of_generator(q_tilde(model, 0));
    } catch (const MultipleClosedClasses& e) {
        sol.reason = std::string("theta Q~(0) = 0 has no unique solution: ") + e.what();
        return sol;
    }
    std::size_t where = 0;
    if (!detail::strictly_positive(sol.theta, where)) {
        sol.reason = "theta not strictly positive at state '" + model.env.label(where) + "'";
        return sol;
    }
    for (std::size_t n = 1; n <= q.n_tail(); ++n) {
        const double res = max_abs(sol.theta * q_tilde(model, n));
        if (res > tol) {
            std::ostringstream os;
            os << "theta Q~(" << n << ") != 0 (residual " << res << ")";
            sol.reason = os.str();
            return sol;
        }
    }
    sol.rho_tail = q.tail_load();
    if (sol.rho_tail >= 1.0) {
        sol.verdict = Verdict::NotErgodic;
        std::ostringstream os;
        os << "tail load lambda/mu = " << sol.rho_tail << " >= 1";
        sol.reason = os.str();
        return sol;
    }
    sol.weights = detail::level_weights(q, q.n_tail());
    double C = 0.0;
    for (double w : sol.weights) C += w;
    C += sol.weights.back() * sol.rho_tail / (1.0 - sol.rho_tail);
    sol.C = C;
    sol.verdict = Verdict::ProductForm;
    return sol;
}

// Finite waiting room N: levels 0..N+1, product form iff eta V = 0 has a strictly
// positive solution, K_W is closed under R and eta^(W) R^(W) = eta^(W).
inline ProductFormSolution solve_product_form_finite(const ModelSpec& model, double tol = EPS_PRODUCT_FORM) {
    ProductFormSolution sol;
    if (!model.queue.capacity) throw InvalidModel("solve_product_form_finite needs a finite capacity");
    const std::size_t N = *model.queue.capacity;
    const auto& env = model.env;
    sol.capacity = N;
    std::vector<std::string> failed;
    RowVector eta;
    try {
        eta = stationary_of_generator(env.V());
        std::size_t where = 0;
        if (!detail::strictly_positive(eta, where))
            failed.push_back("eta V = 0 has no strictly positive solution (zero at '" + env.label(where) + "')");
    } catch (const MultipleClosedClasses& e) {
        failed.push_back(std::string("eta V = 0: ") + e.what());
    }
    const auto w = static_cast<Eigen::Index>(env.num_working());
    const auto d = static_cast<Eigen::Index>(env.size());
    for (Eigen::Index k = 0; k < w; ++k)
        if (env.R().row(k).tail(d - w).sum() > EPS_STOCH) {
            failed.push_back("K_W not closed under R: row '" + env.label(static_cast<std::size_t>(k)) +
                             "' leaks into K_B");
            break;
        }
    if (failed.empty()) {
        const RowVector etaW = eta.head(w);
        const double res = max_abs(etaW * env.R().topLeftCorner(w, w) - etaW);
        if (res > tol) {
            std::ostringstream os;
            os << "eta^(W) R^(W) != eta^(W) (residual " << res << ")";
            failed.push_back(os.str());
        }
    }
    if (!failed.empty()) {
        for (const auto& f : failed) sol.reason += (sol.reason.empty() ? "" : "; ") + f;
        return sol;
    }
    sol.theta = eta;
    sol.weights = detail::level_weights(model.queue, N + 1);
    sol.C = 0.0;
    for (double x : sol.weights) sol.C += x;
    sol.rho_tail = 0.0;
    sol.verdict = Verdict::ProductForm;
    return sol;
}

// Generator on {0..cap} x K, arrivals dropped at the cap.
struct TruncatedCTMC {
    std::size_t cap = 0;
    std::size_t env_size = 0;
    Matrix Q;

    std::size_t index(std::size_t n, std::size_t k) const { return n * env_size + k; }

    static TruncatedCTMC build(const ModelSpec& model, std::size_t cap) {
        TruncatedCTMC t;
        t.cap = cap;
        const auto& env = model.env;
        t.env_size = env.size();
        const std::size_t K = env.size();
        const std::size_t S = (cap + 1) * K;
        t.Q = Matrix::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
        for (std::size_t n = 0; n <= cap; ++n)
            for (std::size_t k = 0; k < K; ++k) {
                const auto row = static_cast<Eigen::Index>(t.index(n, k));
                for (std::size_t m = 0; m < K; ++m)
                    if (m != k) t.Q(row, static_cast<Eigen::Index>(t.index(n, m))) += env.V()(k, m);
                if (!env.is_working(k)) continue;
                if (n < cap) t.Q(row, static_cast<Eigen::Index>(t.index(n + 1, k))) += model.queue.arrival(n);
                if (n > 0)
                    for (std::size_t m = 0; m < K; ++m)
                        t.Q(row, static_cast<Eigen::Index>(t.index(n - 1, m))) += model.queue.service(n) * env.R()(k, m);
            }
        for (Eigen::Index i = 0; i < t.Q.rows(); ++i) {
            t.Q(i, i) = 0.0;
            t.Q(i, i) = -t.Q.row(i).sum();
        }
        return t;
    }
};

// Stationary law of the truncated chain as a (cap+1) x |K| matrix.
inline Matrix direct_solve_truncated(const ModelSpec& model, std::size_t cap) {
    const auto t = TruncatedCTMC::build(model, cap);
    const RowVector x = stationary_of_generator(t.Q);
    Matrix P(static_cast<Eigen::Index>(cap + 1), static_cast<Eigen::Index>(t.env_size));
    for (std::size_t n = 0; n <= cap; ++n)
        for (std::size_t k = 0; k < t.env_size; ++k)
            P(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) = x(static_cast<Eigen::Index>(t.index(n, k)));
    return P;
}

// Smallest cap with product-form tail mass below eps, at least 2 n_tail + 5.
inline std::size_t truncation_level(const ProductFormSolution& sol, std::size_t n_tail, double eps = 1e-9) {
    std::size_t cap = 2 * n_tail + 5;
    if (sol.capacity) return *sol.capacity + 1;
    while (sol.tail_mass(cap) >= eps) ++cap;
    return cap;
}

// Total variation between the product form and a truncated solution, the
// product form renormalized over the shared levels.
inline double total_variation(const ProductFormSolution& sol, const Matrix& direct) {
    double mass = 0.0;
    for (Eigen::Index n = 0; n < direct.rows(); ++n) mass += sol.xi(static_cast<std::size_t>(n));
    double tv = 0.0;
    for (Eigen::Index n = 0; n < direct.rows(); ++n)
        for (Eigen::Index k = 0; k < direct.cols(); ++k)
            tv += std::abs(sol.pi(static_cast<std::size_t>(n), static_cast<std::size_t>(k)) / mass - direct(n, k));
    return 0.5 * tv;
}

} // namespace envq
