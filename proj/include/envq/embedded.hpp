#pragma once

#include "envq/ct_solver.hpp"
#include "envq/env_core.hpp"
#include "envq/numerics.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace envq {

struct EmbeddedSolution {
    RowVector theta_hat;
    RowVector theta;                     // continuous-time environment law
    std::vector<std::size_t> L;          // one-step R-image of K_W
    std::vector<std::size_t> inessential; // K \ L; every level paired with these is inessential
    std::size_t period = 1;              // of the closed class of M^(0) R
    ProductFormSolution ct;              // level law xi is shared with continuous time

    double pi_hat(std::size_t n, std::size_t k) const { return ct.xi(n) * theta_hat(static_cast<Eigen::Index>(k)); }
};

namespace detail {

inline double constant_lambda(const ModelSpec& model) {
    if (!model.queue.constant_arrivals())
        throw InvalidModel("departure-epoch analysis needs a constant arrival rate");
    return model.queue.lambda.front();
}

// (c I_W - V)^{-1}, certified invertible first.
inline Matrix shifted_inverse(const EnvironmentSpec& env, double c) {
    const Matrix A = c * i_w(env) - env.V();
    const auto verdict = check_flow_invertible(A, env.working_mask());
    if (!verdict.certified()) throw Singular(std::string("c I_W - V not certified invertible: ") + verdict.reason);
    return inverse(A);
}

} // namespace detail

// W = lambda (lambda I_W - V)^{-1} I_W: environment law at the first arrival
// after a departure that leaves the system empty.
inline Matrix w_matrix(const ModelSpec& model) {
    const double lambda = detail::constant_lambda(model);
    return lambda * detail::shifted_inverse(model.env, lambda) * i_w(model.env);
}

// U^(i,n) for n = 0..n_max: probability of n arrivals during a service that
// starts at level i, with the environment state at its end.
inline std::vector<Matrix> u_matrices(const ModelSpec& model, std::size_t i, std::size_t n_max) {
    if (i < 1) throw InvalidModel("u_matrices: level i must be >= 1");
    const double lambda = detail::constant_lambda(model);
    const auto& q = model.queue;
    const Matrix IW = i_w(model.env);
    std::vector<Matrix> U;
    U.reserve(n_max + 1);
    U.push_back(detail::shifted_inverse(model.env, lambda + q.service(i)) * q.service(i) * IW);
    for (std::size_t n = 0; n < n_max; ++n) {
        const double mu_now = q.service(n + i);
        const double mu_next = q.service(n + 1 + i);
        U.push_back(U.back() * (lambda / mu_now) * mu_next * detail::shifted_inverse(model.env, lambda + mu_next) * IW);
    }
    return U;
}

// Grows n_max until every row has lost less than tol of its mass.
inline std::vector<Matrix> u_matrices_adaptive(const ModelSpec& model, std::size_t i, double tol = 1e-12,
                                               std::size_t limit = 100000) {
    const double lambda = detail::constant_lambda(model);
    const auto& q = model.queue;
    const Matrix IW = i_w(model.env);
    std::vector<Matrix> U{detail::shifted_inverse(model.env, lambda + q.service(i)) * q.service(i) * IW};
    Vector acc = U.back().rowwise().sum();
    for (std::size_t n = 0; (1.0 - acc.array()).maxCoeff() >= tol; ++n) {
        if (n >= limit) throw Error("u_matrices_adaptive: no convergence");
        const double mu_next = q.service(n + 1 + i);
        U.push_back(U.back() * (lambda / q.service(n + i)) * mu_next * detail::shifted_inverse(model.env, lambda + mu_next) * IW);
        acc += U.back().rowwise().sum();
    }
    return U;
}

// ||W U^(1,n) + sum_{i=1}^{n+1} (prod_{j<=i} lambda/mu(j)) U^(i,n-i+1) - (prod_{i<=n} lambda/mu(i)) M^(0)||_inf
inline double mn_identity_residual(const ModelSpec& model, std::size_t n) {
    const double lambda = detail::constant_lambda(model);
    const auto& q = model.queue;
    const Matrix W = w_matrix(model);
    Matrix lhs = W * u_matrices(model, 1, n).back();
    double w = 1.0;
    for (std::size_t i = 1; i <= n + 1; ++i) {
        w *= lambda / q.service(i);
        lhs += w * u_matrices(model, i, n - i + 1).back();
    }
    double rhs = 1.0;
    for (std::size_t i = 1; i <= n; ++i) rhs *= lambda / q.service(i);
    return (lhs - rhs * W).cwiseAbs().maxCoeff();
}

// M^(0) = lambda (lambda I_W - V)^{-1} I_W, checked against the level identity for n = 0..5.
inline Matrix m0_matrix(const ModelSpec& model) {
    Matrix M0 = w_matrix(model);
    for (std::size_t n = 0; n <= 5; ++n) {
        const double res = mn_identity_residual(model, n);
        if (res > 1e-9) {
            std::ostringstream os;
            os << "M^(n) identity fails at n = " << n << " (residual " << res << ")";
            throw Disagreement(os.str());
        }
    }
    return M0;
}

inline RowVector theta_hat_from_theta(const ModelSpec& model, const RowVector& theta) {
    RowVector x = theta * i_w(model.env) * model.env.R();
    return x / (theta * i_w(model.env)).sum();
}

// theta = theta_hat (I_W - V/lambda)^{-1}, normalized.
inline RowVector theta_from_theta_hat(const ModelSpec& model, const RowVector& theta_hat) {
    const double lambda = detail::constant_lambda(model);
    const auto& env = model.env;
    const Matrix A = i_w(env) - env.V() / lambda;
    RowVector x = solve_left(A, theta_hat);
    x /= x.sum();
    const Matrix Q = q_tilde(model, 0);
    const double res = max_abs(x * Q);
    if (res > EPS_RES * std::max(1.0, Q.cwiseAbs().maxCoeff())) {
        std::ostringstream os;
        os << "theta_from_theta_hat: result does not solve theta (lambda (R_W - I_W) + V) = 0 (residual " << res << ")";
        throw Disagreement(os.str());
    }
    return x;
}

inline EmbeddedSolution solve_embedded(const ModelSpec& model) {
    detail::constant_lambda(model);
    EmbeddedSolution out;
    out.ct = solve_product_form(model);
    if (out.ct.verdict == Verdict::NotErgodic) throw NotErgodic(out.ct.reason);
    if (!out.ct.ok()) throw ConstraintViolated("continuous-time model has no product form: " + out.ct.reason);
    out.theta = out.ct.theta;

    const Matrix P = m0_matrix(model) * model.env.R();
    const RowVector via_chain = stationary_of_stochastic(P);
    const RowVector via_transform = theta_hat_from_theta(model, out.theta);
    const double gap = max_abs(via_chain - via_transform);
    if (gap > EPS_RES) {
        std::ostringstream os;
        os << "theta_hat from M^(0)R and from theta disagree by " << gap;
        throw Disagreement(os.str());
    }
    out.theta_hat = via_transform;

    const auto& env = model.env;
    for (std::size_t k = 0; k < env.size(); ++k) {
        bool hit = false;
        for (std::size_t m = 0; m < env.num_working(); ++m)
            if (env.R()(m, k) > 0.0) hit = true;
        (hit ? out.L : out.inessential).push_back(k);
    }
    auto closed = closed_classes(FlowGraph::from_matrix(P, 1e-14));
    out.period = class_period(P, closed.front(), 1e-14);
    return out;
}

} // namespace envq
