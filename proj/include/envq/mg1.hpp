#pragma once

#include "envq/env_core.hpp"
#include "envq/numerics.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace envq {

// Service request distribution. Times in the same unit as 1/lambda.
struct ServiceLaw {
    enum class Kind { Deterministic, Exponential, Erlang, PhaseMixture };
    Kind kind = Kind::Exponential;
    double value = 1.0;          // duration d, or the phase rate
    std::size_t phases = 1;      // Erlang k
    std::vector<double> weights; // PhaseMixture b(1..L)

    static ServiceLaw deterministic(double d) { return check({Kind::Deterministic, d, 1, {}}); }
    static ServiceLaw exponential(double rate) { return check({Kind::Exponential, rate, 1, {}}); }
    static ServiceLaw erlang(std::size_t k, double rate) { return check({Kind::Erlang, rate, k, {}}); }
    static ServiceLaw phase_mixture(std::vector<double> b, double beta) {
        return check({Kind::PhaseMixture, beta, b.size(), std::move(b)});
    }

    double mean() const {
        switch (kind) {
        case Kind::Deterministic: return value;
        case Kind::Exponential: return 1.0 / value;
        case Kind::Erlang: return static_cast<double>(phases) / value;
        case Kind::PhaseMixture: {
            double m = 0.0;
            for (std::size_t l = 0; l < weights.size(); ++l) m += weights[l] * static_cast<double>(l + 1);
            return m / value;
        }
        }
        return 0.0;
    }

private:
    static ServiceLaw check(ServiceLaw s) {
        if (!(s.value > 0.0) || !std::isfinite(s.value)) throw InvalidModel("service law parameter must be positive");
        if (s.kind == Kind::Erlang && s.phases == 0) throw InvalidModel("Erlang needs at least one phase");
        if (s.kind == Kind::PhaseMixture) {
            if (s.weights.empty()) throw InvalidModel("phase mixture needs weights");
            double sum = 0.0;
            for (double b : s.weights) {
                if (b < 0.0) throw InvalidModel("phase weights must be nonnegative");
                sum += b;
            }
            if (std::abs(sum - 1.0) > EPS_STOCH) throw InvalidModel("phase weights must sum to 1");
        }
        return s;
    }
};

namespace detail {

// log of C(n+k-1, n) p^k q^n
inline double log_negbin(std::size_t n, std::size_t k, double p) {
    const double dn = static_cast<double>(n), dk = static_cast<double>(k);
    return std::lgamma(dn + dk) - std::lgamma(dn + 1.0) - std::lgamma(dk) + dk * std::log(p) + dn * std::log1p(-p);
}

} // namespace detail

// P(n arrivals of a Poisson(lambda) stream during one service).
inline double poisson_mix(const ServiceLaw& law, double lambda, std::size_t n) {
    const double dn = static_cast<double>(n);
    switch (law.kind) {
    case ServiceLaw::Kind::Deterministic: {
        const double a = lambda * law.value;
        if (n == 0) return std::exp(-a);
        return std::exp(-a + dn * std::log(a) - std::lgamma(dn + 1.0));
    }
    case ServiceLaw::Kind::Exponential:
        return std::exp(detail::log_negbin(n, 1, law.value / (lambda + law.value)));
    case ServiceLaw::Kind::Erlang:
        return std::exp(detail::log_negbin(n, law.phases, law.value / (lambda + law.value)));
    case ServiceLaw::Kind::PhaseMixture: {
        const double p = law.value / (lambda + law.value);
        double s = 0.0;
        for (std::size_t l = 0; l < law.weights.size(); ++l)
            if (law.weights[l] > 0.0) s += law.weights[l] * std::exp(detail::log_negbin(n, l + 1, p));
        return s;
    }
    }
    return 0.0;
}

// Rows p~(i,n) of the upper-Hessenberg level chain; row i >= rows.size() repeats the last.
struct HessenbergKernel {
    std::vector<std::vector<double>> rows; // rows[i-1][n]
    std::vector<std::vector<double>> tails; // tails[i-1][n] = sum_{j>=n} p~(i,j)
    double lambda = 0.0;
    double tail_mean = 0.0; // mean service of the repeating row

    // laws[i-1] is the request law for a service starting at level i.
    static HessenbergKernel from_laws(const std::vector<ServiceLaw>& laws, double lambda, double tol = 1e-14) {
        if (laws.empty()) throw InvalidModel("kernel needs at least one service law");
        HessenbergKernel k;
        k.lambda = lambda;
        k.tail_mean = laws.back().mean();
        for (const auto& law : laws) {
            std::vector<double> row;
            double acc = 0.0;
            for (std::size_t n = 0; 1.0 - acc >= tol; ++n) {
                if (n > 1000000) throw Error("kernel row does not converge");
                row.push_back(poisson_mix(law, lambda, n));
                acc += row.back();
                // Past the mode a negligible term means the rest is negligible too.
                if (n > lambda * law.mean() && row.back() < 1e-300) break;
            }
            std::vector<double> tail(row.size() + 1, 0.0);
            for (std::size_t n = row.size(); n-- > 0;) tail[n] = tail[n + 1] + row[n];
            k.rows.push_back(std::move(row));
            k.tails.push_back(std::move(tail));
        }
        return k;
    }

    static HessenbergKernel from_law(const ServiceLaw& law, double lambda) { return from_laws({law}, lambda); }

    double load() const { return lambda * tail_mean; }

    double p(std::size_t i, std::size_t n) const {
        const auto& r = rows[std::min(i, rows.size()) - 1];
        return n < r.size() ? r[n] : 0.0;
    }
    double tail(std::size_t i, std::size_t n) const {
        const auto& t = tails[std::min(i, tails.size()) - 1];
        return n < t.size() ? t[n] : 0.0;
    }
    // Transition probability of the level chain from level a to level b.
    double transition(std::size_t a, std::size_t b) const {
        if (a == 0) return p(1, b);
        if (b + 1 < a) return 0.0;
        return p(a, b + 1 - a);
    }
};

struct LevelLaw {
    std::vector<double> xi;  // normalized over 0..truncation
    std::size_t truncation = 0;

    double operator()(std::size_t n) const { return n < xi.size() ? xi[n] : 0.0; }
};

// Stationary law of the level chain. Each xi(n+1) comes from the balance of
// probability flow across the cut between n and n+1, which has no subtractions.
inline LevelLaw hessenberg_stationary(const HessenbergKernel& k, std::size_t max_levels = 200000) {
    if (!(k.load() < 1.0)) {
        std::ostringstream os;
        os << "level chain not ergodic: load " << k.load() << " >= 1";
        throw NotErgodic(os.str());
    }
    std::vector<double> x{1.0};
    double sum = 1.0;
    for (std::size_t n = 0;; ++n) {
        double up = x[0] * k.tail(1, n + 1);
        for (std::size_t i = 1; i <= n; ++i) up += x[i] * k.tail(i, n + 2 - i);
        const double down = k.p(n + 1, 0);
        const double next = up / down;
        x.push_back(next);
        sum += next;
        const double ratio = x[n] > 0.0 ? next / x[n] : 0.0;
        const bool small = next == 0.0 || (ratio < 1.0 && next * ratio / (1.0 - ratio) < 1e-15 * sum);
        if (small && n >= 2) break;
        if (x.size() > max_levels) throw Error("level recursion did not settle");
    }
    LevelLaw out;
    out.truncation = x.size() - 1;
    double total = std::accumulate(x.begin(), x.end(), 0.0);
    for (double& v : x) v /= total;
    out.xi = std::move(x);
    return out;
}

// M/D/1 with deterministic service 1/mu.
inline LevelLaw md1_stationary(double lambda, double mu) {
    if (!(lambda / mu < 1.0)) throw NotErgodic("M/D/1 needs lambda/mu < 1");
    return hessenberg_stationary(HessenbergKernel::from_law(ServiceLaw::deterministic(1.0 / mu), lambda));
}

// The M/D/1 queue with a (1,2) lost-sales inventory. Stock order 2,1,0.
struct CounterexampleResult {
    double ratio_level0 = 0.0;
    double ratio_level1 = 0.0;
    bool product_form_refuted = false;
};

inline CounterexampleResult md1_inventory_counterexample(double lambda, double mu, double nu) {
    if (!(lambda / mu < 1.0)) throw NotErgodic("counterexample needs lambda/mu < 1");
    if (!(nu > 0.0)) throw InvalidModel("counterexample needs nu > 0");
    const double rho = lambda / mu;
    const double a = std::exp(-(lambda + nu) / mu);
    const double f = lambda / (nu + lambda);
    const double e = std::exp(rho);
    CounterexampleResult r;
    r.ratio_level0 = a * (f + e - 1.0);
    r.ratio_level1 = a * (f * rho / (e - 1.0) + rho + e * (e - rho - 1.0) / (e - 1.0));
    r.product_form_refuted = std::abs(r.ratio_level0 - r.ratio_level1) > 1e-6;
    return r;
}

// Block factors of the counterexample: A^(n) = p~(n) A_bar, B^(n) = p~(n) B_bar.
inline Matrix counterexample_a_bar(double mu, double nu) {
    const double s = std::exp(-nu / mu);
    Matrix A(3, 3);
    A << 0, 1, 0, 0, 1 - s, s, 0, 1, 0;
    return A;
}

inline Matrix counterexample_b_bar(double lambda, double mu, double nu) {
    const double s = lambda / (nu + lambda) * std::exp(-nu / mu);
    Matrix B(3, 3);
    B << 0, 1, 0, 0, 1 - s, s, 0, 1, 0;
    return B;
}

// Transition matrix of the counterexample chain on levels 0..cap; jumps past the
// cap are folded into it.
inline Matrix counterexample_chain(double lambda, double mu, double nu, std::size_t cap) {
    const auto k = HessenbergKernel::from_law(ServiceLaw::deterministic(1.0 / mu), lambda);
    const Matrix A = counterexample_a_bar(mu, nu), B = counterexample_b_bar(lambda, mu, nu);
    const auto L = static_cast<Eigen::Index>(cap + 1);
    Matrix P = Matrix::Zero(3 * L, 3 * L);
    for (std::size_t i = 0; i <= cap; ++i) {
        const Matrix& blk = i == 0 ? B : A;
        const std::size_t base = i == 0 ? 0 : i - 1;
        for (std::size_t j = base; j <= cap; ++j) {
            const std::size_t n = j - base;
            const double w = j == cap ? k.tail(1, n) : k.p(1, n);
            P.block(3 * static_cast<Eigen::Index>(i), 3 * static_cast<Eigen::Index>(j), 3, 3) = w * blk;
        }
    }
    return P;
}

// Stationary law of the truncated counterexample chain, as levels x stock(2,1,0).
inline Matrix counterexample_stationary(double lambda, double mu, double nu, std::size_t cap) {
    const RowVector x = stationary_of_stochastic(counterexample_chain(lambda, mu, nu, cap));
    Matrix pi(static_cast<Eigen::Index>(cap + 1), 3);
    for (Eigen::Index n = 0; n < pi.rows(); ++n)
        for (Eigen::Index s = 0; s < 3; ++s) pi(n, s) = x(3 * n + s);
    return pi;
}

// L1 distance from the closest rank-one matrix in the Frobenius sense.
inline double rank_one_residual(const Matrix& pi) {
    Eigen::JacobiSVD<Matrix> svd(pi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Matrix fit = svd.singularValues()(0) * svd.matrixU().col(0) * svd.matrixV().col(0).transpose();
    return (pi - fit).cwiseAbs().sum();
}

// H = (I_W - V)^{-1} I_W R for environments that do not move while serving.
inline Matrix h_matrix(const EnvironmentSpec& env) {
    const auto d = static_cast<Eigen::Index>(env.size());
    for (std::size_t k = 0; k < env.num_working(); ++k)
        for (std::size_t m = 0; m < env.size(); ++m)
            if (m != k && env.V()(k, m) != 0.0)
                throw ConstraintViolated("environment moves during service: v('" + env.label(k) + "','" + env.label(m) +
                                         "') != 0");
    for (std::size_t k = env.num_working(); k < env.size(); ++k)
        if (!(std::abs(env.V()(k, k)) > 0.0))
            throw ConstraintViolated("blocking state '" + env.label(k) + "' is absorbing: v(k,k) = 0");
    const Matrix IW = i_w(env);
    const Matrix G = inverse(Matrix(IW - env.V())) * IW;
    if ((G * G - G).cwiseAbs().maxCoeff() > EPS_RES) throw Disagreement("(I_W - V)^{-1} I_W is not idempotent");
    Matrix H = G * env.R();
    const double row_err = (H.rowwise().sum() - Vector::Ones(d)).cwiseAbs().maxCoeff();
    if (row_err > EPS_STOCH) throw Disagreement("H is not stochastic");
    return H;
}

struct Mg1Solution {
    LevelLaw xi_hat;
    RowVector theta_hat;
    Matrix H;
    double residual = 0.0; // L1 residual of pi_hat P = pi_hat on the truncated chain

    double pi_hat(std::size_t n, std::size_t k) const { return xi_hat(n) * theta_hat(static_cast<Eigen::Index>(k)); }
};

// L1 residual of (xi (x) theta) P - xi (x) theta for P = P~ (x) H on levels
// below the truncation (columns there only draw on rows inside it).
inline double tensor_residual(const HessenbergKernel& k, const LevelLaw& xi, const Matrix& H, const RowVector& theta) {
    const RowVector th = theta * H;
    const std::size_t L = xi.truncation;
    double res = 0.0;
    for (std::size_t n = 0; n < L; ++n) {
        double mass = 0.0;
        for (std::size_t i = 0; i <= n + 1; ++i) mass += xi(i) * k.transition(i, n);
        res += (mass * th - xi(n) * theta).cwiseAbs().sum();
    }
    return res;
}

inline Mg1Solution mg1_product_form(const HessenbergKernel& kernel, const EnvironmentSpec& env) {
    Mg1Solution s;
    s.H = h_matrix(env);
    s.xi_hat = hessenberg_stationary(kernel);
    s.theta_hat = stationary_of_stochastic(s.H);
    s.residual = tensor_residual(kernel, s.xi_hat, s.H, s.theta_hat);
    if (s.residual > 1e-8) {
        std::ostringstream os;
        os << "tensor-product residual " << s.residual << " exceeds 1e-8";
        throw Disagreement(os.str());
    }
    return s;
}

} // namespace envq
