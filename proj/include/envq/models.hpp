#pragma once

#include "envq/ct_solver.hpp"
#include "envq/env_core.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace envq {

// A model plus its closed-form environment law (internal state order).
struct BuiltModel {
    ModelSpec model;
    RowVector theta;
};

namespace detail {

// A single value means "constant"; otherwise index k must exist.
inline double rate_at(const std::vector<double>& v, std::size_t k) {
    if (v.empty()) throw InvalidModel("empty rate list");
    if (v.size() == 1) return v.front();
    if (k >= v.size()) throw InvalidModel("rate list too short for index " + std::to_string(k));
    return v[k];
}

inline std::vector<std::string> numbered(std::size_t from, std::size_t to) {
    std::vector<std::string> out;
    for (std::size_t k = from; k <= to; ++k) out.push_back(std::to_string(k));
    return out;
}

inline RowVector normalized_internal(const EnvironmentSpec& env, const std::vector<double>& declared) {
    RowVector x(static_cast<Eigen::Index>(declared.size()));
    for (std::size_t i = 0; i < declared.size(); ++i) x(static_cast<Eigen::Index>(i)) = declared[i];
    x = env.from_declared(x);
    return x / x.sum();
}

inline void require_positive(const std::vector<double>& v, const char* what, bool allow_zero = false) {
    for (double x : v)
        if (!(allow_zero ? x >= 0.0 : x > 0.0) || !std::isfinite(x))
            throw InvalidModel(std::string(what) + (allow_zero ? " must be nonnegative" : " must be positive"));
}

// prod_{i=1}^{k} (lambda + nu_i)/lambda
inline double lead_product(double lambda, const std::vector<double>& nu, std::size_t k) {
    double p = 1.0;
    for (std::size_t i = 1; i <= k; ++i) p *= (lambda + rate_at(nu, i)) / lambda;
    return p;
}

inline double binom(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

} // namespace detail

// (r,S) lost-sales inventory: stock 0..S, ordering at r, replenishment rate nu_k fills to S.
inline BuiltModel build_rs(std::size_t r, std::size_t S, double lambda, const std::vector<double>& mu,
                           const std::vector<double>& nu) {
    if (!(r < S)) throw InvalidModel("(r,S) needs 0 <= r < S");
    detail::require_positive(nu, "replenishment rates");
    const auto d = static_cast<Eigen::Index>(S + 1);
    Matrix V = Matrix::Zero(d, d), R = Matrix::Zero(d, d);
    R(0, 0) = 1.0;
    for (std::size_t k = 1; k <= S; ++k) R(k, k - 1) = 1.0;
    for (std::size_t k = 0; k <= r; ++k) {
        V(k, S) = detail::rate_at(nu, k);
        V(k, k) = -V(k, S);
    }
    BuiltModel b;
    b.model.name = "rs";
    b.model.queue = QueueSpec::make({lambda}, mu);
    b.model.env = EnvironmentSpec::make(detail::numbered(0, S), {"0"}, V, R);
    std::vector<double> th(S + 1);
    th[0] = lambda / detail::rate_at(nu, 0);
    for (std::size_t k = 1; k <= S; ++k) th[k] = detail::lead_product(lambda, nu, std::min(k - 1, r));
    b.theta = detail::normalized_internal(b.model.env, th);
    return b;
}

// (r,Q) lost-sales inventory: stock 0..r+Q, order of size Q arrives at rate nu_k.
inline BuiltModel build_rq(std::size_t r, std::size_t Q, double lambda, const std::vector<double>& mu,
                           const std::vector<double>& nu) {
    if (!(r < Q)) throw InvalidModel("(r,Q) needs 0 <= r < Q");
    detail::require_positive(nu, "replenishment rates");
    const std::size_t top = r + Q;
    const auto d = static_cast<Eigen::Index>(top + 1);
    Matrix V = Matrix::Zero(d, d), R = Matrix::Zero(d, d);
    R(0, 0) = 1.0;
    for (std::size_t k = 1; k <= top; ++k) R(k, k - 1) = 1.0;
    for (std::size_t k = 0; k <= r; ++k) {
        V(k, k + Q) = detail::rate_at(nu, k);
        V(k, k) = -V(k, k + Q);
    }
    BuiltModel b;
    b.model.name = "rq";
    b.model.queue = QueueSpec::make({lambda}, mu);
    b.model.env = EnvironmentSpec::make(detail::numbered(0, top), {"0"}, V, R);
    std::vector<double> th(top + 1);
    th[0] = lambda / detail::rate_at(nu, 0);
    const double full = detail::lead_product(lambda, nu, r);
    for (std::size_t k = 1; k <= Q; ++k) th[k] = detail::lead_product(lambda, nu, std::min(k - 1, r));
    for (std::size_t m = 1; m <= r; ++m) th[Q + m] = full - detail::lead_product(lambda, nu, m - 1);
    b.theta = detail::normalized_internal(b.model.env, th);
    return b;
}

// Lead time: mixture of Erlang(l, beta) with weights b(1..L).
struct PhaseLeadTimeSpec {
    double beta = 1.0;
    std::vector<double> b;
    std::size_t r = 0;
    std::size_t S = 1; // max stock for (r,S); order size Q for (r,Q)

    std::size_t phases() const { return b.size(); }
    double mean_lead_time() const {
        double m = 0.0;
        for (std::size_t l = 0; l < b.size(); ++l) m += b[l] * static_cast<double>(l + 1);
        return m / beta;
    }
    void check() const {
        if (!(beta > 0.0)) throw InvalidModel("phase rate must be positive");
        if (b.empty() || !(b.back() > 0.0)) throw InvalidModel("phase weights need b(L) > 0");
        double s = 0.0;
        for (double x : b) {
            if (x < 0.0) throw InvalidModel("phase weights must be nonnegative");
            s += x;
        }
        if (std::abs(s - 1.0) > EPS_STOCH) throw InvalidModel("phase weights must sum to 1");
    }
};

inline std::string phase_label(std::size_t j, std::size_t l) {
    return "(" + std::to_string(j) + "," + std::to_string(l) + ")";
}

namespace detail {

// Shared construction; top stock is S for (r,S) and r+Q for (r,Q).
inline ModelSpec phase_model(const PhaseLeadTimeSpec& spec, std::size_t top, bool fill_to_top, double lambda,
                             const std::vector<double>& mu) {
    spec.check();
    const std::size_t r = spec.r, L = spec.phases();
    std::vector<std::string> labels = numbered(r + 1, top);
    for (std::size_t j = 0; j <= r; ++j)
        for (std::size_t l = L; l >= 1; --l) labels.push_back(phase_label(j, l));
    std::vector<std::string> blocking;
    for (std::size_t l = L; l >= 1; --l) blocking.push_back(phase_label(0, l));
    const auto n = labels.size();
    auto idx = [&](const std::string& s) {
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == s) return static_cast<Eigen::Index>(i);
        throw InvalidModel("internal: missing label " + s);
    };
    Matrix V = Matrix::Zero(n, n), R = Matrix::Zero(n, n);
    for (std::size_t k = r + 2; k <= top; ++k) R(idx(std::to_string(k)), idx(std::to_string(k - 1))) = 1.0;
    for (std::size_t l = 1; l <= L; ++l) R(idx(std::to_string(r + 1)), idx(phase_label(r, l))) = spec.b[l - 1];
    for (std::size_t j = 1; j <= r; ++j)
        for (std::size_t l = 1; l <= L; ++l) R(idx(phase_label(j, l)), idx(phase_label(j - 1, l))) = 1.0;
    for (std::size_t l = 1; l <= L; ++l) R(idx(phase_label(0, l)), idx(phase_label(0, l))) = 1.0;
    for (std::size_t j = 0; j <= r; ++j) {
        for (std::size_t l = 2; l <= L; ++l) V(idx(phase_label(j, l)), idx(phase_label(j, l - 1))) = spec.beta;
        const std::size_t arrive = fill_to_top ? top : j + (top - r);
        V(idx(phase_label(j, 1)), idx(std::to_string(arrive))) = spec.beta;
    }
    for (std::size_t i = 0; i < n; ++i) V(i, i) = -V.row(i).sum();
    ModelSpec m;
    m.queue = QueueSpec::make({lambda}, mu);
    m.env = EnvironmentSpec::make(labels, blocking, V, R);
    return m;
}

} // namespace detail

inline BuiltModel build_rs_phase(const PhaseLeadTimeSpec& spec, double lambda, const std::vector<double>& mu) {
    if (!(spec.r < spec.S)) throw InvalidModel("(r,S) needs 0 <= r < S");
    BuiltModel out;
    out.model = detail::phase_model(spec, spec.S, true, lambda, mu);
    out.model.name = "rs-phase";
    const auto& env = out.model.env;
    const std::size_t r = spec.r, L = spec.phases();
    const double beta = spec.beta;
    const double A = (lambda + beta) / lambda;
    const double q = beta / (lambda + beta);
    RowVector th = RowVector::Zero(static_cast<Eigen::Index>(env.size()));
    for (std::size_t k = r + 1; k <= spec.S; ++k) th(env.index_of(std::to_string(k))) = std::pow(A, r);
    for (std::size_t j = 1; j <= r; ++j)
        for (std::size_t l = 1; l <= L; ++l) {
            double s = 0.0;
            for (std::size_t i = l; i <= L; ++i)
                s += spec.b[i - 1] * std::pow(q, static_cast<double>(i - l)) * detail::binom(i - l + r - j, r - j);
            th(env.index_of(phase_label(j, l))) = std::pow(A, static_cast<double>(j) - 1.0) * s;
        }
    for (std::size_t l = 1; l <= L; ++l) {
        double s = 0.0;
        for (std::size_t i = l; i <= L; ++i) {
            double tail = 0.0;
            for (std::size_t g = i; g <= L; ++g) tail += spec.b[g - 1];
            // C(i-l+r-1, i-l), which is 1 for r = 0
            const double c = r == 0 ? (i == l ? 1.0 : 0.0) : detail::binom(i - l + r - 1, r - 1);
            s += tail * std::pow(q, static_cast<double>(i - l)) * c;
        }
        th(env.index_of(phase_label(0, l))) = lambda / beta * s;
    }
    out.theta = th / th.sum();
    return out;
}

// P(W(u, alpha) < i) with P(W = g) = C(g+u-1, u-1) alpha^u (1-alpha)^g.
inline double negbin_below(std::size_t u, double alpha, std::size_t i) {
    double s = 0.0;
    for (std::size_t g = 0; g < i; ++g)
        s += detail::binom(g + u - 1, u - 1) * std::pow(alpha, static_cast<double>(u)) * std::pow(1.0 - alpha, static_cast<double>(g));
    return s;
}

// Unnormalized inventory marginal P(I=j), j = 0..S, via the negative binomial
// representation; divide by the sum to compare with theta.
inline std::vector<double> phase_inventory_marginal(const PhaseLeadTimeSpec& spec, double lambda) {
    const std::size_t r = spec.r, L = spec.phases();
    const double beta = spec.beta;
    const double A = (lambda + beta) / lambda;
    const double alpha = lambda / (lambda + beta);
    std::vector<double> p(spec.S + 1, 0.0);
    for (std::size_t j = r + 1; j <= spec.S; ++j) p[j] = std::pow(A, r);
    for (std::size_t j = 1; j <= r; ++j) {
        double s = 0.0;
        for (std::size_t i = 1; i <= L; ++i) s += spec.b[i - 1] * negbin_below(r + 1 - j, alpha, i);
        p[j] = std::pow(A, r) * s;
    }
    const double EU = spec.mean_lead_time() * beta;
    const double nu = 1.0 / spec.mean_lead_time();
    double s = 0.0;
    for (std::size_t i = 1; i <= L; ++i) {
        double tail = 0.0;
        for (std::size_t g = i; g <= L; ++g) tail += spec.b[g - 1];
        const double below = r == 0 ? 1.0 : negbin_below(r, alpha, i);
        s += tail / EU * below;
    }
    p[0] = lambda / nu * std::pow(A, r) * s;
    return p;
}

// (r,Q) with phase-type lead time; spec.S is read as the order size Q.
inline ModelSpec build_rq_phase(const PhaseLeadTimeSpec& spec, double lambda, const std::vector<double>& mu) {
    if (!(spec.r < spec.S)) throw InvalidModel("(r,Q) needs 0 <= r < Q");
    auto m = detail::phase_model(spec, spec.r + spec.S, false, lambda, mu);
    m.name = "rq-phase";
    return m;
}

// Any environment read as server availability states.
inline ModelSpec build_unreliable(const EnvironmentSpec& env, double lambda, const std::vector<double>& mu) {
    ModelSpec m;
    m.name = "unreliable";
    m.queue = QueueSpec::make({lambda}, mu);
    m.env = env;
    return m;
}

// Sensor node: outer availability 1 <-> 0 (alpha, beta) times node mode A <-> S (a, s).
// Only (A,1) serves. Closed form is the product of the two two-state laws.
inline BuiltModel build_sensor_node(double lambda, double mu, double alpha, double beta, double a, double s) {
    detail::require_positive({lambda, mu, alpha, beta, a, s}, "sensor node rates");
    const std::vector<std::string> labels{"(A,1)", "(A,0)", "(S,1)", "(S,0)"};
    Matrix V = Matrix::Zero(4, 4);
    // index: mode*2 + (1 - availability)
    auto at = [](int mode, int avail) { return mode * 2 + (1 - avail); };
    for (int mode = 0; mode < 2; ++mode)
        for (int avail = 0; avail < 2; ++avail) {
            const int k = at(mode, avail);
            V(k, at(mode, 1 - avail)) = avail == 1 ? alpha : beta;
            V(k, at(1 - mode, avail)) = mode == 0 ? a : s;
        }
    for (int k = 0; k < 4; ++k) V(k, k) = -V.row(k).sum();
    BuiltModel b;
    b.model.name = "sensor";
    b.model.queue = QueueSpec::constant(lambda, mu);
    b.model.env = EnvironmentSpec::make(labels, {"(A,0)", "(S,1)", "(S,0)"}, V, Matrix::Identity(4, 4));
    const double on = beta / (alpha + beta), awake = s / (a + s);
    b.theta = detail::normalized_internal(
        b.model.env, {awake * on, awake * (1 - on), (1 - awake) * on, (1 - awake) * (1 - on)});
    return b;
}

// Two stations with buffer N at the second; the second station's queue length
// is the environment 0..N+1 and a full buffer blocks the first station.
inline BuiltModel build_tandem(std::size_t N, double lambda, const std::vector<double>& mu,
                               const std::vector<double>& nu) {
    if (nu.size() < 2) throw InvalidModel("second station rates: need nu_1..");
    detail::require_positive(std::vector<double>(nu.begin() + 1, nu.end()), "second station rates");
    const auto d = static_cast<Eigen::Index>(N + 2);
    Matrix V = Matrix::Zero(d, d), R = Matrix::Zero(d, d);
    for (std::size_t k = 0; k <= N; ++k) R(k, k + 1) = 1.0;
    R(N + 1, N + 1) = 1.0;
    for (std::size_t k = 1; k <= N + 1; ++k) {
        V(k, k - 1) = detail::rate_at(nu, k);
        V(k, k) = -V(k, k - 1);
    }
    BuiltModel b;
    b.model.name = "tandem";
    b.model.queue = QueueSpec::make({lambda}, mu);
    b.model.env = EnvironmentSpec::make(detail::numbered(0, N + 1), {std::to_string(N + 1)}, V, R);
    std::vector<double> th{1.0};
    for (std::size_t k = 1; k <= N + 1; ++k) th.push_back(th.back() * lambda / detail::rate_at(nu, k));
    b.theta = detail::normalized_internal(b.model.env, th);
    return b;
}

// Server maintained after N services; failure rate nu_k after k services.
struct MaintenanceSpec {
    double lambda = 1.0;
    std::vector<double> mu{1.5};
    std::vector<double> nu; // nu_k, k = 0.. (single value: constant)
    double nu_m = 1.0, nu_r = 1.0;
    double c_m = 0.0, c_r = 0.0, c_b = 0.0, c_w = 0.0;
    std::size_t N = 1;

    static std::vector<double> linear_rates(double slope, std::size_t count) {
        std::vector<double> v(count);
        for (std::size_t k = 0; k < count; ++k) v[k] = slope * static_cast<double>(k);
        return v;
    }

    void check() const {
        if (N < 1) throw InvalidModel("maintenance threshold N must be >= 1");
        if (!(lambda > 0.0) || !(nu_m > 0.0) || !(nu_r > 0.0)) throw InvalidModel("maintenance rates must be positive");
        detail::require_positive(nu, "failure rates", true);
        if (c_m < 0 || c_r < 0 || c_b < 0 || c_w < 0) throw InvalidModel("costs must be nonnegative");
    }
};

// Closed-form environment law in declared order 0..N-1, b_m, b_r.
template <class T = double>
std::vector<T> maintenance_theta(const MaintenanceSpec& s) {
    const std::size_t N = s.N;
    const T lambda = s.lambda;
    std::vector<T> th(N + 2);
    th[0] = 1;
    for (std::size_t k = 1; k < N; ++k) th[k] = th[k - 1] * lambda / (T(detail::rate_at(s.nu, k)) + lambda);
    th[N] = lambda / T(s.nu_m) * th[N - 1];
    th[N + 1] = ((T(detail::rate_at(s.nu, 0)) + lambda) - lambda * th[N - 1]) / T(s.nu_r);
    T sum = 0;
    for (const auto& x : th) sum += x;
    for (auto& x : th) x /= sum;
    return th;
}

// g(N) = (c_b + c_m) theta_N(b_m) + (c_b + c_r) theta_N(b_r)
template <class T = double>
T maintenance_cost(const MaintenanceSpec& s) {
    const auto th = maintenance_theta<T>(s);
    return (T(s.c_b) + T(s.c_m)) * th[s.N] + (T(s.c_b) + T(s.c_r)) * th[s.N + 1];
}

inline BuiltModel build_maintenance(const MaintenanceSpec& s) {
    s.check();
    const std::size_t N = s.N;
    const auto d = static_cast<Eigen::Index>(N + 2);
    const Eigen::Index bm = d - 2, br = d - 1;
    Matrix V = Matrix::Zero(d, d), R = Matrix::Zero(d, d);
    for (std::size_t k = 0; k + 1 < N; ++k) R(k, k + 1) = 1.0;
    R(N - 1, bm) = 1.0;
    R(bm, bm) = 1.0;
    R(br, br) = 1.0;
    for (std::size_t k = 0; k < N; ++k) V(k, br) = detail::rate_at(s.nu, k);
    V(bm, 0) = s.nu_m;
    V(br, 0) = s.nu_r;
    for (Eigen::Index k = 0; k < d; ++k) V(k, k) = -V.row(k).sum();
    auto labels = detail::numbered(0, N - 1);
    labels.push_back("b_m");
    labels.push_back("b_r");
    BuiltModel b;
    b.model.name = "maintenance";
    b.model.queue = QueueSpec::make({s.lambda}, s.mu);
    b.model.env = EnvironmentSpec::make(labels, {"b_m", "b_r"}, V, R);
    b.theta = detail::normalized_internal(b.model.env, maintenance_theta(s));
    return b;
}

struct MaintenanceCurve {
    std::size_t best_N = 0;
    std::vector<std::size_t> N;
    std::vector<double> g;
};

// Argmin of g over [n_min, n_max]; ties go to the smallest N.
inline MaintenanceCurve optimize_maintenance(MaintenanceSpec s, std::size_t n_min, std::size_t n_max) {
    if (n_min < 1 || n_min > n_max) throw InvalidModel("empty maintenance threshold range");
    MaintenanceCurve c;
    double best = 0.0;
    for (std::size_t N = n_min; N <= n_max; ++N) {
        s.N = N;
        s.check();
        const double g = maintenance_cost(s);
        c.N.push_back(N);
        c.g.push_back(g);
        if (c.best_N == 0 || g < best) {
            best = g;
            c.best_N = N;
        }
    }
    return c;
}

// For constant failure rate nu the sign of g(N+1) - g(N) does not depend on N;
// it is the sign of this expression with a = lambda/(nu + lambda).
inline double constant_rate_monotonicity(const MaintenanceSpec& s) {
    const double l = s.lambda, nu = detail::rate_at(s.nu, 0), nm = s.nu_m, nr = s.nu_r;
    const double a = l / (nu + l);
    const double bm = l * (-a * a * nu + 2 * a * nu - nu + a * nr - nr - l * a * a + 2 * l * a - l);
    const double br = a * a * nm * nu - a * nm * nu + l * a * a * nu - 2 * l * a * nu + l * nu + l * a * a * nm -
                      2 * l * a * nm + l * nm + l * l * a * a - 2 * l * l * a + l * l;
    return (s.c_b + s.c_m) * bm + (s.c_b + s.c_r) * br;
}

// Departure-epoch environment law of the (r,S) model, declared order 0..S.
inline std::vector<double> embedded_rs_theta_hat(std::size_t r, std::size_t S, double lambda,
                                                 const std::vector<double>& nu) {
    if (!(r < S)) throw InvalidModel("(r,S) needs 0 <= r < S");
    std::vector<double> th(S + 1, 0.0);
    for (std::size_t k = 0; k < S; ++k) th[k] = detail::lead_product(lambda, nu, std::min(k, r));
    double sum = 0.0;
    for (double x : th) sum += x;
    for (double& x : th) x /= sum;
    return th;
}

// Departure-epoch environment law of the (r,Q) model, declared order 0..r+Q.
inline std::vector<double> embedded_rq_theta_hat(std::size_t r, std::size_t Q, double lambda,
                                                 const std::vector<double>& nu) {
    if (!(r < Q)) throw InvalidModel("(r,Q) needs 0 <= r < Q");
    std::vector<double> th(r + Q + 1, 0.0);
    const double full = detail::lead_product(lambda, nu, r);
    for (std::size_t k = 0; k < Q; ++k) th[k] = detail::lead_product(lambda, nu, std::min(k, r));
    for (std::size_t k = Q; k + 1 <= r + Q; ++k) th[k] = full - detail::lead_product(lambda, nu, k - Q);
    double sum = 0.0;
    for (double x : th) sum += x;
    for (double& x : th) x /= sum;
    return th;
}

// Zero lead time (r,Q): stock r+1..r+Q cycles; an order arrives the instant stock hits r.
inline EnvironmentSpec zero_lead_rq_env(std::size_t r, std::size_t Q) {
    const auto d = static_cast<Eigen::Index>(Q);
    Matrix R = Matrix::Zero(d, d);
    R(0, d - 1) = 1.0;
    for (Eigen::Index k = 1; k < d; ++k) R(k, k - 1) = 1.0;
    return EnvironmentSpec::make(detail::numbered(r + 1, r + Q), {}, Matrix::Zero(d, d), R);
}

// Finite waiting room model whose working part jumps by a uniformization chain
// of V restricted to K_W (diagonal recomputed), so that eta^(W) R^(W) = eta^(W)
// whenever V satisfies partial balance on K_W. Blocking rows of R are the identity.
inline ModelSpec build_uniformized_finite(const std::vector<std::string>& labels,
                                          const std::vector<std::string>& blocking, const Matrix& V,
                                          std::size_t capacity, const std::vector<double>& lambda,
                                          const std::vector<double>& mu) {
    const auto probe = EnvironmentSpec::make(labels, blocking, V, Matrix::Identity(V.rows(), V.cols()));
    const auto w = static_cast<Eigen::Index>(probe.num_working());
    Matrix VW = probe.V().topLeftCorner(w, w);
    double sup = 0.0;
    for (Eigen::Index k = 0; k < w; ++k) {
        sup = std::max(sup, -probe.V()(k, k));
        VW(k, k) = 0.0;
        VW(k, k) = -VW.row(k).sum();
    }
    if (!(sup > 0.0)) throw InvalidModel("uniformization needs a moving working part");
    Matrix R = Matrix::Identity(V.rows(), V.cols());
    R.topLeftCorner(w, w) = Matrix::Identity(w, w) + VW / sup;
    ModelSpec m;
    m.name = "uniformized";
    m.queue = QueueSpec::make(lambda, mu, capacity);
    // R is already in internal order; rebuild the spec in that order.
    std::vector<std::string> blk;
    for (std::size_t k = probe.num_working(); k < probe.size(); ++k) blk.push_back(probe.label(k));
    m.env = EnvironmentSpec::make(probe.labels(), blk, probe.V(), R);
    return m;
}

// Declared order of the environment of a builder, mapped from labels.
inline RowVector to_declared(const EnvironmentSpec& env, const RowVector& internal) {
    RowVector x(internal.size());
    for (std::size_t i = 0; i < env.size(); ++i) x(static_cast<Eigen::Index>(i)) = internal(env.internal_index(i));
    return x;
}

} // namespace envq
