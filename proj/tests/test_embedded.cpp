#include "envq/embedded.hpp"
#include "envq/models.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace envq;

namespace {

double max_diff(const RowVector& a, const RowVector& b) { return (a - b).cwiseAbs().maxCoeff(); }

ModelSpec with_queue(EnvironmentSpec env, double lambda, double mu) {
    ModelSpec m;
    m.env = std::move(env);
    m.queue = QueueSpec::constant(lambda, mu);
    return m;
}

// Information loss: every departure jumps to blocking state 2, which returns at rate nu.
ModelSpec info_loss(double lambda, double nu) {
    Matrix V(2, 2), R(2, 2);
    V << 0, 0, nu, -nu;
    R << 0, 1, 0, 1;
    return with_queue(EnvironmentSpec::make({"1", "2"}, {"2"}, V, R), lambda, 2.0);
}

ModelSpec swap_example(double lambda, double nu1, double nu2) {
    Matrix V(2, 2), R(2, 2);
    V << -nu1, nu1, nu2, -nu2;
    R << 0, 1, 1, 0;
    return with_queue(EnvironmentSpec::make({"1", "2"}, {}, V, R), lambda, 2.0);
}

// Three states, "c" blocking; V moves on all of them.
ModelSpec three_state(double lambda, double mu) {
    Matrix V(3, 3), R(3, 3);
    V << -0.7, 0.4, 0.3, 0.5, -1.1, 0.6, 1.5, 0.0, -1.5;
    R << 0.2, 0.5, 0.3, 0.6, 0.4, 0.0, 0.0, 0.0, 1.0;
    return with_queue(EnvironmentSpec::make({"a", "b", "c"}, {"c"}, V, R), lambda, mu);
}

std::vector<double> exponent_variant_theta_hat(std::size_t r, std::size_t S, double lambda, double nu) {
    std::vector<double> th(S + 1, 0.0);
    for (std::size_t k = 0; k < S; ++k) {
        double p = 1.0;
        for (std::size_t i = 1; i <= std::min(k, r); ++i) p *= std::pow((lambda + nu) / lambda, static_cast<double>(i));
        th[k] = p;
    }
    double s = 0.0;
    for (double x : th) s += x;
    for (double& x : th) x /= s;
    return th;
}

RowVector row(const std::vector<double>& v) {
    RowVector x(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<Eigen::Index>(i)) = v[i];
    return x;
}

} // namespace

TEST(W, IdentityWhenEnvironmentIdle) {
    const auto m = with_queue(EnvironmentSpec::make({"x", "y", "z"}, {}, Matrix::Zero(3, 3), Matrix::Identity(3, 3)), 1.0, 2.0);
    EXPECT_LE((w_matrix(m) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(W, InformationLossRowsRouteToWorking) {
    const auto m = info_loss(1.3, 0.4);
    const Matrix W = w_matrix(m);
    const auto i1 = m.env.index_of("1"), i2 = m.env.index_of("2");
    EXPECT_NEAR(W(i1, i1), 1.0, 1e-15);
    EXPECT_NEAR(W(i2, i1), 1.0, 1e-15);
    EXPECT_NEAR(W(i1, i2), 0.0, 1e-15);
    EXPECT_NEAR(W(i2, i2), 0.0, 1e-15);
}

TEST(W, StochasticWithZeroBlockingColumns) {
    for (const auto& m : {build_rs(2, 5, 1.0, {2.0}, {3.0}).model, three_state(0.8, 2.0), build_rq(1, 4, 0.5, {1.0}, {2.0, 0.3}).model}) {
        const Matrix W = w_matrix(m);
        EXPECT_LE((W.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
        EXPECT_GE(W.minCoeff(), -1e-15);
        const auto w = static_cast<Eigen::Index>(m.env.num_working());
        EXPECT_EQ(W.rightCols(W.cols() - w).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(U, SingleStateGeometric) {
    const double lambda = 1.0, mu = 2.5;
    const auto m = with_queue(EnvironmentSpec::make({"up"}, {}, Matrix::Zero(1, 1), Matrix::Identity(1, 1)), lambda, mu);
    const auto U = u_matrices(m, 3, 12);
    for (std::size_t n = 0; n <= 12; ++n)
        EXPECT_NEAR(U[n](0, 0), mu / (lambda + mu) * std::pow(lambda / (lambda + mu), static_cast<double>(n)), 1e-15);
}

TEST(U, TotalProbability) {
    const auto b = build_rs(2, 5, 1.0, {2.0, 3.0, 2.5}, {3.0});
    for (std::size_t i : {1u, 2u, 4u}) {
        const auto U = u_matrices_adaptive(b.model, i);
        Matrix sum = Matrix::Zero(6, 6);
        for (const auto& u : U) {
            sum += u;
            EXPECT_GE(u.minCoeff(), -1e-15);
            EXPECT_LE(u.maxCoeff(), 1.0);
        }
        EXPECT_LE((sum.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
    }
}

// Race of arrivals, service and environment during one service period; the
// service clock and arrivals stop while the environment is blocking.
TEST(U, MonteCarloRace) {
    const double lambda = 0.9, mu = 1.7;
    const auto m = three_state(lambda, mu);
    const auto& env = m.env;
    const auto U = u_matrices(m, 1, 4);
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int reps = 200000;
    for (std::size_t start = 0; start < env.num_working(); ++start) {
        Matrix freq = Matrix::Zero(5, 3);
        for (int rep = 0; rep < reps; ++rep) {
            std::size_t k = start, arrivals = 0;
            for (;;) {
                const double out = -env.V()(k, k);
                const bool working = env.is_working(k);
                const double total = out + (working ? lambda + mu : 0.0);
                double x = u01(rng) * total;
                if (working && x < mu) break;
                if (working) x -= mu;
                if (working && x < lambda) {
                    ++arrivals;
                    continue;
                }
                if (working) x -= lambda;
                for (std::size_t j = 0; j < env.size(); ++j) {
                    if (j == k) continue;
                    if (x < env.V()(k, j)) {
                        k = j;
                        break;
                    }
                    x -= env.V()(k, j);
                }
            }
            if (arrivals <= 4) freq(static_cast<Eigen::Index>(arrivals), static_cast<Eigen::Index>(k)) += 1.0;
        }
        freq /= reps;
        for (std::size_t n = 0; n <= 4; ++n)
            for (std::size_t j = 0; j < 3; ++j) {
                const double p = U[n](static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(j));
                const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / reps);
                EXPECT_NEAR(freq(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)), p, 4.5 * se + 1e-12)
                    << "start " << start << " n " << n << " end " << j;
            }
    }
}

TEST(M0, MnIdentityOnRs) {
    const auto b = build_rs(2, 5, 1.0, {2.0}, {3.0});
    for (std::size_t n = 0; n <= 5; ++n) EXPECT_LE(mn_identity_residual(b.model, n), 1e-9) << n;
    const Matrix M0 = m0_matrix(b.model);
    EXPECT_EQ(M0, w_matrix(b.model));
    EXPECT_LE((M0.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
    const Matrix P = M0 * b.model.env.R();
    EXPECT_LE((P.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
}

TEST(M0, MnIdentityWithLevelDependentService) {
    auto m = three_state(0.8, 2.0);
    m.queue = QueueSpec::make({0.8}, {1.5, 2.5, 3.0, 2.2});
    for (std::size_t n = 0; n <= 5; ++n) EXPECT_LE(mn_identity_residual(m, n), 1e-9) << n;
}

TEST(Embedded, InformationLossThetaHat) {
    for (double lambda : {0.3, 1.0, 1.7})
        for (double nu : {0.2, 3.0}) {
            const auto m = info_loss(lambda, nu);
            const auto sol = solve_embedded(m);
            const auto i1 = m.env.index_of("1"), i2 = m.env.index_of("2");
            EXPECT_NEAR(sol.theta(i1), nu / (lambda + nu), 1e-14);
            EXPECT_NEAR(sol.theta_hat(i1), 0.0, 1e-15);
            EXPECT_NEAR(sol.theta_hat(i2), 1.0, 1e-15);
        }
}

TEST(Embedded, SwapThetaHatIsThetaR) {
    const double lambda = 1.0, nu1 = 0.5, nu2 = 2.0;
    const auto sol = solve_embedded(swap_example(lambda, nu1, nu2));
    const double s = 2 * lambda + nu1 + nu2;
    EXPECT_NEAR(sol.theta(0), (lambda + nu2) / s, 1e-14);
    EXPECT_NEAR(sol.theta_hat(0), sol.theta(1), 1e-14);
    EXPECT_NEAR(sol.theta_hat(1), sol.theta(0), 1e-14);
    EXPECT_GT(std::abs(sol.theta_hat(0) - sol.theta(0)), 0.1);
}

TEST(Embedded, ZeroReorderPointInessentialAndPeriodic) {
    const std::size_t S = 4;
    const auto b = build_rs(0, S, 1.0, {2.0}, {1.5});
    const auto sol = solve_embedded(b.model);
    const auto& env = b.model.env;
    ASSERT_EQ(sol.inessential.size(), 1u);
    EXPECT_EQ(env.label(sol.inessential.front()), std::to_string(S));
    EXPECT_EQ(sol.L.size(), S);
    EXPECT_EQ(sol.period, S);
    for (std::size_t k = 0; k < S; ++k) EXPECT_NEAR(sol.theta_hat(env.index_of(std::to_string(k))), 1.0 / S, 1e-12);
    EXPECT_EQ(sol.theta_hat(env.index_of(std::to_string(S))), 0.0);
}

TEST(Embedded, ClosedFormsMatchSolver) {
    for (double lambda : {0.5, 1.0, 1.4})
        for (double nu : {0.7, 3.0}) {
            const auto b = build_rs(2, 5, lambda, {2.0}, {nu});
            const auto sol = solve_embedded(b.model);
            EXPECT_LE(max_diff(sol.theta_hat, b.model.env.from_declared(row(embedded_rs_theta_hat(2, 5, lambda, {nu})))), 1e-10);
            const auto q = build_rq(2, 3, lambda, {2.0}, {nu});
            const auto sq = solve_embedded(q.model);
            EXPECT_LE(max_diff(sq.theta_hat, q.model.env.from_declared(row(embedded_rq_theta_hat(2, 3, lambda, {nu})))), 1e-10);
        }
}

// Variant with an exponent i inside the product: it
// agrees with the solver for r <= 1 and not beyond.
TEST(Embedded, ExponentInsideProductDisagreesForLargerR) {
    const double lambda = 1.0, nu = 3.0;
    for (std::size_t r : {1u, 2u, 3u}) {
        const auto b = build_rs(r, 5, lambda, {2.0}, {nu});
        const auto sol = solve_embedded(b.model);
        const double gap = max_diff(sol.theta_hat, b.model.env.from_declared(row(exponent_variant_theta_hat(r, 5, lambda, nu))));
        if (r <= 1)
            EXPECT_LE(gap, 1e-12);
        else
            EXPECT_GT(gap, 1e-2);
    }
}

TEST(Embedded, LevelMarginalEqualsContinuousTime) {
    const auto b = build_rs(2, 5, 1.0, {2.0}, {3.0});
    const auto sol = solve_embedded(b.model);
    for (std::size_t n = 0; n <= 30; ++n) {
        double s = 0.0;
        for (std::size_t k = 0; k < b.model.env.size(); ++k) s += sol.pi_hat(n, k);
        EXPECT_NEAR(s, sol.ct.xi(n), 1e-10);
    }
}

TEST(Transforms, RoundTrip) {
    for (const auto& m : {build_rs(2, 5, 1.0, {2.0}, {3.0}).model, three_state(0.8, 2.0), swap_example(1.0, 0.5, 2.0),
                          build_tandem(3, 1.0, {1.6}, {0, 1.0, 2.0, 1.5, 3.0}).model}) {
        const auto ct = solve_product_form(m);
        ASSERT_TRUE(ct.ok()) << ct.reason;
        const RowVector th = theta_hat_from_theta(m, ct.theta);
        EXPECT_LE(max_diff(theta_from_theta_hat(m, th), ct.theta), 1e-10);
    }
}

TEST(Transforms, IdentityJumpsCondition) {
    Matrix V(3, 3);
    V << -1, 0.4, 0.6, 0.3, -0.5, 0.2, 2.0, 1.0, -3.0;
    const auto m = with_queue(EnvironmentSpec::make({"a", "b", "c"}, {"c"}, V, Matrix::Identity(3, 3)), 1.0, 2.0);
    const auto sol = solve_embedded(m);
    RowVector cond = sol.theta;
    cond(2) = 0.0;
    cond /= cond.sum();
    EXPECT_LE(max_diff(sol.theta_hat, cond), 1e-12);
}

TEST(Transforms, IdleEnvironmentFixedPoint) {
    Matrix R(3, 3);
    R << 0.1, 0.6, 0.3, 0.5, 0.5, 0.0, 0.2, 0.2, 0.6;
    const auto m = with_queue(EnvironmentSpec::make({"a", "b", "c"}, {}, Matrix::Zero(3, 3), R), 1.0, 2.0);
    const auto sol = solve_embedded(m);
    EXPECT_LE(max_diff(sol.theta_hat, sol.theta), 1e-12);
}

TEST(Embedded, RequiresConstantArrivals) {
    auto m = three_state(0.8, 2.0);
    m.queue = QueueSpec::make({0.8, 0.4}, {2.0});
    EXPECT_THROW(w_matrix(m), InvalidModel);
}

TEST(Embedded, NotErgodicPropagates) {
    EXPECT_THROW(solve_embedded(build_rs(2, 5, 3.0, {2.0}, {3.0}).model), NotErgodic);
}
