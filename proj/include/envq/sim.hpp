#pragma once

#include "envq/env_core.hpp"
#include "envq/mg1.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace envq {

// General service: request law by queue length at service start, and speed by
// current queue length. Both repeat their last entry.
struct ServiceSpec {
    std::vector<ServiceLaw> laws;
    std::vector<double> speeds; // empty: unit speed

    const ServiceLaw& law(std::size_t n) const { return laws[std::min(n, laws.size()) - 1]; }
    double speed(std::size_t n) const { return speeds.empty() ? 1.0 : speeds[std::min(n, speeds.size()) - 1]; }
};

struct SimOptions {
    std::optional<ServiceSpec> service; // absent: exponential service at mu(n)
    std::size_t batches = 20;
    double warmup = 0.05;
};

// Empirical occupancy in continuous time and at departures, with batch-means
// standard errors. Matrices are levels x environment states (internal order).
struct SimEstimate {
    Matrix occupancy, occupancy_se;
    Matrix embedded, embedded_se;
    std::vector<Matrix> batch_occupancy, batch_embedded;
    std::uint64_t seed = 0;
    std::size_t horizon = 0;
    std::size_t events = 0;
    std::size_t departures = 0;

    static void mean_se(const std::vector<RowVector>& xs, RowVector& mean, RowVector& se) {
        const auto B = static_cast<double>(xs.size());
        mean = RowVector::Zero(xs.front().size());
        for (const auto& x : xs) mean += x;
        mean /= B;
        RowVector var = RowVector::Zero(mean.size());
        for (const auto& x : xs) var += (x - mean).cwiseAbs2();
        se = (var / (B - 1.0) / B).cwiseSqrt();
    }

    // Environment marginal at departures with its batch-means standard error.
    void embedded_env_marginal(RowVector& mean, RowVector& se) const {
        std::vector<RowVector> xs;
        for (const auto& b : batch_embedded) xs.push_back(b.colwise().sum());
        mean_se(xs, mean, se);
        mean = embedded.colwise().sum();
    }
    void occupancy_level_marginal(RowVector& mean, RowVector& se) const {
        std::vector<RowVector> xs;
        for (const auto& b : batch_occupancy) xs.push_back(b.rowwise().sum().transpose());
        mean_se(xs, mean, se);
        mean = occupancy.rowwise().sum().transpose();
    }
    void embedded_level_marginal(RowVector& mean, RowVector& se) const {
        std::vector<RowVector> xs;
        for (const auto& b : batch_embedded) xs.push_back(b.rowwise().sum().transpose());
        mean_se(xs, mean, se);
        mean = embedded.rowwise().sum().transpose();
    }
};

namespace detail {

class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : rng_(seed) {}

    // Uniform on (0,1).
    double uniform() { return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53; }
    double exponential(double rate) { return -std::log(uniform()) / rate; }

    std::size_t pick(const Matrix& M, Eigen::Index row, double total, bool skip_diag) {
        double u = uniform() * total;
        Eigen::Index last = -1;
        for (Eigen::Index m = 0; m < M.cols(); ++m) {
            if (skip_diag && m == row) continue;
            const double w = M(row, m);
            if (!(w > 0.0)) continue;
            last = m;
            if (u < w) return static_cast<std::size_t>(m);
            u -= w;
        }
        return static_cast<std::size_t>(last);
    }

    double draw(const ServiceLaw& law) {
        switch (law.kind) {
        case ServiceLaw::Kind::Deterministic: return law.value;
        case ServiceLaw::Kind::Exponential: return exponential(law.value);
        case ServiceLaw::Kind::Erlang: return erlang(law.phases, law.value);
        case ServiceLaw::Kind::PhaseMixture: {
            double u = uniform();
            std::size_t l = law.weights.size();
            for (std::size_t i = 0; i < law.weights.size(); ++i) {
                if (u < law.weights[i]) {
                    l = i + 1;
                    break;
                }
                u -= law.weights[i];
            }
            return erlang(l, law.value);
        }
        }
        return 0.0;
    }

private:
    double erlang(std::size_t k, double rate) {
        double t = 0.0;
        for (std::size_t i = 0; i < k; ++i) t += exponential(rate);
        return t;
    }

    std::mt19937_64 rng_;
};

// Per-batch cell accumulators that grow with the level.
struct Cells {
    std::size_t K;
    std::vector<double> v;
    void add(std::size_t n, std::size_t k, double w) {
        if ((n + 1) * K > v.size()) v.resize((n + 1) * K, 0.0);
        v[n * K + k] += w;
    }
    std::size_t levels() const { return v.size() / K; }
};

inline Matrix to_matrix(const Cells& c, std::size_t levels, double scale) {
    Matrix M = Matrix::Zero(static_cast<Eigen::Index>(levels), static_cast<Eigen::Index>(c.K));
    for (std::size_t i = 0; i < c.v.size(); ++i)
        M(static_cast<Eigen::Index>(i / c.K), static_cast<Eigen::Index>(i % c.K)) = c.v[i] * scale;
    return M;
}

} // namespace detail

// Event-driven simulation starting from (0, first working state). Blocking
// states freeze arrivals and service; residual work is kept.
inline SimEstimate simulate(const ModelSpec& model, std::size_t horizon, std::uint64_t seed,
                            const SimOptions& opt = {}) {
    if (horizon < 10000) throw InvalidModel("simulation horizon must be at least 1e4 events");
    const auto& env = model.env;
    const auto& q = model.queue;
    const std::size_t K = env.size();
    const Matrix& V = env.V();
    const Matrix& R = env.R();
    const std::size_t warm = static_cast<std::size_t>(opt.warmup * static_cast<double>(horizon));
    const std::size_t B = opt.batches;
    const std::size_t per_batch = (horizon - warm) / B;
    const std::optional<std::size_t> top =
        q.capacity ? std::optional<std::size_t>(*q.capacity + 1) : std::nullopt;

    detail::Sampler rng(seed);
    std::vector<detail::Cells> occ(B, detail::Cells{K, {}}), dep(B, detail::Cells{K, {}});
    std::vector<double> batch_time(B, 0.0), batch_deps(B, 0.0);

    std::size_t n = 0, k = 0;
    bool busy = false;   // general service: a request is in progress
    double work = 0.0;   // its remaining work
    const bool general = opt.service.has_value();

    for (std::size_t e = 0; e < horizon; ++e) {
        const bool working = env.is_working(k);
        if (general && working && n > 0 && !busy) {
            work = rng.draw(opt.service->law(n));
            busy = true;
        }
        const double arr = (working && (!top || n < *top)) ? q.arrival(n) : 0.0;
        const double vout = -V(k, k);
        double srv = 0.0;
        if (!general && working && n > 0) srv = q.service(n);
        const double markov = arr + vout + srv;
        double dt = markov > 0.0 ? rng.exponential(markov) : std::numeric_limits<double>::infinity();
        bool general_departure = false;
        if (general && working && n > 0) {
            const double c = opt.service->speed(n);
            const double finish = work / c;
            if (finish <= dt) {
                dt = finish;
                general_departure = true;
            } else {
                work -= dt * c;
            }
        }
        if (!std::isfinite(dt)) throw InvalidModel("simulation reached an absorbing state");

        const bool counted = e >= warm;
        const std::size_t b = counted ? std::min((e - warm) / std::max<std::size_t>(per_batch, 1), B - 1) : 0;
        if (counted) {
            occ[b].add(n, k, dt);
            batch_time[b] += dt;
        }

        bool departure = general_departure;
        if (!general_departure) {
            double u = rng.uniform() * markov;
            if (u < arr) {
                ++n;
                continue;
            }
            u -= arr;
            if (u < srv) {
                departure = true;
            } else {
                k = rng.pick(V, static_cast<Eigen::Index>(k), vout, true);
                continue;
            }
        }
        if (departure) {
            --n;
            busy = false;
            k = rng.pick(R, static_cast<Eigen::Index>(k), 1.0, false);
            if (counted) {
                dep[b].add(n, k, 1.0);
                batch_deps[b] += 1.0;
            }
        }
    }

    SimEstimate est;
    est.seed = seed;
    est.horizon = horizon;
    est.events = horizon;
    std::size_t levels = 1;
    for (std::size_t b = 0; b < B; ++b) levels = std::max({levels, occ[b].levels(), dep[b].levels()});
    double total_time = 0.0, total_deps = 0.0;
    Matrix occ_sum = Matrix::Zero(static_cast<Eigen::Index>(levels), static_cast<Eigen::Index>(K));
    Matrix dep_sum = occ_sum;
    for (std::size_t b = 0; b < B; ++b) {
        est.batch_occupancy.push_back(detail::to_matrix(occ[b], levels, 1.0 / batch_time[b]));
        est.batch_embedded.push_back(
            detail::to_matrix(dep[b], levels, batch_deps[b] > 0 ? 1.0 / batch_deps[b] : 0.0));
        occ_sum += detail::to_matrix(occ[b], levels, 1.0);
        dep_sum += detail::to_matrix(dep[b], levels, 1.0);
        total_time += batch_time[b];
        total_deps += batch_deps[b];
    }
    est.departures = static_cast<std::size_t>(total_deps); // after warm-up
    est.occupancy = occ_sum / total_time;
    est.embedded = total_deps > 0 ? Matrix(dep_sum / total_deps) : dep_sum;
    auto se = [&](const std::vector<Matrix>& xs) {
        Matrix mean = Matrix::Zero(occ_sum.rows(), occ_sum.cols());
        for (const auto& x : xs) mean += x;
        mean /= static_cast<double>(B);
        Matrix var = Matrix::Zero(mean.rows(), mean.cols());
        for (const auto& x : xs) var += (x - mean).cwiseAbs2();
        return Matrix((var / (static_cast<double>(B) - 1.0) / static_cast<double>(B)).cwiseSqrt());
    };
    est.occupancy_se = se(est.batch_occupancy);
    est.embedded_se = se(est.batch_embedded);
    return est;
}

struct MarginalEstimate {
    RowVector mean, se;
};

// Environment law sampled right after each departure's jump.
inline MarginalEstimate simulate_embedded_marginal(const ModelSpec& model, std::size_t horizon, std::uint64_t seed,
                                                   const SimOptions& opt = {}) {
    const auto est = simulate(model, horizon, seed, opt);
    MarginalEstimate m;
    est.embedded_env_marginal(m.mean, m.se);
    return m;
}

// Pearson statistic for independence of level and environment at departures,
// over levels <= max_level and states seen at least once. Returns (statistic, dof).
inline std::pair<double, std::size_t> independence_statistic(const SimEstimate& est, std::size_t max_level) {
    const Eigen::Index L = std::min<Eigen::Index>(est.embedded.rows(), static_cast<Eigen::Index>(max_level + 1));
    Matrix counts = est.embedded.topRows(L) * static_cast<double>(est.departures);
    std::vector<Eigen::Index> cols;
    for (Eigen::Index k = 0; k < counts.cols(); ++k)
        if (counts.col(k).sum() > 0) cols.push_back(k);
    const double total = counts.sum();
    double stat = 0.0;
    for (Eigen::Index n = 0; n < L; ++n)
        for (auto k : cols) {
            const double e = counts.row(n).sum() * counts.col(k).sum() / total;
            if (e > 0) stat += (counts(n, k) - e) * (counts(n, k) - e) / e;
        }
    const std::size_t dof = (static_cast<std::size_t>(L) - 1) * (cols.size() - 1);
    return {stat, dof};
}

} // namespace envq
