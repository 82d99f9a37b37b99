#pragma once

#include "envq/numerics.hpp"
#include "envq/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace envq {

// Finite environment K = K_W + K_B with generator V and departure jump matrix R.
// Internally working states come first; `declared` remembers the input order.
class EnvironmentSpec {
public:
    EnvironmentSpec() = default;

    // labels/V/R in declared order; blocking lists labels of K_B.
    static EnvironmentSpec make(const std::vector<std::string>& labels, const std::vector<std::string>& blocking,
                                const Matrix& V, const Matrix& R) {
        const auto n = labels.size();
        if (n == 0) throw InvalidModel("environment needs at least one state");
        if (static_cast<std::size_t>(V.rows()) != n || static_cast<std::size_t>(V.cols()) != n)
            throw InvalidModel("V dimension does not match number of states");
        if (static_cast<std::size_t>(R.rows()) != n || static_cast<std::size_t>(R.cols()) != n)
            throw InvalidModel("R dimension does not match number of states");
        std::vector<bool> is_blocking(n, false);
        for (const auto& b : blocking) {
            auto it = std::find(labels.begin(), labels.end(), b);
            if (it == labels.end()) throw InvalidModel("unknown blocking label '" + b + "'");
            is_blocking[static_cast<std::size_t>(it - labels.begin())] = true;
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (labels[i] == labels[j]) throw InvalidModel("duplicate state label '" + labels[i] + "'");

        EnvironmentSpec e;
        std::vector<std::size_t> order; // internal -> declared
        for (std::size_t i = 0; i < n; ++i)
            if (!is_blocking[i]) order.push_back(i);
        e.num_working_ = order.size();
        for (std::size_t i = 0; i < n; ++i)
            if (is_blocking[i]) order.push_back(i);
        e.declared_.resize(n);
        e.labels_.resize(n);
        e.V_.resize(n, n);
        e.R_.resize(n, n);
        for (std::size_t a = 0; a < n; ++a) {
            e.declared_[order[a]] = a;
            e.labels_[a] = labels[order[a]];
            for (std::size_t b = 0; b < n; ++b) {
                e.V_(a, b) = V(order[a], order[b]);
                e.R_(a, b) = R(order[a], order[b]);
            }
        }
        return e;
    }

    std::size_t size() const { return labels_.size(); }
    std::size_t num_working() const { return num_working_; }
    bool is_working(std::size_t k) const { return k < num_working_; }
    std::vector<bool> working_mask() const {
        std::vector<bool> w(size());
        for (std::size_t k = 0; k < size(); ++k) w[k] = is_working(k);
        return w;
    }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& label(std::size_t k) const { return labels_[k]; }
    std::size_t index_of(const std::string& label) const {
        auto it = std::find(labels_.begin(), labels_.end(), label);
        if (it == labels_.end()) throw InvalidModel("unknown state label '" + label + "'");
        return static_cast<std::size_t>(it - labels_.begin());
    }
    // Internal index of the i-th declared state.
    std::size_t internal_index(std::size_t declared) const { return declared_.at(declared); }
    const Matrix& V() const { return V_; }
    const Matrix& R() const { return R_; }

    // Reorders a vector given in declared order into internal order.
    RowVector from_declared(const RowVector& x) const {
        RowVector y(x.size());
        for (std::size_t i = 0; i < size(); ++i) y(internal_index(i)) = x(i);
        return y;
    }

private:
    std::vector<std::string> labels_;
    std::size_t num_working_ = 0;
    std::vector<std::size_t> declared_;
    Matrix V_, R_;
};

// Rates with eventually constant tails: lambda(0..n_tail), mu(1..n_tail).
struct QueueSpec {
    std::vector<double> lambda;      // lambda[n], n = 0..n_tail
    std::vector<double> mu;          // mu[n-1], n = 1..n_tail
    std::optional<std::size_t> capacity; // Finite(N): levels 0..N+1

    static QueueSpec constant(double l, double m) { return make({l}, {m}); }

    // Pads the shorter sequence with its last value so that n_tail >= 1.
    static QueueSpec make(std::vector<double> l, std::vector<double> m, std::optional<std::size_t> cap = {}) {
        if (l.empty() || m.empty()) throw InvalidModel("lambda and mu need at least one value");
        const std::size_t n_tail = std::max<std::size_t>({l.size() - 1, m.size(), 1});
        while (l.size() < n_tail + 1) l.push_back(l.back());
        while (m.size() < n_tail) m.push_back(m.back());
        for (double x : l)
            if (!(x > 0.0) || !std::isfinite(x)) throw InvalidModel("arrival rates must be positive");
        for (double x : m)
            if (!(x > 0.0) || !std::isfinite(x)) throw InvalidModel("service rates must be positive");
        return QueueSpec{std::move(l), std::move(m), cap};
    }

    std::size_t n_tail() const { return mu.size(); }
    double arrival(std::size_t n) const { return lambda[std::min(n, lambda.size() - 1)]; }
    double service(std::size_t n) const { return mu[std::min(n, mu.size()) - 1]; } // n >= 1
    bool constant_arrivals() const {
        return std::all_of(lambda.begin(), lambda.end(), [&](double x) { return x == lambda.front(); });
    }
    double tail_load() const { return lambda.back() / mu.back(); }
};

struct ModelSpec {
    std::string name;
    QueueSpec queue;
    EnvironmentSpec env;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool accepted() const { return violations.empty(); }
};

inline Matrix i_w(const EnvironmentSpec& env) {
    Matrix I = Matrix::Zero(env.size(), env.size());
    for (std::size_t k = 0; k < env.num_working(); ++k) I(k, k) = 1.0;
    return I;
}

// R_W = I_W R, zero rows on K_B.
inline Matrix r_w(const EnvironmentSpec& env) { return i_w(env) * env.R(); }

inline ValidationReport validate(const EnvironmentSpec& env) {
    ValidationReport rep;
    const auto n = env.size();
    const Matrix& V = env.V();
    const Matrix& R = env.R();
    for (std::size_t k = 0; k < n; ++k) {
        double rs = 0.0;
        bool range_ok = true;
        for (std::size_t m = 0; m < n; ++m) {
            rs += R(k, m);
            if (!(R(k, m) >= -EPS_STOCH && R(k, m) <= 1.0 + EPS_STOCH)) range_ok = false;
        }
        if (!range_ok || std::abs(rs - 1.0) > EPS_STOCH)
            rep.violations.push_back("R not stochastic: row '" + env.label(k) + "'");
    }
    for (std::size_t k = 0; k < n; ++k) {
        double rs = 0.0;
        bool off_ok = true;
        for (std::size_t m = 0; m < n; ++m) {
            rs += V(k, m);
            if (m != k && !(V(k, m) >= 0.0)) off_ok = false;
        }
        if (!off_ok || std::abs(rs) > EPS_STOCH) rep.violations.push_back("V not a generator: row '" + env.label(k) + "'");
    }
    if (env.num_working() == 0) rep.violations.push_back("K_W is empty");
    // Flow condition: every blocking state reaches K_W along positive V edges.
    const auto missing = states_not_reaching(FlowGraph::from_matrix(V.cwiseMax(0.0)), env.working_mask());
    if (!missing.empty()) {
        std::ostringstream os;
        os << "flow condition: no V-path to K_W from";
        for (auto k : missing) os << " '" << env.label(k) << "'";
        rep.violations.push_back(os.str());
    }
    return rep;
}

inline ValidationReport validate(const ModelSpec& model) {
    auto rep = validate(model.env);
    const auto& q = model.queue;
    if (q.mu.empty() || q.lambda.size() != q.mu.size() + 1) rep.violations.push_back("rate sequences: need n_tail >= 1");
    for (double x : q.lambda)
        if (!(x > 0.0)) rep.violations.push_back("arrival rate not positive");
    for (double x : q.mu)
        if (!(x > 0.0)) rep.violations.push_back("service rate not positive");
    return rep;
}

} // namespace envq
