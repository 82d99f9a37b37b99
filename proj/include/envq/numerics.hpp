#pragma once

#include "envq/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>
#include <vector>

namespace envq {

// Directed graph on matrix indices: edge (k,m) for k != m when |M(k,m)| > drop.
struct FlowGraph {
    std::vector<std::vector<std::size_t>> out;

    static FlowGraph from_matrix(const Matrix& M, double drop = 0.0) {
        FlowGraph g;
        const auto n = static_cast<std::size_t>(M.rows());
        g.out.resize(n);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t m = 0; m < n; ++m)
                if (k != m && std::abs(M(k, m)) > drop) g.out[k].push_back(m);
        return g;
    }

    std::size_t size() const { return out.size(); }
};

// Tarjan's algorithm, iterative. Components come out in reverse topological order.
inline std::vector<std::vector<std::size_t>> strongly_connected_components(const FlowGraph& g) {
    const std::size_t n = g.size();
    constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
    std::vector<std::size_t> index(n, unvisited), low(n, 0);
    std::vector<char> on_stack(n, 0);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> comps;
    std::size_t counter = 0;

    struct Frame {
        std::size_t v;
        std::size_t edge;
    };
    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != unvisited) continue;
        std::vector<Frame> call{{root, 0}};
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            Frame& f = call.back();
            if (f.edge < g.out[f.v].size()) {
                std::size_t w = g.out[f.v][f.edge++];
                if (index[w] == unvisited) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
                continue;
            }
            std::size_t v = f.v;
            call.pop_back();
            if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
            if (low[v] == index[v]) {
                std::vector<std::size_t> comp;
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp.push_back(w);
                } while (w != v);
                std::sort(comp.begin(), comp.end());
                comps.push_back(std::move(comp));
            }
        }
    }
    return comps;
}

// Communicating classes with no edge leaving them.
inline std::vector<std::vector<std::size_t>> closed_classes(const FlowGraph& g) {
    auto comps = strongly_connected_components(g);
    std::vector<std::size_t> comp_of(g.size());
    for (std::size_t c = 0; c < comps.size(); ++c)
        for (auto v : comps[c]) comp_of[v] = c;
    std::vector<std::vector<std::size_t>> closed;
    for (std::size_t c = 0; c < comps.size(); ++c) {
        bool leaves = false;
        for (auto v : comps[c])
            for (auto w : g.out[v])
                if (comp_of[w] != c) leaves = true;
        if (!leaves) closed.push_back(comps[c]);
    }
    std::sort(closed.begin(), closed.end());
    return closed;
}

// Period of an irreducible class of a stochastic matrix (self-loops count).
inline std::size_t class_period(const Matrix& P, const std::vector<std::size_t>& cls, double drop = 0.0) {
    const auto n = static_cast<std::size_t>(P.rows());
    std::vector<long> depth(n, -1);
    std::vector<char> member(n, 0);
    for (auto v : cls) member[v] = 1;
    std::queue<std::size_t> q;
    depth[cls.front()] = 0;
    q.push(cls.front());
    long g = 0;
    while (!q.empty()) {
        auto u = q.front();
        q.pop();
        for (auto v : cls) {
            if (!(P(u, v) > drop)) continue;
            if (depth[v] < 0) {
                depth[v] = depth[u] + 1;
                q.push(v);
            } else {
                g = std::gcd(g, std::abs(depth[u] + 1 - depth[v]));
            }
        }
    }
    return g == 0 ? 1 : static_cast<std::size_t>(g);
}

namespace detail {

// Grassmann-Taksar-Heyman elimination on the off-diagonal part of A.
// A must describe an irreducible chain (rates or transition probabilities).
inline RowVector gth(Matrix A) {
    const Eigen::Index n = A.rows();
    for (Eigen::Index k = n - 1; k >= 1; --k) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) s += A(k, j);
        if (!(s > 0.0)) throw Singular("GTH elimination hit a zero pivot: chain is reducible");
        for (Eigen::Index i = 0; i < k; ++i) A(i, k) /= s;
        for (Eigen::Index i = 0; i < k; ++i) {
            const double a = A(i, k);
            if (a == 0.0) continue;
            for (Eigen::Index j = 0; j < k; ++j)
                if (j != i) A(i, j) += a * A(k, j);
        }
    }
    RowVector x(n);
    x(0) = 1.0;
    for (Eigen::Index k = 1; k < n; ++k) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < k; ++i) s += x(i) * A(i, k);
        x(k) = s;
    }
    return x / x.sum();
}

inline RowVector stationary_on_closed_class(const Matrix& offdiag, double drop, const char* what) {
    const auto graph = FlowGraph::from_matrix(offdiag, drop);
    auto closed = closed_classes(graph);
    if (closed.size() != 1) {
        std::ostringstream os;
        os << what << ": " << closed.size() << " closed communicating classes";
        throw MultipleClosedClasses(os.str(), std::move(closed));
    }
    const auto& cls = closed.front();
    const auto m = static_cast<Eigen::Index>(cls.size());
    Matrix sub = Matrix::Zero(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b)
            if (a != b) {
                const double v = offdiag(cls[a], cls[b]);
                sub(a, b) = v > drop ? v : 0.0;
            }
    RowVector part = m == 1 ? RowVector::Ones(1) : gth(sub);
    RowVector x = RowVector::Zero(offdiag.rows());
    for (Eigen::Index a = 0; a < m; ++a) x(cls[a]) = part(a);
    x /= x.sum();
    return x;
}

} // namespace detail

// Stationary law of a generator. Zero outside the unique closed class.
inline RowVector stationary_of_generator(const Matrix& G) {
    if (G.rows() != G.cols()) throw InvalidModel("generator must be square");
    return detail::stationary_on_closed_class(G, 0.0, "generator");
}

// Stationary law of a stochastic matrix. Entries below 1e-14 are treated as
// structural zeros, since matrices here are often products of inverses.
inline RowVector stationary_of_stochastic(const Matrix& P) {
    if (P.rows() != P.cols()) throw InvalidModel("stochastic matrix must be square");
    return detail::stationary_on_closed_class(P, 1e-14, "stochastic matrix");
}

// Vertices with no path to any target vertex.
inline std::vector<std::size_t> states_not_reaching(const FlowGraph& g, const std::vector<bool>& target) {
    const std::size_t n = g.size();
    std::vector<std::vector<std::size_t>> in(n);
    for (std::size_t k = 0; k < n; ++k)
        for (auto m : g.out[k]) in[m].push_back(k);
    std::vector<char> reaches(n, 0);
    std::queue<std::size_t> q;
    for (std::size_t k = 0; k < n; ++k)
        if (target[k]) {
            reaches[k] = 1;
            q.push(k);
        }
    while (!q.empty()) {
        auto m = q.front();
        q.pop();
        for (auto k : in[m])
            if (!reaches[k]) {
                reaches[k] = 1;
                q.push(k);
            }
    }
    std::vector<std::size_t> rest;
    for (std::size_t k = 0; k < n; ++k)
        if (!reaches[k]) rest.push_back(k);
    return rest;
}

struct FlowVerdict {
    enum class Kind { InvertibleCertified, FlowViolated, HypothesesUnmet };
    Kind kind = Kind::InvertibleCertified;
    std::vector<std::size_t> witness; // K_B states that cannot reach K_W
    std::string reason;

    bool certified() const { return kind == Kind::InvertibleCertified; }
};

inline const char* to_string(FlowVerdict::Kind k) {
    switch (k) {
    case FlowVerdict::Kind::InvertibleCertified: return "invertible_certified";
    case FlowVerdict::Kind::FlowViolated: return "flow_violated";
    case FlowVerdict::Kind::HypothesesUnmet: return "hypotheses_unmet";
    }
    return "?";
}

// Certifies invertibility of M: strict row dominance on K_W, equality of
// |M_kk| and the off-row sum on K_B, and every K_B vertex reaching K_W
// along nonzero off-diagonal entries.
inline FlowVerdict check_flow_invertible(const Matrix& M, const std::vector<bool>& working) {
    FlowVerdict out;
    const auto n = static_cast<std::size_t>(M.rows());
    if (M.cols() != M.rows() || working.size() != n) {
        out.kind = FlowVerdict::Kind::HypothesesUnmet;
        out.reason = "dimension mismatch";
        return out;
    }
    for (std::size_t k = 0; k < n; ++k) {
        double off = 0.0;
        for (std::size_t m = 0; m < n; ++m)
            if (m != k) off += std::abs(M(k, m));
        const double d = std::abs(M(k, k));
        const double tol = EPS_STOCH * std::max(1.0, d);
        std::ostringstream os;
        if (working[k] && !(d - off > tol)) {
            os << "row " << k << " in K_W is not strictly diagonally dominant";
        } else if (!working[k] && std::abs(d - off) > tol) {
            os << "row " << k << " in K_B: |M_kk| differs from off-diagonal row sum";
        }
        if (!os.str().empty()) {
            out.kind = FlowVerdict::Kind::HypothesesUnmet;
            out.reason = os.str();
            return out;
        }
    }
    out.witness = states_not_reaching(FlowGraph::from_matrix(M), working);
    if (!out.witness.empty()) {
        out.kind = FlowVerdict::Kind::FlowViolated;
        out.reason = "blocking states with no path to a working state";
    }
    return out;
}

inline Matrix solve_linear(const Matrix& A, const Matrix& B) {
    if (A.rows() != A.cols() || A.rows() != B.rows()) throw InvalidModel("solve_linear: dimension mismatch");
    Eigen::FullPivLU<Matrix> lu(A);
    if (!lu.isInvertible()) throw Singular("solve_linear: matrix is rank deficient");
    Matrix X = lu.solve(B);
    const double scale = 1.0 + B.cwiseAbs().maxCoeff();
    const double res = (A * X - B).cwiseAbs().maxCoeff();
    if (!(res <= EPS_RES * scale * std::max(1.0, A.cwiseAbs().maxCoeff())))
        throw Singular("solve_linear: residual too large, matrix numerically singular");
    return X;
}

inline Vector solve_linear(const Matrix& A, const Vector& b) {
    return solve_linear(A, Matrix(b)).col(0);
}

// x with x A = b.
inline RowVector solve_left(const Matrix& A, const RowVector& b) {
    return solve_linear(Matrix(A.transpose()), Vector(b.transpose())).transpose();
}

inline Matrix inverse(const Matrix& A) {
    return solve_linear(A, Matrix(Matrix::Identity(A.rows(), A.cols())));
}

} // namespace envq
