#pragma once

#include "envq/env_core.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace envq {

using json = nlohmann::json;

namespace detail {

inline std::string label_of(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    throw InvalidModel("state labels must be strings or integers");
}

inline std::vector<double> rate_list(const json& j, const char* key) {
    if (j.is_number()) return {j.get<double>()};
    if (j.is_array()) return j.get<std::vector<double>>();
    throw InvalidModel(std::string("'") + key + "' must be a number or an array of numbers");
}

// Dense row-major square matrix or a list of {from, to, value} objects.
inline Matrix matrix_of(const json& j, const std::vector<std::string>& labels, const char* key, bool complete_diag) {
    const auto n = static_cast<Eigen::Index>(labels.size());
    Matrix M = Matrix::Zero(n, n);
    if (!j.is_array()) throw InvalidModel(std::string("'") + key + "' must be an array");
    const bool sparse = !j.empty() && j.front().is_object();
    if (!sparse) {
        if (static_cast<Eigen::Index>(j.size()) != n) throw InvalidModel(std::string("'") + key + "' has wrong row count");
        for (Eigen::Index a = 0; a < n; ++a) {
            const auto& row = j[static_cast<std::size_t>(a)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
                throw InvalidModel(std::string("'") + key + "' has a row of wrong length");
            for (Eigen::Index b = 0; b < n; ++b) M(a, b) = row[static_cast<std::size_t>(b)].get<double>();
        }
        return M;
    }
    auto index = [&](const json& l) {
        const auto s = label_of(l);
        for (Eigen::Index i = 0; i < n; ++i)
            if (labels[static_cast<std::size_t>(i)] == s) return i;
        throw InvalidModel(std::string("'") + key + "' refers to unknown state '" + s + "'");
    };
    for (const auto& t : j) {
        const double v = t.contains("rate") ? t.at("rate").get<double>() : t.at("value").get<double>();
        M(index(t.at("from")), index(t.at("to"))) += v;
    }
    if (complete_diag)
        for (Eigen::Index a = 0; a < n; ++a) {
            M(a, a) = 0.0;
            M(a, a) = -M.row(a).sum();
        }
    return M;
}

} // namespace detail

// Keys: name, states, blocking, V, R, lambda, mu, capacity.
inline ModelSpec model_from_json(const json& j) {
    try {
        ModelSpec m;
        m.name = j.value("name", std::string("model"));
        std::vector<std::string> labels;
        for (const auto& s : j.at("states")) labels.push_back(detail::label_of(s));
        std::vector<std::string> blocking;
        if (j.contains("blocking"))
            for (const auto& s : j.at("blocking")) blocking.push_back(detail::label_of(s));
        const Matrix V = detail::matrix_of(j.at("V"), labels, "V", true);
        const Matrix R = detail::matrix_of(j.at("R"), labels, "R", false);
        m.env = EnvironmentSpec::make(labels, blocking, V, R);
        std::optional<std::size_t> cap;
        if (j.contains("capacity") && j.at("capacity").is_number_integer()) {
            const auto c = j.at("capacity").get<long long>();
            if (c < 0) throw InvalidModel("capacity must be nonnegative");
            cap = static_cast<std::size_t>(c);
        }
        m.queue = QueueSpec::make(detail::rate_list(j.at("lambda"), "lambda"), detail::rate_list(j.at("mu"), "mu"), cap);
        return m;
    } catch (const json::exception& e) {
        throw InvalidModel(std::string("model file: ") + e.what());
    }
}

inline ModelSpec load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidModel("cannot open model file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvalidModel("model file '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

// Serializes in internal order; blocking states listed explicitly.
inline json model_to_json(const ModelSpec& m) {
    json j;
    j["name"] = m.name;
    j["states"] = m.env.labels();
    std::vector<std::string> blocking;
    for (std::size_t k = m.env.num_working(); k < m.env.size(); ++k) blocking.push_back(m.env.label(k));
    j["blocking"] = blocking;
    auto dense = [](const Matrix& M) {
        json rows = json::array();
        for (Eigen::Index a = 0; a < M.rows(); ++a) {
            json row = json::array();
            for (Eigen::Index b = 0; b < M.cols(); ++b) row.push_back(M(a, b));
            rows.push_back(row);
        }
        return rows;
    };
    j["V"] = dense(m.env.V());
    j["R"] = dense(m.env.R());
    j["lambda"] = m.queue.lambda;
    j["mu"] = m.queue.mu;
    if (m.queue.capacity) j["capacity"] = *m.queue.capacity;
    else j["capacity"] = "infinite";
    return j;
}

inline std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Rows of (level, state, value); empty level or state for one-sided vectors.
class TableWriter {
public:
    explicit TableWriter(const std::string& path) : out_(path) {
        if (!out_) throw Error("cannot write '" + path + "'");
        out_ << "level,state,value\n";
    }
    void row(const std::string& level, const std::string& state, double v) {
        out_ << level << ',' << state << ',' << format_number(v) << '\n';
    }

private:
    std::ofstream out_;
};

} // namespace envq
