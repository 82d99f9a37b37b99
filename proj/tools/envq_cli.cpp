// envq: command-line front end.
#include "envq/envq.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

using namespace envq;
namespace fs = std::filesystem;

namespace {

constexpr int EXIT_MODEL = 1;
constexpr int EXIT_VERDICT = 2;
constexpr int EXIT_USAGE = 64;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Params {
    std::string model_path;
    std::string builder;
    std::size_t r = 2, S = 5, Q = 4, N = 1;
    double lambda = 1.0;
    std::vector<double> mu{2.0};
    std::vector<double> nu{3.0};
    double beta = 1.0;
    std::vector<double> b{1.0};
    double alpha = 1.0, a = 1.0, s = 1.0;
    double nu_m = 1.0, nu_r = 1.0;
    std::optional<double> slope;
    std::optional<std::size_t> capacity;
};

struct ServiceFlags {
    std::string kind;
    double d = 1.0, rate = 1.0;
    std::size_t k = 1;
    std::vector<double> weights;
};

struct Common {
    std::string out = "envq_out";
    std::uint64_t seed = 1;
    bool strict = false;
    double tol = EPS_PRODUCT_FORM;
    double tail = 1e-9;
};

void add_rate_options(CLI::App* c, Params& p) {
    c->add_option("--r", p.r, "reorder point");
    c->add_option("--S", p.S, "max stock (r,S)");
    c->add_option("--Q", p.Q, "order size (r,Q)");
    c->add_option("--N", p.N, "tandem buffer or maintenance threshold");
    c->add_option("--lambda", p.lambda, "arrival rate");
    c->add_option("--mu", p.mu, "service rates mu(1..)")->expected(1, -1);
    c->add_option("--nu", p.nu, "replenishment / second-station / failure rates")->expected(1, -1);
    c->add_option("--beta", p.beta, "phase rate, or sensor availability up-rate");
    c->add_option("--b", p.b, "phase weights b(1..L)")->expected(1, -1);
    c->add_option("--alpha", p.alpha, "sensor availability down-rate");
    c->add_option("--a", p.a, "sensor active -> sleep rate");
    c->add_option("--s", p.s, "sensor sleep -> active rate");
    c->add_option("--nu-m", p.nu_m, "maintenance completion rate");
    c->add_option("--nu-r", p.nu_r, "repair completion rate");
    c->add_option("--slope", p.slope, "failure rates nu_k = slope*k");
    c->add_option("--capacity", p.capacity, "waiting room N (levels 0..N+1)");
}

void add_model_options(CLI::App* c, Params& p) {
    auto* file = c->add_option("--model", p.model_path, "model file (JSON)")->check(CLI::ExistingFile);
    auto* bld = c->add_option("--builder", p.builder, "rs | rq | rs-phase | rq-phase | tandem | maintenance | sensor")
                    ->check(CLI::IsMember({"rs", "rq", "rs-phase", "rq-phase", "tandem", "maintenance", "sensor"}));
    file->excludes(bld);
    add_rate_options(c, p);
}

void add_common(CLI::App* c, Common& o) {
    c->add_option("--out", o.out, "output directory");
    c->add_option("--seed", o.seed, "random seed")->envname("ENVQ_SEED");
    c->add_flag("--strict", o.strict, "exit 2 on NotProductForm / NotErgodic");
    c->add_option("--tol", o.tol, "product-form residual tolerance");
    c->add_option("--tail", o.tail, "tail mass for reported levels");
}

void add_service_options(CLI::App* c, ServiceFlags& f) {
    c->add_option("--service", f.kind, "det | exp | erlang | mixture")
        ->check(CLI::IsMember({"det", "exp", "erlang", "mixture"}));
    c->add_option("--d", f.d, "deterministic duration");
    c->add_option("--rate", f.rate, "exponential / phase rate");
    c->add_option("--k", f.k, "Erlang phases");
    c->add_option("--weights", f.weights, "mixture weights")->expected(1, -1);
}

std::optional<ServiceLaw> service_law(const ServiceFlags& f) {
    if (f.kind.empty()) return std::nullopt;
    if (f.kind == "det") return ServiceLaw::deterministic(f.d);
    if (f.kind == "exp") return ServiceLaw::exponential(f.rate);
    if (f.kind == "erlang") return ServiceLaw::erlang(f.k, f.rate);
    return ServiceLaw::phase_mixture(f.weights, f.rate);
}

MaintenanceSpec maintenance_spec(const Params& p) {
    MaintenanceSpec s;
    s.lambda = p.lambda;
    s.mu = p.mu;
    s.nu = p.slope ? MaintenanceSpec::linear_rates(*p.slope, std::max<std::size_t>(p.N, 1) + 1) : p.nu;
    s.nu_m = p.nu_m;
    s.nu_r = p.nu_r;
    s.N = p.N;
    return s;
}

// Model plus closed-form theta where the builder has one.
std::pair<ModelSpec, std::optional<RowVector>> load(const Params& p) {
    if (p.model_path.empty() == p.builder.empty()) throw UsageError("exactly one of --model and --builder is required");
    std::pair<ModelSpec, std::optional<RowVector>> out;
    auto take = [&](BuiltModel b) {
        out.first = std::move(b.model);
        out.second = std::move(b.theta);
    };
    if (!p.model_path.empty()) out.first = load_model(p.model_path);
    else if (p.builder == "rs") take(build_rs(p.r, p.S, p.lambda, p.mu, p.nu));
    else if (p.builder == "rq") take(build_rq(p.r, p.Q, p.lambda, p.mu, p.nu));
    else if (p.builder == "rs-phase") take(build_rs_phase(PhaseLeadTimeSpec{p.beta, p.b, p.r, p.S}, p.lambda, p.mu));
    else if (p.builder == "rq-phase") out.first = build_rq_phase(PhaseLeadTimeSpec{p.beta, p.b, p.r, p.Q}, p.lambda, p.mu);
    else if (p.builder == "tandem") {
        std::vector<double> nu{0.0}; // --nu lists nu_1..nu_{N+1}, or one common rate
        if (p.nu.size() == 1) nu.resize(p.N + 2, p.nu.front());
        else nu.insert(nu.end(), p.nu.begin(), p.nu.end());
        take(build_tandem(p.N, p.lambda, p.mu, nu));
    } else if (p.builder == "maintenance") take(build_maintenance(maintenance_spec(p)));
    else take(build_sensor_node(p.lambda, p.mu.front(), p.alpha, p.beta, p.a, p.s));
    if (p.capacity) out.first.queue.capacity = *p.capacity;
    return out;
}

fs::path out_file(const Common& o, const std::string& name) {
    fs::create_directories(o.out);
    return fs::path(o.out) / name;
}

void write_json(const Common& o, const std::string& name, const json& j) {
    std::ofstream f(out_file(o, name));
    if (!f) throw Error("cannot write '" + name + "'");
    f << j.dump(2) << '\n';
}

json labelled(const EnvironmentSpec& env, const RowVector& x) {
    json j = json::object();
    for (std::size_t d = 0; d < env.size(); ++d) {
        const auto k = env.internal_index(d);
        j[env.label(k)] = x(static_cast<Eigen::Index>(k));
    }
    return j;
}

// Environment vector in declared order.
void write_env_vector(const Common& o, const std::string& name, const EnvironmentSpec& env, const RowVector& x) {
    TableWriter t(out_file(o, name).string());
    for (std::size_t d = 0; d < env.size(); ++d) {
        const auto k = env.internal_index(d);
        t.row("", env.label(k), x(static_cast<Eigen::Index>(k)));
    }
}

void print_env_vector(const char* title, const EnvironmentSpec& env, const RowVector& x) {
    std::printf("%s\n", title);
    for (std::size_t d = 0; d < env.size(); ++d) {
        const auto k = env.internal_index(d);
        std::printf("  %-10s %.12g\n", env.label(k).c_str(), x(static_cast<Eigen::Index>(k)));
    }
}

void write_cells(const Common& o, const std::string& name, const EnvironmentSpec& env, const Matrix& M) {
    TableWriter t(out_file(o, name).string());
    for (Eigen::Index n = 0; n < M.rows(); ++n)
        for (std::size_t d = 0; d < env.size(); ++d) {
            const auto k = env.internal_index(d);
            t.row(std::to_string(n), env.label(k), M(n, static_cast<Eigen::Index>(k)));
        }
}

int verdict_exit(const Common& o, Verdict v) { return (o.strict && v != Verdict::ProductForm) ? EXIT_VERDICT : 0; }

int cmd_validate(const Params& p, const Common& o) {
    const auto model = load(p).first;
    const auto rep = validate(model);
    write_json(o, "validate.json", json{{"accepted", rep.accepted()}, {"violations", rep.violations}});
    if (rep.accepted()) {
        std::printf("model '%s': accepted\n", model.name.c_str());
        return 0;
    }
    std::printf("model '%s': %zu violation(s)\n", model.name.c_str(), rep.violations.size());
    for (const auto& v : rep.violations) std::printf("  - %s\n", v.c_str());
    return EXIT_MODEL;
}

int report_solution(const ModelSpec& model, const ProductFormSolution& sol, const std::optional<RowVector>& closed,
                    const Common& o, const std::string& stem) {
    json j{{"verdict", to_string(sol.verdict)}, {"model", model.name}, {"reason", sol.reason}};
    std::printf("verdict: %s\n", to_string(sol.verdict));
    if (!sol.reason.empty()) std::printf("reason: %s\n", sol.reason.c_str());
    if (sol.ok()) {
        j["C"] = sol.C;
        j["rho_tail"] = sol.rho_tail;
        j["theta"] = labelled(model.env, sol.theta);
        print_env_vector("theta:", model.env, sol.theta);
        write_env_vector(o, stem + "_theta.csv", model.env, sol.theta);
        const std::size_t last = truncation_level(sol, model.queue.n_tail(), o.tail);
        TableWriter xi(out_file(o, stem + "_xi.csv").string());
        for (std::size_t n = 0; n <= last; ++n) xi.row(std::to_string(n), "", sol.xi(n));
        json diag{{"levels_written", last + 1}, {"tail_mass", sol.tail_mass(last)}};
        std::printf("C = %.12g, levels 0..%zu written (tail mass %.3g)\n", sol.C, last, sol.tail_mass(last));
        if (closed) {
            const double gap = (sol.theta - *closed).cwiseAbs().maxCoeff();
            diag["closed_form_max_diff"] = gap;
            std::printf("closed form vs solver: max diff %.3g\n", gap);
        }
        j["diagnostics"] = diag;
    }
    write_json(o, stem + ".json", j);
    return verdict_exit(o, sol.verdict);
}

int cmd_solve(const Params& p, const Common& o) {
    const auto [model, closed] = load(p);
    const auto rep = validate(model);
    if (!rep.accepted()) throw InvalidModel(rep.violations.front());
    return report_solution(model, solve_product_form(model, o.tol), closed, o, "solve");
}

int cmd_solve_finite(const Params& p, const Common& o) {
    const auto model = load(p).first;
    if (!model.queue.capacity) throw UsageError("solve-finite needs a finite capacity (model file or --capacity)");
    const auto rep = validate(model);
    if (!rep.accepted()) throw InvalidModel(rep.violations.front());
    return report_solution(model, solve_product_form_finite(model, o.tol), std::nullopt, o, "solve_finite");
}

int cmd_embedded(const Params& p, const Common& o) {
    const auto model = load(p).first;
    const auto rep = validate(model);
    if (!rep.accepted()) throw InvalidModel(rep.violations.front());
    const auto ct = solve_product_form(model, o.tol);
    if (!ct.ok()) {
        write_json(o, "embedded.json", json{{"verdict", to_string(ct.verdict)}, {"reason", ct.reason}});
        std::printf("verdict: %s\nreason: %s\n", to_string(ct.verdict), ct.reason.c_str());
        return verdict_exit(o, ct.verdict);
    }
    const auto sol = solve_embedded(model);
    print_env_vector("theta_hat (after departures):", model.env, sol.theta_hat);
    write_env_vector(o, "embedded_theta_hat.csv", model.env, sol.theta_hat);
    auto names = [&](const std::vector<std::size_t>& ks) {
        std::vector<std::string> v;
        for (auto k : ks) v.push_back(model.env.label(k));
        return v;
    };
    write_json(o, "embedded.json",
               json{{"verdict", to_string(ct.verdict)},
                    {"theta_hat", labelled(model.env, sol.theta_hat)},
                    {"theta", labelled(model.env, sol.theta)},
                    {"C", ct.C},
                    {"diagnostics", {{"L", names(sol.L)}, {"inessential", names(sol.inessential)}, {"period", sol.period}}}});
    std::printf("period %zu, inessential states: %zu\n", sol.period, sol.inessential.size());
    return 0;
}

int cmd_mg1(const Params& p, const ServiceFlags& f, const Common& o) {
    const auto model = load(p).first;
    const auto law = service_law(f);
    if (!law) throw UsageError("mg1 needs --service");
    if (!model.queue.constant_arrivals()) throw InvalidModel("mg1 needs a constant arrival rate");
    const auto sol = mg1_product_form(HessenbergKernel::from_law(*law, model.queue.lambda.front()), model.env);
    print_env_vector("theta_hat:", model.env, sol.theta_hat);
    write_env_vector(o, "mg1_theta_hat.csv", model.env, sol.theta_hat);
    TableWriter xi(out_file(o, "mg1_xi_hat.csv").string());
    for (std::size_t n = 0; n < sol.xi_hat.xi.size(); ++n) xi.row(std::to_string(n), "", sol.xi_hat(n));
    std::printf("xi_hat(0..2): %.12g %.12g %.12g\ntensor residual %.3g\n", sol.xi_hat(0), sol.xi_hat(1), sol.xi_hat(2),
                sol.residual);
    write_json(o, "mg1.json",
               json{{"verdict", "ProductForm"},
                    {"theta_hat", labelled(model.env, sol.theta_hat)},
                    {"diagnostics", {{"residual", sol.residual}, {"levels", sol.xi_hat.xi.size()}}}});
    return 0;
}

int cmd_counterexample(double lambda, double mu, double nu, const Common& o) {
    const auto r = md1_inventory_counterexample(lambda, mu, nu);
    const double rank_one = rank_one_residual(counterexample_stationary(lambda, mu, nu, 60));
    std::printf("pi(0,1)/pi(0,2) = %.3f\npi(1,1)/pi(1,2) = %.3f\n", r.ratio_level0, r.ratio_level1);
    std::printf("%s\n", r.product_form_refuted ? "product form refuted" : "ratios agree");
    write_json(o, "counterexample.json",
               json{{"verdict", r.product_form_refuted ? "NotProductForm" : "Undecided"},
                    {"ratio_level0", r.ratio_level0},
                    {"ratio_level1", r.ratio_level1},
                    {"diagnostics", {{"rank_one_residual", rank_one}}}});
    return (o.strict && r.product_form_refuted) ? EXIT_VERDICT : 0;
}

int cmd_optimize(const Params& p, double c_m, double c_r, double c_b, double c_w, std::size_t n_min, std::size_t n_max,
                 const Common& o) {
    auto s = maintenance_spec(p);
    if (p.slope) s.nu = MaintenanceSpec::linear_rates(*p.slope, n_max + 1);
    s.c_m = c_m;
    s.c_r = c_r;
    s.c_b = c_b;
    s.c_w = c_w;
    const auto c = optimize_maintenance(s, n_min, n_max);
    {
        std::ofstream f(out_file(o, "g.csv"));
        f << "N,g\n";
        for (std::size_t i = 0; i < c.N.size(); ++i) f << c.N[i] << ',' << format_number(c.g[i]) << '\n';
    }
    const double best = c.g[c.best_N - n_min];
    std::printf("argmin g(N) over %zu..%zu: N = %zu, g = %.12g\n", n_min, n_max, c.best_N, best);
    write_json(o, "optimize_maintenance.json", json{{"best_N", c.best_N}, {"g_min", best}, {"N_range", {n_min, n_max}}});
    return 0;
}

int cmd_simulate(const Params& p, const ServiceFlags& f, std::size_t events, const Common& o) {
    const auto model = load(p).first;
    const auto rep = validate(model);
    if (!rep.accepted()) throw InvalidModel(rep.violations.front());
    SimOptions opt;
    if (auto law = service_law(f)) opt.service = ServiceSpec{{*law}, {}};
    const auto est = simulate(model, events, o.seed, opt);
    write_cells(o, "sim_occupancy.csv", model.env, est.occupancy);
    write_cells(o, "sim_occupancy_se.csv", model.env, est.occupancy_se);
    write_cells(o, "sim_embedded.csv", model.env, est.embedded);
    write_cells(o, "sim_embedded_se.csv", model.env, est.embedded_se);
    RowVector env_mean, env_se;
    est.embedded_env_marginal(env_mean, env_se);
    print_env_vector("environment at departures:", model.env, env_mean);
    std::printf("seed %llu, %zu events, %zu departures after warm-up\n", static_cast<unsigned long long>(est.seed),
                est.events, est.departures);
    write_json(o, "simulate.json",
               json{{"seed", est.seed},
                    {"horizon", est.horizon},
                    {"departures", est.departures},
                    {"batches", opt.batches},
                    {"embedded_env", labelled(model.env, env_mean)},
                    {"embedded_env_se", labelled(model.env, env_se)}});
    return 0;
}

int cmd_check_invertible(const Params& p, const std::string& matrix_path, const Common& o) {
    Matrix M;
    std::vector<bool> working;
    std::vector<std::string> labels;
    if (!matrix_path.empty()) {
        if (!p.model_path.empty() || !p.builder.empty()) throw UsageError("give either --matrix or a model source");
        std::ifstream in(matrix_path);
        if (!in) throw InvalidModel("cannot open '" + matrix_path + "'");
        json j;
        try {
            in >> j;
            const auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
            const auto n = static_cast<Eigen::Index>(rows.size());
            M.resize(n, n);
            for (Eigen::Index a = 0; a < n; ++a) {
                if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(a)].size()) != n)
                    throw InvalidModel("matrix is not square");
                for (Eigen::Index b = 0; b < n; ++b) M(a, b) = rows[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            }
            working = j.at("working").get<std::vector<bool>>();
        } catch (const json::exception& e) {
            throw InvalidModel(std::string("matrix file: ") + e.what());
        }
        if (working.size() != static_cast<std::size_t>(M.rows())) throw InvalidModel("'working' length does not match");
        for (std::size_t i = 0; i < working.size(); ++i) labels.push_back(std::to_string(i));
    } else {
        // lambda(0) I_W - V of the model
        const auto model = load(p).first;
        working = model.env.working_mask();
        M = -model.env.V();
        for (std::size_t k = 0; k < model.env.num_working(); ++k)
            M(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) += model.queue.arrival(0);
        labels = model.env.labels();
    }
    const auto v = check_flow_invertible(M, working);
    std::vector<std::string> witness;
    for (auto k : v.witness) witness.push_back(labels[k]);
    std::printf("%s\n", to_string(v.kind));
    if (!v.reason.empty()) std::printf("reason: %s\n", v.reason.c_str());
    if (!witness.empty()) {
        std::printf("witness:");
        for (const auto& w : witness) std::printf(" %s", w.c_str());
        std::printf("\n");
    }
    write_json(o, "check_invertible.json", json{{"verdict", to_string(v.kind)}, {"witness", witness}, {"reason", v.reason}});
    return (o.strict && !v.certified()) ? EXIT_VERDICT : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"envq: queues in a random environment with departure-triggered jumps"};
    app.require_subcommand(1);
    Params p;
    Common o;
    ServiceFlags f;
    std::size_t events = 1000000, n_min = 1, n_max = 100;
    double c_m = 1.0, c_r = 2.0, c_b = 1.0, c_w = 0.0;
    double cx_lambda = 1.0, cx_mu = 2.0, cx_nu = 3.0;
    std::string matrix_path;

    auto* validate_cmd = app.add_subcommand("validate", "structural checks of a model");
    auto* solve = app.add_subcommand("solve", "continuous-time product form");
    auto* solve_finite = app.add_subcommand("solve-finite", "product form with a finite waiting room");
    auto* embedded = app.add_subcommand("embedded", "departure-epoch environment law");
    auto* mg1 = app.add_subcommand("mg1", "interference-free M/G/1 tensor product form");
    auto* sim = app.add_subcommand("simulate", "event-driven simulation");
    auto* check = app.add_subcommand("check-invertible", "flow-condition invertibility certificate");
    for (auto* c : {validate_cmd, solve, solve_finite, embedded, mg1, sim, check}) {
        add_model_options(c, p);
        add_common(c, o);
    }
    add_service_options(mg1, f);
    add_service_options(sim, f);
    sim->add_option("--events", events, "horizon in events")->check(CLI::PositiveNumber);
    check->add_option("--matrix", matrix_path, "JSON {matrix, working}")->check(CLI::ExistingFile);

    auto* cx = app.add_subcommand("counterexample", "M/D/1 with a (1,2) inventory: would-be product-form ratios");
    cx->add_option("--lambda", cx_lambda);
    cx->add_option("--mu", cx_mu);
    cx->add_option("--nu", cx_nu);
    add_common(cx, o);

    auto* opt = app.add_subcommand("optimize-maintenance", "g(N) curve and its argmin");
    add_rate_options(opt, p);
    add_common(opt, o);
    opt->add_option("--c-m", c_m, "maintenance cost");
    opt->add_option("--c-r", c_r, "repair cost");
    opt->add_option("--c-b", c_b, "blocking cost");
    opt->add_option("--c-w", c_w, "waiting cost (does not move the argmin)");
    opt->add_option("--n-min", n_min);
    opt->add_option("--n-max", n_max);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return EXIT_USAGE;
    }

    try {
        if (*validate_cmd) return cmd_validate(p, o);
        if (*solve) return cmd_solve(p, o);
        if (*solve_finite) return cmd_solve_finite(p, o);
        if (*embedded) return cmd_embedded(p, o);
        if (*mg1) return cmd_mg1(p, f, o);
        if (*sim) return cmd_simulate(p, f, events, o);
        if (*check) return cmd_check_invertible(p, matrix_path, o);
        if (*cx) return cmd_counterexample(cx_lambda, cx_mu, cx_nu, o);
        if (*opt) return cmd_optimize(p, c_m, c_r, c_b, c_w, n_min, n_max, o);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n" << app.help();
        return EXIT_USAGE;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return EXIT_MODEL;
    }
    return EXIT_USAGE;
}
