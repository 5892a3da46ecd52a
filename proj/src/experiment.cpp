#include "crl/experiment.hpp"

#include "crl/lp.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

namespace crl {

using nlohmann::json;

std::string_view to_string(SolverSelection solver) {
    switch (solver) {
        case SolverSelection::Exact: return "exact";
        case SolverSelection::Flow: return "flow";
        case SolverSelection::Sgda: return "sgda";
        case SolverSelection::DemoBilinear: return "demo-bilinear";
        case SolverSelection::All: return "all";
    }
    return "all";
}

SolverSelection parse_solver(std::string_view text) {
    for (SolverSelection s : {SolverSelection::Exact, SolverSelection::Flow, SolverSelection::Sgda,
                              SolverSelection::DemoBilinear, SolverSelection::All})
        if (to_string(s) == text) return s;
    throw ConfigError("solver", "must be one of exact|flow|sgda|demo-bilinear|all, got \"" + std::string(text) + "\"");
}

namespace {

// -- strict JSON section reader -------------------------------------------------

class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(path_, "expected an object");
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json* child(const std::string& key) {
        seen_.insert(key);
        auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    double number(const std::string& key, double fallback) {
        const json* v = child(key);
        if (!v) return fallback;
        if (!v->is_number()) throw ConfigError(key_path(key), "expected a number");
        return v->get<double>();
    }

    std::uint64_t count(const std::string& key, std::uint64_t fallback) {
        const json* v = child(key);
        if (!v) return fallback;
        if (v->is_number_unsigned()) return v->get<std::uint64_t>();
        if (v->is_number_float()) {
            const double d = v->get<double>();
            if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
        }
        throw ConfigError(key_path(key), "expected a non-negative integer");
    }

    bool flag(const std::string& key, bool fallback) {
        const json* v = child(key);
        if (!v) return fallback;
        if (!v->is_boolean()) throw ConfigError(key_path(key), "expected true or false");
        return v->get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback) {
        const json* v = child(key);
        if (!v) return fallback;
        if (!v->is_string()) throw ConfigError(key_path(key), "expected a string");
        return v->get<std::string>();
    }

    Vec numbers(const std::string& key, const Vec& fallback) {
        const json* v = child(key);
        if (!v) return fallback;
        if (!v->is_array()) throw ConfigError(key_path(key), "expected an array of numbers");
        Vec out;
        for (const auto& x : *v) {
            if (!x.is_number()) throw ConfigError(key_path(key), "expected an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    void finish() const {
        for (const auto& [key, value] : node_.items())
            if (!seen_.count(key)) throw ConfigError(key_path(key), "unknown key");
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

QueueConfig parse_queue(const json& node) {
    Section sec(node, "queue");
    QueueConfig q;
    const std::uint64_t buffer = sec.count("L", q.buffer);
    if (buffer < 1) throw ConfigError("queue.L", "must be at least 1");
    q.buffer = static_cast<std::size_t>(buffer);
    q.service_levels = sec.numbers("service_levels", q.service_levels);
    q.flow_levels = sec.numbers("flow_levels", q.flow_levels);
    q.h1 = sec.number("h1", q.h1);
    q.h2 = sec.number("h2", q.h2);
    q.gamma = sec.number("gamma", q.gamma);
    try {
        q.action_mode = parse_action_mode(sec.text("action_mode", std::string(to_string(q.action_mode))));
    } catch (const ModelError& e) {
        throw ConfigError("queue.action_mode", e.what());
    }
    if (const json* reward = sec.child("reward")) {
        Section rs(*reward, "queue.reward");
        q.shape.r_slope = rs.number("r_slope", q.shape.r_slope);
        q.shape.r_intercept = rs.number("r_intercept", q.shape.r_intercept);
        q.shape.g1_slope = rs.number("g1_slope", q.shape.g1_slope);
        q.shape.g1_intercept = rs.number("g1_intercept", q.shape.g1_intercept);
        q.shape.g2_slope = rs.number("g2_slope", q.shape.g2_slope);
        q.shape.g2_intercept = rs.number("g2_intercept", q.shape.g2_intercept);
        rs.finish();
    }
    sec.finish();
    try {
        q.validate();
    } catch (const ModelError& e) {
        throw ConfigError("queue", e.what());
    }
    return q;
}

void validate_positive(double value, const char* key) {
    if (!(value > 0.0) || !std::isfinite(value)) throw ConfigError(key, "must be a positive finite number");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    Section top(root, "");
    ExperimentConfig cfg;

    const json* model = top.child("model");
    const json* queue = top.child("queue");
    if (model && queue) throw ConfigError("model", "give either a model section or a queue section, not both");
    if (model) {
        Section ms(*model, "model");
        const std::string path = ms.text("path", "");
        if (path.empty()) throw ConfigError("model.path", "is required");
        ms.finish();
        std::filesystem::path p(path);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        if (!std::filesystem::exists(p)) throw ConfigError("model.path", "file does not exist: " + p.string());
        cfg.model_path = p;
    } else {
        cfg.queue = queue ? parse_queue(*queue) : QueueConfig{};
    }

    cfg.solver = parse_solver(top.text("solver", "all"));
    cfg.psi_cap = top.number("psi_cap", cfg.psi_cap);
    validate_positive(cfg.psi_cap, "psi_cap");

    if (const json* flow = top.child("flow")) {
        Section fs(*flow, "flow");
        cfg.flow.rho = fs.number("rho", cfg.flow.rho);
        cfg.flow.step = fs.number("step", cfg.flow.step);
        cfg.flow.horizon = fs.number("horizon", cfg.flow.horizon);
        cfg.flow.tol = fs.number("tol", cfg.flow.tol);
        cfg.flow.record_every = static_cast<std::size_t>(fs.count("record_every", cfg.flow.record_every));
        fs.finish();
    }
    validate_positive(cfg.flow.rho, "flow.rho");
    validate_positive(cfg.flow.step, "flow.step");
    validate_positive(cfg.flow.horizon, "flow.horizon");
    validate_positive(cfg.flow.tol, "flow.tol");
    if (cfg.flow.record_every == 0) throw ConfigError("flow.record_every", "must be positive");
    if (!(cfg.flow.step < cfg.flow.rho / 2.0)) throw ConfigError("flow.step", "must be smaller than flow.rho / 2");

    if (const json* sgda = top.child("sgda")) {
        Section ss(*sgda, "sgda");
        cfg.sgda.schedule.a0 = ss.number("a0", cfg.sgda.schedule.a0);
        cfg.sgda.schedule.n0 = ss.number("n0", cfg.sgda.schedule.n0);
        cfg.sgda.schedule.kappa = ss.number("kappa", cfg.sgda.schedule.kappa);
        cfg.sgda.rho = ss.number("rho", cfg.sgda.rho);
        cfg.sgda.budget = ss.count("budget", cfg.sgda.budget);
        cfg.sgda.stride = ss.count("stride", cfg.sgda.stride);
        cfg.sgda.seed = ss.count("seed", cfg.sgda.seed);
        cfg.sgda.sweep = ss.count("sweep", cfg.sgda.sweep);
        cfg.sgda.literal_lambda_hat = ss.flag("literal_lambda_hat", cfg.sgda.literal_lambda_hat);
        ss.finish();
    }
    validate_positive(cfg.sgda.schedule.a0, "sgda.a0");
    if (!(cfg.sgda.schedule.n0 >= 1.0)) throw ConfigError("sgda.n0", "must be at least 1");
    if (!(cfg.sgda.schedule.kappa > 0.5 && cfg.sgda.schedule.kappa <= 1.0))
        throw ConfigError("sgda.kappa",
                          "must lie in (0.5, 1]: step sizes need a divergent sum and a convergent sum of squares");
    validate_positive(cfg.sgda.rho, "sgda.rho");
    if (cfg.sgda.stride == 0) throw ConfigError("sgda.stride", "must be positive");
    if (cfg.sgda.sweep == 0) throw ConfigError("sgda.sweep", "must be positive");

    if (const json* output = top.child("output")) {
        Section os(*output, "output");
        const std::string dir = os.text("dir", cfg.output_dir.string());
        if (dir.empty()) throw ConfigError("output.dir", "must not be empty");
        cfg.output_dir = dir;
        os.finish();
    }
    top.finish();
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot read config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path.parent_path());
}

std::string config_reference() {
    const ExperimentConfig d;
    const QueueConfig q;
    auto levels = [](const Vec& v) {
        std::ostringstream out;
        out << "[";
        for (std::size_t k = 0; k < v.size(); ++k) out << (k ? ", " : "") << v[k];
        out << "]";
        return out.str();
    };
    std::ostringstream out;
    out << "Config file (JSON). Unknown keys are rejected. Defaults:\n"
        << "  model.path            CMDP file (alternative to the queue section)\n"
        << "  queue.L               " << q.buffer << "\n"
        << "  queue.service_levels  " << levels(q.service_levels) << "\n"
        << "  queue.flow_levels     " << levels(q.flow_levels) << "\n"
        << "  queue.h1, queue.h2    " << q.h1 << ", " << q.h2 << "\n"
        << "  queue.gamma           " << q.gamma << "\n"
        << "  queue.action_mode     " << to_string(q.action_mode) << " (product|paired)\n"
        << "  queue.reward          r_slope " << q.shape.r_slope << ", r_intercept " << q.shape.r_intercept
        << ", g1_slope " << q.shape.g1_slope << ", g1_intercept " << q.shape.g1_intercept << ", g2_slope "
        << q.shape.g2_slope << ", g2_intercept " << q.shape.g2_intercept << "\n"
        << "  solver                " << to_string(d.solver) << " (exact|flow|sgda|demo-bilinear|all)\n"
        << "  psi_cap               " << d.psi_cap << " (slack used when there are no constraints)\n"
        << "  flow.rho              " << d.flow.rho << "\n"
        << "  flow.step             " << d.flow.step << " (must be < rho/2)\n"
        << "  flow.horizon          " << d.flow.horizon << "\n"
        << "  flow.tol              " << d.flow.tol << "\n"
        << "  flow.record_every     " << d.flow.record_every << "\n"
        << "  sgda.a0, n0, kappa    " << d.sgda.schedule.a0 << ", " << d.sgda.schedule.n0 << ", "
        << d.sgda.schedule.kappa << " (alpha_n = a0/(n0+n)^kappa, kappa in (0.5, 1])\n"
        << "  sgda.rho              " << d.sgda.rho << "\n"
        << "  sgda.budget           " << d.sgda.budget << "\n"
        << "  sgda.stride           " << d.sgda.stride << "\n"
        << "  sgda.seed             " << d.sgda.seed << "\n"
        << "  sgda.sweep            " << d.sgda.sweep << " (parallel seeds)\n"
        << "  sgda.literal_lambda_hat false\n"
        << "  output.dir            " << d.output_dir.string() << "\n";
    return out.str();
}

// -- CMDP files ------------------------------------------------------------------

CmdpModel parse_cmdp_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelError(std::string("malformed CMDP file: ") + e.what());
    }
    if (!root.is_object()) throw ModelError("CMDP file must hold a JSON object");
    static const std::set<std::string> keys{"n_states", "n_actions", "gamma", "q", "P", "r", "g", "h"};
    for (const auto& [key, value] : root.items())
        if (!keys.count(key)) throw ModelError("CMDP file: unknown key " + key);
    for (const auto& key : {"n_states", "n_actions", "gamma", "q", "P", "r"})
        if (!root.contains(key)) throw ModelError(std::string("CMDP file: missing key ") + key);
    try {
        const auto ns = root.at("n_states").get<std::size_t>();
        const auto na = root.at("n_actions").get<std::size_t>();
        auto P = root.at("P").get<std::vector<std::vector<Vec>>>();
        auto r = root.at("r").get<std::vector<Vec>>();
        auto g = root.contains("g") ? root.at("g").get<std::vector<std::vector<Vec>>>() : std::vector<std::vector<Vec>>{};
        auto h = root.contains("h") ? root.at("h").get<Vec>() : Vec{};
        auto q = root.at("q").get<Vec>();
        if (P.size() != na) throw ModelError("CMDP file: P must have n_actions blocks");
        if (q.size() != ns) throw ModelError("CMDP file: q must have n_states entries");
        return CmdpModel(std::move(P), std::move(r), std::move(g), std::move(h), root.at("gamma").get<double>(),
                         std::move(q));
    } catch (const json::exception& e) {
        throw ModelError(std::string("CMDP file: ") + e.what());
    }
}

CmdpModel load_cmdp_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot read CMDP file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_cmdp_text(buffer.str());
}

std::string cmdp_to_text(const CmdpModel& model) {
    const std::size_t ns = model.n_states();
    const std::size_t na = model.n_actions();
    json root;
    root["n_states"] = ns;
    root["n_actions"] = na;
    root["gamma"] = model.discount();
    root["q"] = model.initial_dist();
    json P = json::array();
    for (std::size_t a = 0; a < na; ++a) {
        json block = json::array();
        for (std::size_t s = 0; s < ns; ++s) {
            auto row = model.transition_row(a, s);
            block.push_back(Vec(row.begin(), row.end()));
        }
        P.push_back(block);
    }
    root["P"] = P;
    auto table = [&](auto value) {
        json t = json::array();
        for (std::size_t s = 0; s < ns; ++s) {
            Vec row(na);
            for (std::size_t a = 0; a < na; ++a) row[a] = value(s, a);
            t.push_back(row);
        }
        return t;
    };
    root["r"] = table([&](std::size_t s, std::size_t a) { return model.reward(s, a); });
    json g = json::array();
    for (std::size_t i = 0; i < model.n_constraints(); ++i)
        g.push_back(table([&](std::size_t s, std::size_t a) { return model.constraint_reward(i, s, a); }));
    root["g"] = g;
    root["h"] = model.thresholds();
    return root.dump(2);
}

CmdpModel build_model(const ExperimentConfig& config) {
    if (config.model_path) return load_cmdp_file(*config.model_path);
    return build_queue_cmdp(config.queue.value_or(QueueConfig{}));
}

// -- CSV artifacts -----------------------------------------------------------------

namespace {

std::string num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class CsvFile {
public:
    CsvFile(const std::filesystem::path& dir, const std::string& name, const std::string& schema,
            const std::vector<std::string>& header)
        : final_(dir / name), temp_(dir / (name + ".tmp")), out_(temp_) {
        if (!out_) throw std::runtime_error("cannot open " + temp_.string());
        out_ << "# schema=" << schema << "\n";
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
        out_ << "\n";
        out_.flush();
    }

    void close() { out_.close(); }
    const std::filesystem::path& temp() const { return temp_; }
    const std::filesystem::path& target() const { return final_; }

private:
    std::filesystem::path final_;
    std::filesystem::path temp_;
    std::ofstream out_;
};

// Collects staged files; nothing appears under its final name unless commit() runs.
class Staging {
public:
    explicit Staging(std::filesystem::path dir) : dir_(std::move(dir)) {}
    ~Staging() {
        if (committed_) return;
        std::error_code ec;
        for (auto& f : files_) std::filesystem::remove(f->temp(), ec);
    }

    CsvFile& open(const std::string& name, const std::string& schema, const std::vector<std::string>& header) {
        files_.push_back(std::make_unique<CsvFile>(dir_, name, schema, header));
        return *files_.back();
    }

    std::vector<std::filesystem::path> commit() {
        std::vector<std::filesystem::path> written;
        for (auto& f : files_) f->close();
        for (auto& f : files_) {
            std::filesystem::rename(f->temp(), f->target());
            written.push_back(f->target());
        }
        committed_ = true;
        return written;
    }

private:
    std::filesystem::path dir_;
    std::vector<std::unique_ptr<CsvFile>> files_;
    bool committed_ = false;
};

std::vector<std::string> indexed(const std::string& prefix, std::size_t count) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i + 1));
    return out;
}

template <class T>
void append(std::vector<T>& into, const std::vector<T>& more) {
    into.insert(into.end(), more.begin(), more.end());
}

struct SolutionView {
    const Vec* lambda;
    const Vec* mu;
    const Vec* v;
};

void write_solution(Staging& staging, const std::string& name, const CmdpModel& model, const SolutionView& sol) {
    CsvFile& f = staging.open(name, "crl.solution/1", {"block", "index", "value"});
    for (std::size_t k = 0; k < sol.lambda->size(); ++k) f.row({"lambda", std::to_string(k), num((*sol.lambda)[k])});
    for (std::size_t i = 0; i < sol.mu->size(); ++i) f.row({"mu", std::to_string(i), num((*sol.mu)[i])});
    for (std::size_t s = 0; s < sol.v->size(); ++s) f.row({"v", std::to_string(s), num((*sol.v)[s])});
    const OccupancyValues values = value_of_occupancy(model, *sol.lambda);
    f.row({"objective", "0", num(values.reward)});
    for (std::size_t i = 0; i < values.constraints.size(); ++i) {
        f.row({"constraint", std::to_string(i), num(values.constraints[i])});
        f.row({"threshold", std::to_string(i), num(model.thresholds()[i])});
    }
    f.row({"flow_residual", "0", num(bellman_flow_residual(model, *sol.lambda))});
}

double max_abs_diff(const Vec& x, const Vec& y) {
    double worst = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) worst = std::max(worst, std::abs(x[k] - y[k]));
    return worst;
}

// v is only pinned down up to an additive constant once lambda lives on the simplex.
double max_abs_diff_mod_const(const Vec& x, const Vec& y) {
    if (x.empty()) return 0.0;
    double lo = x[0] - y[0];
    double hi = lo;
    for (std::size_t k = 1; k < x.size(); ++k) {
        lo = std::min(lo, x[k] - y[k]);
        hi = std::max(hi, x[k] - y[k]);
    }
    return 0.5 * (hi - lo);
}

std::vector<std::string> summary_row(const std::string& solver, const CmdpModel& model, const ExactSolution& ref,
                                     const SolutionView& sol) {
    const OccupancyValues values = value_of_occupancy(model, *sol.lambda);
    std::vector<std::string> row{solver, num(values.reward), num(std::abs(values.reward - ref.objective))};
    for (std::size_t i = 0; i < model.n_constraints(); ++i)
        row.push_back(num(std::max(0.0, model.thresholds()[i] - values.constraints[i])));
    row.push_back(num(max_abs_diff(*sol.lambda, ref.lambda)));
    row.push_back(num(max_abs_diff(*sol.mu, ref.mu)));
    row.push_back(num(max_abs_diff_mod_const(*sol.v, ref.v)));
    row.push_back(num(bellman_flow_residual(model, *sol.lambda)));
    return row;
}

std::string error_json(std::string_view kind, const std::string& key, const std::string& message) {
    json j;
    j["error"] = kind;
    if (!key.empty()) j["key"] = key;
    j["message"] = message;
    return j.dump();
}

void run_bilinear_demo(Staging& staging) {
    constexpr double step = 0.01;
    const auto classical = classical_primal_dual_demo({1.0, 0.0}, step, 10'000);
    CsvFile& c = staging.open("bilinear_classical.csv", "crl.bilinear_classical/1", {"step", "time", "x", "y", "radius"});
    for (std::size_t n = 0; n < classical.size(); n += 10) {
        const auto& p = classical[n];
        c.row({std::to_string(n), num(static_cast<double>(n) * step), num(p.x), num(p.y), num(p.x * p.x + p.y * p.y)});
    }

    FlowConfig cfg;
    cfg.rho = 1.0;
    cfg.step = step;
    cfg.horizon = 1000.0;
    cfg.tol = 1e-6;
    cfg.record_every = 10;
    const FlowRun run = integrate(bilinear_problem(10.0), {{1.0}, {0.0}, {0.0}, {0.0}}, cfg);
    CsvFile& r = staging.open("bilinear_regularized.csv", "crl.bilinear_regularized/1",
                              {"time", "x", "x_hat", "y", "y_hat", "drift_norm"});
    for (const auto& sample : run.trajectory)
        r.row({num(sample.time), num(sample.state.x[0]), num(sample.state.x_hat[0]), num(sample.state.y[0]),
               num(sample.state.y_hat[0]), num(sample.drift_norm)});
}

}  // namespace

ExperimentOutcome validate_experiment(const ExperimentConfig& config, std::string& report) {
    ExperimentOutcome outcome;
    try {
        const CmdpModel model = build_model(config);
        const ExactSolution exact = solve_cmdp_exact(model);
        json j;
        j["n_states"] = model.n_states();
        j["n_actions"] = model.n_actions();
        j["n_constraints"] = model.n_constraints();
        j["lp_status"] = std::string(to_string(exact.status));
        if (exact.status != LpStatus::Optimal) {
            outcome.code = ExitCode::Infeasible;
            outcome.error_line = error_json("infeasible", "", "the constrained MDP has no feasible occupancy measure");
            report = j.dump();
            return outcome;
        }
        j["objective"] = exact.objective;
        const SlaterResult slater = slater_slack(model);
        j["slater_slack"] = std::isfinite(slater.certificate.slack) ? json(slater.certificate.slack) : json("inf");
        report = j.dump();
        if (slater.status != SlaterStatus::Holds) {
            outcome.code = ExitCode::SlaterFails;
            outcome.error_line = error_json("slater", "", "no strictly feasible occupancy measure (slack <= 0)");
        }
    } catch (const ModelError& e) {
        outcome.code = ExitCode::Config;
        outcome.error_line = error_json("model", "", e.what());
    } catch (const std::exception& e) {
        outcome.code = ExitCode::Internal;
        outcome.error_line = error_json("internal", "", e.what());
    }
    return outcome;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
    ExperimentOutcome outcome;
    try {
        std::filesystem::create_directories(config.output_dir);
        Staging staging(config.output_dir);
        const SolverSelection sel = config.solver;

        if (sel == SolverSelection::DemoBilinear) {
            run_bilinear_demo(staging);
            outcome.written = staging.commit();
            return outcome;
        }

        const CmdpModel model = build_model(config);
        const ExactSolution exact = solve_cmdp_exact(model);
        if (exact.status != LpStatus::Optimal) {
            outcome.code = ExitCode::Infeasible;
            outcome.error_line = error_json("infeasible", "", "the constrained MDP has no feasible occupancy measure");
            return outcome;
        }

        const bool want_flow = sel == SolverSelection::Flow || sel == SolverSelection::All;
        const bool want_sgda = sel == SolverSelection::Sgda || sel == SolverSelection::All;
        std::optional<CrlSets> sets;
        if (want_flow || want_sgda) {
            const SlaterResult slater = slater_slack(model);
            if (slater.status != SlaterStatus::Holds) {
                outcome.code = ExitCode::SlaterFails;
                outcome.error_line =
                    error_json("slater", "", "no strictly feasible occupancy measure (slack <= 0); dual sets are unbounded");
                return outcome;
            }
            sets = CrlSets::from_slack(model, slater.certificate.slack, config.psi_cap);
        }

        const std::size_t ni = model.n_constraints();
        write_solution(staging, "lp_solution.csv", model, {&exact.lambda, &exact.mu, &exact.v});

        std::vector<std::string> summary_header{"solver", "objective", "objective_gap"};
        append(summary_header, indexed("violation_", ni));
        append(summary_header, {"lambda_gap_inf", "mu_gap_inf", "v_gap_inf_mod_const", "flow_residual"});
        std::vector<std::vector<std::string>> summary;
        summary.push_back(summary_row("exact", model, exact, {&exact.lambda, &exact.mu, &exact.v}));

        if (want_flow) {
            const CrlRun run = crl_integrate(model, *sets, CrlSaddleState::initial(model), config.flow);
            std::vector<std::string> header{"time", "lambda_norm", "mu_norm", "v_norm", "objective"};
            append(header, indexed("constraint_", ni));
            append(header, {"flow_residual", "drift_norm"});
            CsvFile& f = staging.open("flow_trajectory.csv", "crl.flow_trajectory/1", header);
            for (const auto& row : run.trajectory) {
                std::vector<std::string> cells{num(row.time), num(row.lambda_norm), num(row.mu_norm), num(row.v_norm),
                                               num(row.objective)};
                for (double c : row.constraints) cells.push_back(num(c));
                cells.push_back(num(row.flow_residual));
                cells.push_back(num(row.drift_norm));
                f.row(cells);
            }
            write_solution(staging, "flow_final.csv", model, {&run.final.lambda, &run.final.mu, &run.final.v});
            summary.push_back(summary_row("flow", model, exact, {&run.final.lambda, &run.final.mu, &run.final.v}));
        }

        if (want_sgda) {
            const ModelSampler sampler(model);
            const SamplingDistribution xi = SamplingDistribution::uniform(model.n_states(), model.n_actions());
            const SgdaOptions options{config.sgda.rho, config.sgda.literal_lambda_hat, false};
            const SgdaDiagnostics diagnostics{&model, &exact.lambda};

            std::vector<SgdaRun> runs(config.sgda.sweep);
            auto work = [&](std::size_t k) {
                runs[k] = run_sgda(sampler, xi, SgdaState::initial(sampler, config.sgda.seed + k), config.sgda.schedule,
                                   options, *sets, config.sgda.budget, config.sgda.stride, diagnostics);
            };
            if (runs.size() == 1) {
                work(0);
            } else {
                std::vector<std::exception_ptr> errors(runs.size());
                std::vector<std::thread> workers;
                for (std::size_t k = 0; k < runs.size(); ++k)
                    workers.emplace_back([&, k] {
                        try {
                            work(k);
                        } catch (...) {
                            errors[k] = std::current_exception();
                        }
                    });
                for (auto& w : workers) w.join();
                for (auto& e : errors)
                    if (e) std::rethrow_exception(e);
            }

            std::vector<std::string> header{"step", "alpha", "objective"};
            append(header, indexed("constraint_", ni));
            append(header, {"lambda_gap_inf", "mu_norm", "v_norm"});
            CsvFile& f = staging.open("sgda_metrics.csv", "crl.sgda_metrics/1", header);
            for (const auto& m : runs.front().timeline) {
                std::vector<std::string> cells{std::to_string(m.n), num(m.alpha), num(m.objective)};
                for (double c : m.constraints) cells.push_back(num(c));
                append(cells, {num(m.lambda_gap_inf), num(m.mu_norm), num(m.v_norm)});
                f.row(cells);
            }
            const CrlSaddleState& last = runs.front().final.blocks;
            write_solution(staging, "sgda_final.csv", model, {&last.lambda, &last.mu, &last.v});
            summary.push_back(summary_row("sgda", model, exact, {&last.lambda, &last.mu, &last.v}));

            if (runs.size() > 1) {
                std::vector<std::string> sweep_header{"seed"};
                append(sweep_header, summary_header);
                CsvFile& sw = staging.open("sgda_sweep.csv", "crl.sgda_sweep/1", sweep_header);
                for (const auto& run : runs) {
                    const CrlSaddleState& b = run.final.blocks;
                    std::vector<std::string> cells{std::to_string(run.final.seed)};
                    append(cells, summary_row("sgda", model, exact, {&b.lambda, &b.mu, &b.v}));
                    sw.row(cells);
                }
            }
        }

        CsvFile& s = staging.open("summary.csv", "crl.summary/1", summary_header);
        for (const auto& row : summary) s.row(row);
        outcome.written = staging.commit();
    } catch (const ConfigError& e) {
        outcome.code = ExitCode::Config;
        outcome.error_line = error_json("config", e.key(), e.what());
    } catch (const ModelError& e) {
        outcome.code = ExitCode::Config;
        outcome.error_line = error_json("model", "", e.what());
    } catch (const std::exception& e) {
        outcome.code = ExitCode::Internal;
        outcome.error_line = error_json("internal", "", e.what());
    }
    return outcome;
}

}  // namespace crl
