#pragma once

// Run configuration: sectioned `key = value` text.
//
//   [problem]            # kind = builtin | linear | endpoint
//   kind = endpoint
//   system = brockett
//   x0 = [0, 0, 0]
//   T = 1
//   segments = 20
//   [path]
//   target = [0.5, -0.3, 0.2]
//
// Values are numbers, booleans (true/false/on/off), bare strings, or JSON arrays.
// `#` and `;` start comments. Unknown sections and keys are rejected.

#include "hlift/hypothesis.hpp"
#include "hlift/ple_solver.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace hlift {

enum class ProblemKind { Builtin, Linear, Endpoint };

struct ProblemConfig {
    ProblemKind kind = ProblemKind::Builtin;
    std::string map = "sphere";  // builtin: sphere | fold | linear
    int dim = 2;  // sphere domain dimension, single_integrator state dimension
    Matrix matrix;  // linear
    std::optional<Vector> weights;
    std::optional<Vector> u0;  // full domain vector, or one control value (length m) for endpoint problems
    // endpoint
    std::string system;
    Vector x0;
    double T = 1.0;
    int segments = 1;
    int nodes_per_segment = 8;
    Matrix A, B;
};

enum class PathKind { Line, Polyline };

struct PathConfig {
    PathKind kind = PathKind::Line;
    std::optional<Vector> target;
    std::vector<Vector> waypoints;  // interior points of a polyline, between F(u0) and target
};

struct OutputConfig {
    std::string csv = "trace.csv";
    std::string report = "report.json";
    std::string check_report = "check_report.json";
    std::string check_csv = "shells.csv";
};

struct RunConfig {
    ProblemConfig problem;
    PathConfig path;
    SolverOptions solver;
    SamplingPlan plan;
    CheckThresholds check;
    OutputConfig output;

    /// Codomain dimension implied by the problem section.
    [[nodiscard]] Eigen::Index codomain_dim() const {
        switch (problem.kind) {
            case ProblemKind::Linear: return problem.matrix.rows();
            case ProblemKind::Endpoint: return problem.x0.size();
            case ProblemKind::Builtin:
                if (problem.map == "sphere") return 1;
                if (problem.map == "fold") return 2;
                return problem.matrix.rows();
        }
        return 0;
    }
};

namespace detail {

struct RawValue {
    std::string text;
    int line = 0;
};

using RawConfig = std::map<std::string, std::map<std::string, RawValue>>;

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] inline void config_error(const std::string& key, const std::string& what) {
    throw Error(ErrorKind::Configuration, key + ": " + what);
}

inline RawConfig tokenize(const std::string& text) {
    RawConfig raw;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // Comments end at the first # or ; outside a JSON string.
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (!quoted && (line[i] == '#' || line[i] == ';')) {
                line.resize(i);
                break;
            }
        }
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[' && t.back() == ']' && t.find('=') == std::string::npos) {
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            if (section.empty()) throw Error(ErrorKind::Configuration, "line " + std::to_string(lineno) + ": empty section name");
            raw[section];
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::Configuration, "line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        if (section.empty()) {
            throw Error(ErrorKind::Configuration, "line " + std::to_string(lineno) + ": key outside of a section");
        }
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) throw Error(ErrorKind::Configuration, "line " + std::to_string(lineno) + ": empty key");
        auto& sec = raw[section];
        if (sec.count(key) != 0) config_error(section + "." + key, "duplicate key");
        sec[key] = {value, lineno};
    }
    return raw;
}

/// Typed access to one section; remembers which keys were read so leftovers can be rejected.
class Section {
public:
    Section(std::string name, const std::map<std::string, RawValue>* values) : name_(std::move(name)), values_(values) {}

    [[nodiscard]] bool has(const std::string& key) const { return values_ != nullptr && values_->count(key) != 0; }
    [[nodiscard]] std::string full(const std::string& key) const { return name_ + "." + key; }

    std::optional<std::string> string(const std::string& key) {
        const RawValue* v = find(key);
        if (v == nullptr) return std::nullopt;
        std::string s = v->text;
        if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
        if (s.empty()) config_error(full(key), "expected a non-empty string");
        return s;
    }

    std::optional<double> number(const std::string& key) {
        const RawValue* v = find(key);
        if (v == nullptr) return std::nullopt;
        double out = 0.0;
        const char* b = v->text.data();
        const char* e = b + v->text.size();
        const auto [p, ec] = std::from_chars(b, e, out);
        if (ec != std::errc() || p != e) config_error(full(key), "expected a number, got '" + v->text + "'");
        return out;
    }

    std::optional<long long> integer(const std::string& key) {
        const RawValue* v = find(key);
        if (v == nullptr) return std::nullopt;
        long long out = 0;
        const char* b = v->text.data();
        const char* e = b + v->text.size();
        const auto [p, ec] = std::from_chars(b, e, out);
        if (ec != std::errc() || p != e) config_error(full(key), "expected an integer, got '" + v->text + "'");
        return out;
    }

    std::optional<bool> boolean(const std::string& key) {
        const RawValue* v = find(key);
        if (v == nullptr) return std::nullopt;
        if (v->text == "true" || v->text == "on" || v->text == "yes") return true;
        if (v->text == "false" || v->text == "off" || v->text == "no") return false;
        config_error(full(key), "expected true/false/on/off, got '" + v->text + "'");
    }

    std::optional<Vector> vector(const std::string& key) {
        auto j = json(key);
        if (!j) return std::nullopt;
        return to_vector(*j, full(key));
    }

    std::optional<Matrix> matrix(const std::string& key) {
        auto j = json(key);
        if (!j) return std::nullopt;
        if (!j->is_array() || j->empty()) config_error(full(key), "expected a non-empty array of rows");
        std::vector<Vector> rows;
        for (const auto& r : *j) rows.push_back(to_vector(r, full(key)));
        Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != m.cols()) config_error(full(key), "rows have different lengths");
            m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        }
        return m;
    }

    std::optional<std::vector<Vector>> vector_list(const std::string& key) {
        auto j = json(key);
        if (!j) return std::nullopt;
        if (!j->is_array()) config_error(full(key), "expected an array of points");
        std::vector<Vector> out;
        for (const auto& r : *j) out.push_back(to_vector(r, full(key)));
        return out;
    }

    std::optional<std::vector<std::string>> string_list(const std::string& key) {
        const RawValue* v = find(key);
        if (v == nullptr) return std::nullopt;
        std::vector<std::string> out;
        if (!v->text.empty() && v->text.front() == '[') {
            auto j = json(key);
            for (const auto& e : *j) {
                if (!e.is_string()) config_error(full(key), "expected an array of strings");
                out.push_back(e.get<std::string>());
            }
            return out;
        }
        std::stringstream ss(v->text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    void reject_unread() const {
        if (values_ == nullptr) return;
        for (const auto& [key, v] : *values_) {
            if (read_.count(key) == 0) config_error(full(key), "unknown key (line " + std::to_string(v.line) + ")");
        }
    }

private:
    const RawValue* find(const std::string& key) {
        read_.insert(key);
        if (values_ == nullptr) return nullptr;
        auto it = values_->find(key);
        return it == values_->end() ? nullptr : &it->second;
    }

    std::optional<nlohmann::json> json(const std::string& key) {
        const RawValue* v = find(key);
        if (v == nullptr) return std::nullopt;
        try {
            return nlohmann::json::parse(v->text);
        } catch (const nlohmann::json::exception&) {
            config_error(full(key), "malformed array '" + v->text + "'");
        }
    }

    static Vector to_vector(const nlohmann::json& j, const std::string& key) {
        if (!j.is_array() || j.empty()) config_error(key, "expected a non-empty array of numbers");
        Vector out(static_cast<Eigen::Index>(j.size()));
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_number()) config_error(key, "expected a number at index " + std::to_string(i));
            out[static_cast<Eigen::Index>(i)] = j[i].get<double>();
        }
        return out;
    }

    std::string name_;
    const std::map<std::string, RawValue>* values_;
    std::set<std::string> read_;
};

template <class T>
void assign(T& dst, const std::optional<T>& src) {
    if (src) dst = *src;
}

inline void positive(double v, const std::string& key) {
    if (!(std::isfinite(v) && v > 0.0)) config_error(key, "must be positive");
}

}  // namespace detail

[[nodiscard]] inline RunConfig parse_config(const std::string& text) {
    using detail::config_error;
    const detail::RawConfig raw = detail::tokenize(text);
    static const std::set<std::string> known{"problem", "path", "solver", "check", "output"};
    for (const auto& [name, _] : raw) {
        if (known.count(name) == 0) throw Error(ErrorKind::Configuration, "unknown section [" + name + "]");
    }
    auto section = [&](const std::string& name) {
        auto it = raw.find(name);
        return detail::Section(name, it == raw.end() ? nullptr : &it->second);
    };
    RunConfig cfg;

    // [problem]
    detail::Section pr = section("problem");
    ProblemConfig& p = cfg.problem;
    const auto kind = pr.string("kind");
    if (!kind) config_error("problem.kind", "missing required key");
    if (*kind == "builtin") {
        p.kind = ProblemKind::Builtin;
    } else if (*kind == "linear") {
        p.kind = ProblemKind::Linear;
    } else if (*kind == "endpoint") {
        p.kind = ProblemKind::Endpoint;
    } else {
        config_error("problem.kind", "invalid value '" + *kind + "' (builtin | linear | endpoint)");
    }
    p.weights = pr.vector("weights");
    p.u0 = pr.vector("u0");
    if (p.kind == ProblemKind::Builtin) {
        const auto map = pr.string("map");
        if (!map) config_error("problem.map", "missing required key");
        p.map = *map;
        if (p.map != "sphere" && p.map != "fold" && p.map != "linear") {
            config_error("problem.map", "invalid value '" + p.map + "' (sphere | fold | linear)");
        }
    }
    if (p.kind == ProblemKind::Linear || (p.kind == ProblemKind::Builtin && p.map == "linear")) {
        const auto m = pr.matrix("matrix");
        if (!m) config_error("problem.matrix", "missing required key");
        p.matrix = *m;
        if (p.matrix.rows() > p.matrix.cols()) config_error("problem.matrix", "needs rows <= columns");
    }
    if (auto d = pr.integer("dim")) {
        if (*d < 1) config_error("problem.dim", "must be >= 1");
        p.dim = static_cast<int>(*d);
    }
    if (p.kind == ProblemKind::Endpoint) {
        const auto sys = pr.string("system");
        if (!sys) config_error("problem.system", "missing required key");
        p.system = *sys;
        if (p.system != "single_integrator" && p.system != "lti" && p.system != "brockett" && p.system != "unicycle") {
            config_error("problem.system", "invalid value '" + p.system + "' (single_integrator | lti | brockett | unicycle)");
        }
        const auto x0 = pr.vector("x0");
        if (!x0) config_error("problem.x0", "missing required key");
        p.x0 = *x0;
        const auto T = pr.number("T");
        if (!T) config_error("problem.T", "missing required key");
        p.T = *T;
        detail::positive(p.T, "problem.T");
        const auto seg = pr.integer("segments");
        if (!seg) config_error("problem.segments", "missing required key");
        if (*seg < 1) config_error("problem.segments", "must be >= 1");
        p.segments = static_cast<int>(*seg);
        if (auto nodes = pr.integer("nodes_per_segment")) {
            if (*nodes < 2 || *nodes % 2 != 0) config_error("problem.nodes_per_segment", "must be an even integer >= 2");
            p.nodes_per_segment = static_cast<int>(*nodes);
        }
        if (p.system == "lti") {
            const auto a = pr.matrix("A");
            const auto b = pr.matrix("B");
            if (!a) config_error("problem.A", "missing required key");
            if (!b) config_error("problem.B", "missing required key");
            if (a->rows() != a->cols()) config_error("problem.A", "must be square");
            if (b->rows() != a->rows()) config_error("problem.B", "row count must match problem.A");
            p.A = *a;
            p.B = *b;
        }
        Eigen::Index nx = 0;
        if (p.system == "single_integrator") nx = p.dim;
        if (p.system == "lti") nx = p.A.rows();
        if (p.system == "brockett" || p.system == "unicycle") nx = 3;
        if (p.x0.size() != nx) config_error("problem.x0", "expected length " + std::to_string(nx));
    }
    if (p.weights) {
        for (Eigen::Index i = 0; i < p.weights->size(); ++i) {
            if (!(std::isfinite((*p.weights)[i]) && (*p.weights)[i] > 0.0)) config_error("problem.weights", "must be strictly positive");
        }
    }
    pr.reject_unread();

    // [path]
    detail::Section pa = section("path");
    if (auto k = pa.string("kind")) {
        if (*k == "line") {
            cfg.path.kind = PathKind::Line;
        } else if (*k == "polyline") {
            cfg.path.kind = PathKind::Polyline;
        } else {
            config_error("path.kind", "invalid value '" + *k + "' (line | polyline)");
        }
    }
    cfg.path.target = pa.vector("target");
    detail::assign(cfg.path.waypoints, pa.vector_list("waypoints"));
    if (cfg.path.kind == PathKind::Polyline && cfg.path.waypoints.empty()) {
        config_error("path.waypoints", "a polyline path needs at least one waypoint");
    }
    if (cfg.path.kind == PathKind::Line && !cfg.path.waypoints.empty()) {
        config_error("path.waypoints", "only valid with path.kind = polyline");
    }
    const Eigen::Index n = cfg.codomain_dim();
    if (cfg.path.target && cfg.path.target->size() != n) {
        config_error("path.target", "expected length " + std::to_string(n) + " (codomain dimension)");
    }
    for (const auto& w : cfg.path.waypoints) {
        if (w.size() != n) config_error("path.waypoints", "expected points of length " + std::to_string(n));
    }
    pa.reject_unread();

    // [solver]
    detail::Section so = section("solver");
    SolverOptions& opt = cfg.solver;
    detail::assign(opt.ds_init, so.number("ds_init"));
    detail::assign(opt.ds_min, so.number("ds_min"));
    detail::assign(opt.ds_max, so.number("ds_max"));
    detail::assign(opt.rtol, so.number("tol_ode"));
    detail::assign(opt.atol, so.number("atol"));
    detail::assign(opt.tol_residual, so.number("tol_residual"));
    detail::assign(opt.tol_init, so.number("tol_init"));
    detail::assign(opt.lambda_sing, so.number("lambda_sing"));
    detail::assign(opt.lambda0, so.number("lambda0"));
    detail::assign(opt.correction, so.boolean("correction"));
    detail::assign(opt.terminal_window, so.number("terminal_window"));
    detail::assign(opt.ds_event, so.number("ds_event"));
    if (auto m = so.integer("max_steps")) opt.max_steps = static_cast<int>(std::clamp<long long>(*m, 0, 1'000'000'000));
    so.reject_unread();
    opt.validate();

    // [check]
    detail::Section ch = section("check");
    SamplingPlan& plan = cfg.plan;
    detail::assign(plan.R, ch.number("R"));
    if (auto r = ch.vector("radii")) plan.radii.assign(r->data(), r->data() + r->size());
    auto count = [&](const char* key, int& dst) {
        if (auto v = ch.integer(key)) {
            if (*v < 1 || *v > 1'000'000) config_error(std::string("check.") + key, "must be >= 1");
            dst = static_cast<int>(*v);
        }
    };
    count("per_radius", plan.per_radius);
    count("z_samples", plan.z_samples);
    count("v_samples", plan.v_samples);
    if (auto s = ch.integer("seed")) {
        if (*s < 0) config_error("check.seed", "must be >= 0");
        plan.seed = static_cast<std::uint64_t>(*s);
    }
    CheckThresholds& th = cfg.check;
    detail::assign(th.xi.c, ch.number("xi_c"));
    detail::assign(th.xi.p, ch.number("xi_p"));
    if (auto c = ch.number("C_max")) th.C_max = *c;
    detail::assign(th.K_min, ch.number("K_min"));
    detail::assign(th.slope_tol, ch.number("slope_tol"));
    th.lambda0 = ch.number("lambda0").value_or(opt.lambda0);
    th.singular_factor = opt.lambda_sing;
    if (auto conds = ch.string_list("conditions")) th.conditions = {conds->begin(), conds->end()};
    ch.reject_unread();
    try {
        th.xi.validate();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidXi) throw Error(ErrorKind::InvalidXi, std::string("check.xi_p: ") + e.what());
        throw;
    }
    plan.validate();
    th.validate();

    // [output]
    detail::Section ou = section("output");
    detail::assign(cfg.output.csv, ou.string("csv"));
    detail::assign(cfg.output.report, ou.string("report"));
    detail::assign(cfg.output.check_report, ou.string("check_report"));
    detail::assign(cfg.output.check_csv, ou.string("check_csv"));
    ou.reject_unread();
    return cfg;
}

[[nodiscard]] inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Configuration, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace hlift
