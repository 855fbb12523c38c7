#pragma once

// Experiment configuration: a sectioned text format with one typed entry per line,
//
//   [model]
//   alpha: curve = sine(2, 10)
//   T: real = 1
//
// Blank lines and lines starting with '#' are ignored. Unknown sections, keys
// and mismatched types are rejected.

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "curve.hpp"
#include "errors.hpp"
#include "gmp_kernel.hpp"
#include "io.hpp"
#include "mc_solver.hpp"
#include "priors.hpp"
#include "volterra.hpp"

namespace rgmb::config {

/// Raised for malformed files; the CLI maps it to exit status 2.
class ParseError : public ConfigurationError {
public:
    using ConfigurationError::ConfigurationError;
};

struct Entry {
    std::string key;
    std::string type;
    std::string value;
    int line = 0;
};

struct Section {
    std::string name;
    std::vector<Entry> entries;
};

struct Document {
    std::vector<Section> sections;
    std::string base_dir;  // relative paths resolve against this

    const Section* section(std::string_view name) const {
        for (const auto& s : sections) {
            if (s.name == name) return &s;
        }
        return nullptr;
    }

    const Entry* find(std::string_view sec, std::string_view key) const {
        if (const Section* s = section(sec)) {
            for (const auto& e : s->entries) {
                if (e.key == key) return &e;
            }
        }
        return nullptr;
    }

    /// Replaces or appends an entry.
    void set(const std::string& sec, const std::string& key, const std::string& type,
             const std::string& value) {
        Section* target = nullptr;
        for (auto& s : sections) {
            if (s.name == sec) target = &s;
        }
        if (!target) {
            sections.push_back({sec, {}});
            target = &sections.back();
        }
        for (auto& e : target->entries) {
            if (e.key == key) {
                e.type = type;
                e.value = value;
                return;
            }
        }
        target->entries.push_back({key, type, value, 0});
    }

    std::string text() const {
        std::ostringstream out;
        for (std::size_t k = 0; k < sections.size(); ++k) {
            if (k) out << '\n';
            out << '[' << sections[k].name << "]\n";
            for (const auto& e : sections[k].entries) out << e.key << ": " << e.type << " = " << e.value << '\n';
        }
        return out.str();
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Allowed keys and their types, per section.
inline const std::map<std::string, std::map<std::string, std::string>>& schema() {
    static const std::map<std::string, std::string> prior = {
        {"kind", "string"},  {"frame", "string"}, {"point", "real"},
        {"points", "reals"}, {"weights", "reals"}, {"mean", "real"},
        {"variance", "real"}, {"variance_from_model", "real"}, {"lower", "real"},
        {"upper", "real"},   {"file", "path"}};
    static const std::map<std::string, std::map<std::string, std::string>> s = {
        {"model", {{"alpha", "curve"}, {"beta", "curve"}, {"zeta", "curve"}, {"T", "real"}, {"x0", "real"}}},
        {"prior", prior},
        {"compare", prior},
        {"grid",
         {{"N", "int"}, {"M", "int"}, {"K", "int"}, {"x_lo", "real"}, {"x_hi", "real"}, {"seed", "int"}}},
        {"solver",
         {{"method", "string"},
          {"workers", "int"},
          {"rng", "string"},
          {"variance_cap", "real"},
          {"picard_tol", "real"},
          {"picard_damping", "real"},
          {"picard_max_iter", "int"}}},
        {"simulate", {{"paths", "int"}, {"steps", "int"}, {"dump", "bool"}}},
        {"validate",
         {{"cross_tol", "real"}, {"ordering_se", "real"}, {"cross_solver", "bool"}, {"bound_paths", "int"}}},
        {"output", {{"dir", "path"}}},
    };
    return s;
}

inline void check_value(const Entry& e) {
    const auto fail = [&](const std::string& why) {
        throw ParseError("line " + std::to_string(e.line) + ": " + e.key + ": " + why);
    };
    if (e.type == "int") {
        long long v = 0;
        const auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
        if (res.ec != std::errc{} || res.ptr != e.value.data() + e.value.size() || v < 0) {
            fail("expected a nonnegative integer, got '" + e.value + "'");
        }
    } else if (e.type == "real") {
        try {
            io::parse_double(e.value);
        } catch (const ConfigurationError&) {
            fail("expected a real number, got '" + e.value + "'");
        }
    } else if (e.type == "reals") {
        for (auto part : io::split(e.value, ',')) {
            try {
                io::parse_double(trim(part));
            } catch (const ConfigurationError&) {
                fail("expected a comma-separated list of reals, got '" + e.value + "'");
            }
        }
    } else if (e.type == "bool") {
        if (e.value != "true" && e.value != "false") fail("expected true or false");
    } else if (e.type == "curve") {
        const auto open = e.value.find('(');
        if (open == std::string::npos || e.value.back() != ')') fail("expected kind(arguments)");
    } else if (e.type == "string" || e.type == "path") {
        if (e.value.empty()) fail("empty value");
    }
}

}  // namespace detail

inline Document parse_document(std::string_view text, std::string base_dir = ".") {
    Document doc;
    doc.base_dir = std::move(base_dir);
    const auto& schema = detail::schema();
    int line_no = 0;
    std::istringstream in{std::string(text)};
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        const auto line = detail::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto where = "line " + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(where + "unterminated section header");
            const std::string name(detail::trim(line.substr(1, line.size() - 2)));
            if (!schema.count(name)) throw ParseError(where + "unknown section [" + name + "]");
            if (doc.section(name)) throw ParseError(where + "duplicate section [" + name + "]");
            doc.sections.push_back({name, {}});
            continue;
        }
        if (doc.sections.empty()) throw ParseError(where + "entry before any section header");
        const auto colon = line.find(':');
        const auto eq = line.find('=');
        if (colon == std::string_view::npos || eq == std::string_view::npos || eq < colon) {
            throw ParseError(where + "expected 'key: type = value'");
        }
        Entry e{std::string(detail::trim(line.substr(0, colon))),
                std::string(detail::trim(line.substr(colon + 1, eq - colon - 1))),
                std::string(detail::trim(line.substr(eq + 1))), line_no};
        Section& sec = doc.sections.back();
        const auto& keys = schema.at(sec.name);
        const auto it = keys.find(e.key);
        if (it == keys.end()) throw ParseError(where + "unknown key '" + e.key + "' in [" + sec.name + "]");
        if (it->second != e.type) {
            throw ParseError(where + e.key + " has type " + it->second + ", not " + e.type);
        }
        for (const auto& other : sec.entries) {
            if (other.key == e.key) throw ParseError(where + "duplicate key '" + e.key + "'");
        }
        detail::check_value(e);
        sec.entries.push_back(std::move(e));
    }
    return doc;
}

inline Document load_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open configuration file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path().string();
    return parse_document(buf.str(), dir.empty() ? "." : dir);
}

// ---------------------------------------------------------------------------
// Typed view
// ---------------------------------------------------------------------------

enum class Method { mc, volterra, both };

struct GridParams {
    std::size_t N = 200, M = 200, K = 2000;
    double x_lo = -3.0, x_hi = 3.0;
    std::uint64_t seed = 0;
};

struct SimulateParams {
    std::size_t paths = 1000, steps = 200;
    bool dump = false;
};

struct ValidateParams {
    double cross_tol = 0.05;
    double ordering_se = 5.0;
    bool cross_solver = true;
    std::size_t bound_paths = 20000;
};

struct ExperimentConfig {
    Document doc;
    GmpModel model;
    Prior prior = Prior::dirac(0.0);
    std::optional<Prior> compare;
    double prior_variance = 0.0;  // resolved variance of a Gaussian-type prior, 0 otherwise
    GridParams grid;
    Method method = Method::mc;
    SolveOptions solve;
    PicardOptions picard;
    SimulateParams simulate;
    ValidateParams validate;
    std::string out_dir = "out";

    SolverGrid solver_grid() const {
        return default_grid(model.horizon, grid.N, grid.M, grid.K, grid.x_lo, grid.x_hi, grid.seed);
    }
};

namespace detail {

class Reader {
public:
    explicit Reader(const Document& doc) : doc_(doc) {}

    const Entry* get(std::string_view sec, std::string_view key) const { return doc_.find(sec, key); }

    double real(std::string_view sec, std::string_view key, double fallback) const {
        const Entry* e = get(sec, key);
        return e ? io::parse_double(e->value) : fallback;
    }

    std::size_t integer(std::string_view sec, std::string_view key, std::size_t fallback) const {
        const Entry* e = get(sec, key);
        return e ? static_cast<std::size_t>(std::stoull(e->value)) : fallback;
    }

    std::string string(std::string_view sec, std::string_view key, std::string fallback) const {
        const Entry* e = get(sec, key);
        return e ? e->value : fallback;
    }

    std::vector<double> reals(std::string_view sec, std::string_view key) const {
        std::vector<double> out;
        if (const Entry* e = get(sec, key)) {
            for (auto part : io::split(e->value, ',')) out.push_back(io::parse_double(trim(part)));
        }
        return out;
    }

    std::string path(std::string_view sec, std::string_view key) const {
        const Entry* e = get(sec, key);
        if (!e) return {};
        return resolve(e->value);
    }

    std::string resolve(const std::string& p) const {
        const std::filesystem::path fp(p);
        if (fp.is_absolute()) return p;
        return (std::filesystem::path(doc_.base_dir) / fp).string();
    }

    template <class... Keys>
    void require(std::string_view sec, Keys... keys) const {
        for (std::string_view k : {std::string_view(keys)...}) {
            if (!get(sec, k)) throw ConfigurationError("[" + std::string(sec) + "] needs key '" + std::string(k) + "'");
        }
    }

private:
    const Document& doc_;
};

inline std::vector<double> curve_args(std::string_view inside) {
    std::vector<double> args;
    if (trim(inside).empty()) return args;
    for (auto part : io::split(inside, ',')) args.push_back(io::parse_double(trim(part)));
    return args;
}

}  // namespace detail

/// "constant(c)", "sine(A, w)", "tanh_step(base, half_jump, k, t0)",
/// "polynomial_smile(floor, p, t0, k)", "tabulated(file.csv)".
inline CoefficientCurve parse_curve(const std::string& text, const detail::Reader& reader) {
    const auto open = text.find('(');
    const std::string kind(detail::trim(std::string_view(text).substr(0, open)));
    const std::string_view inside = std::string_view(text).substr(open + 1, text.size() - open - 2);
    if (kind == "tabulated") {
        const std::string file = reader.resolve(std::string(detail::trim(inside)));
        auto [t, v] = io::read_two_columns(file);
        return CoefficientCurve::tabulated(std::move(t), std::move(v), std::string(detail::trim(inside)));
    }
    const auto args = detail::curve_args(inside);
    const auto need = [&](std::size_t n) {
        if (args.size() != n) {
            throw ConfigurationError(kind + " curve takes " + std::to_string(n) + " arguments, got " +
                                     std::to_string(args.size()));
        }
    };
    if (kind == "constant") return need(1), CoefficientCurve::constant(args[0]);
    if (kind == "sine") return need(2), CoefficientCurve::sine(args[0], args[1]);
    if (kind == "tanh_step") return need(4), CoefficientCurve::tanh_step(args[0], args[1], args[2], args[3]);
    if (kind == "polynomial_smile") {
        need(4);
        return CoefficientCurve::polynomial_smile(args[0], args[1], args[2], args[3]);
    }
    throw ConfigurationError("unknown curve kind '" + kind + "'");
}

/// Builds the prior described by section `sec`; `variance_out` receives the
/// resolved Gaussian variance.
inline Prior build_prior(const detail::Reader& r, std::string_view sec, const GmpModel& model,
                         double& variance_out) {
    r.require(sec, "kind");
    const std::string kind = r.string(sec, "kind", "");
    const std::string frame_text = r.string(sec, "frame", "bridge");
    if (frame_text != "bridge" && frame_text != "original") {
        throw ConfigurationError("prior frame must be 'bridge' or 'original'");
    }
    const Frame frame = frame_text == "bridge" ? Frame::bridge : Frame::original;
    variance_out = 0.0;
    if (kind == "dirac") {
        r.require(sec, "point");
        return Prior::dirac(r.real(sec, "point", 0.0), frame);
    }
    if (kind == "discrete") {
        r.require(sec, "points", "weights");
        return Prior::discrete(r.reals(sec, "points"), r.reals(sec, "weights"), frame);
    }
    if (kind == "tabulated") {
        r.require(sec, "file");
        auto [z, d] = io::read_two_columns(r.path(sec, "file"));
        return Prior::tabulated(std::move(z), std::move(d), frame);
    }
    if (kind == "gaussian" || kind == "truncated_gaussian") {
        const bool direct = r.get(sec, "variance") != nullptr;
        const bool relative = r.get(sec, "variance_from_model") != nullptr;
        if (direct == relative) {
            throw ConfigurationError("[" + std::string(sec) +
                                     "] needs exactly one of 'variance' and 'variance_from_model'");
        }
        double var = r.real(sec, "variance", 0.0);
        if (relative) {
            // Fraction of v0(T), the variance of X_T given X_0; Var[Y_1] = 1 in the bridge frame.
            const double v0 = frame == Frame::bridge ? 1.0 : GmpKernel(model).variance(0.0, model.horizon);
            var = r.real(sec, "variance_from_model", 0.0) * v0;
        }
        variance_out = var;
        const double mean = r.real(sec, "mean", 0.0);
        if (kind == "gaussian") return Prior::gaussian(mean, var, frame);
        const double inf = std::numeric_limits<double>::infinity();
        return Prior::truncated_gaussian(mean, var, r.real(sec, "lower", -inf), r.real(sec, "upper", inf),
                                         frame);
    }
    throw ConfigurationError("unknown prior kind '" + kind + "'");
}

inline ExperimentConfig build(Document doc) {
    ExperimentConfig cfg;
    cfg.doc = std::move(doc);
    const detail::Reader r(cfg.doc);

    if (!cfg.doc.section("model")) throw ConfigurationError("missing [model] section");
    if (!cfg.doc.section("prior")) throw ConfigurationError("missing [prior] section");
    const auto curve = [&](const char* key, double fallback) {
        const Entry* e = r.get("model", key);
        return e ? parse_curve(e->value, r) : CoefficientCurve::constant(fallback);
    };
    cfg.model.alpha = curve("alpha", 0.0);
    cfg.model.beta = curve("beta", 0.0);
    cfg.model.zeta = curve("zeta", 1.0);
    cfg.model.horizon = r.real("model", "T", 1.0);
    cfg.model.x0 = r.real("model", "x0", 0.0);
    cfg.model.validate();

    cfg.prior = build_prior(r, "prior", cfg.model, cfg.prior_variance);
    if (cfg.doc.section("compare")) {
        double unused = 0.0;
        cfg.compare = build_prior(r, "compare", cfg.model, unused);
    }

    cfg.grid.N = r.integer("grid", "N", cfg.grid.N);
    cfg.grid.M = r.integer("grid", "M", cfg.grid.M);
    cfg.grid.K = r.integer("grid", "K", cfg.grid.K);
    cfg.grid.x_lo = r.real("grid", "x_lo", cfg.grid.x_lo);
    cfg.grid.x_hi = r.real("grid", "x_hi", cfg.grid.x_hi);
    cfg.grid.seed = r.integer("grid", "seed", 0);
    cfg.solver_grid().validate(cfg.model.horizon, cfg.model.x0);

    const std::string method = r.string("solver", "method", "mc");
    if (method == "mc") cfg.method = Method::mc;
    else if (method == "volterra") cfg.method = Method::volterra;
    else if (method == "both") cfg.method = Method::both;
    else throw ConfigurationError("solver method must be mc, volterra or both");
    cfg.solve.workers = std::max<std::size_t>(1, r.integer("solver", "workers", 1));
    const std::string rng = r.string("solver", "rng", "per_cell");
    if (rng == "per_cell") cfg.solve.rng = RngScheme::per_cell;
    else if (rng == "per_slice") cfg.solve.rng = RngScheme::per_slice;
    else throw ConfigurationError("solver rng must be per_cell or per_slice");
    cfg.solve.variance_cap = r.real("solver", "variance_cap", cfg.solve.variance_cap);
    cfg.picard.tol = r.real("solver", "picard_tol", cfg.picard.tol);
    cfg.picard.damping = r.real("solver", "picard_damping", cfg.picard.damping);
    cfg.picard.max_iter = r.integer("solver", "picard_max_iter", cfg.picard.max_iter);

    cfg.simulate.paths = r.integer("simulate", "paths", cfg.simulate.paths);
    cfg.simulate.steps = r.integer("simulate", "steps", cfg.simulate.steps);
    cfg.simulate.dump = r.string("simulate", "dump", "false") == "true";

    cfg.validate.cross_tol = r.real("validate", "cross_tol", cfg.validate.cross_tol);
    cfg.validate.ordering_se = r.real("validate", "ordering_se", cfg.validate.ordering_se);
    cfg.validate.cross_solver = r.string("validate", "cross_solver", "true") == "true";
    cfg.validate.bound_paths = r.integer("validate", "bound_paths", cfg.validate.bound_paths);

    if (r.get("output", "dir")) cfg.out_dir = r.path("output", "dir");
    return cfg;
}

inline ExperimentConfig parse(std::string_view text, std::string base_dir = ".") {
    return build(parse_document(text, std::move(base_dir)));
}

inline ExperimentConfig load(const std::string& path) { return build(load_document(path)); }

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 6> preset_names = {
    "figure1_xm1", "figure1_x0", "figure1_xp1", "figure2a", "figure2b", "figure2c"};

namespace detail {

inline std::string figure1_text(const char* x0) {
    return std::string(
               "[model]\n"
               "alpha: curve = constant(0)\n"
               "beta: curve = constant(0)\n"
               "zeta: curve = constant(1)\n"
               "T: real = 1\n"
               "x0: real = ") +
           x0 +
           "\n\n"
           "[prior]\n"
           "kind: string = discrete\n"
           "frame: string = bridge\n"
           "points: reals = -1, 1\n"
           "weights: reals = 0.5, 0.5\n";
}

inline std::string figure2_text(const char* alpha, const char* beta, const char* zeta) {
    return std::string("[model]\nalpha: curve = ") + alpha + "\nbeta: curve = " + beta +
           "\nzeta: curve = " + zeta +
           "\nT: real = 1\n"
           "x0: real = 0\n\n"
           "[prior]\n"
           "kind: string = truncated_gaussian\n"
           "frame: string = original\n"
           "mean: real = 0\n"
           "variance_from_model: real = 0.5\n"
           "lower: real = 0\n";
}

inline const char* grid_text =
    "\n[grid]\n"
    "N: int = 200\n"
    "M: int = 200\n"
    "K: int = 2000\n"
    "x_lo: real = -3\n"
    "x_hi: real = 3\n"
    "seed: int = 0\n"
    "\n[solver]\n"
    "rng: string = per_slice\n";

}  // namespace detail

/// Configuration text of a named preset at desk resolution (N = M = 200, K = 2000).
/// Figure presets share substreams across each time slice so that extracted
/// boundaries do not flicker with Monte Carlo noise.
inline std::string preset_text(std::string_view name) {
    std::string body;
    if (name == "figure1_xm1") body = detail::figure1_text("-1");
    else if (name == "figure1_x0") body = detail::figure1_text("0");
    else if (name == "figure1_xp1") body = detail::figure1_text("1");
    else if (name == "figure2a") body = detail::figure2_text("sine(2, 10)", "constant(-1)", "constant(1)");
    else if (name == "figure2b")
        body = detail::figure2_text("constant(0)", "tanh_step(-10, 0.475, 100, 0.5)", "constant(1)");
    else if (name == "figure2c")
        body = detail::figure2_text("constant(0)", "constant(-1)", "polynomial_smile(0.25, 4, 0.5, 4)");
    else throw ParseError("unknown preset '" + std::string(name) + "'");
    return body + detail::grid_text;
}

inline ExperimentConfig preset(std::string_view name) { return parse(preset_text(name)); }

}  // namespace rgmb::config
