#pragma once

// Experiment driver: JSON configuration, offline phase (full-order snapshots,
// bases, reduced operators, package) and online phase (ROM integration,
// decoding, error and Hamiltonian diagnostics, CSV output).

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "smor/package.hpp"
#include "smor/smor.hpp"

namespace smor {

using json = nlohmann::json;

struct ModelConfig {
    std::string type = "sine_gordon";
    SineGordonParams sine_gordon;
    FemWaveParams fem;
};

struct VariantConfig {
    std::string name;
    std::string method;             // pod | symplectic_euclidean | symplectic_weighted
    Index k = 0;                    // pairs (symplectic) or POD columns; 0 = until delta
    double delta = 1e-6;            // greedy tolerance
    std::string weight = "energy";  // energy | identity
    std::string nonlinear = "exact";  // exact | symplectic | deim
    Index deim_r = 0;
    double nonlinear_delta = 1e-12;
    double rank_cutoff = 1e-12;     // POD Gramian eigenvalue cutoff, relative to λ_1
    bool stop_on_deflation = false;
    std::optional<Scheme> scheme;   // defaults to integration.scheme
};

struct OutputConfig {
    std::string directory = "out";
    Index stride = 1;
    bool errors = true;
    bool write_reference = true;
    bool compute_reference = false;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    ModelConfig model;
    IntegratorConfig integration;
    Index snapshot_stride = 10;
    std::vector<VariantConfig> variants;
    OutputConfig output;
    json normalized;  // fully-defaulted configuration, stored in the package
};

/// Every configuration key, printed by `smor --help`.
inline const char* config_reference() {
    return R"(Configuration keys (JSON object; unknown keys are rejected):
  seed                              integer, default 0. Recorded in provenance; no pipeline step is random.
  model.type                        "sine_gordon" | "fem_wave", default "sine_gordon"
  model.n                           sine_gordon interior points, default 500
  model.l                           sine_gordon domain length, default 50
  model.c                           sine_gordon wave speed, |c| < 1, default 0.2
  model.x0                          sine_gordon soliton center, 0 < x0 < l, default 20
  model.kind                        "kink" | "antikink", default "kink"
  model.nodes                       fem_wave node coordinates (strictly increasing, >= 4)
  model.elements                    fem_wave uniform element count when nodes is absent, default 40
  model.length                      fem_wave domain length for uniform meshes, default 1
  model.force_density               fem_wave body force, default -0.4
  model.stiffness                   fem_wave stiffness coefficient, default 1
  model.initial_amplitude           fem_wave initial sine bump amplitude, default 0.1
  integration.dt                    time step, default 0.01
  integration.t_final               final time, default 50
  integration.scheme                "implicit_midpoint" | "stormer_verlet", default "implicit_midpoint"
  integration.newton_tol            nonlinear solve tolerance, default 1e-12
  integration.newton_max_iter       nonlinear solve iteration cap, default 50
  reduction.snapshot_stride         steps between greedy/POD snapshots, multiple of output.stride, default 10
  reduction.variants[]              list of reduced models, each with:
    name                            unique label used in CSV columns, default method
    method                          "pod" | "symplectic_euclidean" | "symplectic_weighted"
    k                               symplectic: basis pairs (0 = until delta), default 0; pod: columns
    delta                           greedy tolerance, default 1e-6
    weight                          "energy" (X = L) | "identity"; symplectic_euclidean is identity
    nonlinear                       "exact" | "symplectic" (nonlinear greedy + symplectic DEIM) | "deim"
    deim_r                          symplectic: pairs added for the nonlinear term; deim: DEIM basis size
    nonlinear_delta                 nonlinear greedy tolerance, default 1e-12
    stop_on_deflation               greedy stops (and records the event) when the selected snapshot is
                                    already in the span, instead of failing; default false
    rank_cutoff                     pod: Gramian eigenvalues below rank_cutoff·λ_1 count as zero, default 1e-12
    scheme                          optional integrator override for this ROM
  output.directory                  output directory, default "out"
  output.stride                     steps between stored states and CSV rows, default 1
  output.errors                     write error curves (needs a reference), default true
  output.write_reference            offline phase writes reference.bin, default true
  output.compute_reference          online phase runs the full model when reference.bin is missing, default false
)";
}

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T def, const std::string& where) {
    if (!j.contains(key)) return def;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

inline Scheme parse_scheme(const std::string& s, const std::string& where) {
    if (s == "implicit_midpoint") return Scheme::implicit_midpoint;
    if (s == "stormer_verlet") return Scheme::stormer_verlet;
    throw ConfigError(where + ": unknown scheme '" + s + "'");
}

inline std::string scheme_name(Scheme s) {
    return s == Scheme::implicit_midpoint ? "implicit_midpoint" : "stormer_verlet";
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
    using detail::get_or;
    detail::check_keys(j, {"seed", "model", "integration", "reduction", "output"}, "config");
    ExperimentConfig c;
    c.seed = get_or<std::uint64_t>(j, "seed", 0, "config");

    const json m = j.value("model", json::object());
    detail::check_keys(m, {"type", "n", "l", "c", "x0", "kind", "nodes", "elements", "length", "force_density",
                           "stiffness", "initial_amplitude"},
                       "model");
    c.model.type = get_or<std::string>(m, "type", "sine_gordon", "model");
    if (c.model.type == "sine_gordon") {
        for (const char* k : {"nodes", "elements", "length", "force_density", "stiffness", "initial_amplitude"})
            if (m.contains(k)) throw ConfigError(std::string("model.") + k + " does not apply to sine_gordon");
        auto& p = c.model.sine_gordon;
        p.n = get_or<Index>(m, "n", 500, "model");
        p.l = get_or<double>(m, "l", 50.0, "model");
        p.c = get_or<double>(m, "c", 0.2, "model");
        p.x0 = get_or<double>(m, "x0", 20.0, "model");
        const auto kind = get_or<std::string>(m, "kind", "kink", "model");
        if (kind != "kink" && kind != "antikink") throw ConfigError("model.kind: expected kink or antikink");
        p.kind = kind == "kink" ? SolitonKind::kink : SolitonKind::antikink;
        if (p.n < 3) throw ConfigError("model.n must be >= 3");
        if (!(std::abs(p.c) < 1.0)) throw ConfigError("model.c must satisfy |c| < 1");
        if (!(p.l > 0 && p.x0 > 0 && p.x0 < p.l)) throw ConfigError("model: need 0 < x0 < l");
    } else if (c.model.type == "fem_wave") {
        for (const char* k : {"n", "l", "c", "x0", "kind"})
            if (m.contains(k)) throw ConfigError(std::string("model.") + k + " does not apply to fem_wave");
        auto& p = c.model.fem;
        if (m.contains("nodes")) {
            if (m.contains("elements") || m.contains("length"))
                throw ConfigError("model: give either nodes or elements/length");
            p.nodes = get_or<std::vector<double>>(m, "nodes", {}, "model");
        } else {
            const Index e = get_or<Index>(m, "elements", 40, "model");
            const double len = get_or<double>(m, "length", 1.0, "model");
            if (e < 3 || !(len > 0)) throw ConfigError("model: need elements >= 3 and length > 0");
            p.nodes = uniform_nodes(0.0, len, e);
        }
        if (p.nodes.size() < 4) throw ConfigError("model.nodes: need at least 4 nodes");
        for (std::size_t i = 1; i < p.nodes.size(); ++i)
            if (!(p.nodes[i] > p.nodes[i - 1])) throw ConfigError("model.nodes must be strictly increasing");
        p.force_density = get_or<double>(m, "force_density", -0.4, "model");
        p.stiffness = get_or<double>(m, "stiffness", 1.0, "model");
        p.initial_amplitude = get_or<double>(m, "initial_amplitude", 0.1, "model");
        if (!(p.stiffness > 0)) throw ConfigError("model.stiffness must be positive");
    } else {
        throw ConfigError("model.type: unknown model '" + c.model.type + "'");
    }

    const json in = j.value("integration", json::object());
    detail::check_keys(in, {"dt", "t_final", "scheme", "newton_tol", "newton_max_iter"}, "integration");
    auto& ic = c.integration;
    ic.dt = get_or<double>(in, "dt", 0.01, "integration");
    ic.t_final = get_or<double>(in, "t_final", 50.0, "integration");
    ic.scheme = detail::parse_scheme(get_or<std::string>(in, "scheme", "implicit_midpoint", "integration"),
                                     "integration.scheme");
    ic.newton_tol = get_or<double>(in, "newton_tol", 1e-12, "integration");
    ic.newton_max_iter = get_or<int>(in, "newton_max_iter", 50, "integration");
    if (!(ic.dt > 0)) throw ConfigError("integration.dt must be positive");
    if (!(ic.t_final >= 0)) throw ConfigError("integration.t_final must be nonnegative");
    if (!(ic.newton_tol > 0)) throw ConfigError("integration.newton_tol must be positive");
    if (ic.newton_max_iter < 1) throw ConfigError("integration.newton_max_iter must be >= 1");

    const json o = j.value("output", json::object());
    detail::check_keys(o, {"directory", "stride", "errors", "write_reference", "compute_reference"}, "output");
    c.output.directory = get_or<std::string>(o, "directory", "out", "output");
    c.output.stride = get_or<Index>(o, "stride", 1, "output");
    c.output.errors = get_or<bool>(o, "errors", true, "output");
    c.output.write_reference = get_or<bool>(o, "write_reference", true, "output");
    c.output.compute_reference = get_or<bool>(o, "compute_reference", false, "output");
    if (c.output.stride < 1) throw ConfigError("output.stride must be >= 1");
    ic.stride = c.output.stride;

    const json r = j.value("reduction", json::object());
    detail::check_keys(r, {"snapshot_stride", "variants"}, "reduction");
    c.snapshot_stride = get_or<Index>(r, "snapshot_stride", 10, "reduction");
    if (c.snapshot_stride < 1 || c.snapshot_stride % c.output.stride != 0)
        throw ConfigError("reduction.snapshot_stride must be a positive multiple of output.stride");
    const json vars = r.value("variants", json::array());
    if (!vars.is_array()) throw ConfigError("reduction.variants: expected an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        const json& v = vars[i];
        const std::string where = "reduction.variants[" + std::to_string(i) + "]";
        detail::check_keys(v, {"name", "method", "k", "delta", "weight", "nonlinear", "deim_r", "nonlinear_delta",
                               "rank_cutoff", "stop_on_deflation", "scheme"},
                           where);
        VariantConfig vc;
        if (!v.contains("method")) throw ConfigError(where + ": method is required");
        vc.method = get_or<std::string>(v, "method", "", where);
        if (vc.method != "pod" && vc.method != "symplectic_euclidean" && vc.method != "symplectic_weighted")
            throw ConfigError(where + ": unknown method '" + vc.method + "'");
        vc.name = get_or<std::string>(v, "name", vc.method, where);
        if (vc.name.empty() || vc.name.find_first_of(",\n\"") != std::string::npos)
            throw ConfigError(where + ": name must be non-empty without commas or quotes");
        if (!names.insert(vc.name).second) throw ConfigError(where + ": duplicate name '" + vc.name + "'");
        vc.k = get_or<Index>(v, "k", 0, where);
        vc.delta = get_or<double>(v, "delta", 1e-6, where);
        vc.weight = get_or<std::string>(v, "weight", vc.method == "symplectic_euclidean" ? "identity" : "energy", where);
        vc.nonlinear = get_or<std::string>(v, "nonlinear", "exact", where);
        vc.deim_r = get_or<Index>(v, "deim_r", 0, where);
        vc.nonlinear_delta = get_or<double>(v, "nonlinear_delta", 1e-12, where);
        vc.rank_cutoff = get_or<double>(v, "rank_cutoff", 1e-12, where);
        vc.stop_on_deflation = get_or<bool>(v, "stop_on_deflation", false, where);
        if (!(vc.rank_cutoff > 0)) throw ConfigError(where + ": rank_cutoff must be positive");
        if (v.contains("scheme"))
            vc.scheme = detail::parse_scheme(get_or<std::string>(v, "scheme", "", where), where + ".scheme");
        if (vc.k < 0) throw ConfigError(where + ": k must be >= 0");
        if (vc.method == "pod" && vc.k < 1) throw ConfigError(where + ": pod needs k >= 1");
        if (!(vc.delta > 0) || !(vc.nonlinear_delta > 0)) throw ConfigError(where + ": tolerances must be positive");
        if (vc.weight != "energy" && vc.weight != "identity")
            throw ConfigError(where + ": weight must be energy or identity");
        if (vc.method == "symplectic_euclidean" && vc.weight != "identity")
            throw ConfigError(where + ": symplectic_euclidean uses the identity weight");
        if (vc.nonlinear != "exact" && vc.nonlinear != "symplectic" && vc.nonlinear != "deim")
            throw ConfigError(where + ": nonlinear must be exact, symplectic or deim");
        if (vc.method == "pod" && vc.nonlinear == "symplectic")
            throw ConfigError(where + ": pod has no symplectic nonlinear treatment");
        if (vc.nonlinear != "exact" && vc.deim_r < 1) throw ConfigError(where + ": deim_r must be >= 1");
        if (vc.scheme == Scheme::stormer_verlet && vc.method == "pod")
            throw ConfigError(where + ": pod ROMs are integrated with implicit_midpoint");
        c.variants.push_back(vc);
    }

    json& nm = c.normalized;
    nm["seed"] = c.seed;
    if (c.model.type == "sine_gordon") {
        const auto& p = c.model.sine_gordon;
        nm["model"] = {{"type", "sine_gordon"}, {"n", p.n}, {"l", p.l}, {"c", p.c}, {"x0", p.x0},
                       {"kind", p.kind == SolitonKind::kink ? "kink" : "antikink"}};
    } else {
        const auto& p = c.model.fem;
        nm["model"] = {{"type", "fem_wave"}, {"nodes", p.nodes}, {"force_density", p.force_density},
                       {"stiffness", p.stiffness}, {"initial_amplitude", p.initial_amplitude}};
    }
    nm["integration"] = {{"dt", ic.dt}, {"t_final", ic.t_final}, {"scheme", detail::scheme_name(ic.scheme)},
                         {"newton_tol", ic.newton_tol}, {"newton_max_iter", ic.newton_max_iter}};
    json jv = json::array();
    for (const auto& v : c.variants) {
        json e = {{"name", v.name}, {"method", v.method}, {"k", v.k}, {"delta", v.delta}, {"weight", v.weight},
                  {"nonlinear", v.nonlinear}, {"deim_r", v.deim_r}, {"nonlinear_delta", v.nonlinear_delta},
                  {"rank_cutoff", v.rank_cutoff}, {"stop_on_deflation", v.stop_on_deflation}};
        if (v.scheme) e["scheme"] = detail::scheme_name(*v.scheme);
        jv.push_back(e);
    }
    nm["reduction"] = {{"snapshot_stride", c.snapshot_stride}, {"variants", jv}};
    nm["output"] = {{"directory", c.output.directory}, {"stride", c.output.stride}, {"errors", c.output.errors},
                    {"write_reference", c.output.write_reference},
                    {"compute_reference", c.output.compute_reference}};
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

/// Applies "a.b.c=value" overrides; value is parsed as JSON, else kept as a string.
inline void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &j;
    std::size_t pos = 0;
    while (true) {
        const auto dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (part.empty()) throw ConfigError("override '" + assignment + "': empty key segment");
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(part);
            } catch (const std::exception&) {
                throw ConfigError("override '" + assignment + "': array index expected");
            }
            if (idx >= node->size()) throw ConfigError("override '" + assignment + "': index out of range");
            node = &(*node)[idx];
        } else {
            if (!node->is_object() && !node->is_null()) throw ConfigError("override '" + assignment + "': not an object");
            node = &(*node)[part];
        }
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    *node = value;
}

// ---------------------------------------------------------------------------

inline std::shared_ptr<HamiltonianModel> build_model(const ModelConfig& m) {
    if (m.type == "sine_gordon") return std::make_shared<SineGordonModel>(build_sine_gordon(m.sine_gordon));
    return std::make_shared<FemWaveModel>(build_fem_wave(m.fem));
}

inline Trajectory run_full(const HamiltonianModel& model, const IntegratorConfig& cfg) {
    if (cfg.scheme == Scheme::stormer_verlet) return stormer_verlet_run(make_canonical(model), model.z0, cfg);
    return implicit_midpoint_run(make_ode(model), model.z0, cfg);
}

struct VariantSeries {
    std::string name;
    std::vector<double> hamiltonian;
    std::vector<double> e2;
    std::vector<double> eX;
};

struct DiagnosticsBundle {
    Vector sigma_S;
    Vector sigma_XS;
    std::vector<double> times;
    std::vector<double> H_full;  // empty when no reference is available
    std::vector<VariantSeries> variants;
    std::vector<std::pair<std::string, GreedyReport>> greedy;  // variant name, report
    bool has_errors = false;
};

struct OfflineResult {
    OfflinePackage package;
    Trajectory reference;
    DiagnosticsBundle diagnostics;
};

namespace detail {

inline HamiltonianModel with_weight(const HamiltonianModel& m, const std::string& weight) {
    HamiltonianModel out = m;
    if (weight == "identity") out.X = WeightMatrix::identity(m.dim());
    return out;
}

inline Matrix nonlinear_snapshots(const HamiltonianModel& m, const Matrix& s) {
    Matrix g(s.rows(), s.cols());
    for (Index j = 0; j < s.cols(); ++j) g.col(j) = m.nonlinear_grad(s.col(j));
    return g;
}

/// Leading r left singular vectors of the nonlinear snapshots (DEIM basis).
inline Matrix nonlinear_basis(const Matrix& g, Index r) {
    const SvdResult sv = svd(g);
    if (r > sv.sigma.size() || !(sv.sigma(r - 1) > 1e-14 * sv.sigma(0)))
        throw NumericalError("DEIM basis: r = " + std::to_string(r) + " exceeds the rank of the nonlinear snapshots");
    return sv.U.leftCols(r);
}

/// Re-throws a library error with phase context, preserving its class.
template <typename F>
auto with_context(const std::string& ctx, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), ctx + ": " + e.what());
    }
}

}  // namespace detail

inline PackagedVariant build_variant(const HamiltonianModel& model, const VariantConfig& v, const Matrix& s,
                                     const Matrix& g) {
    PackagedVariant out;
    out.name = v.name;
    out.method = v.method;
    const HamiltonianModel mw = detail::with_weight(model, v.weight);
    const bool nonlinear = !model.f->is_zero();
    if (v.method == "pod") {
        const PodBasis basis = weighted_pod(s, mw.X, v.k, v.rank_cutoff);
        std::optional<Matrix> u;
        if (nonlinear && v.nonlinear == "deim")
            u = detail::nonlinear_basis(g, v.deim_r);
        out.rom = assemble_pod_rom(mw, basis, u);
        return out;
    }
    GreedyOptions opt;
    opt.delta = v.delta;
    opt.stop_on_deflation = v.stop_on_deflation;
    if (v.k > 0) opt.k_max = v.k;
    GreedyResult r = greedy_symplectic_weighted(s, mw.X, opt);
    out.reports.push_back(r.report);
    NonlinearRomOptions nro;
    nro.path = NonlinearPath::exact;
    if (nonlinear && v.nonlinear == "symplectic") {
        GreedyOptions o2;
        o2.delta = v.nonlinear_delta;
        o2.stop_on_deflation = v.stop_on_deflation;
        GreedyResult r2 = greedy_nonlinear_basis(r.basis, g, o2, v.deim_r);
        out.reports.push_back(r2.report);
        r.basis = r2.basis;
        nro.path = NonlinearPath::symplectic_deim;
    } else if (nonlinear && v.nonlinear == "deim") {
        nro.path = NonlinearPath::deim_baseline;
        nro.deim_basis = detail::nonlinear_basis(g, v.deim_r);
    }
    out.rom = assemble_nonlinear_rom(mw, r.basis, nro);
    out.basis_B = r.basis.B();
    return out;
}

inline OfflineResult run_offline(const ExperimentConfig& cfg) {
    OfflineResult res;
    const auto model = build_model(cfg.model);
    res.reference = detail::with_context("offline full-order run", [&] { return run_full(*model, cfg.integration); });

    const Index every = cfg.snapshot_stride / cfg.output.stride;
    std::vector<Index> cols;
    for (Index j = 0; j < res.reference.states.count(); j += every) cols.push_back(j);
    Matrix s(model->dim(), static_cast<Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) s.col(static_cast<Index>(i)) = res.reference.states.states.col(cols[i]);
    const Matrix g = model->f->is_zero() ? Matrix(model->dim(), 0) : detail::nonlinear_snapshots(*model, s);

    DiagnosticsBundle& d = res.diagnostics;
    d.sigma_S = singular_values(s);
    d.sigma_XS = singular_values(model->X.apply(s));
    res.package.sigma_S = d.sigma_S;
    res.package.sigma_XS = d.sigma_XS;

    json prov;
    prov["format"] = "smor offline package";
    prov["config"] = cfg.normalized;
    prov["snapshot_count"] = s.cols();
    prov["state_dim"] = model->dim();
    prov["variants"] = json::array();
    for (const auto& v : cfg.variants) {
        PackagedVariant pv = detail::with_context("offline variant " + v.name, [&] { return build_variant(*model, v, s, g); });
        json info = {{"name", v.name},
                     {"method", v.method},
                     {"weight", v.weight},
                     {"reduced_dim", pv.rom.dim()},
                     {"deim_rows", pv.rom.deim_rows.size()}};
        if (!pv.reports.empty()) {
            info["k"] = pv.reports.front().k_final;
            info["deflation_events"] = pv.reports.front().deflation_events;
        }
        if (pv.reports.size() > 1) {
            info["nonlinear_pairs"] = pv.reports[1].k_final - pv.reports[1].k_initial;
            info["nonlinear_deflation_events"] = pv.reports[1].deflation_events;
        }
        prov["variants"].push_back(info);
        for (const auto& r : pv.reports) d.greedy.emplace_back(v.name, r);
        res.package.variants.push_back(std::move(pv));
    }
    res.package.provenance = prov.dump(2);
    return res;
}

/// Rebuilds the model recorded in a package.
inline std::shared_ptr<HamiltonianModel> package_model(const OfflinePackage& pkg) {
    json prov;
    try {
        prov = json::parse(pkg.provenance);
    } catch (const json::parse_error& e) {
        throw IoError(std::string("package provenance is not valid JSON: ") + e.what());
    }
    if (!prov.contains("config")) throw IoError("package provenance has no configuration");
    return build_model(parse_config(prov.at("config")).model);
}

inline DiagnosticsBundle run_online(const OfflinePackage& pkg, const ExperimentConfig& cfg,
                                    const Trajectory* reference = nullptr) {
    const auto model = package_model(pkg);
    DiagnosticsBundle d;
    d.sigma_S = pkg.sigma_S;
    d.sigma_XS = pkg.sigma_XS;
    for (const auto& v : pkg.variants)
        for (const auto& r : v.reports) d.greedy.emplace_back(v.name, r);

    Trajectory loaded;
    const std::string ref_path = (std::filesystem::path(cfg.output.directory) / "reference.bin").string();
    if (!reference) {
        if (std::filesystem::exists(ref_path)) {
            loaded = read_reference(ref_path);
            reference = &loaded;
        } else if (cfg.output.compute_reference) {
            loaded = detail::with_context("online full-order run", [&] { return run_full(*model, cfg.integration); });
            reference = &loaded;
        } else if (cfg.output.errors) {
            throw MissingReferenceError("error curves requested but no reference trajectory at " + ref_path +
                                        " (run `offline`, or set output.compute_reference or output.errors=false)");
        }
    }

    std::map<std::string, Scheme> schemes;
    for (const auto& v : cfg.variants)
        if (v.scheme) schemes[v.name] = *v.scheme;

    bool first = true;
    for (const auto& pv : pkg.variants) {
        ReducedModel rom = pv.rom;
        rom.f = model->f;
        require(rom.decoder.rows() == model->dim(), "online: package variant does not match its model");
        IntegratorConfig ic = cfg.integration;
        if (auto it = schemes.find(pv.name); it != schemes.end()) ic.scheme = it->second;
        if (!rom.symplectic()) ic.scheme = Scheme::implicit_midpoint;
        const Trajectory tr = detail::with_context("online variant " + pv.name, [&] { return run_rom(rom, ic); });
        if (first) {
            d.times = tr.states.times;
            first = false;
        }
        VariantSeries vs;
        vs.name = pv.name;
        vs.hamiltonian = tr.hamiltonian;
        if (reference && cfg.output.errors) {
            if (reference->states.times.size() != tr.states.times.size())
                throw ContractError("online: reference has " + std::to_string(reference->states.times.size()) +
                                    " states, ROM has " + std::to_string(tr.states.times.size()));
            const Matrix diff = reference->states.states - rom.decoder * tr.states.states;
            const Matrix xdiff = model->X.apply(diff);
            for (Index j = 0; j < diff.cols(); ++j) {
                vs.e2.push_back(diff.col(j).norm());
                vs.eX.push_back(std::sqrt(std::max(diff.col(j).dot(xdiff.col(j)), 0.0)));
            }
            d.has_errors = true;
        }
        d.variants.push_back(std::move(vs));
    }
    if (reference) {
        if (first) d.times = reference->states.times;
        d.H_full = reference->hamiltonian;
    }
    if (first && d.times.empty() && !reference) {
        IntegratorConfig ic = cfg.integration;
        for (Index m = 0; m <= ic.steps(); m += ic.stride) d.times.push_back(static_cast<double>(m) * ic.dt);
    }
    return d;
}

// ---------------------------------------------------------------------------
// CSV output

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvFile {
public:
    explicit CsvFile(const std::filesystem::path& p) : path_(p.string()), os_(p, std::ios::binary | std::ios::trunc) {
        if (!os_) throw IoError("cannot open " + path_ + " for writing");
    }
    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ',';
            os_ << cells[i];
        }
        os_ << '\n';
        if (!os_) throw IoError("write failed: " + path_);
    }

private:
    std::string path_;
    std::ofstream os_;
};

}  // namespace detail

/// singular_values.csv, hamiltonian.csv, errors.csv, greedy.csv
inline void emit_csv(const DiagnosticsBundle& b, const std::string& directory) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) throw IoError("cannot create directory " + directory + ": " + ec.message());
    const fs::path dir(directory);
    using detail::fmt;

    {
        detail::CsvFile f(dir / "singular_values.csv");
        f.line({"index", "sigma_S", "sigma_XS"});
        const Index n = std::max(b.sigma_S.size(), b.sigma_XS.size());
        for (Index i = 0; i < n; ++i)
            f.line({std::to_string(i + 1), i < b.sigma_S.size() ? fmt(b.sigma_S(i)) : "",
                    i < b.sigma_XS.size() ? fmt(b.sigma_XS(i)) : ""});
    }
    {
        detail::CsvFile f(dir / "hamiltonian.csv");
        std::vector<std::string> head{"t", "H_full"};
        for (const auto& v : b.variants) head.push_back("H_" + v.name);
        f.line(head);
        for (std::size_t i = 0; i < b.times.size(); ++i) {
            std::vector<std::string> row{fmt(b.times[i]), i < b.H_full.size() ? fmt(b.H_full[i]) : "nan"};
            for (const auto& v : b.variants) row.push_back(i < v.hamiltonian.size() ? fmt(v.hamiltonian[i]) : "nan");
            f.line(row);
        }
    }
    {
        detail::CsvFile f(dir / "errors.csv");
        std::vector<std::string> head{"t"};
        for (const auto& v : b.variants) {
            head.push_back("e2_" + v.name);
            head.push_back("eX_" + v.name);
        }
        f.line(head);
        if (b.has_errors)
            for (std::size_t i = 0; i < b.times.size(); ++i) {
                std::vector<std::string> row{fmt(b.times[i])};
                for (const auto& v : b.variants) {
                    row.push_back(i < v.e2.size() ? fmt(v.e2[i]) : "nan");
                    row.push_back(i < v.eX.size() ? fmt(v.eX[i]) : "nan");
                }
                f.line(row);
            }
    }
    {
        detail::CsvFile f(dir / "greedy.csv");
        f.line({"iteration", "selected_index", "error", "variant", "phase"});
        for (const auto& [name, rep] : b.greedy)
            for (std::size_t i = 0; i < rep.selected.size(); ++i)
                f.line({std::to_string(i + 1), std::to_string(rep.selected[i]), fmt(rep.errors[i]), name, rep.phase});
    }
}

// ---------------------------------------------------------------------------
// Package invariant checks (`smor check`)

struct CheckLine {
    std::string name;
    bool ok = false;
    double value = 0.0;
    double tolerance = 0.0;
};

inline std::vector<CheckLine> check_package(const OfflinePackage& pkg) {
    const auto model = package_model(pkg);
    const json prov = json::parse(pkg.provenance);
    std::vector<CheckLine> out;
    auto add = [&](const std::string& n, double v, double tol) { out.push_back({n, v <= tol, v, tol}); };
    for (std::size_t i = 0; i < pkg.variants.size(); ++i) {
        const PackagedVariant& v = pkg.variants[i];
        const ReducedModel& r = v.rom;
        const std::string p = v.name + ": ";
        const bool finite = r.decoder.allFinite() && r.K.allFinite() && r.L_r.allFinite() && r.y0.allFinite() &&
                            r.lift.allFinite() && r.J_r.allFinite();
        add(p + "finite operators", finite ? 0.0 : 1.0, 0.0);
        add(p + "L_r symmetry", (r.L_r - r.L_r.transpose()).norm() / std::max(1.0, r.L_r.norm()), 1e-10);
        add(p + "decoder rows match model", r.decoder.rows() == model->dim() ? 0.0 : 1.0, 0.0);
        if (!r.symplectic()) continue;
        add(p + "J_2k skew", (r.J_r + r.J_r.transpose()).norm() / std::max(1.0, r.J_r.norm()), 1e-10);
        const Matrix& b = v.basis_B;
        const Index m = b.cols();
        add(p + "B^T J B = J_2k", (b.transpose() * apply_jstd(b) - jstd_matrix(m / 2)).norm(), 1e-10);
        add(p + "B^T B = I", (b.transpose() * b - Matrix::Identity(m, m)).norm(), 1e-10);
        std::string weight = "energy";
        if (prov.contains("variants") && i < prov["variants"].size())
            weight = prov["variants"][i].value("weight", "energy");
        const WeightMatrix x = weight == "identity" ? WeightMatrix::identity(model->dim()) : model->X;
        add(p + "X A = B", (x.apply(r.decoder) - b).norm() / std::max(1.0, b.norm()), 1e-10);
        const SymplecticBasis basis(b, x);
        const Matrix ap = basis.inverse_op()(r.decoder);
        add(p + "A^+ A = I", (ap - Matrix::Identity(m, m)).norm(), 1e-9);
        if (r.path == NonlinearPath::symplectic_deim) {
            const Matrix u = symplectic_deim_basis(basis);
            Matrix ptu(static_cast<Index>(r.deim_rows.size()), u.cols());
            for (std::size_t k = 0; k < r.deim_rows.size(); ++k) ptu.row(static_cast<Index>(k)) = u.row(r.deim_rows[k]);
            add(p + "DEIM (P^T U)^{-1} P^T U = I", (r.grad_lift * ptu - Matrix::Identity(u.cols(), u.cols())).norm(),
                1e-8);
        }
    }
    return out;
}

}  // namespace smor
