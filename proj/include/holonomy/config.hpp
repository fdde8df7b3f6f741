#pragma once
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "holonomy/family.hpp"
#include "holonomy/holonomy.hpp"
#include "holonomy/options.hpp"

namespace holonomy {

// Pass/fail thresholds for the batch checks. Each key can be overridden from
// the environment as HOLONOMY_TOLERANCES_<KEY in upper case>.
struct CheckTolerances {
    double w_abs = 1e-8;              // generating-function coefficients vs closed form
    double bracket_rel = 1e-6;        // generator bracket averages vs closed form
    double curvature_rel = 1e-5;      // curvature entries vs closed form
    double curvature_abs_floor = 5e-9; // noise allowance for exactly-zero entries
    double route_rel = 1e-3;          // cross-route geometric angle agreement
    double route_abs_floor = 1e-4;    // used when the reference magnitude is tiny
    double agp_route_abs = 1e-6;      // generator vs direct after the frequency-shear term
    double identity_abs = 1e-5;       // measured-derivative vs bracket identity
    double transport_null = 1e-6;     // mean transport drift at the probe step
    double exponent_band = 0.2;       // allowed deviation of the action-drift exponent from 1
    double boundary_tol = 1e-9;       // loop/surface boundary mismatch
};

struct LoopConfig {
    std::string type = "circle";  // "circle" or "constant"
    ParamPoint center;
    ParamPoint axis_u, axis_v;  // resolved axes; zero vectors for "constant"
    int samples = 64;
};

struct SurfaceConfig {
    std::string type = "disc";
    ParamPoint center;
    ParamPoint axis_u, axis_v;
};

struct RunConfig {
    std::string family_name = "genosc";
    std::vector<double> family_params;  // ordered as the family names them
    std::vector<double> actions{1.0};
    std::vector<int> modes{1};
    LoopConfig loop;
    SurfaceConfig surface;
    EngineOptions opts;  // grid sizes, stencil steps, drive rates, start angles
    CheckTolerances tol;
    std::string out_dir = "out";
};

inline std::unique_ptr<HamiltonianFamily> make_family(const RunConfig& cfg) {
    if (cfg.family_name == "genosc") return std::make_unique<GeneralizedOscillator>();
    if (cfg.family_name == "quartic")
        return quartic_family(cfg.family_params.at(0), cfg.family_params.at(1));
    throw ValidationError("unknown family: " + cfg.family_name);
}

inline LoopPath make_loop(const RunConfig& cfg) {
    return circle_loop(cfg.loop.center, cfg.loop.axis_u, cfg.loop.axis_v, cfg.loop.samples);
}

inline SurfacePatch make_surface(const RunConfig& cfg) {
    return spanning_disc(cfg.surface.center, cfg.surface.axis_u, cfg.surface.axis_v);
}

// FNV-1a over the canonical serialized form
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace cfgdetail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& section,
                       const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key))
            throw ParseError("unknown key \"" + key + "\" in section \"" + section + "\"");
    }
}

template <class T>
T get_as(const json& obj, const std::string& section, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError("bad value for \"" + key + "\" in section \"" + section +
                         "\": " + e.what());
    }
}

inline ParamPoint get_vec(const json& obj, const std::string& section, const std::string& key,
                          ParamPoint fallback) {
    return get_as<std::vector<double>>(obj, section, key, std::move(fallback));
}

// deterministic in-plane axes for a circle given by normal + radii (3-parameter
// families only): e1 is the unit projection of the coordinate axis least
// aligned with the normal, e2 completes the right-handed frame
inline std::pair<ParamPoint, ParamPoint> axes_from_normal(const ParamPoint& normal,
                                                          const std::vector<double>& radii) {
    double nn = 0.0;
    for (const double x : normal) nn += x * x;
    if (!(nn > 0.0)) throw ValidationError("loop normal must be nonzero");
    const double inv = 1.0 / std::sqrt(nn);
    const double nx = normal[0] * inv, ny = normal[1] * inv, nz = normal[2] * inv;
    size_t k = 0;
    if (std::abs(normal[1]) < std::abs(normal[k])) k = 1;
    if (std::abs(normal[2]) < std::abs(normal[k])) k = 2;
    double tx = k == 0, ty = k == 1, tz = k == 2;
    const double dot = tx * nx + ty * ny + tz * nz;
    tx -= dot * nx, ty -= dot * ny, tz -= dot * nz;
    const double tn = 1.0 / std::sqrt(tx * tx + ty * ty + tz * tz);
    tx *= tn, ty *= tn, tz *= tn;
    const double cx = ny * tz - nz * ty, cy = nz * tx - nx * tz, cz = nx * ty - ny * tx;
    return {{radii[0] * tx, radii[0] * ty, radii[0] * tz},
            {radii[1] * cx, radii[1] * cy, radii[1] * cz}};
}

}  // namespace cfgdetail

inline std::string serialize_config(const RunConfig& cfg) {
    using nlohmann::json;
    json j;
    json fam;
    fam["name"] = cfg.family_name;
    const auto family = make_family(cfg);
    const auto names = family->param_names();
    for (size_t i = 0; i < names.size(); ++i) fam[names[i]] = cfg.family_params[i];
    j["family"] = fam;
    j["actions"] = cfg.actions;
    j["modes"] = cfg.modes;
    j["loop"] = {{"type", cfg.loop.type},
                 {"center", cfg.loop.center},
                 {"axis_u", cfg.loop.axis_u},
                 {"axis_v", cfg.loop.axis_v},
                 {"samples", cfg.loop.samples}};
    j["surface"] = {{"type", cfg.surface.type},
                    {"center", cfg.surface.center},
                    {"axis_u", cfg.surface.axis_u},
                    {"axis_v", cfg.surface.axis_v}};
    j["grid"] = {{"angle_samples", cfg.opts.angle_samples},
                 {"fourier_m", cfg.opts.fourier_M},
                 {"quad_u", cfg.opts.quad_u},
                 {"quad_v", cfg.opts.quad_v}};
    j["steps"] = {{"lambda_step", cfg.opts.lambda_step}, {"action_step", cfg.opts.action_step}};
    j["tolerances"] = {{"w_abs", cfg.tol.w_abs},
                       {"bracket_rel", cfg.tol.bracket_rel},
                       {"curvature_rel", cfg.tol.curvature_rel},
                       {"curvature_abs_floor", cfg.tol.curvature_abs_floor},
                       {"route_rel", cfg.tol.route_rel},
                       {"route_abs_floor", cfg.tol.route_abs_floor},
                       {"agp_route_abs", cfg.tol.agp_route_abs},
                       {"identity_abs", cfg.tol.identity_abs},
                       {"transport_null", cfg.tol.transport_null},
                       {"exponent_band", cfg.tol.exponent_band},
                       {"boundary_tol", cfg.tol.boundary_tol}};
    j["epsilons"] = cfg.opts.epsilons;
    j["phi0_count"] = cfg.opts.phi0_count;
    j["output"] = {{"dir", cfg.out_dir}};
    return j.dump(2);
}

// The hash identifies the numbers, so execution-only knobs (destination
// directory, worker count) are normalized out before hashing.
inline std::uint64_t config_hash(const RunConfig& cfg) {
    RunConfig c = cfg;
    c.out_dir = "out";
    return fnv1a(serialize_config(c));
}

inline void apply_env_overrides(RunConfig& cfg) {
    const std::pair<const char*, double*> keys[] = {
        {"W_ABS", &cfg.tol.w_abs},
        {"BRACKET_REL", &cfg.tol.bracket_rel},
        {"CURVATURE_REL", &cfg.tol.curvature_rel},
        {"CURVATURE_ABS_FLOOR", &cfg.tol.curvature_abs_floor},
        {"ROUTE_REL", &cfg.tol.route_rel},
        {"ROUTE_ABS_FLOOR", &cfg.tol.route_abs_floor},
        {"AGP_ROUTE_ABS", &cfg.tol.agp_route_abs},
        {"IDENTITY_ABS", &cfg.tol.identity_abs},
        {"TRANSPORT_NULL", &cfg.tol.transport_null},
        {"EXPONENT_BAND", &cfg.tol.exponent_band},
        {"BOUNDARY_TOL", &cfg.tol.boundary_tol},
    };
    for (const auto& [name, slot] : keys) {
        const std::string var = std::string("HOLONOMY_TOLERANCES_") + name;
        if (const char* raw = std::getenv(var.c_str())) {
            char* end = nullptr;
            const double v = std::strtod(raw, &end);
            if (end == raw || *end != '\0')
                throw ParseError("environment override " + var + " is not a number: " + raw);
            *slot = v;
        }
    }
}

inline RunConfig parse_config(const std::string& text) {
    using nlohmann::json;
    namespace cd = cfgdetail;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("config root must be an object of sections");
    cd::check_keys(j, "(root)",
                   {"family", "actions", "modes", "loop", "surface", "grid", "steps",
                    "tolerances", "epsilons", "phi0_count", "output"});

    RunConfig cfg;

    // family: name plus the family's own parameter names
    if (!j.contains("family")) throw ParseError("missing required section \"family\"");
    const json& fam = j.at("family");
    cfg.family_name = cd::get_as<std::string>(fam, "family", "name", "");
    if (cfg.family_name != "genosc" && cfg.family_name != "quartic")
        throw ParseError("family \"" + cfg.family_name + "\" is not one of genosc, quartic");
    const std::vector<std::string> names =
        cfg.family_name == "genosc" ? std::vector<std::string>{"X", "Y", "Z"}
                                    : std::vector<std::string>{"m", "k"};
    {
        std::set<std::string> allowed{"name"};
        allowed.insert(names.begin(), names.end());
        cd::check_keys(fam, "family", allowed);
    }
    const std::vector<double> fam_defaults =
        cfg.family_name == "genosc" ? std::vector<double>{1.0, 0.0, 1.0}
                                    : std::vector<double>{1.0, 1.0};
    for (size_t i = 0; i < names.size(); ++i)
        cfg.family_params.push_back(cd::get_as<double>(fam, "family", names[i], fam_defaults[i]));

    cfg.actions = cd::get_as<std::vector<double>>(j, "(root)", "actions", {1.0});
    cfg.modes = cd::get_as<std::vector<int>>(j, "(root)", "modes", {1});

    // loop geometry; explicit axes win over normal + radii
    cfg.loop.center = cfg.family_params;
    if (j.contains("loop")) {
        const json& lo = j.at("loop");
        cd::check_keys(lo, "loop",
                       {"type", "center", "axis_u", "axis_v", "radii", "normal", "samples"});
        cfg.loop.type = cd::get_as<std::string>(lo, "loop", "type", "circle");
        cfg.loop.center = cd::get_vec(lo, "loop", "center", cfg.loop.center);
        cfg.loop.samples = cd::get_as<int>(lo, "loop", "samples", 64);
        const size_t P = cfg.loop.center.size();
        if (lo.contains("axis_u") || lo.contains("axis_v")) {
            cfg.loop.axis_u = cd::get_vec(lo, "loop", "axis_u", ParamPoint(P, 0.0));
            cfg.loop.axis_v = cd::get_vec(lo, "loop", "axis_v", ParamPoint(P, 0.0));
        } else if (lo.contains("normal") || lo.contains("radii")) {
            const ParamPoint normal = cd::get_vec(lo, "loop", "normal", {});
            const auto radii = cd::get_as<std::vector<double>>(lo, "loop", "radii", {});
            if (normal.size() != 3 || P != 3)
                throw ValidationError("normal-form loops need a 3-parameter family");
            if (radii.size() != 2)
                throw ValidationError("loop radii must hold exactly two entries");
            std::tie(cfg.loop.axis_u, cfg.loop.axis_v) = cd::axes_from_normal(normal, radii);
        } else {
            cfg.loop.axis_u.assign(P, 0.0);
            cfg.loop.axis_v.assign(P, 0.0);
        }
    } else {
        const size_t P = cfg.loop.center.size();
        cfg.loop.axis_u.assign(P, 0.0);
        cfg.loop.axis_v.assign(P, 0.0);
        cfg.loop.type = "constant";
    }
    if (cfg.loop.type == "constant") {
        cfg.loop.axis_u.assign(cfg.loop.center.size(), 0.0);
        cfg.loop.axis_v.assign(cfg.loop.center.size(), 0.0);
    }

    // surface defaults to the disc spanning the loop
    cfg.surface.center = cfg.loop.center;
    cfg.surface.axis_u = cfg.loop.axis_u;
    cfg.surface.axis_v = cfg.loop.axis_v;
    if (j.contains("surface")) {
        const json& su = j.at("surface");
        cd::check_keys(su, "surface", {"type", "center", "axis_u", "axis_v"});
        cfg.surface.type = cd::get_as<std::string>(su, "surface", "type", "disc");
        cfg.surface.center = cd::get_vec(su, "surface", "center", cfg.surface.center);
        cfg.surface.axis_u = cd::get_vec(su, "surface", "axis_u", cfg.surface.axis_u);
        cfg.surface.axis_v = cd::get_vec(su, "surface", "axis_v", cfg.surface.axis_v);
    }

    if (j.contains("grid")) {
        const json& gr = j.at("grid");
        cd::check_keys(gr, "grid", {"angle_samples", "fourier_m", "quad_u", "quad_v"});
        cfg.opts.angle_samples = cd::get_as<int>(gr, "grid", "angle_samples", 256);
        cfg.opts.fourier_M = cd::get_as<int>(gr, "grid", "fourier_m", 32);
        cfg.opts.quad_u = cd::get_as<int>(gr, "grid", "quad_u", 16);
        cfg.opts.quad_v = cd::get_as<int>(gr, "grid", "quad_v", 16);
    }
    if (j.contains("steps")) {
        const json& st = j.at("steps");
        cd::check_keys(st, "steps", {"lambda_step", "action_step"});
        cfg.opts.lambda_step = cd::get_as<double>(st, "steps", "lambda_step", 1e-4);
        cfg.opts.action_step = cd::get_as<double>(st, "steps", "action_step", 1e-4);
    }
    if (j.contains("tolerances")) {
        const json& to = j.at("tolerances");
        cd::check_keys(to, "tolerances",
                       {"w_abs", "bracket_rel", "curvature_rel", "curvature_abs_floor",
                        "route_rel", "route_abs_floor", "agp_route_abs", "identity_abs",
                        "transport_null", "exponent_band", "boundary_tol"});
        cfg.tol.w_abs = cd::get_as<double>(to, "tolerances", "w_abs", cfg.tol.w_abs);
        cfg.tol.bracket_rel = cd::get_as<double>(to, "tolerances", "bracket_rel", cfg.tol.bracket_rel);
        cfg.tol.curvature_rel =
            cd::get_as<double>(to, "tolerances", "curvature_rel", cfg.tol.curvature_rel);
        cfg.tol.curvature_abs_floor = cd::get_as<double>(to, "tolerances", "curvature_abs_floor",
                                                         cfg.tol.curvature_abs_floor);
        cfg.tol.route_rel = cd::get_as<double>(to, "tolerances", "route_rel", cfg.tol.route_rel);
        cfg.tol.route_abs_floor =
            cd::get_as<double>(to, "tolerances", "route_abs_floor", cfg.tol.route_abs_floor);
        cfg.tol.agp_route_abs =
            cd::get_as<double>(to, "tolerances", "agp_route_abs", cfg.tol.agp_route_abs);
        cfg.tol.identity_abs =
            cd::get_as<double>(to, "tolerances", "identity_abs", cfg.tol.identity_abs);
        cfg.tol.transport_null =
            cd::get_as<double>(to, "tolerances", "transport_null", cfg.tol.transport_null);
        cfg.tol.exponent_band =
            cd::get_as<double>(to, "tolerances", "exponent_band", cfg.tol.exponent_band);
        cfg.tol.boundary_tol =
            cd::get_as<double>(to, "tolerances", "boundary_tol", cfg.tol.boundary_tol);
    }
    cfg.opts.epsilons =
        cd::get_as<std::vector<double>>(j, "(root)", "epsilons", cfg.opts.epsilons);
    cfg.opts.phi0_count = cd::get_as<int>(j, "(root)", "phi0_count", cfg.opts.phi0_count);
    if (j.contains("output")) {
        const json& ou = j.at("output");
        cd::check_keys(ou, "output", {"dir"});
        cfg.out_dir = cd::get_as<std::string>(ou, "output", "dir", cfg.out_dir);
    }

    apply_env_overrides(cfg);

    // validation pass: collect every violation before reporting
    std::vector<std::string> errs;
    const size_t P = cfg.family_params.size();
    if (cfg.family_name == "genosc") {
        const double disc =
            cfg.family_params[0] * cfg.family_params[2] - cfg.family_params[1] * cfg.family_params[1];
        if (!(disc > 0.0)) errs.push_back("family: XZ - Y^2 must be positive");
    } else {
        if (!(cfg.family_params[0] > 0.0)) errs.push_back("family: m must be positive");
        if (!(cfg.family_params[1] > 0.0)) errs.push_back("family: k must be positive");
    }
    if (cfg.actions.empty()) errs.push_back("actions: need at least one value");
    for (const double I : cfg.actions)
        if (!(I > 0.0)) errs.push_back("actions: all values must be positive");
    if (cfg.modes.empty()) errs.push_back("modes: need at least one value");
    if (cfg.loop.type != "circle" && cfg.loop.type != "constant")
        errs.push_back("loop: type must be \"circle\" or \"constant\"");
    if (cfg.loop.center.size() != P) errs.push_back("loop: center dimension != parameter count");
    if (cfg.loop.axis_u.size() != P || cfg.loop.axis_v.size() != P)
        errs.push_back("loop: axis dimension != parameter count");
    if (cfg.loop.samples < 4) errs.push_back("loop: need at least 4 samples");
    if (cfg.surface.type != "disc") errs.push_back("surface: type must be \"disc\"");
    if (cfg.surface.center.size() != P || cfg.surface.axis_u.size() != P ||
        cfg.surface.axis_v.size() != P)
        errs.push_back("surface: geometry dimension != parameter count");
    if (cfg.opts.fourier_M < 1) errs.push_back("grid: fourier_m must be >= 1");
    if (cfg.opts.angle_samples < 2 * cfg.opts.fourier_M + 2)
        errs.push_back("grid: angle_samples must be >= 2 fourier_m + 2");
    if (cfg.opts.quad_u < 2 || cfg.opts.quad_v < 2)
        errs.push_back("grid: quadrature orders must be >= 2");
    if (!(cfg.opts.lambda_step > 0.0)) errs.push_back("steps: lambda_step must be positive");
    if (!(cfg.opts.action_step > 0.0)) errs.push_back("steps: action_step must be positive");
    if (cfg.opts.epsilons.empty()) errs.push_back("epsilons: need at least one rate");
    for (const double e : cfg.opts.epsilons)
        if (!(e > 0.0) || e > 0.5) errs.push_back("epsilons: rates must lie in (0, 0.5]");
    if (cfg.opts.phi0_count < 1) errs.push_back("phi0_count: must be >= 1");
    if (cfg.out_dir.empty()) errs.push_back("output: dir must not be empty");

    // a valid base point also has to carry closed orbits everywhere on the loop
    if (errs.empty() && cfg.loop.type == "circle") {
        const auto family = make_family(cfg);
        for (int k = 0; k < 16; ++k) {
            const double s = k / 16.0;
            const double c = std::cos(two_pi * s), sn = std::sin(two_pi * s);
            ParamPoint lam(P);
            for (size_t i = 0; i < P; ++i)
                lam[i] = cfg.loop.center[i] + c * cfg.loop.axis_u[i] + sn * cfg.loop.axis_v[i];
            try {
                family->validate(lam);
            } catch (const Error& e) {
                errs.push_back(std::string("loop: invalid parameters along the path: ") + e.what());
                break;
            }
        }
    }

    if (!errs.empty()) {
        std::string msg = "config validation failed:";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw ValidationError(msg);
    }
    return cfg;
}

}  // namespace holonomy
