#pragma once
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "holonomy/config.hpp"
#include "holonomy/csv.hpp"
#include "holonomy/dynamics.hpp"
#include "holonomy/holonomy.hpp"
#include "holonomy/parallel.hpp"

// Subcommand drivers behind the command-line tool. Each one builds the family
// and geometry from a RunConfig, writes its CSV products, and records every
// self-check in a FailureLog so the caller can turn the outcome into an exit
// code: 0 all checks pass, 1 otherwise. Config problems throw ParseError /
// ValidationError (the tool maps those to exit 2) and numerical breakdowns
// surface as other Error subclasses (exit 3).

namespace holonomy {

// Prints one line per check and keeps a JSON-lines record of the failures.
class FailureLog {
public:
    bool check(const std::string& name, double got, double expected, double tol) {
        const bool ok = std::abs(got - expected) <= tol;
        std::printf("[%s] %s got=%s expected=%s tol=%s\n", ok ? "PASS" : "FAIL", name.c_str(),
                    csv_num(got).c_str(), csv_num(expected).c_str(), csv_num(tol).c_str());
        if (!ok)
            lines_.push_back("{\"check\":\"" + name + "\",\"expected\":" + csv_num(expected) +
                             ",\"got\":" + csv_num(got) + ",\"tolerance\":" + csv_num(tol) + "}");
        ++run_;
        failed_ += ok ? 0 : 1;
        return ok;
    }

    // interval form: pass iff lo <= got <= hi, reported around the midpoint
    bool check_band(const std::string& name, double got, double lo, double hi) {
        return check(name, got, 0.5 * (lo + hi), 0.5 * (hi - lo));
    }

    void note_error(const std::string& where, const std::string& what) {
        std::string esc;
        for (char c : what) {
            if (c == '"' || c == '\\') esc += '\\';
            esc += c == '\n' ? ' ' : c;
        }
        lines_.push_back("{\"check\":\"" + where + "\",\"error\":\"" + esc + "\"}");
    }

    bool all_passed() const { return lines_.empty(); }
    int checks_run() const { return run_; }
    int checks_failed() const { return failed_; }

    // writes failures.jsonl when something went wrong, clears a stale one otherwise
    void write_report(const std::filesystem::path& dir) const {
        const auto path = dir / "failures.jsonl";
        if (lines_.empty()) {
            std::filesystem::remove(path);
            return;
        }
        std::ofstream f(path);
        for (const auto& l : lines_) f << l << '\n';
    }

private:
    std::vector<std::string> lines_;
    int run_ = 0;
    int failed_ = 0;
};

namespace rundetail {

inline std::string lambda_header(const HamiltonianFamily& fam) {
    std::string h;
    for (const auto& n : fam.param_names()) h += n + ",";
    return h;
}

// distinct parameter points swept by pointwise subcommands: the loop nodes,
// or just the base point when the loop is constant
inline std::vector<ParamPoint> sweep_points(const RunConfig& cfg, const LoopPath& loop) {
    if (cfg.loop.type == "constant") return {cfg.loop.center};
    return loop.nodes;
}

inline std::string mode_tag(double I) { return "[I=" + csv_num(I) + "]"; }

}  // namespace rundetail

// curvature: two-form entries at every swept (lambda, I), with the oscillator
// closed form alongside when the family has one
inline void run_curvature(const RunConfig& cfg, FailureLog& log) {
    const auto fam = make_family(cfg);
    const LoopPath loop = make_loop(cfg);
    const auto points = rundetail::sweep_points(cfg, loop);
    const bool closed_form = cfg.family_name == "genosc";
    const int P = fam->n_params();

    std::vector<std::pair<int, int>> pairs;
    for (int mu = 0; mu < P; ++mu)
        for (int nu = mu + 1; nu < P; ++nu) pairs.emplace_back(mu, nu);

    struct Row {
        ParamPoint lam;
        double I = 0.0;
        int mu = 0, nu = 0;
        double num = 0.0, ana = 0.0;
    };
    const int NA = static_cast<int>(cfg.actions.size());
    const int NT = static_cast<int>(points.size()) * NA;
    std::vector<std::vector<Row>> blocks(NT);
    parallel_for(NT, cfg.opts.jobs, [&](int idx) {
        const ParamPoint& lam = points[idx / NA];
        const double I = cfg.actions[idx % NA];
        const CurvatureForm F = curvature_form(*fam, lam, I, cfg.opts);
        std::optional<CurvatureForm> A;
        if (closed_form) A = genosc_curvature_analytic(lam, I);
        for (auto [mu, nu] : pairs)
            blocks[idx].push_back({lam, I, mu, nu, F.entry(mu, nu),
                                   closed_form ? A->entry(mu, nu) : 0.0});
    });

    CsvWriter csv(std::filesystem::path(cfg.out_dir) / "curvature.csv", config_hash(cfg),
                  rundetail::lambda_header(*fam) + "I,mu,nu,value_numeric,value_analytic_if_available");
    double worst = -1.0, worst_tol = cfg.tol.curvature_abs_floor;
    for (const auto& block : blocks)
        for (const Row& r : block) {
            csv.row(r.lam, r.I, r.mu, r.nu, r.num,
                    closed_form ? csv_num(r.ana) : std::string{});
            if (!closed_form) continue;
            const double tol =
                std::max(cfg.tol.curvature_rel * std::abs(r.ana), cfg.tol.curvature_abs_floor);
            const double err = std::abs(r.num - r.ana);
            if (err / tol > worst / worst_tol) worst = err, worst_tol = tol;
        }
    if (closed_form) log.check("curvature.vs_closed_form.worst", worst, 0.0, worst_tol);
}

// hannay: line and surface routes of the loop holonomy, with the eigenbranch
// phases for every requested mode
inline void run_hannay(const RunConfig& cfg, FailureLog& log) {
    const auto fam = make_family(cfg);
    const LoopPath loop = make_loop(cfg);
    const SurfacePatch patch = make_surface(cfg);
    const double mismatch = boundary_mismatch(patch, loop);
    if (mismatch > cfg.tol.boundary_tol)
        throw ValidationError("surface boundary does not trace the loop (mismatch " +
                              csv_num(mismatch) + " exceeds " + csv_num(cfg.tol.boundary_tol) +
                              ")");

    CsvWriter csv(std::filesystem::path(cfg.out_dir) / "hannay.csv", config_hash(cfg),
                  "route,I,n,angle,phase_re,phase_im");
    for (const double I : cfg.actions) {
        const double line = hannay_angle_line(*fam, loop, I, cfg.opts);
        const double surf = hannay_angle_surface(*fam, patch, I, cfg.opts);
        for (const char* route : {"line", "surface"}) {
            const double ang = route == std::string("line") ? line : surf;
            for (const int n : cfg.modes) {
                const auto ph = kvn_phase(ang, n);
                csv.row(route, I, n, ang, ph.real(), ph.imag());
            }
        }
        const double tol = std::max(
            cfg.tol.route_rel * std::max(std::abs(line), std::abs(surf)), cfg.tol.route_abs_floor);
        log.check("hannay.line_vs_surface" + rundetail::mode_tag(I), std::abs(line - surf), 0.0,
                  tol);
    }
}

// agp: matrix elements of the adiabatic generator at the loop base point for
// all three routes, checked against the exact frequency-shear defect between
// the direct and generator routes
inline void run_agp(const RunConfig& cfg, FailureLog& log) {
    const auto fam = make_family(cfg);
    const ParamPoint& lam = cfg.loop.center;
    const std::complex<double> iu{0.0, 1.0};

    CsvWriter csv(std::filesystem::path(cfg.out_dir) / "agp.csv", config_hash(cfg),
                  rundetail::lambda_header(*fam) + "I,mu,m,n,re,im,route");
    double worst = 0.0;
    for (const double I : cfg.actions) {
        const TorusFrame fr = build_frame(*fam, lam, I, cfg.opts);
        const double w = fr.w(), wp = fr.domega_dI();
        for (int mu = 0; mu < fam->n_params(); ++mu)
            for (const int m : cfg.modes)
                for (const int n : cfg.modes) {
                    if (m == n) continue;
                    const auto gen = agp_element(fr, mu, m, n, AgpRoute::generator).value;
                    const auto dir = agp_element(fr, mu, m, n, AgpRoute::direct).value;
                    const auto tav = agp_element(fr, mu, m, n, AgpRoute::timeavg).value;
                    csv.row(lam, I, mu, m, n, gen.real(), gen.imag(), "generator");
                    csv.row(lam, I, mu, m, n, dir.real(), dir.imag(), "direct");
                    csv.row(lam, I, mu, m, n, tav.real(), tav.imag(), "timeavg");
                    const int k = m - n;
                    const std::complex<double> defect =
                        -iu * (double(n) / double(k)) * fr.dH[mu].mid.coeff(k) * wp / (w * w);
                    worst = std::max(worst, std::abs((dir - gen) - defect));
                }
    }
    log.check("agp.direct_vs_generator_after_shear", worst, 0.0, cfg.tol.agp_route_abs);
}

// verify: slow-drive runs across the requested rates, extrapolated to the
// ideal-adiabatic angle and compared with the line route, plus the structural
// identities (bracket identity, transport null test) at the base point
inline void run_verify(const RunConfig& cfg, FailureLog& log) {
    if (cfg.opts.epsilons.size() < 3)
        throw ValidationError("verify needs at least three drive rates for extrapolation");
    const auto fam = make_family(cfg);
    const LoopPath loop = make_loop(cfg);
    const double I0 = cfg.actions.front();
    const ParamPoint& lam0 = cfg.loop.center;

    const double line = hannay_angle_line(*fam, loop, I0, cfg.opts);
    const HannayExtrapolation hx = dynamical_hannay(*fam, loop, I0, cfg.opts);

    {
        CsvWriter runs(std::filesystem::path(cfg.out_dir) / "verify.csv", config_hash(cfg),
                       "epsilon,phi0,I_drift_max,dynamical_phase,geometric_drift");
        for (const auto& r : hx.runs) runs.row(r.epsilon, r.phi0, r.I_drift_max, r.theta, r.drift);
    }
    const double residual = std::abs(hx.angle - line);
    {
        CsvWriter summary(std::filesystem::path(cfg.out_dir) / "verify_summary.csv",
                          config_hash(cfg), "extrapolated_hannay,residual");
        summary.row(hx.angle, residual);
    }

    log.check("verify.extrapolated_vs_line", residual, 0.0,
              std::max(cfg.tol.route_rel * std::abs(line), cfg.tol.route_abs_floor));

    // the excursion-halving exponent only means something when the drive
    // actually moves the action; a constant loop sits at integrator noise
    const double peak =
        *std::max_element(hx.I_excursion.begin(), hx.I_excursion.end());
    if (peak > 1e-8)
        log.check_band("verify.action_drift_exponent", drift_exponent(hx),
                       1.0 - cfg.tol.exponent_band, 1.0 + cfg.tol.exponent_band);
    else
        std::printf("[SKIP] verify.action_drift_exponent peak excursion %s at noise floor\n",
                    csv_num(peak).c_str());

    double worst_id = 0.0;
    for (int mu = 0; mu < fam->n_params(); ++mu)
        for (int nu = mu + 1; nu < fam->n_params(); ++nu)
            worst_id = std::max(
                worst_id, bracket_identity_check(*fam, lam0, I0, mu, nu, cfg.opts).abs_error());
    log.check("verify.bracket_identity.worst", worst_id, 0.0, cfg.tol.identity_abs);

    const TransportCheck t1 = parallel_transport_check(*fam, lam0, I0, 0, 1e-3, cfg.opts);
    const TransportCheck t2 = parallel_transport_check(*fam, lam0, I0, 0, 5e-4, cfg.opts);
    log.check("verify.transport_null_drift", t1.mean_drift, 0.0, cfg.tol.transport_null);
    log.check_band("verify.transport_error_ratio", t1.max_error / t2.max_error, 3.0, 5.0);
}

// genosc-table: numeric vs closed-form gauge generators, bracket averages and
// curvature entries for the oscillator family at the configured base point
inline void run_genosc_table(const RunConfig& cfg, FailureLog& log) {
    if (cfg.family_name != "genosc")
        throw ValidationError("genosc-table needs the closed-form oscillator family");
    const auto fam = make_family(cfg);
    const ParamPoint& lam = cfg.loop.center;
    const double I = cfg.actions.front();
    const GenOscParams g{lam.at(0), lam.at(1), lam.at(2)};
    const double w = genosc_frequency(g);
    const std::complex<double> iu{0.0, 1.0};

    const TorusFrame fr = build_frame(*fam, lam, I, cfg.opts);
    const CurvatureForm F = curvature_form(*fam, lam, I, cfg.opts);

    CsvWriter csv(std::filesystem::path(cfg.out_dir) / "genosc_table.csv", config_hash(cfg),
                  "quantity,numeric_re,numeric_im,analytic_re,analytic_im,abs_error,tolerance,"
                  "status");
    auto emit = [&](const std::string& name, std::complex<double> num, std::complex<double> ana,
                    double tol) {
        const double err = std::abs(num - ana);
        const bool ok = log.check("genosc_table." + name, err, 0.0, tol);
        csv.row(name, num.real(), num.imag(), ana.real(), ana.imag(), err, tol,
                ok ? "pass" : "fail");
    };

    // second harmonic of each gauge generator against its closed form
    const std::complex<double> wx2 = iu * g.Z * I / (8.0 * w * w);
    const std::complex<double> wy2 = -(I / (4.0 * w * w)) * std::complex<double>(w, g.Y);
    const std::complex<double> wz2 =
        (I / (4.0 * w * w * g.Z)) * std::complex<double>(g.Y * w, 0.5 * (g.Y * g.Y - w * w));
    const std::complex<double> wnum[3] = {gauge_generator(fr, 0).mid().coeff(2),
                                          gauge_generator(fr, 1).mid().coeff(2),
                                          gauge_generator(fr, 2).mid().coeff(2)};
    emit("W_X.c2", wnum[0], wx2, cfg.tol.w_abs);
    emit("W_Y.c2", wnum[1], wy2, cfg.tol.w_abs);
    emit("W_Z.c2", wnum[2], wz2, cfg.tol.w_abs);

    // averaged generator brackets: the cyclic closed-form triple
    const double w3 = 4.0 * w * w * w;
    const double bex[3] = {-g.Z * I / w3, -g.X * I / w3, -g.Y * I / w3};
    const std::pair<int, int> border[3] = {{1, 0}, {2, 1}, {0, 2}};
    const char* bname[3] = {"bracket{W_Y,W_X}", "bracket{W_Z,W_Y}", "bracket{W_X,W_Z}"};
    const double bscale = I / w3;  // natural magnitude, keeps zero targets checkable
    for (int j = 0; j < 3; ++j) {
        const auto num = bracket_average(fr, border[j].first, border[j].second);
        emit(bname[j], num, bex[j],
             std::max(cfg.tol.bracket_rel * std::abs(bex[j]), cfg.tol.bracket_rel * bscale));
    }

    // curvature entries per unit mode number
    const double cex[3] = {g.Z / w3, g.X / w3, g.Y / w3};
    const std::pair<int, int> corder[3] = {{0, 1}, {1, 2}, {2, 0}};
    const char* cname[3] = {"curvature(X,Y)", "curvature(Y,Z)", "curvature(Z,X)"};
    const double cscale = 1.0 / w3;
    for (int j = 0; j < 3; ++j)
        emit(cname[j], F.entry(corder[j].first, corder[j].second), cex[j],
             std::max(cfg.tol.curvature_rel * std::abs(cex[j]),
                      std::max(cfg.tol.curvature_rel * cscale, cfg.tol.curvature_abs_floor)));
}

// Dispatch plus the error-to-exit-code contract; see the header comment.
inline int run_subcommand(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    FailureLog log;
    try {
        if (name == "curvature")
            run_curvature(cfg, log);
        else if (name == "hannay")
            run_hannay(cfg, log);
        else if (name == "agp")
            run_agp(cfg, log);
        else if (name == "verify")
            run_verify(cfg, log);
        else if (name == "genosc-table")
            run_genosc_table(cfg, log);
        else
            throw ParseError("unknown subcommand: " + name);
    } catch (const ParseError&) {
        throw;
    } catch (const ValidationError&) {
        throw;
    } catch (const Error& e) {
        log.note_error(name, e.what());
        log.write_report(cfg.out_dir);
        std::fprintf(stderr, "numerical failure in %s: %s\n", name.c_str(), e.what());
        return 3;
    }
    log.write_report(cfg.out_dir);
    std::printf("%s: %d/%d checks passed\n", name.c_str(),
                log.checks_run() - log.checks_failed(), log.checks_run());
    return log.all_passed() ? 0 : 1;
}

}  // namespace holonomy
