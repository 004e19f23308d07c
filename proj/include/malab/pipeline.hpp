#pragma once

#include <json.hpp>

#include "malab/doubling.hpp"
#include "malab/solve.hpp"

namespace malab {

/// Heuristic singular-set proxy: nodes where the late iterates' Hessians blow
/// up or flatten out, stored closed (one dilation layer). The thresholds
/// stand in for partial-regularity theory and are fixture configuration.
template <int N>
struct SingularMask {
    NodeMask<N> mask;
    double tau_sing = 1e3;
    double tau_flat = 1e-3;
    std::size_t raw_count = 0;
};

template <int N>
SingularMask<N> singular_mask(const std::vector<PotentialField<N>>& family, double tau_sing = 1e3,
                              double tau_flat = 1e-3, int last = 2) {
    if (family.empty()) throw ParameterError("singular mask needs a nonempty family");
    const auto& g = family.back().grid();
    SingularMask<N> sm{NodeMask<N>(g), tau_sing, tau_flat, 0};
    const std::size_t k0 = family.size() > static_cast<std::size_t>(last)
                               ? family.size() - static_cast<std::size_t>(last)
                               : 0;
    std::vector<SymMatField<N>> hess;
    for (std::size_t k = k0; k < family.size(); ++k) hess.push_back(hessian_field(family[k].u));
    for_each_node(g, [&](std::size_t k, const Index<N>&) {
        double sup_norm = 0;
        double min_eig = std::numeric_limits<double>::infinity();
        for (const auto& H : hess) {
            sup_norm = std::max(sup_norm, H[k].spectral_norm());
            min_eig = std::min(min_eig, H[k].min_eigenvalue());
        }
        if (sup_norm >= tau_sing || min_eig <= tau_flat) sm.mask.insert(k);
    });
    sm.raw_count = sm.mask.count();
    sm.mask = dilate(sm.mask);  // closed: stored with its boundary layer
    return sm;
}

/// Approximating sequence: mollified boundary data at decreasing scales,
/// each solved to certificate. Cauchy differences diagnose "u_k -> u".
template <int N>
struct ApproxSequence {
    std::vector<PotentialField<N>> family;
    std::vector<SolveReport> reports;
    std::vector<double> cauchy_sup;  // sup |u_{k+1} - u_k|
    bool all_converged = true;
};

template <int N>
ApproxSequence<N> approximate_sequence(const AnalyticPtr<N>& datum, const GridSpec<N>& grid,
                                       const std::vector<double>& scales,
                                       const SolverConfig& cfg = {}) {
    if (scales.empty()) throw ParameterError("approximation needs at least one scale");
    for (std::size_t i = 1; i < scales.size(); ++i)
        if (!(scales[i] < scales[i - 1])) throw ParameterError("scales must decrease");
    Point<N> anchor;
    for (int a = 0; a < N; ++a) anchor[a] = 0.5 * (grid.lo[a] + grid.hi[a]);
    ApproxSequence<N> seq;
    for (double eps : scales) {
        const auto mollified = std::make_shared<Mollified<N>>(datum, eps, anchor);
        auto [u, rep] = solve_dirichlet(make_problem<N>(mollified, grid), cfg);
        seq.all_converged = seq.all_converged && rep.converged;
        seq.family.push_back(std::move(u));
        seq.reports.push_back(rep);
    }
    for (std::size_t k = 0; k + 1 < seq.family.size(); ++k) {
        double d = 0;
        for (std::size_t i = 0; i < seq.family[k].u.values.size(); ++i)
            d = std::max(d, std::abs(seq.family[k + 1].u[i] - seq.family[k].u[i]));
        seq.cauchy_sup.push_back(d);
    }
    return seq;
}

/// Fixed direction fans: 16 in the plane, the 26 lattice offsets in space.
template <int N>
std::vector<Point<N>> direction_fan() {
    std::vector<Point<N>> dirs;
    if constexpr (N == 2) {
        for (int j = 0; j < 16; ++j) {
            const double th = 2.0 * 3.14159265358979323846 * j / 16.0;
            dirs.push_back({std::cos(th), std::sin(th)});
        }
    } else {
        for (int i = -1; i <= 1; ++i)
            for (int j = -1; j <= 1; ++j)
                for (int k = -1; k <= 1; ++k) {
                    if (!i && !j && !k) continue;
                    const double n0 = std::sqrt(double(i * i + j * j + k * k));
                    dirs.push_back({i / n0, j / n0, k / n0});
                }
    }
    return dirs;
}

template <int N>
bool inside_half_box(const GridSpec<N>& g, const NodeMask<N>& mask) {
    bool ok = true;
    for_each_node(g, [&](std::size_t k, const Index<N>& ix) {
        if (!ok || !mask.in[k]) return;
        const auto x = g.coord(ix);
        for (int a = 0; a < N; ++a) {
            const double c = 0.5 * (g.lo[a] + g.hi[a]);
            const double quarter = 0.25 * (g.hi[a] - g.lo[a]);
            if (x[a] < c - quarter - 1e-12 || x[a] > c + quarter + 1e-12) ok = false;
        }
    });
    return ok;
}

/// Center selection of the doubling argument: scan radii downward and the
/// direction fan in fixed order for p = target + (r^2/2M) e with p off the
/// singular mask and S^u_{4r}(p) inside the half-box.
template <int N>
struct CenterChoice {
    double r = 0;
    Point<N> e{};
    Point<N> p{};
    bool found = false;
    int r_index = -1, e_index = -1;
};

template <int N>
CenterChoice<N> select_center(const PotentialField<N>& u, const SingularMask<N>& sing, double M,
                              double rho_max, const NoDeduce<Point<N>>& target,
                              int r_scan_len = 12, double r_scan_factor = 0.75) {
    const auto& g = u.grid();
    const auto dirs = direction_fan<N>();
    CenterChoice<N> choice;
    double r = rho_max;
    for (int ri = 0; ri < r_scan_len; ++ri, r *= r_scan_factor) {
        for (std::size_t ei = 0; ei < dirs.size(); ++ei) {
            Point<N> p;
            for (int a = 0; a < N; ++a) p[a] = target[a] + (r * r / (2.0 * M)) * dirs[ei][a];
            if (!g.contains(p)) continue;
            const auto nn = detail::nearest_node(g, p);
            if (g.depth(nn) < 2) continue;
            if (sing.mask.contains(g.flat(nn))) continue;
            const auto sec = build_section(u, p, 4.0 * r);
            if (!inside_half_box(g, sec.mask)) continue;
            choice.r = r;
            choice.e = dirs[ei];
            choice.p = p;
            choice.found = true;
            choice.r_index = ri;
            choice.e_index = static_cast<int>(ei);
            return choice;
        }
    }
    return choice;
}

struct PipelineConfig {
    std::vector<double> scales{0.1, 0.05, 0.025};
    double tau_sing = 1e3;
    double tau_flat = 1e-3;
    int mask_last = 2;
    double rho_max = 0.2;
    int r_scan_len = 12;
    double r_scan_factor = 0.75;
    int r1_scan_len = 8;
    double eig_floor = 1e-8;
    bool has_target = false;
    std::vector<double> target;  // defaults to the box center
    SolverConfig solver;
};

/// Full desk-scale pipeline record: approximation, heuristic mask, center
/// and radius selection, containment chain, doubling, and the final Hessian
/// bound via |D^2 u| <= a^{2n} - 1.
template <int N>
struct PipelineReport {
    bool approx_ok = false;
    std::vector<double> cauchy_sup;
    std::vector<double> solve_residuals;
    std::size_t mask_raw = 0, mask_closed = 0;
    double M = 0;
    CenterChoice<N> center;
    double r1 = 0, r2 = 0, r3 = 0, r4 = 0;
    double h = 0, C = 0;
    bool r1_ok = false;
    std::vector<char> chain_ok;  // per approximating iterate
    int chain_k0 = -1;
    bool doubling_pass = false;
    double sup_inner_a = 0, sup_outer_a = 0, doubling_margin = 0, doubling_tol = 0;
    bool probe_pass = false;
    double probe_z = 0, probe_tol = 0;
    double inner_hessian_sup = 0;   // max |D^2 u_k| over D_{r1}
    double ball_hessian_sup = 0;    // max |D^2 u_k| over B_{r^2/M}(p) nodes
    double final_bound = 0;         // (C sup_inner_a + tol)^{2n} - 1
    bool final_bound_ok = false;
    bool pass = false;
    std::string failing_step;
    std::string conversion = "|D2u| <= a^(2n) - 1";
};

template <int N>
PipelineReport<N> run_pipeline(const AnalyticPtr<N>& datum, const GridSpec<N>& grid,
                               const PipelineConfig& cfg = {}) {
    PipelineReport<N> rep;

    // Step 1: approximation
    const auto seq = approximate_sequence<N>(datum, grid, cfg.scales, cfg.solver);
    rep.approx_ok = seq.all_converged;
    rep.cauchy_sup = seq.cauchy_sup;
    for (const auto& r : seq.reports) rep.solve_residuals.push_back(r.certificate_residual);
    if (!rep.approx_ok) {
        rep.failing_step = "approximation";
        return rep;
    }
    const auto& u_ref = seq.family.back();

    // Step 2: heuristic singular mask
    const auto sing = singular_mask(seq.family, cfg.tau_sing, cfg.tau_flat, cfg.mask_last);
    rep.mask_raw = sing.raw_count;
    rep.mask_closed = sing.mask.count();

    // Step 3: uniform radius and center
    std::vector<const PotentialField<N>*> fam_ptrs;
    for (const auto& f : seq.family) fam_ptrs.push_back(&f);
    rep.M = gradient_bound_M(fam_ptrs);
    Point<N> target;
    for (int a = 0; a < N; ++a)
        target[a] = cfg.has_target ? cfg.target[a] : 0.5 * (grid.lo[a] + grid.hi[a]);
    rep.center = select_center(u_ref, sing, rep.M, cfg.rho_max, target, cfg.r_scan_len,
                               cfg.r_scan_factor);
    if (!rep.center.found) {
        rep.failing_step = "center selection failed";
        return rep;
    }
    const double r = rep.center.r;
    rep.r2 = r;
    rep.r3 = 2.0 * r;
    rep.r4 = 3.0 * r;

    // inner radius: S^u_{2 r1}(p) must clear the singular mask
    double r1 = 0.5 * rep.r2;
    for (int j = 0; j < cfg.r1_scan_len; ++j, r1 *= 0.5) {
        const auto sec = build_section(u_ref, rep.center.p, 2.0 * r1);
        bool clear = true;
        for (std::size_t k = 0; k < sec.mask.in.size(); ++k)
            if (sec.mask.in[k] && sing.mask.in[k]) clear = false;
        const auto zf = extrinsic_distance(u_ref, rep.center.p);
        const bool populated =
            zf.z[grid.flat(detail::nearest_node(grid, rep.center.p))] < r1 * r1;
        if (clear && populated) {
            rep.r1 = r1;
            rep.r1_ok = true;
            break;
        }
    }
    if (!rep.r1_ok) {
        rep.failing_step = "inner radius selection failed";
        return rep;
    }

    // Step 4: containment chain per iterate, then doubling on the last one
    const auto outer_section = build_section(u_ref, rep.center.p, 4.0 * r);
    const bool outer_in_half_box = inside_half_box(grid, outer_section.mask);
    for (const auto& uk : seq.family) {
        const auto ball = build_extrinsic_ball(uk, rep.center.p, rep.r4);
        const auto sec_k = build_section(uk, rep.center.p, 3.0 * r);
        const bool ok = outer_in_half_box && ball.mask.subset_of(sec_k.mask) &&
                        sec_k.mask.subset_of(outer_section.mask);
        rep.chain_ok.push_back(ok ? 1 : 0);
    }
    for (int k = static_cast<int>(rep.chain_ok.size()); k-- > 0;) {
        if (!rep.chain_ok[k]) break;
        rep.chain_k0 = k;
    }
    if (rep.chain_k0 < 0) {
        rep.failing_step = "containment chain failed";
        return rep;
    }

    const auto spec = DoublingSpec<N>::make(rep.center.p, rep.r1, rep.r2, rep.r3, rep.r4);
    rep.h = spec.constant.h;
    rep.C = spec.constant.C;
    const auto doub = check_doubling(u_ref, spec);
    rep.doubling_pass = doub.pass;
    rep.sup_inner_a = doub.sup_inner;
    rep.sup_outer_a = doub.sup_outer;
    rep.doubling_margin = doub.margin;
    rep.doubling_tol = doub.tol;
    const auto probe = korevaar_probe(u_ref, spec);
    rep.probe_pass = probe.pass;
    rep.probe_z = probe.z_at_max;
    rep.probe_tol = probe.tol;

    // final Hessian bound on the euclidean ball nodes through the a-bound
    const auto H = hessian_field(u_ref.u);
    const auto zf = extrinsic_distance(u_ref, rep.center.p);
    const auto inner_ball = build_extrinsic_ball(u_ref, rep.center.p, rep.r1);
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (inner_ball.mask.in[k])
            rep.inner_hessian_sup = std::max(rep.inner_hessian_sup, H[k].spectral_norm());
    const double ball_radius = r * r / rep.M;
    const std::size_t nn = grid.flat(detail::nearest_node(grid, rep.center.p));
    bool ball_inside_outer = true;
    for_each_node(grid, [&](std::size_t k, const Index<N>& ix) {
        const auto x = grid.coord(ix);
        double d2 = 0;
        for (int a = 0; a < N; ++a) d2 += (x[a] - rep.center.p[a]) * (x[a] - rep.center.p[a]);
        const bool in_ball = std::sqrt(d2) < ball_radius || k == nn;
        if (!in_ball) return;
        rep.ball_hessian_sup = std::max(rep.ball_hessian_sup, H[k].spectral_norm());
        if (zf.z[k] >= rep.r2 * rep.r2) ball_inside_outer = false;
    });
    rep.final_bound =
        std::pow(rep.C * rep.sup_inner_a + rep.doubling_tol, 2.0 * N) - 1.0;
    rep.final_bound_ok = ball_inside_outer && rep.ball_hessian_sup <= rep.final_bound;

    rep.pass = rep.approx_ok && rep.center.found && rep.r1_ok && rep.chain_k0 >= 0 &&
               rep.doubling_pass && rep.probe_pass && rep.final_bound_ok;
    if (!rep.pass && rep.failing_step.empty()) {
        if (!rep.doubling_pass) rep.failing_step = "doubling";
        else if (!rep.probe_pass) rep.failing_step = "korevaar probe";
        else rep.failing_step = "final bound";
    }
    return rep;
}

template <int N>
nlohmann::json to_json(const PipelineReport<N>& r) {
    nlohmann::json j;
    j["pass"] = r.pass;
    j["failing_step"] = r.failing_step;
    j["approximation"] = {{"converged", r.approx_ok},
                          {"cauchy_sup", r.cauchy_sup},
                          {"residuals", r.solve_residuals}};
    j["singular_mask"] = {{"raw_nodes", r.mask_raw}, {"closed_nodes", r.mask_closed},
                          {"label", "heuristic proxy"}};
    j["M"] = r.M;
    j["center"] = {{"r", r.center.r},
                   {"e", std::vector<double>(r.center.e.begin(), r.center.e.end())},
                   {"p", std::vector<double>(r.center.p.begin(), r.center.p.end())},
                   {"r_index", r.center.r_index},
                   {"e_index", r.center.e_index}};
    j["radii"] = {{"r1", r.r1}, {"r2", r.r2}, {"r3", r.r3}, {"r4", r.r4}};
    j["doubling"] = {{"h", r.h},          {"C", r.C},
                     {"sup_inner_a", r.sup_inner_a}, {"sup_outer_a", r.sup_outer_a},
                     {"margin", r.doubling_margin},  {"tol", r.doubling_tol},
                     {"pass", r.doubling_pass}};
    j["korevaar"] = {{"z_at_max", r.probe_z}, {"tol", r.probe_tol}, {"pass", r.probe_pass}};
    std::vector<bool> chain(r.chain_ok.begin(), r.chain_ok.end());
    j["chain"] = {{"per_iterate", chain}, {"k0", r.chain_k0}};
    j["final_bound"] = {{"inner_hessian_sup", r.inner_hessian_sup},
                        {"ball_hessian_sup", r.ball_hessian_sup},
                        {"bound", r.final_bound},
                        {"conversion", r.conversion},
                        {"pass", r.final_bound_ok}};
    return j;
}

}  // namespace malab
