#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "malab/doubling.hpp"
#include "malab/solve.hpp"

using namespace malab;

namespace {

AnalyticPtr<2> bowl() {
    return std::make_shared<Quadratic<2>>(Quadratic<2>::unit_det(SymMat<2>::identity()));
}

AnalyticPtr<2> radial1() { return std::make_shared<Radial2d>(1.0); }

// Independent continuum oracle for the radial c=1 Jacobi defect. For radial
// fields the metric and the quantity a share the radial/tangential frame, so
// Delta_g a = a''/lam_r + (a'/r)/lam_t and |grad_g a|^2 = (a')^2/lam_r with
// lam_r = r/sqrt(r^2+1), lam_t = sqrt(r^2+1)/r.
double radial_a(double r) {
    const double s = std::sqrt(r * r + 1.0);
    return std::pow((1.0 + r / s) * (1.0 + s / r), 0.25);
}

double radial_defect_oracle(double r) {
    const double s = std::sqrt(r * r + 1.0);
    const double ap =
        0.25 * (r - s) / (std::pow(r, 1.25) * std::sqrt(r + s) * std::pow(r * r + 1.0, 1.125));
    const double app =
        (14 * std::pow(r, 4) + 6 * r * r * r * s + 19 * r * r + 6 * r * s + 5) /
        (16.0 * std::pow(r, 2.25) * std::sqrt(r + s) * std::pow(r * r + 1.0, 0.125) *
         (std::pow(r, 7) + std::pow(r, 6) * s + 3 * std::pow(r, 5) + 3 * std::pow(r, 4) * s +
          3 * r * r * r + 3 * r * r * s + r + s));
    const double lam_r = r / s, lam_t = s / r;
    return app / lam_r + (ap / r) / lam_t - 2.0 * ap * ap / (lam_r * radial_a(r));
}

}  // namespace

TEST_CASE("doubling constant: spot value, monotonicity, errors", "[doubling]") {
    const auto dc = doubling_constant(2, 0.5, 1.0, 2.0);
    CHECK(dc.h == Catch::Approx(0.25).margin(1e-15));
    // (e^16 - 1)/(e^12 - 1), evaluated in extended precision
    CHECK(dc.C == Catch::Approx(54.598479353583202971).epsilon(1e-12));
    CHECK(!dc.asymptotic);
    CHECK(dc.log_C == Catch::Approx(std::log(54.598479353583202971)).epsilon(1e-12));

    // C increases as r2 moves up toward r3, decreases as r1 grows
    CHECK(doubling_constant(2, 0.5, 1.9, 2.0).C > doubling_constant(2, 0.5, 1.0, 2.0).C);
    CHECK(doubling_constant(2, 0.9, 1.0, 2.0).C < doubling_constant(2, 0.5, 1.0, 2.0).C);
    double prev_r1 = std::numeric_limits<double>::infinity();
    for (double r1 : {0.2, 0.3, 0.4, 0.5, 0.6}) {
        const double c = doubling_constant(2, r1, 0.8, 1.1).log_C;
        CHECK(c < prev_r1);
        prev_r1 = c;
    }
    double prev_r2 = -std::numeric_limits<double>::infinity();
    for (double r2 : {0.3, 0.5, 0.7, 0.9, 1.05}) {
        const double c = doubling_constant(2, 0.25, r2, 1.1).log_C;
        CHECK(c > prev_r2);
        prev_r2 = c;
    }
    CHECK(doubling_constant(2, 0.5, 1.0, 2.0).C > 1.0);

    CHECK_THROWS_AS(doubling_constant(2, 1.0, 0.5, 2.0), ParameterError);
    CHECK_THROWS_AS(doubling_constant(2, 0.0, 0.5, 2.0), ParameterError);

    // overflow-safe asymptotic branch
    const auto big = doubling_constant(2, 0.01, 1.0, 2.0);
    CHECK(big.asymptotic);
    CHECK(std::isfinite(big.log_C));
    CHECK(big.log_C == Catch::Approx(1.0 / big.h).epsilon(1e-6));  // ~ r2^2/h
}

TEST_CASE("jacobi defect vanishes identically on quadratic solutions", "[doubling]") {
    const auto g = GridSpec<2>::cube(-1.0, 1.0, 33);
    const AnalyticPtr<2> rot =
        std::make_shared<Quadratic<2>>(Quadratic<2>::unit_det(rotated_diag(2, 0.5, 0.52)));
    for (const auto& fam : {bowl(), rot}) {
        const auto u = sample_potential<2>(fam, g);
        const auto rep = check_jacobi(u, -1.0, HessianSource::analytic);
        INFO(fam->describe());
        CHECK(std::abs(rep.min_defect) <= 1e-10);
        CHECK(rep.nodes_checked > 0);
    }
}

TEST_CASE("jacobi refuses uncertified inputs unless diagnostic", "[doubling]") {
    const auto g = GridSpec<2>::cube(0.1, 1.1, 17);
    ScalarField<2> f(g);
    for_each_node(g, [&](std::size_t k, const Index<2>& ix) {
        const auto x = g.coord(ix);
        f[k] = std::exp(2.0 * x[0]) / 4.0 + 0.5 * x[1] * x[1];
    });
    const auto u = make_potential(std::move(f));  // no certificate
    CHECK_THROWS_AS(check_jacobi(u), InputError);
    const auto rep = check_jacobi(u, -1.0, HessianSource::discrete, true);
    CHECK(rep.diagnostic);
}

TEST_CASE("radial jacobi defect: positive minimum, rate-2 oracle deviation", "[doubling]") {
    // the C++ oracle must match the frozen extended-precision samples
    CHECK(radial_defect_oracle(0.3) == Catch::Approx(11.643033413883102).epsilon(1e-8));
    CHECK(radial_defect_oracle(0.75) == Catch::Approx(0.42924864575856462).epsilon(1e-8));
    CHECK(radial_defect_oracle(1.2) == Catch::Approx(0.053683240483988311).epsilon(1e-8));

    const double margin = 2.0 * GridSpec<2>::cube(0.2, 1.2, 65).spacing(0);
    auto run = [&](int n) {
        const auto g = GridSpec<2>::cube(0.2, 1.2, n);
        const auto u = sample_potential<2>(radial1(), g);
        const auto rep = check_jacobi(u, margin);
        const auto m = build_metric(u);
        const auto q = hessian_quantity_a(u);
        const auto lap_a = laplace_beltrami(q.a, m);
        const auto gsq_a = metric_gradient_sq(q.a, m);
        double dev = 0;
        for_each_node(g, [&](std::size_t k, const Index<2>& ix) {
            if (!m.valid.in[k] || !in_core(g, ix, margin)) return;
            const auto x = g.coord(ix);
            const double d = lap_a[k] - 2.0 * gsq_a[k] / q.a[k];
            dev = std::max(dev, std::abs(d - radial_defect_oracle(std::hypot(x[0], x[1]))));
        });
        return std::pair{rep.min_defect, dev};
    };
    const auto [min65, dev65] = run(65);
    const auto [min129, dev129] = run(129);
    INFO("min defects " << min65 << ", " << min129 << "; deviations " << dev65 << " -> " << dev129);
    CHECK(min65 >= -6e-3);
    CHECK(min129 >= -1.5e-3);
    CHECK(dev65 / dev129 >= 3.2);
    CHECK(dev65 / dev129 <= 4.8);
    // the defect really is positive at this scale
    CHECK(min129 > 0.0);
    // consistency of the a-form and b-form defects
    const auto g = GridSpec<2>::cube(0.2, 1.2, 65);
    const auto u = sample_potential<2>(radial1(), g);
    const auto rep = check_jacobi(u, margin);
    CHECK(rep.consistency <= 0.5);  // both routes agree to discretization error
}

TEST_CASE("sharpness witness: convex non-solution with negative defect", "[doubling]") {
    const auto g = GridSpec<2>({0.1, -0.5}, {1.1, 0.5}, {65, 65});
    const auto u = sample_potential<2>(std::make_shared<ExpWitness2d>(2.0), g);
    // defect is computed in diagnostic mode: the witness is not a solution
    auto v = u;
    v.certificate = Certificate::none;
    const auto rep = check_jacobi(v, -1.0, HessianSource::discrete, true);
    INFO("witness min defect " << rep.min_defect);
    CHECK(rep.min_defect < -0.015);  // < -10 * tol_jac(129) = -0.015
}

TEST_CASE("doubling check on quadratic solutions is slack", "[doubling]") {
    const auto g = GridSpec<2>::cube(-1.0, 1.0, 65);
    const auto u = sample_potential<2>(bowl(), g);
    const auto spec = DoublingSpec<2>::make(Point<2>{0.0, 0.0}, 0.2, 0.3, 0.4, 0.5);
    const auto rep = check_doubling(u, spec);
    REQUIRE(rep.containment_ok);
    CHECK(rep.pass);
    // a is constant: the measured ratio is exactly 1 and C > 1
    CHECK(rep.sup_outer / rep.sup_inner == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(spec.constant.C > 1.0);
    CHECK(rep.margin > 0.0);
}

TEST_CASE("doubling containment precondition is enforced", "[doubling]") {
    const auto g = GridSpec<2>::cube(-1.0, 1.0, 65);
    const auto u = sample_potential<2>(bowl(), g);
    // r4 = 1.4 pushes D_{r4} onto the boundary ring
    const auto spec = DoublingSpec<2>::make(Point<2>{0.0, 0.0}, 0.3, 0.5, 0.9, 1.4);
    CHECK_THROWS_AS(check_doubling(u, spec), InputError);
}

TEST_CASE("randomized doubling specs pass on the radial solution", "[doubling]") {
    const auto g = GridSpec<2>::cube(0.2, 1.2, 65);
    const auto u = sample_potential<2>(radial1(), g);
    std::mt19937_64 rng(20240901);
    for (int t = 0; t < 10; ++t) {
        const auto spec = random_valid_spec(u, rng);
        const auto rep = check_doubling(u, spec);
        INFO("trial " << t << ": margin " << rep.margin << " tol " << rep.tol << " C "
                      << spec.constant.C);
        REQUIRE(rep.pass);
        // a is genuinely non-constant here
        CHECK(rep.sup_outer / rep.sup_inner > 1.0);
        const auto probe = korevaar_probe(u, spec);
        INFO("z(x*) " << probe.z_at_max << " vs r1^2 " << spec.r1 * spec.r1);
        REQUIRE(probe.pass);
    }
}

TEST_CASE("korevaar argmax sits at the center for constant a", "[doubling]") {
    const auto g = GridSpec<2>::cube(-1.0, 1.0, 65);
    for (const auto& fam : {bowl()}) {
        const auto u = sample_potential<2>(fam, g);
        const auto spec = DoublingSpec<2>::make(Point<2>{0.0, 0.0}, 0.2, 0.3, 0.4, 0.5);
        const auto probe = korevaar_probe(u, spec);
        // a constant: w maximal where eta maximal, i.e. at the z-minimum
        const auto ix = g.unflat(probe.argmax);
        const auto x = g.coord(ix);
        CHECK(std::hypot(x[0], x[1]) <= g.spacing(0) + 1e-12);
        CHECK(probe.z_at_max <= spec.r1 * spec.r1 + probe.tol);
        CHECK(probe.pass);
    }
}

TEST_CASE("extrinsic vs euclidean contrast on the pogorelov family", "[doubling]") {
    const auto g = Pogorelov<2>::demo_grid(65);
    const auto u = sample_potential<2>(std::make_shared<Pogorelov<2>>(3), g);
    const auto rep = pogorelov_contrast(u);
    INFO("extrinsic ratio " << rep.extrinsic_ratio << ", euclidean ratio " << rep.euclidean_ratio);
    INFO("hessian sups: extrinsic " << rep.extrinsic_hessian_sup << ", euclidean "
                                    << rep.euclidean_hessian_sup);
    CHECK(rep.extrinsic_contains_axis);
    // on-axis extrinsic balls already see the blow-up: bounded ratio
    CHECK(rep.extrinsic_ratio <= 2.0);
    // euclidean inner ball misses the axis, outer captures it: large ratio
    CHECK(rep.euclidean_ratio >= 1.5);
    CHECK(rep.extrinsic_hessian_sup >= 2.0 * rep.euclidean_hessian_sup);
}
