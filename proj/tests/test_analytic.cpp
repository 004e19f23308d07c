#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "malab/analytic.hpp"
#include "malab/fd.hpp"
#include "malab/metric.hpp"
#include "malab/potential.hpp"

using namespace malab;

TEST_CASE("quadratic family evaluates value/gradient/hessian", "[analytic]") {
    const Quadratic<2> qi = Quadratic<2>::unit_det(SymMat<2>::identity());
    CHECK(qi.value({1, 1}) == Catch::Approx(1.0));
    CHECK(qi.gradient({1, 1})[0] == Catch::Approx(1.0));
    CHECK(qi.gradient({1, 1})[1] == Catch::Approx(1.0));

    SymMat<2> A;
    A.at(0, 0) = 4.0;
    A.at(1, 1) = 0.25;
    const Quadratic<2> qa = Quadratic<2>::unit_det(A);
    CHECK(qa.value({1, 0}) == Catch::Approx(2.0));
    CHECK(qa.gradient({1, 0})[0] == Catch::Approx(4.0));
    CHECK(qa.gradient({1, 0})[1] == Catch::Approx(0.0));

    // similarity preserves the determinant
    const auto R = rotated_diag(2.0, 0.5, 30.0 * 3.14159265358979323846 / 180.0);
    const Quadratic<2> qr = Quadratic<2>::unit_det(R);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 8; ++t) {
        const Point<2> x{u(rng), u(rng)};
        CHECK(std::abs(qr.hessian(x).det() - 1.0) <= 1e-12);
    }

    SymMat<2> bad;  // indefinite
    bad.at(0, 0) = 1.0;
    bad.at(1, 1) = -1.0;
    CHECK_THROWS_AS(Quadratic<2>(bad), ParameterError);
    SymMat<2> off_det;  // SPD but det != 1
    off_det.at(0, 0) = 2.0;
    off_det.at(1, 1) = 1.0;
    CHECK_THROWS_AS(Quadratic<2>::unit_det(off_det), ParameterError);
}

TEST_CASE("radial family: closed form, det=1, vertex handling", "[analytic]") {
    CHECK_THROWS_AS(Radial2d(-0.5), ParameterError);

    const Radial2d r0(0.0);
    CHECK(r0.value({0.6, 0.8}) == Catch::Approx(0.5));
    CHECK(r0.hessian({0.3, 0.1})(0, 0) == Catch::Approx(1.0));

    const Radial2d r1(1.0);
    // u'(1) = sqrt(2), u''(1) = 1/sqrt(2); det = 1 exactly
    const Point<2> e1{1.0, 0.0};
    CHECK(r1.gradient(e1)[0] == Catch::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(r1.hessian(e1)(0, 0) == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.15, 1.4);
    for (int t = 0; t < 16; ++t) {
        const Point<2> x{u(rng), u(rng)};
        CHECK(std::abs(r1.hessian(x).det() - 1.0) <= 1e-12);
    }

    // eigenvalues split to (0, inf) as r -> 0: the family is singular at the
    // vertex and checks exclude a ball around it
    double prev_min = 1e9, prev_max = 0;
    for (double r : {0.1, 0.05, 0.025}) {
        const auto ev = r1.hessian({r, 0.0}).eigenvalues();
        CHECK(ev(0) < prev_min);
        CHECK(ev(1) > prev_max);
        CHECK(ev(0) * ev(1) == Catch::Approx(1.0).epsilon(1e-12));
        prev_min = ev(0);
        prev_max = ev(1);
    }
    // series scale: lambda_min ~ r, lambda_max ~ 1/r
    const auto ev = r1.hessian({0.01, 0.0}).eigenvalues();
    CHECK(ev(0) == Catch::Approx(0.01).epsilon(1e-3));
    CHECK(ev(1) == Catch::Approx(100.0).epsilon(1e-3));

    CHECK(r1.value({0.0, 0.0}) == 0.0);
    CHECK(r1.gradient({0.0, 0.0})[0] == 0.0);
    CHECK_THROWS_AS(r1.hessian({0.0, 0.0}), DomainError);
}

TEST_CASE("pogorelov: axis degeneracy and domain checks", "[analytic]") {
    const Pogorelov<3> pg(3);
    for (double t : {-0.3, 0.0, 0.2}) {
        CHECK(pg.value({0, 0, t}) == 0.0);
        const auto g = pg.gradient({0, 0, t});
        CHECK(g[0] == 0.0);
        CHECK(g[1] == 0.0);
        CHECK(g[2] == 0.0);
    }
    CHECK(pg.value({1, 0, 0}) == Catch::Approx(1.0));
    // extrinsic distance between axis points is exactly zero
    const auto gp = pg.gradient({0, 0, 0});
    const auto gq = pg.gradient({0, 0, 0.3});
    double dot = 0;
    for (int a = 0; a < 3; ++a) dot += (0.0 - 0.0) * (gp[a] - gq[a]);
    CHECK(dot == 0.0);
    CHECK_THROWS_AS(pg.value({0, 0, 0.9}), DomainError);
    CHECK_THROWS_AS(Pogorelov<3>(2), ParameterError);
}

TEST_CASE("pogorelov samples are discretely convex on the demo box", "[analytic]") {
    // fixed 33^n verification grids
    {
        const auto g = Pogorelov<2>::demo_grid(33);
        const auto p = sample_potential<2>(std::make_shared<Pogorelov<2>>(3), g);
        CHECK(p.convexity_modulus >= -1e-8);
    }
    {
        const auto g = Pogorelov<3>::demo_grid(33);
        const auto p = sample_potential<3>(std::make_shared<Pogorelov<3>>(3), g);
        CHECK(p.convexity_modulus >= -1e-8);
    }
}

TEST_CASE("sampled solution families satisfy det D2u = 1 + O(h^2)", "[analytic]") {
    // C measured and reported through the refinement ratio
    auto max_det_dev = [](const AnalyticPtr<2>& f, const GridSpec<2>& g, double margin) {
        const auto p = sample_potential<2>(f, g);
        const auto H = hessian_field(p.u);
        double dev = 0;
        for_each_node(g, [&](std::size_t k, const Index<2>& ix) {
            if (!in_core(g, ix, margin)) return;
            dev = std::max(dev, std::abs(H[k].det() - 1.0));
        });
        return dev;
    };
    const auto rot = std::make_shared<Quadratic<2>>(
        Quadratic<2>::unit_det(rotated_diag(2.0, 0.5, 0.6)));
    CHECK(max_det_dev(rot, GridSpec<2>::cube(-1.0, 1.0, 33), 0.0) <= 1e-11);

    const auto rad = std::make_shared<Radial2d>(1.0);
    const double margin = 2.0 * GridSpec<2>::cube(0.2, 1.2, 33).spacing(0);
    const double d33 = max_det_dev(rad, GridSpec<2>::cube(0.2, 1.2, 33), margin);
    const double d65 = max_det_dev(rad, GridSpec<2>::cube(0.2, 1.2, 65), margin);
    INFO("det deviations " << d33 << " -> " << d65);
    CHECK(d33 / d65 >= 3.2);
    CHECK(d33 / d65 <= 4.8);
}

TEST_CASE("mollified quadratic is the quadratic again, exactly", "[analytic]") {
    const auto q = std::make_shared<Quadratic<2>>(Quadratic<2>::unit_det(SymMat<2>::identity()));
    const Mollified<2> mq(q, 0.1, Point<2>{0.0, 0.0});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const Point<2> x{u(rng), u(rng)};
        CHECK(std::abs(mq.value(x) - q->value(x)) <= 1e-14);
        CHECK(std::abs(mq.gradient(x)[0] - x[0]) <= 1e-14);
    }
}

TEST_CASE("mollified kink converges uniformly to the kink", "[analytic]") {
    const auto kink = std::make_shared<KinkedQuadratic<2>>(0.4, 0.1);
    double prev = 1e9;
    for (double eps : {0.2, 0.1, 0.05}) {
        const Mollified<2> mk(kink, eps, Point<2>{-0.7, -0.7});
        double dev = 0;
        for (double x = -1.0; x <= 1.0; x += 0.01)
            dev = std::max(dev, std::abs(mk.value({x, 0.3}) - kink->value({x, 0.3})));
        CHECK(dev < prev);
        prev = dev;
    }
    CHECK(prev <= 0.05);
}
