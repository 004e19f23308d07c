#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "malab/io.hpp"
#include "malab/solve.hpp"

using namespace malab;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("binary field round-trip is bit exact", "[io]") {
    const auto g = GridSpec<2>({0.2, -0.3}, {1.2, 0.9}, {17, 23});
    auto u = sample_potential<2>(std::make_shared<Radial2d>(1.0), g);
    u.residual = 3.5e-11;
    u.certificate = Certificate::solver;
    const auto path = tmp_path("malab_roundtrip.bin");
    io::write_field(path, u);
    const auto v = io::read_field<2>(path);
    REQUIRE(v.grid().same_layout(g));
    for (std::size_t k = 0; k < g.size(); ++k) REQUIRE(v.u[k] == u.u[k]);
    CHECK(v.certificate == Certificate::solver);
    CHECK(v.residual == 3.5e-11);
    CHECK(io::field_hash(v) == io::field_hash(u));
    std::remove(path.c_str());
}

TEST_CASE("csv field round-trip is within one ulp", "[io]") {
    const auto g = GridSpec<2>::cube(-1.0, 1.0, 9);
    const auto u = sample_potential<2>(
        std::make_shared<Quadratic<2>>(Quadratic<2>::unit_det(SymMat<2>::identity())), g);
    const auto path = tmp_path("malab_roundtrip.csv");
    io::write_field(path, u);
    const auto v = io::read_field<2>(path);
    for (std::size_t k = 0; k < g.size(); ++k) {
        // 17 significant digits round-trip doubles exactly
        REQUIRE(v.u[k] == u.u[k]);
    }
    std::remove(path.c_str());
}

TEST_CASE("reading a 3d field as 2d is rejected", "[io]") {
    const auto g = GridSpec<3>::cube(-0.5, 0.5, 5);
    ScalarField<3> f(g, 1.0);
    const auto u = make_potential(std::move(f));
    const auto path = tmp_path("malab_dim.bin");
    io::write_field(path, u);
    CHECK_THROWS_AS(io::read_field<2>(path), InputError);
    std::remove(path.c_str());
}

TEST_CASE("missing files and bad headers are input errors", "[io]") {
    CHECK_THROWS_AS(io::read_field<2>("/nonexistent/nope.bin"), InputError);
    const auto path = tmp_path("malab_bad.bin");
    io::write_text(path, "this is not a header\n");
    CHECK_THROWS_AS(io::read_field<2>(path), InputError);
    std::remove(path.c_str());
}
