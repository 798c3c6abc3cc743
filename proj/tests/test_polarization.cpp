#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <random>

#include "cavtomo/polarization.hpp"

using namespace cavtomo;

namespace {

// Independent 2x2 oracle: accumulate weighted projectors entry by entry,
// sharing no code with mix().
std::array<complexd, 4> projector_sum(const std::vector<WeightedJones>& parts) {
    std::array<complexd, 4> m{};
    for (const auto& [w, j] : parts) {
        m[0] += w * j.alpha * std::conj(j.alpha);
        m[1] += w * j.alpha * std::conj(j.beta);
        m[2] += w * j.beta * std::conj(j.alpha);
        m[3] += w * j.beta * std::conj(j.beta);
    }
    return m;
}

JonesVector random_jones(std::mt19937& rng) {
    std::normal_distribution<double> gauss;
    JonesVector j{complexd(gauss(rng), gauss(rng)), complexd(gauss(rng), gauss(rng))};
    return j.normalized();
}

StokesVector random_stokes_in_ball(std::mt19937& rng) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    while (true) {
        StokesVector s{uni(rng), uni(rng), uni(rng), 1.0};
        if (s.norm_squared() <= 1.0) return s;
    }
}

} // namespace

TEST_CASE("stokes_from_jones maps the basis states to the sphere poles") {
    const StokesVector h = stokes_from_jones(jones::horizontal());
    CHECK(h.s_hv == 1.0);
    CHECK(h.s_da == 0.0);
    CHECK(h.s_rl == 0.0);

    const StokesVector d = stokes_from_jones(jones::diagonal());
    CHECK(d.s_hv == Catch::Approx(0.0).margin(1e-15));
    CHECK(d.s_da == Catch::Approx(1.0).margin(1e-15));
    CHECK(d.s_rl == Catch::Approx(0.0).margin(1e-15));

    // circular convention: (1, i)/sqrt(2) sits at +1 on the RL axis
    const StokesVector r = stokes_from_jones(jones::circular_right());
    CHECK(r.s_hv == Catch::Approx(0.0).margin(1e-15));
    CHECK(r.s_da == Catch::Approx(0.0).margin(1e-15));
    CHECK(r.s_rl == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("stokes_from_jones records the intensity and rejects zero states") {
    const StokesVector s = stokes_from_jones({complexd(3.0, 0.0), complexd(0.0, 4.0)});
    CHECK(s.intensity == Catch::Approx(25.0));
    CHECK_THROWS_AS(stokes_from_jones({0.0, 0.0}), InvalidStateError);
}

TEST_CASE("density_from_stokes reproduces the canonical matrices") {
    const PolarizationDensity mixed = density_from_stokes({0, 0, 0, 1});
    CHECK(mixed.hh == complexd(0.5, 0.0));
    CHECK(mixed.vv == complexd(0.5, 0.0));
    CHECK(mixed.hv == complexd(0.0, 0.0));

    const PolarizationDensity h = density_from_stokes({1, 0, 0, 1});
    CHECK(h.hh == complexd(1.0, 0.0));
    CHECK(h.vv == complexd(0.0, 0.0));

    const PolarizationDensity d = density_from_stokes({0, 1, 0, 1});
    CHECK(d.hh == complexd(0.5, 0.0));
    CHECK(d.hv == complexd(0.5, 0.0));
    CHECK(d.vh == complexd(0.5, 0.0));

    CHECK_THROWS_AS(density_from_stokes({0.8, 0.8, 0.8, 1}), UnphysicalStateError);
}

TEST_CASE("stokes_from_density inverts the construction") {
    const StokesVector mixed = stokes_from_density(PolarizationDensity{});
    CHECK(mixed.s_hv == 0.0);
    CHECK(mixed.s_da == 0.0);
    CHECK(mixed.s_rl == 0.0);

    const StokesVector v = stokes_from_density(mix({{1.0, jones::vertical()}}));
    CHECK(v.s_hv == -1.0);
    CHECK(v.s_da == 0.0);
    CHECK(v.s_rl == 0.0);

    // linearity of the Stokes map on a 0.9/0.1 D/A mixture
    const StokesVector da = stokes_from_density(
        mix({{0.9, jones::diagonal()}, {0.1, jones::antidiagonal()}}));
    CHECK(da.s_hv == Catch::Approx(0.0).margin(1e-15));
    CHECK(da.s_da == Catch::Approx(0.8).margin(1e-15));
    CHECK(da.s_rl == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("stokes_from_density rejects invalid matrices") {
    PolarizationDensity bad;
    bad.hv = complexd(0.1, 0.0);
    bad.vh = complexd(0.3, 0.0); // not the conjugate
    CHECK_THROWS_AS(stokes_from_density(bad), InvalidStateError);

    PolarizationDensity off_trace;
    off_trace.hh = complexd(0.7, 0.0);
    off_trace.vv = complexd(0.7, 0.0);
    CHECK_THROWS_AS(stokes_from_density(off_trace), InvalidStateError);
}

TEST_CASE("degree_of_polarization is the Poincare norm") {
    CHECK(degree_of_polarization({0, 0, 0, 1}) == 0.0);
    CHECK(degree_of_polarization({0, 1, 0, 1}) == 1.0);
    // values produced by the forward model at resonance; the norm is checked
    // by independent arithmetic
    const double expected = std::sqrt(0.12 * 0.12 + 0.36 * 0.36 + 0.73 * 0.73);
    CHECK(degree_of_polarization({-0.12, -0.36, 0.73, 1}) == Catch::Approx(expected));
    CHECK(degree_of_polarization({-0.12, -0.36, 0.73, 1}) == Catch::Approx(0.823).margin(5e-4));
}

TEST_CASE("mix handles endpoints and rejects bad weights") {
    const PolarizationDensity pure = mix({{1.0, jones::diagonal()}});
    CHECK(pure.hh.real() == Catch::Approx(0.5).margin(1e-15));
    CHECK(pure.hv.real() == Catch::Approx(0.5).margin(1e-15));

    const PolarizationDensity balanced =
        mix({{0.5, jones::horizontal()}, {0.5, jones::vertical()}});
    CHECK(balanced.hh.real() == Catch::Approx(0.5).margin(1e-15));
    CHECK(balanced.vv.real() == Catch::Approx(0.5).margin(1e-15));
    CHECK(std::abs(balanced.hv) == Catch::Approx(0.0).margin(1e-15));

    // half D, half H: Stokes (0.5, 0.5, 0), purity 1/sqrt(2); checked against
    // the direct projector sum
    const std::vector<WeightedJones> parts{{0.5, jones::diagonal()},
                                           {0.5, jones::horizontal()}};
    const auto oracle = projector_sum(parts);
    const PolarizationDensity dh = mix(parts);
    CHECK(std::abs(dh.hh - oracle[0]) < 1e-15);
    CHECK(std::abs(dh.hv - oracle[1]) < 1e-15);
    const StokesVector s = stokes_from_density(dh);
    CHECK(s.s_hv == Catch::Approx(0.5).margin(1e-12));
    CHECK(s.s_da == Catch::Approx(0.5).margin(1e-12));
    CHECK(s.s_rl == Catch::Approx(0.0).margin(1e-12));
    CHECK(degree_of_polarization(s) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-12));

    CHECK_THROWS_AS(mix({{0.7, jones::diagonal()}, {0.7, jones::horizontal()}}),
                    InvalidMixtureError);
    CHECK_THROWS_AS(mix({{-0.2, jones::diagonal()}, {1.2, jones::horizontal()}}),
                    InvalidMixtureError);
    CHECK_THROWS_AS(mix({{1.0, JonesVector{2.0, 0.0}}}), InvalidMixtureError);
}

TEST_CASE("stokes_from_intensities implements the defining ratios") {
    const StokesVector h = stokes_from_intensities({1, 0, 0.5, 0.5, 0.5, 0.5});
    CHECK(h.s_hv == 1.0);
    CHECK(h.s_da == 0.0);
    CHECK(h.s_rl == 0.0);
    CHECK(h.intensity == 1.0);

    const StokesVector d = stokes_from_intensities({0.5, 0.5, 1, 0, 0.5, 0.5});
    CHECK(d.s_da == 1.0);

    const StokesVector flat = stokes_from_intensities({0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
    CHECK(degree_of_polarization(flat) == 0.0);

    CHECK_THROWS_AS(stokes_from_intensities({0, 0, 0.5, 0.5, 0.5, 0.5}),
                    DegenerateMeasurementError);
}

TEST_CASE("pair_sum_disagreement measures cross-basis consistency") {
    CHECK(pair_sum_disagreement({0.5, 0.5, 1, 0, 0.5, 0.5}) == 0.0);
    CHECK(pair_sum_disagreement({0.6, 0.6, 0.5, 0.5, 0.5, 0.5}) ==
          Catch::Approx(0.2 / (3.2 / 3.0)));
}

TEST_CASE("poincare_angle") {
    CHECK(poincare_angle({1, 0, 0, 1}, {0, 1, 0, 1}) == Catch::Approx(M_PI / 2));
    CHECK(poincare_angle({0, 0.5, 0, 1}, {0, 1, 0, 1}) == Catch::Approx(0.0).margin(1e-12));
    CHECK_THROWS_AS(poincare_angle({0, 0, 0, 1}, {0, 1, 0, 1}), InvalidStateError);
}

TEST_CASE("property: density/stokes round trip at 1e-12") {
    std::mt19937 rng(7301);
    for (int i = 0; i < 1000; ++i) {
        const StokesVector s = random_stokes_in_ball(rng);
        const StokesVector back = stokes_from_density(density_from_stokes(s));
        CHECK(std::abs(back.s_hv - s.s_hv) < 1e-12);
        CHECK(std::abs(back.s_da - s.s_da) < 1e-12);
        CHECK(std::abs(back.s_rl - s.s_rl) < 1e-12);
    }
}

TEST_CASE("property: mixtures stay inside the Poincare ball") {
    std::mt19937 rng(9413);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double w = uni(rng);
        const std::vector<WeightedJones> parts{{w, random_jones(rng)},
                                               {1.0 - w, random_jones(rng)}};
        const double purity = degree_of_polarization(stokes_from_density(mix(parts)));
        CHECK(purity <= 1.0 + 1e-12);
    }
    // equality cases: a single component, and parallel components
    const JonesVector j = random_jones(rng);
    const JonesVector j_phase{j.alpha * std::polar(1.0, 0.7), j.beta * std::polar(1.0, 0.7)};
    CHECK(degree_of_polarization(stokes_from_density(mix({{1.0, j}}))) ==
          Catch::Approx(1.0).margin(1e-12));
    CHECK(degree_of_polarization(stokes_from_density(mix({{0.4, j}, {0.6, j_phase}}))) ==
          Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("property: the Stokes map is linear in the mixture weights") {
    std::mt19937 rng(52111);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        double w0 = uni(rng), w1 = uni(rng), w2 = uni(rng);
        const double total = w0 + w1 + w2;
        w0 /= total;
        w1 /= total;
        w2 /= total;
        const JonesVector a = random_jones(rng), b = random_jones(rng),
                          c = random_jones(rng);
        const StokesVector mixed =
            stokes_from_density(mix({{w0, a}, {w1, b}, {w2, c}}));
        const StokesVector sa = stokes_from_jones(a), sb = stokes_from_jones(b),
                           sc = stokes_from_jones(c);
        CHECK(std::abs(mixed.s_hv - (w0 * sa.s_hv + w1 * sb.s_hv + w2 * sc.s_hv)) < 1e-12);
        CHECK(std::abs(mixed.s_da - (w0 * sa.s_da + w1 * sb.s_da + w2 * sc.s_da)) < 1e-12);
        CHECK(std::abs(mixed.s_rl - (w0 * sa.s_rl + w1 * sb.s_rl + w2 * sc.s_rl)) < 1e-12);
    }
}

TEST_CASE("property: Tr(rho^2) = (1 + |s|^2) / 2") {
    std::mt19937 rng(77);
    for (int i = 0; i < 1000; ++i) {
        const StokesVector s = random_stokes_in_ball(rng);
        const PolarizationDensity rho = density_from_stokes(s);
        CHECK(matrix_purity(rho) ==
              Catch::Approx(0.5 * (1.0 + s.norm_squared())).margin(1e-12));
    }
}

TEST_CASE("jones::from_poincare_angles agrees with the Stokes chart") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> th(0.0, M_PI), ph(-M_PI, M_PI);
    for (int i = 0; i < 200; ++i) {
        const double theta = th(rng), phi = ph(rng);
        const StokesVector s = stokes_from_jones(jones::from_poincare_angles(theta, phi));
        CHECK(s.s_hv == Catch::Approx(std::cos(theta)).margin(1e-12));
        CHECK(s.s_da == Catch::Approx(std::sin(theta) * std::cos(phi)).margin(1e-12));
        CHECK(s.s_rl == Catch::Approx(std::sin(theta) * std::sin(phi)).margin(1e-12));
    }
}
