#include "qfin/error.hpp"
#include "qfin/inverse.hpp"
#include "qfin/solver.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace qfin;
using std::numbers::pi;

namespace {

std::vector<double> harmonic(const UniformGrid& g, double mass, double omega) {
    std::vector<double> v(g.n);
    for (std::size_t i = 0; i < g.n; ++i) v[i] = 0.5 * mass * omega * omega * g.at(i) * g.at(i);
    return v;
}

double packet_width(const WaveState& s) {
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < s.grid.n; ++i) {
        const double p = std::norm(s.psi[i]);
        const double x = s.grid.at(i);
        m0 += p;
        m1 += p * x;
        m2 += p * x * x;
    }
    const double mean = m1 / m0;
    return std::sqrt(m2 / m0 - mean * mean);
}

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

} // namespace

TEST_CASE("Hamiltonian is real symmetric tridiagonal") {
    const auto g = UniformGrid::between_walls(-1.0, 1.0, 16);
    const ModelParams p(1.5, 0.3);
    const auto h = make_hamiltonian(harmonic(g, 1.5, 2.0), g, p);
    const double c = p.kinetic() / (g.dx * g.dx);
    CHECK(h.off_diagonal == -c);
    // Apply to unit vectors and compare the transposed entries.
    for (std::size_t i = 0; i + 1 < g.n; ++i) {
        std::vector<double> ei(g.n, 0.0), ej(g.n, 0.0);
        ei[i] = 1.0;
        ej[i + 1] = 1.0;
        CHECK(h.apply(ei)[i + 1] == h.apply(ej)[i]);
    }
}

TEST_CASE("ground state in a box matches 2 m D^2 (pi/L)^2") {
    const ModelParams p(1.0, 0.5);
    const double L = 2.0;
    const auto g = UniformGrid::between_walls(0.0, L, 1024);
    const std::vector<double> zero(g.n, 0.0);
    const auto e = ground_state(zero, g, p);
    const double exact = 2.0 * p.mass() * p.diffusion() * p.diffusion() * (pi / L) * (pi / L);
    CHECK(std::abs(e.energy - exact) / exact < 1e-3);
    CHECK(e.residual < 1e-8);
    // nodeless, positive, normalized
    double ss = 0.0;
    for (double v : e.psi) {
        CHECK(v > 0.0);
        ss += v * v * g.dx;
    }
    CHECK(ss == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("harmonic ground state energy is m D omega") {
    const double mass = 1.0, diffusion = 0.5, omega = 1.0;
    const ModelParams p(mass, diffusion);
    const auto g = UniformGrid::between_walls(-10.0, 10.0, 1024);
    const auto e = ground_state(harmonic(g, mass, omega), g, p);
    const double exact = mass * diffusion * omega;
    CHECK(std::abs(e.energy - exact) / exact < 1e-3);
}

TEST_CASE("spectrum: box ratios, harmonic spacing, orthogonality") {
    const ModelParams p(2.0, 0.25);
    {
        const auto g = UniformGrid::between_walls(-1.0, 1.0, 1024);
        const std::vector<double> zero(g.n, 0.0);
        const auto s = spectrum(zero, g, p, 5);
        for (std::size_t n = 1; n < s.size(); ++n) {
            const double ratio = s[n].energy / s[0].energy;
            const double exact = static_cast<double>((n + 1) * (n + 1));
            CHECK(std::abs(ratio - exact) / exact < 5e-3);
        }
    }
    {
        const double omega = 3.0;
        const auto g = UniformGrid::between_walls(-6.0, 6.0, 1024);
        const auto s = spectrum(harmonic(g, p.mass(), omega), g, p, 6);
        const double spacing = p.hbar_eff() * omega;
        for (std::size_t n = 0; n + 1 < s.size(); ++n) {
            CHECK(s[n].energy < s[n + 1].energy);
            CHECK(std::abs((s[n + 1].energy - s[n].energy) - spacing) / spacing < 5e-3);
        }
        for (std::size_t a = 0; a < s.size(); ++a)
            for (std::size_t b = a + 1; b < s.size(); ++b) {
                double dot = 0.0;
                for (std::size_t i = 0; i < g.n; ++i) dot += s[a].psi[i] * s[b].psi[i] * g.dx;
                CHECK(std::abs(dot) < 1e-8);
            }
        for (const auto& e : s) CHECK(e.residual < 1e-8);
    }
}

TEST_CASE("spectrum with k = 1 equals ground_state") {
    const ModelParams p(1.0, 0.2);
    const auto g = UniformGrid::between_walls(-3.0, 3.0, 200);
    const auto v = harmonic(g, 1.0, 1.3);
    const auto a = ground_state(v, g, p);
    const auto b = spectrum(v, g, p, 1);
    CHECK(a.energy == b[0].energy);
    CHECK(a.psi == b[0].psi);
}

TEST_CASE("offset covariance: Phi + c shifts eigenvalues by c") {
    const ModelParams p(1.0, 0.4);
    const auto g = UniformGrid::between_walls(-4.0, 4.0, 300);
    auto v = harmonic(g, 1.0, 2.0);
    const auto base = spectrum(v, g, p, 3);
    const double c = 17.25;
    for (double& x : v) x += c;
    const auto shifted = spectrum(v, g, p, 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(shifted[k].energy - base[k].energy == doctest::Approx(c).epsilon(1e-10));
        double d = 0.0;
        for (std::size_t i = 0; i < g.n; ++i) d = std::max(d, std::abs(shifted[k].psi[i] - base[k].psi[i]));
        CHECK(d < 1e-8);
    }
}

TEST_CASE("ground state of an extracted potential is the amplitude itself") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    std::vector<double> values(80);
    for (double& v : values) v = u(rng);
    const auto dens = amplitude(density_from_values(-1.0, 0.025, values), 1e-4);
    const ModelParams p(1.0, 0.0169);
    const auto prof = extract_potential(dens, p);
    const auto e = ground_state(prof, p);
    double gap = 0.0;
    for (std::size_t i = 0; i < dens.size(); ++i) gap = std::max(gap, std::abs(e.psi[i] - dens.a[i]));
    CHECK(gap < 1e-8);
    CHECK(std::abs(e.energy) < 1e-8 * std::abs(prof.wall_closure_left));

    // Anchored potential: E0 equals the anchoring offset.
    auto anchored = prof.full_grid_potential();
    for (double& v : anchored) v += prof.anchor_offset;
    const UniformGrid g{prof.full_grid_x0(), prof.dx, anchored.size()};
    const auto ea = ground_state(anchored, g, p);
    CHECK(ea.energy == doctest::Approx(prof.anchor_offset).epsilon(1e-9));
}

TEST_CASE("solver input validation") {
    const ModelParams p(1.0, 0.5);
    const auto g = UniformGrid::between_walls(0.0, 1.0, 16);
    std::vector<double> v(g.n, 0.0);
    v[3] = std::nan("");
    try {
        ground_state(v, g, p);
        FAIL("accepted NaN potential");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Input);
    }
    CHECK_THROWS_AS(UniformGrid::between_walls(0.0, 1.0, 4), Error);
    CHECK_THROWS_AS(spectrum(std::vector<double>(g.n, 0.0), g, p, g.n - 2), Error);
}

TEST_CASE("free Gaussian packet spreads as the closed form") {
    const ModelParams p(1.0, 0.5); // hbar_eff = 1
    const auto g = UniformGrid::between_walls(-40.0, 40.0, 4000);
    const double sigma0 = 1.0;
    const auto s0 = gaussian_packet(g, p, 0.0, sigma0);
    const std::vector<double> zero(g.n, 0.0);
    const double dt = 0.01;
    double worst = 0.0;
    propagate(s0, zero, dt, 500, [&](const WaveState& s) {
        const double tau = p.hbar_eff() * s.t / (2.0 * p.mass() * sigma0 * sigma0);
        const double exact = sigma0 * std::sqrt(1.0 + tau * tau);
        worst = std::max(worst, std::abs(packet_width(s) - exact) / exact);
    });
    CHECK(worst < 5e-3);
}

TEST_CASE("Crank-Nicolson conserves the norm and keeps eigenstates stationary") {
    const ModelParams p(1.0, 0.5);
    const auto g = UniformGrid::between_walls(-8.0, 8.0, 512);
    const auto v = harmonic(g, 1.0, 1.0);
    const auto e = ground_state(v, g, p);
    const auto s0 = from_eigen(g, e, p);
    double drift = 0.0, density_change = 0.0;
    propagate(s0, v, 0.01, 1000, [&](const WaveState& s) {
        drift = std::max(drift, std::abs(s.norm() - 1.0));
        for (std::size_t i = 0; i < g.n; ++i)
            density_change = std::max(density_change, std::abs(std::norm(s.psi[i]) - std::norm(s0.psi[i])));
    });
    CHECK(drift < 1e-8);
    CHECK(density_change < 1e-8);

    double moving_drift = 0.0;
    propagate(gaussian_packet(g, p, 1.5, 0.6, 2.0), v, 0.01, 1000,
              [&](const WaveState& s) { moving_drift = std::max(moving_drift, std::abs(s.norm() - 1.0)); });
    CHECK(moving_drift < 1e-8);
}

TEST_CASE("generalized propagation reduces to the standard one when delta_D = 0") {
    const ModelParams p(1.0, 0.5);
    const auto g = UniformGrid::between_walls(-6.0, 6.0, 256);
    const auto v = harmonic(g, 1.0, 1.0);
    const auto s0 = gaussian_packet(g, p, 0.7, 0.8, 1.0);
    const auto ref = propagate(s0, v, 0.01, 200);
    const DiffusionSchedule zero = [](double) { return 0.0; };
    for (auto mode : {GeneralizedMode::Full, GeneralizedMode::Perturbative}) {
        GeneralizedOptions opt;
        opt.mode = mode;
        const auto out = propagate_generalized(s0, v, p.diffusion(), zero, 0.01, 200, opt);
        CHECK(max_abs_diff(out.psi, ref.psi) < 1e-12);
    }
}

TEST_CASE("generalized propagation rejects delta_D outside the perturbative regime") {
    const ModelParams p(1.0, 0.5);
    const auto g = UniformGrid::between_walls(-6.0, 6.0, 64);
    const auto s0 = gaussian_packet(g, p, 0.0, 1.0);
    const std::vector<double> zero(g.n, 0.0);
    try {
        propagate_generalized(s0, zero, 0.5, [](double) { return 0.6; }, 0.01, 5);
        FAIL("regime violation accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Regime);
    }
}

TEST_CASE("madelung decomposition") {
    const ModelParams p(2.0, 0.25); // hbar_eff = 1
    const auto g = UniformGrid::between_walls(-5.0, 5.0, 401);

    SUBCASE("real positive state has zero action and velocity") {
        const auto s = gaussian_packet(g, p, 0.0, 1.0);
        const auto f = madelung_decompose(s);
        for (std::size_t i = 0; i < g.n; ++i) {
            CHECK(f.action[i] == 0.0);
            CHECK(f.velocity[i] == 0.0);
        }
    }
    SUBCASE("plane-wave phase gives V = hbar k / m") {
        const double k = 7.5; // large enough to wrap the phase several times
        std::vector<cplx> psi(g.n);
        for (std::size_t i = 0; i < g.n; ++i) psi[i] = std::polar(1.0 + 0.1 * std::cos(g.at(i)), k * g.at(i));
        const auto s = make_wave_state(g, psi, p);
        const auto f = madelung_decompose(s);
        const double v = p.hbar_eff() * k / p.mass();
        for (double x : f.velocity) CHECK(x == doctest::Approx(v).epsilon(1e-10));
        CHECK(f.action[g.n / 2] == 0.0);
        CHECK(f.flagged_nodes.empty());
    }
    SUBCASE("recompose inverts decompose") {
        std::vector<cplx> psi(g.n);
        for (std::size_t i = 0; i < g.n; ++i) {
            const double x = g.at(i);
            psi[i] = std::polar(std::exp(-x * x / 4.0), 3.0 * std::sin(x) + 0.4 * x * x);
        }
        const auto s = make_wave_state(g, psi, p);
        const auto back = madelung_recompose(madelung_decompose(s), p);
        CHECK(max_abs_diff(back, s.psi) < 1e-12);
    }
    SUBCASE("near-zero amplitude is flagged") {
        std::vector<cplx> psi(g.n);
        for (std::size_t i = 0; i < g.n; ++i) psi[i] = g.at(i); // odd, node at 0
        const auto f = madelung_decompose(make_wave_state(g, psi, p));
        CHECK(f.flagged_nodes.size() >= 1);
    }
}

TEST_CASE("continuity residual") {
    const ModelParams p(1.0, 0.5);

    SUBCASE("stationary state") {
        const auto g = UniformGrid::between_walls(-8.0, 8.0, 400);
        const auto v = harmonic(g, 1.0, 1.0);
        const auto s0 = from_eigen(g, ground_state(v, g, p), p);
        std::vector<WaveState> states;
        propagate(s0, v, 0.01, 20, [&](const WaveState& s) { states.push_back(s); });
        CHECK(continuity_residual(states, 0.01).max < 1e-8);
    }
    SUBCASE("converges under refinement for a moving packet") {
        auto run = [&](std::size_t n, double dt) {
            const auto g = UniformGrid::between_walls(-20.0, 20.0, n);
            const std::vector<double> zero(g.n, 0.0);
            std::vector<WaveState> states;
            const std::size_t steps = static_cast<std::size_t>(std::lround(0.5 / dt));
            propagate(gaussian_packet(g, p, -2.0, 1.0, 1.5), zero, dt, steps,
                      [&](const WaveState& s) { states.push_back(s); });
            return continuity_residual(states, dt).max;
        };
        const double coarse = run(399, 0.02);
        const double fine = run(799, 0.01);
        CHECK(coarse / fine >= 3.0);
    }
    SUBCASE("corrupted pair is flagged") {
        const auto g = UniformGrid::between_walls(-8.0, 8.0, 400);
        const auto v = harmonic(g, 1.0, 1.0);
        const auto s0 = from_eigen(g, ground_state(v, g, p), p);
        auto s1 = propagate(s0, v, 0.01, 1);
        auto clean = continuity_residual(std::vector<WaveState>{s0, s1}, 0.01).max;
        s1.psi[g.n / 2 + 3] *= 1.05;
        auto dirty = continuity_residual(std::vector<WaveState>{s0, s1}, 0.01).max;
        CHECK(dirty > 1e6 * std::max(clean, 1e-14));
        CHECK(dirty > 1e-2);
    }
    SUBCASE("mismatched grids") {
        const auto g1 = UniformGrid::between_walls(-8.0, 8.0, 64);
        const auto g2 = UniformGrid::between_walls(-8.0, 8.0, 65);
        const std::vector<WaveState> states{gaussian_packet(g1, p, 0.0, 1.0), gaussian_packet(g2, p, 0.0, 1.0)};
        CHECK_THROWS_AS(continuity_residual(states, 0.01), Error);
    }
}

TEST_CASE("full versus perturbative generalized propagation on the harmonic ground state") {
    const ModelParams p(1.0, 0.5);
    const auto g = UniformGrid::between_walls(-6.0, 6.0, 256);
    const auto v = harmonic(g, 1.0, 1.0);
    const auto s0 = from_eigen(g, ground_state(v, g, p), p);

    auto gap = [&](double relative) {
        const double d = relative * p.diffusion();
        const DiffusionSchedule constant = [d](double) { return d; };
        GeneralizedOptions full, pert;
        full.mode = GeneralizedMode::Full;
        pert.mode = GeneralizedMode::Perturbative;
        const auto a = propagate_generalized(s0, v, p.diffusion(), constant, 0.01, 200, full);
        const auto b = propagate_generalized(s0, v, p.diffusion(), constant, 0.01, 200, pert);
        return max_abs_diff(a.psi, b.psi);
    };
    const double g1 = gap(0.01);
    const double g2 = gap(0.02);
    CHECK(g1 < 10.0 * 0.01 * 0.01);
    CHECK(g2 / g1 >= 3.0);
    CHECK(g2 / g1 <= 5.0);

    // Sinusoidal delta_D: the norm drift is a measured diagnostic.
    const DiffusionSchedule wave = [&](double t) { return 0.05 * p.diffusion() * std::sin(2.0 * pi * t); };
    double drift = 0.0;
    propagate_generalized(s0, v, p.diffusion(), wave, 0.01, 500, {},
                          [&](const WaveState& s) { drift = std::max(drift, std::abs(s.norm() - 1.0)); });
    CHECK(drift < 1e-6);
}

TEST_CASE("fixed-point non-convergence is reported with its trace") {
    const ModelParams p(1.0, 0.5);
    const auto g = UniformGrid::between_walls(-6.0, 6.0, 128);
    const auto v = harmonic(g, 1.0, 1.0);
    const auto s0 = gaussian_packet(g, p, 1.0, 0.5, 3.0);
    GeneralizedOptions opt;
    opt.max_iterations = 1;
    try {
        propagate_generalized(s0, v, 0.5, [](double) { return 0.2; }, 0.05, 3, opt);
        FAIL("expected convergence error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Convergence);
        CHECK(std::string(e.what()).find("differences") != std::string::npos);
    }
}
