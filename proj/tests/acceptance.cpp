// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
// gating criterion fails. The dataset-dependent reproduction check is
// advisory and only runs when QFIN_SP500_CSV names a daily price file.

#include "cli.hpp"

#include "qfin/density.hpp"
#include "qfin/inverse.hpp"
#include "qfin/scaling.hpp"
#include "qfin/simulate.hpp"
#include "qfin/solver.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace qfin;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<double> harmonic(const UniformGrid& g, double m, double w) {
    std::vector<double> v(g.n);
    for (std::size_t i = 0; i < g.n; ++i) v[i] = 0.5 * m * w * w * g.at(i) * g.at(i);
    return v;
}

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

// Shared with criterion 8: every profile extracted in criterion 1 is checked.
double worst_bohm_identity = 0.0;

void track_identity(const DensityGrid& g, const ModelParams& p, const PotentialProfile& prof) {
    const auto q = quantum_potential(g, p);
    for (std::size_t i = 0; i < q.size(); ++i)
        worst_bohm_identity =
            std::max(worst_bohm_identity, std::abs(q[i] + prof.phi_minus_e[i]) / std::max(1.0, std::abs(q[i])));
}

Outcome roundtrip() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240501);
    std::uniform_int_distribution<std::size_t> size(64, 512);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = size(rng);
        // Alternate rough (iid) and smooth (random Fourier) positive densities.
        std::vector<double> v(n);
        if (trial % 2 == 0) {
            for (double& x : v) x = 0.02 + u(rng);
        } else {
            const double a1 = u(rng), a2 = u(rng), ph = 2 * std::numbers::pi * u(rng);
            for (std::size_t i = 0; i < n; ++i) {
                const double s = static_cast<double>(i) / static_cast<double>(n - 1);
                v[i] = 1.05 + a1 * std::sin(2 * std::numbers::pi * s + ph) * 0.5 + a2 * std::cos(6 * std::numbers::pi * s) * 0.45;
            }
        }
        const double dx = 0.01 + 0.05 * u(rng);
        const ModelParams p(0.5 + u(rng), 0.005 + 0.5 * u(rng));
        const auto g = amplitude(density_from_values(6.0, dx, v));
        const auto prof = extract_potential(g, p);
        track_identity(g, p, prof);
        const auto eig = ground_state(prof, p);
        double norm = 0.0;
        for (double a : g.a) norm += a * a * dx;
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(eig.psi[i] - g.a[i] / norm));
    }
    const double secs = seconds_since(t0);
    o.detail << "max L-inf gap " << worst << ", " << secs << " s";
    o.require(worst < 1e-8, "gap < 1e-8");
    o.require(secs < 5.0, "runtime < 5 s");
    return o;
}

Outcome eigenvalues() {
    Outcome o;
    const ModelParams p(1.0, 0.5);
    const auto box = UniformGrid::between_walls(0.0, 1.0, 1024);
    const double length = box.box_width();
    const double box_exact = 2.0 * p.mass() * p.diffusion() * p.diffusion() * std::pow(std::numbers::pi / length, 2);
    const double box_e0 = ground_state(std::vector<double>(box.n, 0.0), box, p).energy;
    const double box_err = std::abs(box_e0 - box_exact) / box_exact;

    const double omega = 1.0;
    const auto hg = UniformGrid::between_walls(-10.0, 10.0, 1024);
    const auto levels = spectrum(harmonic(hg, p.mass(), omega), hg, p, 6);
    const double h_exact = p.mass() * p.diffusion() * omega;
    const double h_err = std::abs(levels[0].energy - h_exact) / h_exact;
    double spacing_err = 0.0;
    for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
        const double gap = levels[k + 1].energy - levels[k].energy;
        spacing_err = std::max(spacing_err, std::abs(gap - 2.0 * h_exact) / (2.0 * h_exact));
    }
    o.detail << "box rel err " << box_err << ", harmonic rel err " << h_err << ", spacing dev " << spacing_err;
    o.require(box_err < 1e-3, "box E0 within 0.1%");
    o.require(h_err < 1e-3, "harmonic E0 within 0.1%");
    o.require(spacing_err < 5e-3, "spacing within 0.5%");
    return o;
}

Outcome estimators() {
    Outcome o;
    const auto t0 = Clock::now();
    const double sigma = 0.18;
    const auto gbm = gbm_path(sigma, 0.0, 10000, 1.0 / 52.0, 1);
    const auto r = estimate_hurst(gbm);
    const double d_true = sigma * sigma / 2.0;
    o.detail << "GBM H " << r.hurst << " D " << r.diffusion << " (true " << d_true << ")";
    o.require(r.hurst >= 0.45 && r.hurst <= 0.55, "GBM H in [0.45, 0.55]");
    o.require(std::abs(r.diffusion - d_true) <= 0.1 * d_true, "GBM D within 10%");
    for (double h : {0.7, 0.3}) {
        const auto f = estimate_hurst(fbm_path(h, 4096, 1.0 / 52.0, 0.2, 2));
        o.detail << ", fBm(" << h << ") H " << f.hurst;
        o.require(std::abs(f.hurst - h) <= 0.07, "fBm H within 0.07");
    }
    const double secs = seconds_since(t0);
    o.detail << ", " << secs << " s";
    o.require(secs < 30.0, "runtime < 30 s");
    return o;
}

double packet_width(const WaveState& s) {
    double n = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < s.grid.n; ++i) {
        const double d = std::norm(s.psi[i]);
        const double x = s.grid.at(i);
        n += d;
        m1 += d * x;
        m2 += d * x * x;
    }
    const double mean = m1 / n;
    return std::sqrt(m2 / n - mean * mean);
}

Outcome propagation() {
    Outcome o;
    const ModelParams p(1.0, 0.5);
    {
        const auto g = UniformGrid::between_walls(-40.0, 40.0, 4000);
        const double s0 = 1.0;
        double worst = 0.0;
        propagate(gaussian_packet(g, p, 0.0, s0), std::vector<double>(g.n, 0.0), 0.01, 500, [&](const WaveState& s) {
            // sigma(t) = s0 sqrt(1 + (hbar t / (2 m s0^2))^2), hbar = 2 m D
            const double tau = 2.0 * p.mass() * p.diffusion() * s.t / (2.0 * p.mass() * s0 * s0);
            const double exact = s0 * std::sqrt(1.0 + tau * tau);
            worst = std::max(worst, std::abs(packet_width(s) - exact) / exact);
        });
        o.detail << "width rel err " << worst;
        o.require(worst < 5e-3, "packet width within 0.5%");
    }
    const auto g = UniformGrid::between_walls(-8.0, 8.0, 512);
    const auto v = harmonic(g, 1.0, 1.0);
    double drift = 0.0;
    propagate(gaussian_packet(g, p, 1.5, 0.6, 2.0), v, 0.01, 1000,
              [&](const WaveState& s) { drift = std::max(drift, std::abs(s.norm() - 1.0)); });
    const auto s0 = from_eigen(g, ground_state(v, g, p), p);
    double change = 0.0;
    propagate(s0, v, 0.01, 1000, [&](const WaveState& s) {
        for (std::size_t i = 0; i < g.n; ++i) change = std::max(change, std::abs(std::norm(s.psi[i]) - std::norm(s0.psi[i])));
    });
    o.detail << ", norm drift " << drift << ", stationary change " << change;
    o.require(drift < 1e-8, "norm drift < 1e-8");
    o.require(change < 1e-8, "stationary density < 1e-8");
    return o;
}

Outcome generalized() {
    Outcome o;
    const ModelParams p(1.0, 0.5);
    const auto g = UniformGrid::between_walls(-6.0, 6.0, 256);
    const auto v = harmonic(g, 1.0, 1.0);

    const auto packet = gaussian_packet(g, p, 0.7, 0.8, 1.0);
    const auto ref = propagate(packet, v, 0.01, 200);
    double reduction = 0.0;
    for (auto mode : {GeneralizedMode::Full, GeneralizedMode::Perturbative}) {
        GeneralizedOptions opt;
        opt.mode = mode;
        const auto out = propagate_generalized(packet, v, p.diffusion(), [](double) { return 0.0; }, 0.01, 200, opt);
        reduction = std::max(reduction, max_abs_diff(out.psi, ref.psi));
    }

    const auto s0 = from_eigen(g, ground_state(v, g, p), p);
    const auto gap = [&](double relative) {
        const double d = relative * p.diffusion();
        GeneralizedOptions full, pert;
        full.mode = GeneralizedMode::Full;
        pert.mode = GeneralizedMode::Perturbative;
        const DiffusionSchedule constant = [d](double) { return d; };
        const auto a = propagate_generalized(s0, v, p.diffusion(), constant, 0.01, 200, full);
        const auto b = propagate_generalized(s0, v, p.diffusion(), constant, 0.01, 200, pert);
        return max_abs_diff(a.psi, b.psi);
    };
    const double g1 = gap(0.01), g2 = gap(0.02);
    o.detail << "reduction " << reduction << ", gap(0.01) " << g1 << ", gap(0.02) " << g2 << ", ratio " << g2 / g1;
    o.require(reduction < 1e-12, "reduction < 1e-12");
    o.require(g2 / g1 >= 3.0 && g2 / g1 <= 5.0, "ratio in [3, 5]");
    return o;
}

Outcome nelson() {
    Outcome o;
    const auto t0 = Clock::now();
    const ModelParams p(1.0, 0.5);
    const double omega = 1.0;
    const auto g = UniformGrid::between_walls(-6.0, 6.0, 400);
    const auto s0 = from_eigen(g, ground_state(harmonic(g, 1.0, omega), g, p), p);
    NelsonOptions opt;
    opt.paths = 100000;
    opt.steps = 1000;
    opt.dt = 2e-3;
    opt.seed = 7;
    opt.record_stride = 1000;
    const auto ens = nelson_sample(s0, opt);
    std::vector<double> d(g.n);
    for (std::size_t i = 0; i < g.n; ++i) d[i] = std::norm(s0.psi[i]);
    const auto cdf = oracle::linear_interpolant_cdf(g.x0, g.dx, d);
    const double ks = oracle::ks_distance(ens.positions.back(), cdf);

    const ModelParams pd(1.0, 0.3);
    const auto wide = UniformGrid::between_walls(-50.0, 50.0, 201);
    NelsonOptions free_opt;
    free_opt.paths = 40000;
    free_opt.steps = 200;
    free_opt.dt = 0.01;
    free_opt.seed = 9;
    free_opt.initial = InitialPositions::Point;
    free_opt.record_stride = 200;
    const auto free_ens = nelson_sample(DriftField{wide, std::vector<double>(wide.n, 0.0)}, pd, free_opt);
    const double var = oracle::variance(free_ens.positions.back());
    const double var_exact = 2.0 * pd.diffusion() * 2.0;
    const double secs = seconds_since(t0);
    o.detail << "KS " << ks << ", diffusion variance " << var << " (exact " << var_exact << "), " << secs << " s";
    o.require(ks < 0.05, "KS < 0.05");
    o.require(std::abs(var - var_exact) <= 0.05 * var_exact, "variance within 5%");
    o.require(secs < 60.0, "runtime < 60 s");
    return o;
}

Outcome bohm() {
    Outcome o;
    const ModelParams p(1.0, 0.0169);
    const double s0 = 0.1;
    const std::size_t n = 201;
    const double half = 0.6, dx = 2 * half / static_cast<double>(n - 1);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = oracle::gaussian_pdf(-half + static_cast<double>(i) * dx, s0);
    const auto g = amplitude(density_from_values(-half, dx, v), 0.0);
    const auto prof = extract_potential(g, p);
    track_identity(g, p, prof);
    const double analytic = 0.5 * p.mass() * p.diffusion() * p.diffusion() / (s0 * s0);
    const double err = std::abs(prof.mean_osmotic_energy - analytic) / analytic;
    o.detail << "max |Q + (Phi - E)| " << worst_bohm_identity << ", <Q> rel err " << err;
    o.require(worst_bohm_identity <= 1e-12, "identity within 1e-12");
    o.require(err < 0.01, "<Q> within 1%");
    return o;
}

// Advisory only: depends on the dataset vintage.
void reproduction() {
    const char* path = std::getenv("QFIN_SP500_CSV");
    if (!path || !*path) {
        std::printf("SKIP  criterion 4 (advisory): S&P 500 windows; set QFIN_SP500_CSV to a daily S&P 500 CSV\n");
        return;
    }
    try {
        const auto raw = load_price_csv(std::filesystem::path(path)).series;
        struct Window {
            const char* start;
            const char* end;
            std::size_t weeks;
            double diffusion;
        };
        for (const Window w : {Window{"1997-01-01", "2002-12-31", 327, 0.0169}, Window{"2003-01-01", "2008-12-31", 311, 0.0136}}) {
            cli::ReportOptions ro;
            ro.start = Date::parse(w.start);
            ro.end = Date::parse(w.end);
            const auto r = cli::build_report(raw, ro);
            const bool d_ok = std::abs(r.diffusion_estimate - w.diffusion) <= 0.2 * w.diffusion;
            const bool weeks_ok = r.weekly.size() == w.weeks;
            const bool shape_ok = r.interior_minimum && r.rising_walls;
            std::printf("%s criterion 4 (advisory): %s..%s weeks %zu (reference %zu%s), D %.6g (reference %.4g), shape %s\n",
                        d_ok && shape_ok ? "PASS " : "FAIL ", w.start, w.end, r.weekly.size(), w.weeks,
                        weeks_ok ? "" : ", vintage mismatch", r.diffusion_estimate, w.diffusion,
                        shape_ok ? "well" : "not well-shaped");
        }
    } catch (const std::exception& e) {
        std::printf("FAIL  criterion 4 (advisory): %s\n", e.what());
    }
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> check;
    };
    // Criterion 8 reuses the profiles extracted by criterion 1, so it runs last.
    const std::vector<Criterion> criteria{
        {1, "round-trip theorem on 50 random densities", roundtrip},
        {2, "analytic box and harmonic eigenvalues", eigenvalues},
        {3, "Hurst and diffusion recovery on GBM and fBm", estimators},
        {5, "Crank-Nicolson fidelity", propagation},
        {6, "generalized equation reduction and O(eps^2) gap", generalized},
        {7, "Nelson equilibrium and pure diffusion", nelson},
        {8, "Bohmian identities", bohm},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        std::printf("%s criterion %d: %s: %s\n", o.pass ? "PASS " : "FAIL ", c.id, c.name, o.detail.str().c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
        if (c.id == 3) reproduction();
    }
    std::printf("%d of %zu gating criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
