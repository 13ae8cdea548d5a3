#include "qfin/solver.hpp"

#include "qfin/error.hpp"
#include "tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace qfin {

namespace {

constexpr std::size_t kMinGridPoints = 8;

void check_potential(std::span<const double> potential, const UniformGrid& grid) {
    if (grid.n < kMinGridPoints)
        fail(ErrorKind::Parameter, "grid needs at least " + std::to_string(kMinGridPoints) + " points");
    if (!(grid.dx > 0.0)) fail(ErrorKind::Parameter, "grid spacing must be positive");
    if (potential.size() != grid.n)
        fail(ErrorKind::Input, "potential has " + std::to_string(potential.size()) +
                                   " values for a grid of " + std::to_string(grid.n));
    for (std::size_t i = 0; i < potential.size(); ++i)
        if (!std::isfinite(potential[i]))
            fail(ErrorKind::Input, "non-finite potential at node " + std::to_string(i));
}

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double residual_of(const Hamiltonian& h, std::span<const double> psi, double energy) {
    const auto hpsi = h.apply(psi);
    double r = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) r = std::max(r, std::abs(hpsi[i] - energy * psi[i]));
    return r / inf_norm(psi);
}

// One Crank-Nicolson step with a (possibly complex) diagonal potential.
// `kinetic` is the prefactor of -d^2/dx^2 in energy units.
std::vector<cplx> cn_step(std::span<const cplx> psi, std::span<const cplx> potential, double kinetic,
                          double dx, double dt, double hbar) {
    const std::size_t n = psi.size();
    const double c = kinetic / (dx * dx);
    const cplx alpha(0.0, dt / (2.0 * hbar));
    std::vector<cplx> rhs(n), lower(n - 1), upper(n - 1), diag(n);
    for (std::size_t i = 0; i < n; ++i) {
        const cplx h_diag = 2.0 * c + potential[i];
        cplx hpsi = h_diag * psi[i];
        if (i > 0) hpsi -= c * psi[i - 1];
        if (i + 1 < n) hpsi -= c * psi[i + 1];
        rhs[i] = psi[i] - alpha * hpsi;
        diag[i] = 1.0 + alpha * h_diag;
    }
    const cplx off = alpha * (-c);
    std::fill(lower.begin(), lower.end(), off);
    std::fill(upper.begin(), upper.end(), off);
    if (!detail::thomas_solve(lower, diag, upper, rhs))
        fail(ErrorKind::Numerical, "tridiagonal solve broke down in Crank-Nicolson step");
    return rhs;
}

std::vector<cplx> real_to_complex(std::span<const double> v) {
    return {v.begin(), v.end()};
}

// psi with entries below the relative floor lifted to the floor magnitude.
std::vector<cplx> floored(std::span<const cplx> psi, double node_floor) {
    double peak = 0.0;
    for (const auto& v : psi) peak = std::max(peak, std::norm(v));
    const double floor2 = node_floor * peak;
    const double floor_mag = std::sqrt(floor2);
    std::vector<cplx> out(psi.begin(), psi.end());
    for (auto& v : out) {
        if (std::norm(v) < floor2) v = std::abs(v) > 0.0 ? v / std::abs(v) * floor_mag : cplx(floor_mag);
    }
    return out;
}

// (d psi/dx / psi)^2 with Dirichlet ghosts.
std::vector<cplx> log_gradient_squared(std::span<const cplx> psi, double dx, double node_floor) {
    const auto den = floored(psi, node_floor);
    const std::size_t n = psi.size();
    std::vector<cplx> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const cplx left = i > 0 ? psi[i - 1] : cplx{};
        const cplx right = i + 1 < n ? psi[i + 1] : cplx{};
        const cplx g = (right - left) / (2.0 * dx) / den[i];
        out[i] = g * g;
    }
    return out;
}

// Discrete Laplacian of ln psi: (Lap psi)/psi - (grad psi / psi)^2.
std::vector<cplx> log_laplacian(std::span<const cplx> psi, double dx, double node_floor) {
    const auto den = floored(psi, node_floor);
    const auto grad2 = log_gradient_squared(psi, dx, node_floor);
    const std::size_t n = psi.size();
    std::vector<cplx> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const cplx left = i > 0 ? psi[i - 1] : cplx{};
        const cplx right = i + 1 < n ? psi[i + 1] : cplx{};
        const cplx lap = (right - 2.0 * psi[i] + left) / (dx * dx);
        out[i] = lap / den[i] - grad2[i];
    }
    return out;
}

void check_state(const WaveState& s, std::span<const double> potential) {
    check_potential(potential, s.grid);
    if (s.psi.size() != s.grid.n) fail(ErrorKind::Input, "wave state does not match its grid");
}

} // namespace

std::vector<double> UniformGrid::nodes() const {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = at(i);
    return v;
}

UniformGrid UniformGrid::between_walls(double left, double right, std::size_t n) {
    if (!(right > left)) fail(ErrorKind::Parameter, "walls must satisfy left < right");
    if (n < kMinGridPoints)
        fail(ErrorKind::Parameter, "grid needs at least " + std::to_string(kMinGridPoints) + " points");
    const double dx = (right - left) / static_cast<double>(n + 1);
    return {left + dx, dx, n};
}

std::vector<double> Hamiltonian::apply(std::span<const double> v) const {
    const std::size_t n = diagonal.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = diagonal[i] * v[i];
        if (i > 0) s += off_diagonal * v[i - 1];
        if (i + 1 < n) s += off_diagonal * v[i + 1];
        out[i] = s;
    }
    return out;
}

Hamiltonian make_hamiltonian(std::span<const double> potential, const UniformGrid& grid,
                             const ModelParams& params) {
    check_potential(potential, grid);
    const double c = params.kinetic() / (grid.dx * grid.dx);
    Hamiltonian h;
    h.diagonal.resize(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) h.diagonal[i] = 2.0 * c + potential[i];
    h.off_diagonal = -c;
    return h;
}

std::vector<EigenSolution> spectrum(std::span<const double> potential, const UniformGrid& grid,
                                    const ModelParams& params, std::size_t count) {
    const auto h = make_hamiltonian(potential, grid, params);
    const std::size_t n = grid.n;
    if (count < 1 || count + 2 >= n)
        fail(ErrorKind::Parameter, "eigenpair count must satisfy 1 <= k < n - 2");

    const double scale = inf_norm(h.diagonal) + 2.0 * std::abs(h.off_diagonal);
    const double tiny = std::numeric_limits<double>::epsilon() * scale * 1e-3 + 1e-300;
    constexpr double kResidualBound = 1e-8;
    constexpr int kMaxIterations = 12;

    std::vector<EigenSolution> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double energy = detail::bisect_eigenvalue(h.diagonal, h.off_diagonal, k);

        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = k == 0 ? 1.0 : 1.0 + 0.5 * std::sin(12.9898 * static_cast<double>(i + 1) + 78.233 * static_cast<double>(k));

        double residual = std::numeric_limits<double>::infinity();
        std::vector<double> best;
        double best_residual = residual;
        for (int it = 0; it < kMaxIterations; ++it) {
            v = detail::shifted_solve(h.diagonal, h.off_diagonal, energy, v, tiny);
            for (const auto& prev : out) {
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += prev.psi[i] * v[i] * grid.dx;
                for (std::size_t i = 0; i < n; ++i) v[i] -= dot * prev.psi[i];
            }
            double ss = 0.0;
            for (double x : v) ss += x * x;
            const double norm = std::sqrt(ss * grid.dx);
            if (!(norm > 0.0) || !std::isfinite(norm))
                fail(ErrorKind::Numerical, "inverse iteration produced a degenerate vector");
            for (double& x : v) x /= norm;
            residual = residual_of(h, v, energy);
            if (residual < best_residual) {
                best_residual = residual;
                best = v;
            }
            if (it >= 1 && residual < 1e-3 * kResidualBound) break;
        }
        if (!(best_residual < kResidualBound)) {
            std::ostringstream msg;
            msg << "eigenpair " << k << " did not converge after " << kMaxIterations
                << " inverse iterations (residual " << best_residual << ")";
            fail(ErrorKind::Convergence, msg.str());
        }
        std::size_t arg = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(best[i]) > std::abs(best[arg])) arg = i;
        if (best[arg] < 0.0)
            for (double& x : best) x = -x;
        out.push_back({energy, std::move(best), k, best_residual});
    }
    return out;
}

EigenSolution ground_state(std::span<const double> potential, const UniformGrid& grid,
                           const ModelParams& params) {
    return std::move(spectrum(potential, grid, params, 1).front());
}

EigenSolution ground_state(const PotentialProfile& profile, const ModelParams& params) {
    const auto full = profile.full_grid_potential();
    const UniformGrid grid{profile.full_grid_x0(), profile.dx, full.size()};
    return ground_state(full, grid, params);
}

double WaveState::norm() const {
    double s = 0.0;
    for (const auto& v : psi) s += std::norm(v);
    return s * grid.dx;
}

WaveState make_wave_state(const UniformGrid& grid, std::vector<cplx> psi, const ModelParams& params,
                          double t) {
    if (grid.n < kMinGridPoints)
        fail(ErrorKind::Parameter, "grid needs at least " + std::to_string(kMinGridPoints) + " points");
    if (psi.size() != grid.n) fail(ErrorKind::Input, "wave function does not match its grid");
    WaveState s{grid, std::move(psi), params, t};
    const double norm = s.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) fail(ErrorKind::Input, "wave function has zero norm");
    const double scale = 1.0 / std::sqrt(norm);
    for (auto& v : s.psi) v *= scale;
    return s;
}

WaveState gaussian_packet(const UniformGrid& grid, const ModelParams& params, double center,
                          double width, double wavenumber) {
    if (!(width > 0.0)) fail(ErrorKind::Parameter, "packet width must be positive");
    std::vector<cplx> psi(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) {
        const double x = grid.at(i);
        const double d = x - center;
        psi[i] = std::exp(cplx(-d * d / (4.0 * width * width), wavenumber * x));
    }
    return make_wave_state(grid, std::move(psi), params);
}

WaveState from_eigen(const UniformGrid& grid, const EigenSolution& eig, const ModelParams& params) {
    return make_wave_state(grid, real_to_complex(eig.psi), params);
}

WaveState propagate(const WaveState& initial, std::span<const double> potential, double dt,
                    std::size_t steps, const StepObserver& observer) {
    check_state(initial, potential);
    if (!(dt > 0.0)) fail(ErrorKind::Parameter, "time step must be positive");
    WaveState state = initial;
    const auto pot = real_to_complex(potential);
    const double hbar = state.params.hbar_eff();
    const double kinetic = state.params.kinetic();
    if (observer) observer(state);
    for (std::size_t s = 0; s < steps; ++s) {
        state.psi = cn_step(state.psi, pot, kinetic, state.grid.dx, dt, hbar);
        state.t += dt;
        if (observer) observer(state);
    }
    return state;
}

WaveState propagate_generalized(const WaveState& initial, std::span<const double> potential,
                                double mean_diffusion, const DiffusionSchedule& delta, double dt,
                                std::size_t steps, const GeneralizedOptions& options,
                                const StepObserver& observer) {
    check_state(initial, potential);
    if (!(dt > 0.0)) fail(ErrorKind::Parameter, "time step must be positive");
    if (!delta) fail(ErrorKind::Parameter, "diffusion schedule is empty");

    const ModelParams params(initial.params.mass(), mean_diffusion);
    const double hbar = params.hbar_eff();
    const double dx = initial.grid.dx;
    const std::size_t n = initial.grid.n;

    WaveState state = initial;
    state.params = params;

    auto delta_at = [&](double t) {
        const double d = delta(t);
        if (!std::isfinite(d) || !(std::abs(d) < mean_diffusion)) {
            std::ostringstream msg;
            msg << "|delta_D(" << t << ")| = " << std::abs(d) << " is not below <D> = " << mean_diffusion;
            fail(ErrorKind::Regime, msg.str());
        }
        return d;
    };

    std::vector<cplx> frozen_log_laplacian;
    if (options.mode == GeneralizedMode::Perturbative)
        frozen_log_laplacian = log_laplacian(initial.psi, dx, options.node_floor);

    if (observer) observer(state);
    std::vector<cplx> pot(n);
    for (std::size_t s = 0; s < steps; ++s) {
        const double d = delta_at(state.t + 0.5 * dt);
        if (options.mode == GeneralizedMode::Perturbative) {
            for (std::size_t i = 0; i < n; ++i)
                pot[i] = potential[i] - hbar * d * frozen_log_laplacian[i];
            state.psi = cn_step(state.psi, pot, params.kinetic(), dx, dt, hbar);
        } else {
            const double kinetic = hbar * (mean_diffusion + d);
            std::vector<cplx> guess = state.psi;
            std::vector<double> trace;
            bool converged = false;
            for (std::size_t it = 0; it < options.max_iterations; ++it) {
                std::vector<cplx> mid(n);
                for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (state.psi[i] + guess[i]);
                const auto g2 = log_gradient_squared(mid, dx, options.node_floor);
                for (std::size_t i = 0; i < n; ++i) pot[i] = potential[i] + hbar * d * g2[i];
                auto next = cn_step(state.psi, pot, kinetic, dx, dt, hbar);
                double diff = 0.0;
                for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(next[i] - guess[i]));
                trace.push_back(diff);
                guess = std::move(next);
                if (diff < options.tolerance) {
                    converged = true;
                    break;
                }
            }
            if (!converged) {
                std::ostringstream msg;
                msg << "fixed-point iteration did not converge at step " << s << "; differences:";
                for (double v : trace) msg << ' ' << v;
                fail(ErrorKind::Convergence, msg.str());
            }
            state.psi = std::move(guess);
        }
        state.t += dt;
        if (observer) observer(state);
    }
    return state;
}

MadelungFields madelung_decompose(const WaveState& state, double node_floor) {
    const std::size_t n = state.psi.size();
    if (n < 3) fail(ErrorKind::Parameter, "wave state too short for Madelung fields");
    const double hbar = state.params.hbar_eff();
    MadelungFields f;
    f.amplitude.resize(n);
    f.density.resize(n);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        f.amplitude[i] = std::abs(state.psi[i]);
        f.density[i] = f.amplitude[i] * f.amplitude[i];
        peak = std::max(peak, f.amplitude[i]);
    }
    for (std::size_t i = 0; i < n; ++i)
        if (f.amplitude[i] < node_floor * peak) f.flagged_nodes.push_back(i);

    const std::size_t c = n / 2;
    f.reference_phase = std::arg(state.psi[c]);
    std::vector<double> phase(n, 0.0);
    for (std::size_t i = c + 1; i < n; ++i)
        phase[i] = phase[i - 1] + std::arg(state.psi[i] * std::conj(state.psi[i - 1]));
    for (std::size_t i = c; i-- > 0;)
        phase[i] = phase[i + 1] - std::arg(state.psi[i + 1] * std::conj(state.psi[i]));

    f.action.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.action[i] = hbar * phase[i];

    const double dx = state.grid.dx;
    const double m = state.params.mass();
    const auto& s = f.action;
    f.velocity.resize(n);
    for (std::size_t i = 1; i + 1 < n; ++i) f.velocity[i] = (s[i + 1] - s[i - 1]) / (2.0 * dx * m);
    f.velocity[0] = (-3.0 * s[0] + 4.0 * s[1] - s[2]) / (2.0 * dx * m);
    f.velocity[n - 1] = (3.0 * s[n - 1] - 4.0 * s[n - 2] + s[n - 3]) / (2.0 * dx * m);
    return f;
}

std::vector<cplx> madelung_recompose(const MadelungFields& fields, const ModelParams& params) {
    const double hbar = params.hbar_eff();
    std::vector<cplx> psi(fields.amplitude.size());
    for (std::size_t i = 0; i < psi.size(); ++i)
        psi[i] = std::polar(fields.amplitude[i], fields.action[i] / hbar + fields.reference_phase);
    return psi;
}

ContinuityResidual continuity_residual(std::span<const WaveState> states, double dt) {
    if (states.size() < 2) fail(ErrorKind::Input, "continuity residual needs at least 2 states");
    if (!(dt > 0.0)) fail(ErrorKind::Parameter, "time step must be positive");
    const auto& g = states.front().grid;
    for (const auto& s : states)
        if (s.grid.n != g.n || s.grid.dx != g.dx || s.grid.x0 != g.x0 || s.psi.size() != g.n)
            fail(ErrorKind::Input, "wave states live on mismatched grids");

    const std::size_t n = g.n;
    ContinuityResidual out;
    out.profile.assign(n, 0.0);

    auto current = [&](const WaveState& s, std::vector<double>& p) {
        const auto f = madelung_decompose(s);
        p = f.density;
        std::vector<double> j(n);
        for (std::size_t i = 0; i < n; ++i) j[i] = f.density[i] * f.velocity[i];
        return j;
    };

    std::vector<double> p0, p1;
    auto j0 = current(states[0], p0);
    for (std::size_t k = 1; k < states.size(); ++k) {
        auto j1 = current(states[k], p1);
        double ss = 0.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double dpdt = (p1[i] - p0[i]) / dt;
            const double div = 0.5 * ((j0[i + 1] - j0[i - 1]) + (j1[i + 1] - j1[i - 1])) / (2.0 * g.dx);
            const double r = std::abs(dpdt + div);
            out.profile[i] = std::max(out.profile[i], r);
            out.max = std::max(out.max, r);
            ss += r * r;
        }
        out.l2 = std::max(out.l2, std::sqrt(ss * g.dx));
        j0 = std::move(j1);
        p0 = std::move(p1);
    }
    return out;
}

} // namespace qfin
