#pragma once

#include "qfin/inverse.hpp"

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace qfin {

using cplx = std::complex<double>;

/// Nodes x0 + i dx, i = 0..n-1. Hard walls (psi = 0) sit one spacing outside
/// the nodes, at x0 - dx and x0 + n dx, so the box width is (n + 1) dx.
struct UniformGrid {
    double x0 = 0.0;
    double dx = 0.0;
    std::size_t n = 0;

    double at(std::size_t i) const noexcept { return x0 + static_cast<double>(i) * dx; }
    double box_width() const noexcept { return static_cast<double>(n + 1) * dx; }
    std::vector<double> nodes() const;

    /// n nodes strictly inside the walls at `left` and `right`.
    static UniformGrid between_walls(double left, double right, std::size_t n);
};

/// Real symmetric tridiagonal H = -2 m D^2 (three-point Laplacian) + diag(Phi).
struct Hamiltonian {
    std::vector<double> diagonal;
    double off_diagonal = 0.0; ///< every sub/super-diagonal entry

    std::size_t size() const noexcept { return diagonal.size(); }
    std::vector<double> apply(std::span<const double> v) const;
};

Hamiltonian make_hamiltonian(std::span<const double> potential, const UniformGrid& grid,
                             const ModelParams& params);

struct EigenSolution {
    double energy = 0.0;
    std::vector<double> psi; ///< sum psi^2 dx = 1, largest-magnitude entry positive
    std::size_t index = 0;
    double residual = 0.0;   ///< |H psi - E psi|_inf / |psi|_inf
};

EigenSolution ground_state(std::span<const double> potential, const UniformGrid& grid,
                           const ModelParams& params);
/// Uses the profile's full-grid potential (interior values plus wall closure).
EigenSolution ground_state(const PotentialProfile& profile, const ModelParams& params);

/// The `count` lowest eigenpairs in ascending energy.
std::vector<EigenSolution> spectrum(std::span<const double> potential, const UniformGrid& grid,
                                    const ModelParams& params, std::size_t count);

struct WaveState {
    UniformGrid grid;
    std::vector<cplx> psi;
    ModelParams params;
    double t = 0.0;

    double norm() const; ///< sum |psi|^2 dx
};

WaveState make_wave_state(const UniformGrid& grid, std::vector<cplx> psi, const ModelParams& params,
                          double t = 0.0);
/// psi ~ exp(-(x-center)^2 / (4 width^2) + i k x), normalized.
WaveState gaussian_packet(const UniformGrid& grid, const ModelParams& params, double center,
                          double width, double wavenumber = 0.0);
WaveState from_eigen(const UniformGrid& grid, const EigenSolution& eig, const ModelParams& params);

using StepObserver = std::function<void(const WaveState&)>;

/// Crank-Nicolson: (1 + i dt H / 2 hbar) psi' = (1 - i dt H / 2 hbar) psi.
/// No renormalization; the observer sees every state including the initial one.
WaveState propagate(const WaveState& initial, std::span<const double> potential, double dt,
                    std::size_t steps, const StepObserver& observer = {});

enum class GeneralizedMode { Full, Perturbative };

/// delta_D as a function of time (years).
using DiffusionSchedule = std::function<double(double)>;

struct GeneralizedOptions {
    GeneralizedMode mode = GeneralizedMode::Full;
    double tolerance = 1e-10;
    std::size_t max_iterations = 50;
    /// Relative floor on |psi|^2 used when dividing by psi.
    double node_floor = 1e-12;
};

/// Propagation with time-varying diffusion <D> + delta_D(t). The state's own
/// ModelParams supply the mass; `mean_diffusion` replaces its diffusion.
WaveState propagate_generalized(const WaveState& initial, std::span<const double> potential,
                                double mean_diffusion, const DiffusionSchedule& delta,
                                double dt, std::size_t steps, const GeneralizedOptions& options = {},
                                const StepObserver& observer = {});

struct MadelungFields {
    std::vector<double> amplitude;
    std::vector<double> action;   ///< S, zero at the center node
    std::vector<double> velocity; ///< dS/dx / m
    std::vector<double> density;  ///< amplitude^2
    std::vector<std::size_t> flagged_nodes;
    double reference_phase = 0.0; ///< arg psi at the center node, removed from S
};

MadelungFields madelung_decompose(const WaveState& state, double node_floor = 1e-6);
/// A exp(i S / hbar_eff).
std::vector<cplx> madelung_recompose(const MadelungFields& fields, const ModelParams& params);

struct ContinuityResidual {
    std::vector<double> profile; ///< per node, max over consecutive pairs
    double max = 0.0;
    double l2 = 0.0;             ///< sqrt(sum r^2 dx), max over pairs
};

/// Residual of dP/dt + d(PV)/dx = 0 centered at each half step.
ContinuityResidual continuity_residual(std::span<const WaveState> states, double dt);

} // namespace qfin
