#pragma once

#include "qfin/density.hpp"

#include <span>
#include <vector>

namespace qfin {

/// Inertial mass m and diffusion D. The effective Planck constant is never an
/// independent parameter: hbar_eff = 2 m D.
class ModelParams {
public:
    ModelParams(double mass, double diffusion);
    static ModelParams unit_mass(double diffusion) { return {1.0, diffusion}; }

    double mass() const noexcept { return mass_; }
    double diffusion() const noexcept { return diffusion_; }
    double hbar_eff() const noexcept { return 2.0 * mass_ * diffusion_; }
    /// hbar_eff^2 / (2 m) = 2 m D^2, the kinetic prefactor.
    double kinetic() const noexcept { return 2.0 * mass_ * diffusion_ * diffusion_; }

private:
    double mass_;
    double diffusion_;
};

/// Potential (Phi - E) on the interior of a density grid, with Bohmian fields.
struct PotentialProfile {
    std::vector<double> x;                ///< interior bin centers
    std::vector<double> phi_minus_e;
    std::vector<double> phi_anchored;     ///< phi_minus_e - min(phi_minus_e)
    double anchor_offset = 0.0;           ///< -min(phi_minus_e)
    std::vector<double> quantum_potential;
    std::vector<double> osmotic_velocity;
    double mean_osmotic_energy = 0.0;

    /// Values at the two dropped endpoints obtained by closing the grid with
    /// zero amplitude one spacing outside it (the hard walls of the solver).
    double wall_closure_left = 0.0;
    double wall_closure_right = 0.0;

    double mass = 1.0;
    double diffusion = 0.0;
    double dx = 0.0;
    double floor_eps = 0.0;

    /// Phi - E on every node of the originating density grid, suitable for
    /// the hard-wall solver. Interior values are exactly `phi_minus_e`.
    std::vector<double> full_grid_potential() const;
    double full_grid_x0() const noexcept { return x.front() - dx; }
};

/// Central three-point second difference; output has two fewer points.
std::vector<double> second_derivative(std::span<const double> values, double dx);
/// Central first difference on the interior.
std::vector<double> first_derivative(std::span<const double> values, double dx);

PotentialProfile extract_potential(const DensityGrid& grid, const ModelParams& params);
std::vector<double> quantum_potential(const DensityGrid& grid, const ModelParams& params);
std::vector<double> osmotic_velocity(const DensityGrid& grid, const ModelParams& params);
double mean_osmotic_energy(const DensityGrid& grid, const ModelParams& params);

} // namespace qfin
