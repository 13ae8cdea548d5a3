#include "qfin/inverse.hpp"

#include "qfin/error.hpp"

#include <algorithm>
#include <cmath>

namespace qfin {

namespace {

void require_amplitude(const DensityGrid& grid, std::size_t min_bins) {
    if (grid.size() < min_bins)
        fail(ErrorKind::Parameter, "need at least " + std::to_string(min_bins) + " bins");
    for (double a : grid.a)
        if (!(a > 0.0) || !std::isfinite(a))
            fail(ErrorKind::Input, "amplitude has empty bins; apply the amplitude floor first");
}

// (Delta A)_i / A_i on interior nodes, times 2 m D^2.
std::vector<double> curvature_ratio(const DensityGrid& grid, const ModelParams& params) {
    auto lap = second_derivative(grid.a, grid.dx);
    const double c = params.kinetic();
    for (std::size_t i = 0; i < lap.size(); ++i) lap[i] = c * lap[i] / grid.a[i + 1];
    return lap;
}

} // namespace

ModelParams::ModelParams(double mass, double diffusion) : mass_(mass), diffusion_(diffusion) {
    if (!(mass > 0.0) || !std::isfinite(mass)) fail(ErrorKind::Parameter, "mass must be positive");
    if (!(diffusion > 0.0) || !std::isfinite(diffusion))
        fail(ErrorKind::Parameter, "diffusion must be positive");
}

std::vector<double> second_derivative(std::span<const double> values, double dx) {
    if (values.size() < 3) fail(ErrorKind::Parameter, "second derivative needs at least 3 points");
    if (!(dx > 0.0)) fail(ErrorKind::Parameter, "grid spacing must be positive");
    const double inv = 1.0 / (dx * dx);
    std::vector<double> out(values.size() - 2);
    for (std::size_t i = 1; i + 1 < values.size(); ++i)
        out[i - 1] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) * inv;
    return out;
}

std::vector<double> first_derivative(std::span<const double> values, double dx) {
    if (values.size() < 3) fail(ErrorKind::Parameter, "first derivative needs at least 3 points");
    if (!(dx > 0.0)) fail(ErrorKind::Parameter, "grid spacing must be positive");
    std::vector<double> out(values.size() - 2);
    for (std::size_t i = 1; i + 1 < values.size(); ++i)
        out[i - 1] = (values[i + 1] - values[i - 1]) / (2.0 * dx);
    return out;
}

std::vector<double> PotentialProfile::full_grid_potential() const {
    std::vector<double> full;
    full.reserve(phi_minus_e.size() + 2);
    full.push_back(wall_closure_left);
    full.insert(full.end(), phi_minus_e.begin(), phi_minus_e.end());
    full.push_back(wall_closure_right);
    return full;
}

PotentialProfile extract_potential(const DensityGrid& grid, const ModelParams& params) {
    require_amplitude(grid, 5);
    PotentialProfile out;
    out.x.assign(grid.x.begin() + 1, grid.x.end() - 1);
    out.phi_minus_e = curvature_ratio(grid, params);

    const double lo = *std::min_element(out.phi_minus_e.begin(), out.phi_minus_e.end());
    out.anchor_offset = -lo;
    out.phi_anchored.resize(out.phi_minus_e.size());
    for (std::size_t i = 0; i < out.phi_minus_e.size(); ++i) out.phi_anchored[i] = out.phi_minus_e[i] - lo;

    out.quantum_potential = quantum_potential(grid, params);
    out.osmotic_velocity = osmotic_velocity(grid, params);
    out.mean_osmotic_energy = mean_osmotic_energy(grid, params);

    const auto& a = grid.a;
    const std::size_t n = a.size();
    const double c = params.kinetic() / (grid.dx * grid.dx);
    out.wall_closure_left = c * (a[1] - 2.0 * a[0]) / a[0];
    out.wall_closure_right = c * (a[n - 2] - 2.0 * a[n - 1]) / a[n - 1];

    out.mass = params.mass();
    out.diffusion = params.diffusion();
    out.dx = grid.dx;
    out.floor_eps = grid.floor_eps;
    return out;
}

std::vector<double> quantum_potential(const DensityGrid& grid, const ModelParams& params) {
    require_amplitude(grid, 3);
    auto q = curvature_ratio(grid, params);
    for (double& v : q) v = -v;
    return q;
}

std::vector<double> osmotic_velocity(const DensityGrid& grid, const ModelParams& params) {
    require_amplitude(grid, 3);
    std::vector<double> pf(grid.size());
    for (std::size_t i = 0; i < pf.size(); ++i) pf[i] = grid.a[i] * grid.a[i];
    auto u = first_derivative(pf, grid.dx);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = params.diffusion() * u[i] / pf[i + 1];
    return u;
}

double mean_osmotic_energy(const DensityGrid& grid, const ModelParams& params) {
    const auto u = osmotic_velocity(grid, params);
    if (u.size() < 2) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double p = grid.a[i + 1] * grid.a[i + 1];
        const double f = 0.5 * params.mass() * u[i] * u[i] * p;
        sum += (i == 0 || i + 1 == u.size()) ? 0.5 * f : f;
    }
    return sum * grid.dx;
}

} // namespace qfin
