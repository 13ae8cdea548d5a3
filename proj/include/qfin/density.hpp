#pragma once

#include "qfin/market_data.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace qfin {

/// Normalized occupancy density on a uniform grid of bin centers.
///
/// `p` always integrates to one. `a` is sqrt(p) unless `amplitude()` has
/// floored it, in which case `floor_eps` records the floor used.
struct DensityGrid {
    std::vector<double> x;
    double dx = 0.0;
    std::vector<std::size_t> counts; ///< empty for densities built from values
    std::vector<double> p;
    std::vector<double> a;
    double floor_eps = 0.0;
    std::size_t samples = 0;
    std::size_t excluded = 0;        ///< samples outside an explicit range

    std::size_t size() const noexcept { return x.size(); }
    double lo() const noexcept { return x.front() - 0.5 * dx; }
    double hi() const noexcept { return x.back() + 0.5 * dx; }
};

inline constexpr std::size_t kDefaultBins = 19;
inline constexpr double kDefaultAmplitudeFloor = 1e-4;

/// Equal-width histogram over [min, max] of the samples (or `range`).
/// Bins are right-open except the last. Samples outside an explicit range are
/// dropped and counted in `excluded`.
DensityGrid build_density(std::span<const double> samples, std::size_t bins = kDefaultBins,
                          std::optional<std::pair<double, double>> range = std::nullopt);
DensityGrid build_density(const CoordinateSeries& series, std::size_t bins = kDefaultBins,
                          std::optional<std::pair<double, double>> range = std::nullopt);

/// Density given by values on grid nodes x0 + i dx. Values are renormalized
/// so that sum(p) dx = 1; negative entries are rejected.
DensityGrid density_from_values(double x0, double dx, std::vector<double> values);

/// Copy whose amplitude uses max(p, eps * max p) under the square root.
DensityGrid amplitude(const DensityGrid& grid, double eps = kDefaultAmplitudeFloor);

} // namespace qfin
