#include "qfin/density.hpp"

#include "qfin/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qfin {

DensityGrid build_density(std::span<const double> samples, std::size_t bins,
                          std::optional<std::pair<double, double>> range) {
    if (bins < 3) fail(ErrorKind::Parameter, "need at least 3 bins");
    if (samples.empty()) fail(ErrorKind::EmptyInput, "no samples to bin");

    double lo, hi;
    if (range) {
        std::tie(lo, hi) = *range;
        if (!(hi > lo)) fail(ErrorKind::Parameter, "histogram range must satisfy lo < hi");
    } else {
        const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
        lo = *mn;
        hi = *mx;
        if (!(hi > lo)) fail(ErrorKind::ZeroRange, "all samples identical; density has zero range");
    }

    DensityGrid g;
    g.dx = (hi - lo) / static_cast<double>(bins);
    g.x.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) g.x[i] = lo + (static_cast<double>(i) + 0.5) * g.dx;
    g.counts.assign(bins, 0);
    for (double s : samples) {
        if (!std::isfinite(s) || s < lo || s > hi) {
            ++g.excluded;
            continue;
        }
        auto idx = static_cast<std::size_t>((s - lo) / g.dx);
        if (idx >= bins) idx = bins - 1;
        ++g.counts[idx];
    }
    g.samples = samples.size() - g.excluded;
    if (g.samples == 0) fail(ErrorKind::EmptyInput, "no samples fall inside the histogram range");

    const double norm = static_cast<double>(g.samples) * g.dx;
    g.p.resize(bins);
    g.a.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        g.p[i] = static_cast<double>(g.counts[i]) / norm;
        g.a[i] = std::sqrt(g.p[i]);
    }
    return g;
}

DensityGrid build_density(const CoordinateSeries& series, std::size_t bins,
                          std::optional<std::pair<double, double>> range) {
    return build_density(std::span<const double>(series.x()), bins, range);
}

DensityGrid density_from_values(double x0, double dx, std::vector<double> values) {
    if (values.size() < 3) fail(ErrorKind::Parameter, "need at least 3 grid points");
    if (!(dx > 0.0)) fail(ErrorKind::Parameter, "grid spacing must be positive");
    double total = 0.0;
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::Input, "density values must be finite and >= 0");
        total += v;
    }
    if (!(total > 0.0)) fail(ErrorKind::Input, "density is identically zero");

    DensityGrid g;
    g.dx = dx;
    g.x.resize(values.size());
    g.p = std::move(values);
    g.a.resize(g.p.size());
    const double norm = total * dx;
    for (std::size_t i = 0; i < g.p.size(); ++i) {
        g.x[i] = x0 + static_cast<double>(i) * dx;
        g.p[i] /= norm;
        g.a[i] = std::sqrt(g.p[i]);
    }
    return g;
}

DensityGrid amplitude(const DensityGrid& grid, double eps) {
    if (!(eps >= 0.0)) fail(ErrorKind::Parameter, "amplitude floor must be >= 0");
    DensityGrid out = grid;
    const double floor = eps * *std::max_element(grid.p.begin(), grid.p.end());
    for (std::size_t i = 0; i < out.p.size(); ++i) out.a[i] = std::sqrt(std::max(out.p[i], floor));
    out.floor_eps = eps;
    return out;
}

} // namespace qfin
