#include "qfin/simulate.hpp"

#include "qfin/error.hpp"
#include "qfin/random.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qfin {

namespace {

std::vector<double> time_grid(std::size_t points, double dt) {
    std::vector<double> t(points);
    for (std::size_t i = 0; i < points; ++i) t[i] = static_cast<double>(i) * dt;
    return t;
}

double reflect(double x, double lo, double hi) {
    const double width = hi - lo;
    for (int guard = 0; guard < 64 && (x < lo || x > hi); ++guard) {
        if (x < lo) x = 2.0 * lo - x;
        if (x > hi) x = 2.0 * hi - x;
    }
    if (x < lo || x > hi) {
        // Displacement of many box widths; fold by periodicity of the reflection.
        double r = std::fmod(x - lo, 2.0 * width);
        if (r < 0.0) r += 2.0 * width;
        x = r <= width ? lo + r : hi - (r - width);
    }
    return x;
}

double interpolate(const DriftField& f, double x) {
    const double s = (x - f.grid.x0) / f.grid.dx;
    if (!(s >= -1e-9) || !(s <= static_cast<double>(f.grid.n - 1) + 1e-9))
        fail(ErrorKind::Internal, "drift lookup outside the grid after reflection");
    auto i = static_cast<std::size_t>(std::max(0.0, std::floor(s)));
    if (i >= f.grid.n - 1) i = f.grid.n - 2;
    const double w = std::clamp(s - static_cast<double>(i), 0.0, 1.0);
    return (1.0 - w) * f.b_plus[i] + w * f.b_plus[i + 1];
}

// Inverse-CDF sampler for the piecewise-linear interpolant of node values.
class LinearDensitySampler {
public:
    LinearDensitySampler(const UniformGrid& grid, std::span<const double> values)
        : grid_(grid), values_(values.begin(), values.end()), cdf_(grid.n, 0.0) {
        for (double v : values_)
            if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::Input, "initial density must be finite and >= 0");
        for (std::size_t i = 0; i + 1 < grid.n; ++i)
            cdf_[i + 1] = cdf_[i] + 0.5 * (values_[i] + values_[i + 1]) * grid.dx;
        if (!(cdf_.back() > 0.0)) fail(ErrorKind::Input, "initial density is identically zero");
    }

    double sample(double u) const {
        const double target = u * cdf_.back();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
        std::size_t i = it == cdf_.begin() ? 0 : static_cast<std::size_t>(it - cdf_.begin()) - 1;
        if (i >= grid_.n - 1) i = grid_.n - 2;
        const double rem = target - cdf_[i];
        const double a = (values_[i + 1] - values_[i]) / (2.0 * grid_.dx);
        const double b = values_[i];
        double s;
        const double disc = b * b + 4.0 * a * rem;
        if (b + std::sqrt(std::max(disc, 0.0)) > 0.0)
            s = 2.0 * rem / (b + std::sqrt(std::max(disc, 0.0)));
        else
            s = 0.0;
        return grid_.at(i) + std::clamp(s, 0.0, grid_.dx);
    }

private:
    UniformGrid grid_;
    std::vector<double> values_;
    std::vector<double> cdf_;
};

} // namespace

CoordinateSeries PathEnsemble::path(std::size_t index) const {
    if (index >= path_count()) fail(ErrorKind::Parameter, "path index out of range");
    std::vector<double> x(t.size());
    for (std::size_t s = 0; s < t.size(); ++s) x[s] = positions[s][index];
    return CoordinateSeries(t, std::move(x));
}

CoordinateSeries gbm_path(double sigma, double mu, std::size_t steps, double dt, std::uint64_t seed,
                          std::uint64_t stream) {
    if (!(sigma > 0.0)) fail(ErrorKind::Parameter, "sigma must be positive");
    if (steps < 2) fail(ErrorKind::Parameter, "need at least 2 steps");
    if (!(dt > 0.0)) fail(ErrorKind::Parameter, "dt must be positive");
    PhiloxStream rng(seed, stream);
    std::vector<double> x(steps + 1, 0.0);
    const double vol = sigma * std::sqrt(dt);
    for (std::size_t i = 0; i < steps; ++i) x[i + 1] = x[i] + mu * dt + vol * rng.normal();
    return CoordinateSeries(time_grid(steps + 1, dt), std::move(x));
}

double fgn_autocovariance(double hurst, std::size_t lag) {
    const double k = static_cast<double>(lag);
    const double h2 = 2.0 * hurst;
    return 0.5 * (std::pow(k + 1.0, h2) - 2.0 * std::pow(k, h2) + std::pow(std::abs(k - 1.0), h2));
}

CoordinateSeries fbm_path(double hurst, std::size_t steps, double dt, double scale,
                          std::uint64_t seed, std::uint64_t stream) {
    if (!(hurst > 0.0 && hurst < 1.0)) fail(ErrorKind::Parameter, "Hurst exponent must lie in (0, 1)");
    if (steps < 2) fail(ErrorKind::Parameter, "need at least 2 steps");
    if (steps > kMaxFbmSteps)
        fail(ErrorKind::Parameter, "exact fBm limited to " + std::to_string(kMaxFbmSteps) + " steps");
    if (!(dt > 0.0)) fail(ErrorKind::Parameter, "dt must be positive");
    if (!(scale > 0.0)) fail(ErrorKind::Parameter, "scale must be positive");

    const std::size_t n = steps;
    std::vector<double> gamma(n);
    for (std::size_t k = 0; k < n; ++k) gamma[k] = fgn_autocovariance(hurst, k);

    PhiloxStream rng(seed, stream);
    std::vector<double> noise(n);
    std::vector<double> phi(n, 0.0), prev(n, 0.0);
    double v = gamma[0];
    noise[0] = std::sqrt(v) * rng.normal();
    for (std::size_t i = 1; i < n; ++i) {
        double acc = gamma[i];
        for (std::size_t j = 1; j < i; ++j) acc -= prev[j] * gamma[i - j];
        const double reflection = acc / v;
        phi[i] = reflection;
        for (std::size_t j = 1; j < i; ++j) phi[j] = prev[j] - reflection * prev[i - j];
        v *= 1.0 - reflection * reflection;
        if (!(v > 0.0) || !std::isfinite(v))
            fail(ErrorKind::Numerical, "fGn covariance factorization lost positive definiteness at step " +
                                           std::to_string(i));
        double mean = 0.0;
        for (std::size_t j = 1; j <= i; ++j) mean += phi[j] * noise[i - j];
        noise[i] = mean + std::sqrt(v) * rng.normal();
        std::copy(phi.begin() + 1, phi.begin() + static_cast<std::ptrdiff_t>(i) + 1, prev.begin() + 1);
    }

    const double inc = scale * std::pow(dt, hurst);
    std::vector<double> x(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i + 1] = x[i] + inc * noise[i];
    return CoordinateSeries(time_grid(n + 1, dt), std::move(x));
}

DriftField forward_drift(const WaveState& state, double node_floor) {
    const auto fields = madelung_decompose(state);
    const std::size_t n = state.grid.n;
    const double peak = *std::max_element(fields.density.begin(), fields.density.end());
    const double floor = node_floor * peak;
    DriftField f{state.grid, std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const double left = i > 0 ? fields.density[i - 1] : 0.0;
        const double right = i + 1 < n ? fields.density[i + 1] : 0.0;
        const double p = std::max(fields.density[i], floor);
        const double osmotic = state.params.diffusion() * (right - left) / (2.0 * state.grid.dx) / p;
        f.b_plus[i] = fields.velocity[i] + osmotic;
    }
    return f;
}

PathEnsemble nelson_sample(const DriftField& drift, const ModelParams& params,
                           const NelsonOptions& options) {
    if (drift.grid.n < 2 || drift.b_plus.size() != drift.grid.n)
        fail(ErrorKind::Input, "drift field does not match its grid");
    for (double b : drift.b_plus)
        if (!std::isfinite(b)) fail(ErrorKind::Input, "drift field has non-finite entries");
    if (options.paths < 1) fail(ErrorKind::Parameter, "need at least one path");
    if (!(options.dt > 0.0)) fail(ErrorKind::Parameter, "dt must be positive");
    if (options.record_stride < 1) fail(ErrorKind::Parameter, "record stride must be >= 1");

    const double lo = drift.grid.at(0);
    const double hi = drift.grid.at(drift.grid.n - 1);

    PathEnsemble out;
    out.generator = kGeneratorName;
    out.process = "nelson";
    out.seed = options.seed;
    out.parameters = {{"mass", params.mass()},
                      {"diffusion", params.diffusion()},
                      {"dt", options.dt},
                      {"steps", static_cast<double>(options.steps)},
                      {"paths", static_cast<double>(options.paths)}};

    double max_drift = 0.0;
    for (double b : drift.b_plus) max_drift = std::max(max_drift, std::abs(b));
    if (max_drift * options.dt >= drift.grid.dx) {
        std::ostringstream msg;
        msg << "max|b+| dt = " << max_drift * options.dt << " exceeds grid spacing " << drift.grid.dx;
        out.warnings.push_back(msg.str());
    }

    std::optional<LinearDensitySampler> sampler;
    if (options.initial == InitialPositions::FromDensity) {
        if (options.initial_density.size() != drift.grid.n)
            fail(ErrorKind::Input, "initial density does not match the drift grid");
        sampler.emplace(drift.grid, options.initial_density);
    }

    for (std::size_t s = 0; s <= options.steps; ++s) {
        if (s % options.record_stride == 0 || s == options.steps) {
            out.step_index.push_back(s);
            out.t.push_back(static_cast<double>(s) * options.dt);
        }
    }
    out.positions.assign(out.t.size(), std::vector<double>(options.paths));

    const double noise = std::sqrt(2.0 * params.diffusion() * options.dt);
    for (std::size_t p = 0; p < options.paths; ++p) {
        PhiloxStream rng(options.seed, p);
        double x = 0.0;
        switch (options.initial) {
        case InitialPositions::FromDensity: x = sampler->sample(rng.uniform()); break;
        case InitialPositions::Uniform: x = lo + (hi - lo) * rng.uniform(); break;
        case InitialPositions::Point: x = reflect(options.initial_point, lo, hi); break;
        }
        std::size_t snap = 0;
        out.positions[snap++][p] = x;
        for (std::size_t s = 1; s <= options.steps; ++s) {
            x += interpolate(drift, x) * options.dt + noise * rng.normal();
            x = reflect(x, lo, hi);
            if (snap < out.step_index.size() && out.step_index[snap] == s) out.positions[snap++][p] = x;
        }
    }
    return out;
}

PathEnsemble nelson_sample(const WaveState& state, NelsonOptions options) {
    const auto drift = forward_drift(state);
    if (options.initial == InitialPositions::FromDensity) {
        options.initial_density.resize(state.grid.n);
        for (std::size_t i = 0; i < state.grid.n; ++i) options.initial_density[i] = std::norm(state.psi[i]);
    }
    return nelson_sample(drift, state.params, options);
}

DensityGrid ensemble_histogram(const PathEnsemble& ensemble, std::optional<std::size_t> snapshot,
                               std::size_t bins, std::optional<std::pair<double, double>> range) {
    if (ensemble.snapshot_count() == 0) fail(ErrorKind::EmptyInput, "ensemble has no snapshots");
    const std::size_t s = snapshot.value_or(ensemble.snapshot_count() - 1);
    if (s >= ensemble.snapshot_count()) fail(ErrorKind::Parameter, "snapshot index out of range");
    const auto& xs = ensemble.positions[s];
    if (!range) {
        const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
        if (*mn == *mx) {
            // Delta occupancy: a narrow range around the single value.
            const double half = std::max(std::abs(*mn), 1.0) * 1e-6;
            range = std::make_pair(*mn - half, *mn + half);
        }
    }
    return build_density(std::span<const double>(xs), bins, range);
}

} // namespace qfin
