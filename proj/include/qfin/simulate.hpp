#pragma once

#include "qfin/density.hpp"
#include "qfin/market_data.hpp"
#include "qfin/solver.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qfin {

/// Snapshots of many paths on a shared time grid.
struct PathEnsemble {
    std::vector<double> t;                      ///< snapshot times, t[0] = 0
    std::vector<std::size_t> step_index;        ///< integration step of each snapshot
    std::vector<std::vector<double>> positions; ///< positions[snapshot][path]
    std::string generator;
    std::string process;
    std::uint64_t seed = 0;
    std::map<std::string, double> parameters;
    std::vector<std::string> warnings;

    std::size_t path_count() const noexcept { return positions.empty() ? 0 : positions.front().size(); }
    std::size_t snapshot_count() const noexcept { return t.size(); }
    CoordinateSeries path(std::size_t index) const;
};

/// x[i+1] = x[i] + mu dt + sigma sqrt(dt) z_i, x[0] = 0; n steps, n + 1 points.
CoordinateSeries gbm_path(double sigma, double mu, std::size_t steps, double dt, std::uint64_t seed,
                          std::uint64_t stream = 0);

inline constexpr std::size_t kMaxFbmSteps = std::size_t{1} << 14;

/// Autocovariance of unit fractional Gaussian noise at lag k.
double fgn_autocovariance(double hurst, std::size_t lag);

/// Exact fractional Brownian motion via the Durbin-Levinson (Hosking)
/// factorization of the increment covariance. Var(x[k]) = scale^2 (k dt)^(2H).
CoordinateSeries fbm_path(double hurst, std::size_t steps, double dt, double scale,
                          std::uint64_t seed, std::uint64_t stream = 0);

/// Forward drift b+ = V + U sampled on grid nodes.
struct DriftField {
    UniformGrid grid;
    std::vector<double> b_plus;
};

/// V from the Madelung phase plus U = D dP/dx / P (floored relative to max P).
DriftField forward_drift(const WaveState& state, double node_floor = 1e-12);

enum class InitialPositions { FromDensity, Uniform, Point };

struct NelsonOptions {
    std::size_t paths = 1000;
    std::size_t steps = 100;
    double dt = 1e-3;
    std::uint64_t seed = 0;
    InitialPositions initial = InitialPositions::FromDensity;
    std::vector<double> initial_density; ///< on the drift grid nodes, for FromDensity
    double initial_point = 0.0;
    std::size_t record_stride = 1;       ///< the final step is always recorded
};

/// Euler-Maruyama for dX = b+(X) dt + sqrt(2 D dt) z with reflection at the
/// outermost grid nodes. Drift is linearly interpolated between nodes.
PathEnsemble nelson_sample(const DriftField& drift, const ModelParams& params,
                           const NelsonOptions& options);
/// Drift and initial density (|psi|^2) taken from the wave state.
PathEnsemble nelson_sample(const WaveState& state, NelsonOptions options);

/// Histogram of one snapshot (default: the final one) over all paths.
DensityGrid ensemble_histogram(const PathEnsemble& ensemble, std::optional<std::size_t> snapshot,
                               std::size_t bins,
                               std::optional<std::pair<double, double>> range = std::nullopt);

} // namespace qfin
