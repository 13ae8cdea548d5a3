#pragma once

#include "qfin/market_data.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace qfin {

/// Log-returns at a fixed lag: values[i] = x[i+lag] - x[i].
struct ReturnSample {
    std::size_t lag = 1;
    double tau = 0.0; ///< lag * median sampling step, in years
    std::vector<double> values;
    double mean = 0.0;
    double stddev = 0.0;
};

struct ScalingReport {
    std::vector<std::size_t> lags;
    std::vector<double> taus;
    std::vector<double> stddevs;
    double hurst = 0.0;
    double fractal_dimension = 0.0; ///< 1 / hurst
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double diffusion = 0.0;         ///< per year, from the smallest lag
    double mass = 1.0;
    double epsilon_tau = 0.0;       ///< mass * diffusion
    bool degenerate = false;        ///< hurst outside (0, 1) or a zero-variance lag
    bool zero_diffusion = false;
};

struct DiffusionSeries {
    std::vector<double> t;          ///< window-center times, years
    std::vector<double> diffusion;
    double mean = 0.0;
    std::vector<double> fluctuation;
};

inline const std::vector<std::size_t> kDefaultLags{1, 2, 4, 8, 16};

/// Throws Error(Sampling) when the series is not close to uniformly sampled.
ReturnSample returns_at_horizon(const CoordinateSeries& series, std::size_t lag);

/// Ordinary least squares of ln std(returns) against ln tau. Degenerate fits
/// are returned with `degenerate` set rather than thrown.
ScalingReport estimate_hurst(const CoordinateSeries& series,
                             std::span<const std::size_t> lags = kDefaultLags, double mass = 1.0);

/// mean(xi^2) / (2 tau): the raw second moment, no mean subtraction.
double estimate_diffusion(const CoordinateSeries& series, std::size_t lag = 1);

/// Per-window diffusion on windows of `window` samples advanced by `step`.
DiffusionSeries rolling_diffusion(const CoordinateSeries& series, std::size_t window,
                                  std::size_t step);

/// epsilon * tau = m * D, which is hbar_eff / 2 under hbar_eff = 2 m D.
double uncertainty_product(double mass, double diffusion);

} // namespace qfin
