#pragma once

#include "qfin/density.hpp"
#include "qfin/inverse.hpp"
#include "qfin/market_data.hpp"
#include "qfin/scaling.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qfin::cli {

/// Runs one command line (without the program name). Returns the exit status:
/// 0 success, 1 domain error, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct ReportOptions {
    std::optional<Date> start;
    std::optional<Date> end;
    std::size_t bins = kDefaultBins;
    std::optional<std::pair<double, double>> range;
    std::vector<std::size_t> lags = kDefaultLags;
    double mass = 1.0;
    std::optional<double> diffusion; ///< override for the estimate
    double floor = kDefaultAmplitudeFloor;
};

struct Report {
    PriceSeries weekly;
    CoordinateSeries coords;
    std::optional<ScalingReport> scaling; ///< absent when too few lags fit
    double diffusion_estimate = 0.0;
    double diffusion_used = 0.0;
    DensityGrid density;
    PotentialProfile potential;
    bool interior_minimum = false;
    bool rising_walls = false;
};

/// Slice, weekly resample, log coordinates, density, diffusion and potential.
Report build_report(const PriceSeries& raw, const ReportOptions& options);

} // namespace qfin::cli
