#include "qfin/scaling.hpp"

#include "qfin/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace qfin {

namespace {

double median_step(const std::vector<double>& t) {
    std::vector<double> dt(t.size() - 1);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) dt[i] = t[i + 1] - t[i];
    const auto mid = dt.begin() + static_cast<std::ptrdiff_t>(dt.size() / 2);
    std::nth_element(dt.begin(), mid, dt.end());
    if (dt.size() % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(dt.begin(), mid);
    return 0.5 * (lower + upper);
}

double check_uniform(const CoordinateSeries& series) {
    const auto& t = series.t();
    const double med = median_step(t);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        if (std::abs((t[i + 1] - t[i]) - med) / med >= 0.5)
            fail(ErrorKind::Sampling,
                 "series is not uniformly sampled near t = " + std::to_string(t[i]) +
                     "; resample to weekly bars first");
    }
    return med;
}

} // namespace

ReturnSample returns_at_horizon(const CoordinateSeries& series, std::size_t lag) {
    const std::size_t n = series.size();
    if (n < 3) fail(ErrorKind::InsufficientData, "need at least 3 samples for returns");
    if (lag < 1 || lag + 2 > n)
        fail(ErrorKind::Parameter, "lag " + std::to_string(lag) + " invalid for series of length " +
                                       std::to_string(n));
    const double step = check_uniform(series);

    ReturnSample out;
    out.lag = lag;
    out.tau = static_cast<double>(lag) * step;
    const auto& x = series.x();
    out.values.resize(n - lag);
    for (std::size_t i = 0; i + lag < n; ++i) out.values[i] = x[i + lag] - x[i];

    const double m = std::accumulate(out.values.begin(), out.values.end(), 0.0) /
                     static_cast<double>(out.values.size());
    double ss = 0.0;
    for (double v : out.values) ss += (v - m) * (v - m);
    out.mean = m;
    out.stddev = std::sqrt(ss / static_cast<double>(out.values.size() - 1));
    return out;
}

double estimate_diffusion(const CoordinateSeries& series, std::size_t lag) {
    const auto sample = returns_at_horizon(series, lag);
    double sq = 0.0;
    for (double v : sample.values) sq += v * v;
    return sq / static_cast<double>(sample.values.size()) / (2.0 * sample.tau);
}

ScalingReport estimate_hurst(const CoordinateSeries& series, std::span<const std::size_t> lags,
                             double mass) {
    const std::set<std::size_t> distinct(lags.begin(), lags.end());
    ScalingReport report;
    report.mass = mass;
    for (std::size_t lag : distinct) {
        if (lag < 1 || lag + 2 > series.size()) continue;
        const auto sample = returns_at_horizon(series, lag);
        report.lags.push_back(lag);
        report.taus.push_back(sample.tau);
        report.stddevs.push_back(sample.stddev);
    }
    if (report.lags.size() < 3)
        fail(ErrorKind::InsufficientData, "need at least 3 usable lags, got " +
                                              std::to_string(report.lags.size()));

    report.diffusion = estimate_diffusion(series, report.lags.front());
    report.zero_diffusion = !(report.diffusion > 0.0);
    report.epsilon_tau = mass * report.diffusion;

    const bool zero_spread =
        std::any_of(report.stddevs.begin(), report.stddevs.end(), [](double s) { return !(s > 0.0); });
    if (zero_spread) {
        report.degenerate = true;
        report.hurst = std::nan("");
        report.fractal_dimension = std::nan("");
        report.slope = std::nan("");
        report.intercept = std::nan("");
        report.r_squared = std::nan("");
        return report;
    }

    const std::size_t k = report.lags.size();
    std::vector<double> lx(k), ly(k);
    for (std::size_t i = 0; i < k; ++i) {
        lx[i] = std::log(report.taus[i]);
        ly[i] = std::log(report.stddevs[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(k);
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(k);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    report.slope = sxy / sxx;
    report.intercept = my - report.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double r = ly[i] - (report.intercept + report.slope * lx[i]);
        sse += r * r;
    }
    report.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    report.hurst = report.slope;
    report.fractal_dimension = 1.0 / report.hurst;
    report.degenerate = !(report.hurst > 0.0 && report.hurst < 1.0);
    return report;
}

DiffusionSeries rolling_diffusion(const CoordinateSeries& series, std::size_t window,
                                  std::size_t step) {
    if (window < 8) fail(ErrorKind::Parameter, "rolling window must hold at least 8 samples");
    if (step < 1) fail(ErrorKind::Parameter, "rolling step must be at least 1");
    if (window > series.size())
        fail(ErrorKind::InsufficientData, "window longer than the series");

    DiffusionSeries out;
    const auto& t = series.t();
    const auto& x = series.x();
    for (std::size_t start = 0; start + window <= series.size(); start += step) {
        std::vector<double> wt(t.begin() + static_cast<std::ptrdiff_t>(start),
                               t.begin() + static_cast<std::ptrdiff_t>(start + window));
        std::vector<double> wx(x.begin() + static_cast<std::ptrdiff_t>(start),
                               x.begin() + static_cast<std::ptrdiff_t>(start + window));
        const double t0 = wt.front();
        for (double& v : wt) v -= t0;
        wt.front() = 0.0;
        const CoordinateSeries sub(std::move(wt), std::move(wx));
        out.t.push_back(0.5 * (t[start] + t[start + window - 1]));
        out.diffusion.push_back(estimate_diffusion(sub, 1));
    }
    out.mean = std::accumulate(out.diffusion.begin(), out.diffusion.end(), 0.0) /
               static_cast<double>(out.diffusion.size());
    out.fluctuation.resize(out.diffusion.size());
    for (std::size_t i = 0; i < out.diffusion.size(); ++i)
        out.fluctuation[i] = out.diffusion[i] - out.mean;
    return out;
}

double uncertainty_product(double mass, double diffusion) {
    if (!(mass > 0.0)) fail(ErrorKind::Parameter, "mass must be positive");
    if (!(diffusion > 0.0)) fail(ErrorKind::Parameter, "diffusion must be positive");
    return mass * diffusion;
}

} // namespace qfin
