#include "cli.hpp"

#include "io.hpp"

#include "qfin/error.hpp"
#include "qfin/random.hpp"
#include "qfin/simulate.hpp"
#include "qfin/solver.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <memory>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

namespace qfin::cli {

using nlohmann::json;

// ---------------------------------------------------------------------------
// report pipeline

Report build_report(const PriceSeries& raw, const ReportOptions& o) {
    const Date start = o.start.value_or(raw.dates().front());
    const Date end = o.end.value_or(raw.dates().back());
    PriceSeries weekly = resample_weekly(slice_by_date(raw, start, end));
    CoordinateSeries coords = to_log_coordinates(weekly);

    std::optional<ScalingReport> scaling;
    try {
        scaling = estimate_hurst(coords, o.lags, o.mass);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::InsufficientData) throw;
    }
    const double estimate = estimate_diffusion(coords);
    const double used = o.diffusion.value_or(estimate);

    DensityGrid density = amplitude(build_density(coords, o.bins, o.range), o.floor);
    PotentialProfile potential = extract_potential(density, ModelParams(o.mass, used));

    const auto& phi = potential.phi_minus_e;
    const auto lowest = static_cast<std::size_t>(std::min_element(phi.begin(), phi.end()) - phi.begin());
    const bool interior_minimum = lowest > 0 && lowest + 1 < phi.size();
    std::vector<double> sorted = phi;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double median = sorted[sorted.size() / 2];
    const bool rising_walls = phi.front() > median && phi.back() > median;

    return Report{std::move(weekly), std::move(coords), std::move(scaling), estimate, used,
                  std::move(density), std::move(potential), interior_minimum, rising_walls};
}

namespace {

// ---------------------------------------------------------------------------
// parameter registry: every option is bound to a variable and serialized into
// the manifest from that variable, so a rerun sees exactly the resolved values

struct Param {
    std::string name;
    std::function<void(json&)> dump;
};

template <class T>
json to_json_value(const T& v) {
    return json(v);
}

class Binder {
public:
    explicit Binder(CLI::App* app) : app_(app) {}

    template <class T>
    CLI::Option* opt(const std::string& name, T& var, const std::string& desc) {
        auto* o = app_->add_option("--" + name, var, desc);
        if constexpr (!is_optional<T>::value) o->capture_default_str();
        params_.push_back({name, [&var, name](json& j) {
                               if constexpr (is_optional<T>::value) {
                                   if (var) j[name] = to_json_value(*var);
                               } else {
                                   j[name] = to_json_value(var);
                               }
                           }});
        return o;
    }

    CLI::Option* flag(const std::string& name, bool& var, const std::string& desc) {
        auto* o = app_->add_flag("--" + name, var, desc);
        params_.push_back({name, [&var, name](json& j) { j[name] = var; }});
        return o;
    }

    void dump(json& j) const {
        for (const auto& p : params_) p.dump(j);
    }

private:
    template <class U>
    struct is_optional : std::false_type {};
    template <class U>
    struct is_optional<std::optional<U>> : std::true_type {};

    CLI::App* app_;
    std::vector<Param> params_;
};

struct Command {
    virtual ~Command() = default;
    virtual std::string name() const = 0;
    virtual void exec(RunContext& ctx, std::ostream& out) = 0;
    std::unique_ptr<Binder> binder;
    CLI::App* app = nullptr;
};

// ---------------------------------------------------------------------------
// shared input handling

std::optional<Date> parse_date(const std::optional<std::string>& s) {
    if (!s) return std::nullopt;
    return Date::parse(*s);
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

struct SeriesOptions {
    std::string input;
    std::optional<std::string> column;
    std::optional<std::string> start;
    std::optional<std::string> end;
    bool weekly = false;

    void add(Binder& b, bool input_required = true) {
        auto* o = b.opt("input", input, "price CSV (Date + Adj Close/Close) or coordinate CSV (t,x)");
        if (input_required) o->required();
        b.opt("column", column, "price column to use");
        b.opt("start", start, "first date kept (yyyy-mm-dd, inclusive)");
        b.opt("end", end, "last date kept (yyyy-mm-dd, inclusive)");
        b.flag("weekly", weekly, "resample to the last close of each calendar week");
    }
};

struct LoadedSeries {
    std::optional<PriceSeries> prices;
    CoordinateSeries coords;
};

LoadedSeries load_series_text(RunContext& ctx, const std::string& text, const SeriesOptions& o) {
    const auto header = header_of(text);
    if (contains(header, "t") && contains(header, "x")) {
        if (o.start || o.end || o.weekly || o.column)
            fail(ErrorKind::Parameter, "--start/--end/--weekly/--column need a dated price file, got a (t,x) series");
        const Table t = parse_table(text, o.input);
        ctx.derived()["points"] = t.rows;
        return {std::nullopt, CoordinateSeries(t.column("t"), t.column("x"))};
    }
    std::istringstream in(text);
    auto loaded = load_price_csv(in, o.column, o.input);
    PriceSeries s = std::move(loaded.series);
    ctx.derived()["price_column"] = loaded.column;
    ctx.derived()["rejected_rows"] = loaded.rejected_rows;
    if (o.start || o.end) {
        const Date a = parse_date(o.start).value_or(s.dates().front());
        const Date b = parse_date(o.end).value_or(s.dates().back());
        s = slice_by_date(s, a, b);
    }
    if (o.weekly) s = resample_weekly(s);
    ctx.derived()["points"] = s.size();
    ctx.derived()["first_date"] = s.dates().front().iso();
    ctx.derived()["last_date"] = s.dates().back().iso();
    CoordinateSeries c = to_log_coordinates(s);
    return {std::move(s), std::move(c)};
}

LoadedSeries load_series(RunContext& ctx, const SeriesOptions& o) {
    return load_series_text(ctx, ctx.read_input(o.input), o);
}

bool is_density_file(const std::vector<std::string>& header) {
    return contains(header, "x") && contains(header, "p") && !contains(header, "t");
}

void check_uniform(const std::vector<double>& x, const std::string& source) {
    if (x.size() < 2) fail(ErrorKind::InsufficientData, source + ": need at least 2 grid rows");
    const double dx = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
    if (!(dx > 0.0)) fail(ErrorKind::Format, source + ": x must be increasing");
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        if (std::abs(x[i + 1] - x[i] - dx) > 1e-6 * dx)
            fail(ErrorKind::Format, source + ": x is not uniformly spaced near row " + std::to_string(i + 2));
}

struct DensityOptions {
    SeriesOptions series;
    std::size_t bins = kDefaultBins;
    std::optional<double> range_lo;
    std::optional<double> range_hi;
    double floor = kDefaultAmplitudeFloor;

    void add(Binder& b) {
        series.add(b);
        b.opt("bins", bins, "histogram bins");
        b.opt("range-lo", range_lo, "histogram lower edge (log price)");
        b.opt("range-hi", range_hi, "histogram upper edge (log price)");
        b.opt("floor", floor, "amplitude floor, relative to max P");
    }

    std::optional<std::pair<double, double>> range() const {
        if (range_lo.has_value() != range_hi.has_value())
            fail(ErrorKind::Parameter, "--range-lo and --range-hi must be given together");
        if (!range_lo) return std::nullopt;
        return std::make_pair(*range_lo, *range_hi);
    }
};

/// Density from a density file (x,p) or from a series; the series, when there
/// is one, is returned too so the diffusion can be estimated from it.
std::pair<DensityGrid, std::optional<CoordinateSeries>> load_density(RunContext& ctx, const DensityOptions& o) {
    const std::string text = ctx.read_input(o.series.input);
    if (is_density_file(header_of(text))) {
        const Table t = parse_table(text, o.series.input);
        const auto& x = t.column("x");
        check_uniform(x, o.series.input);
        const double dx = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
        return {amplitude(density_from_values(x.front(), dx, t.column("p")), o.floor), std::nullopt};
    }
    auto s = load_series_text(ctx, text, o.series);
    auto g = amplitude(build_density(s.coords, o.bins, o.range()), o.floor);
    if (g.excluded) ctx.warn(std::to_string(g.excluded) + " samples fall outside the histogram range");
    return {std::move(g), std::move(s.coords)};
}

double resolve_diffusion(RunContext& ctx, const std::optional<double>& override,
                         const std::optional<CoordinateSeries>& series) {
    if (series) {
        const double est = estimate_diffusion(*series);
        ctx.derived()["diffusion_estimate"] = est;
        ctx.derived()["diffusion"] = override.value_or(est);
        return override.value_or(est);
    }
    if (!override) fail(ErrorKind::Parameter, "--diffusion is required when the input is a density file");
    ctx.derived()["diffusion"] = *override;
    return *override;
}

// Potential given as a builtin name or a solver-ready (x,phi) file.
struct PotentialOptions {
    std::string potential = "harmonic";
    std::size_t grid_points = 512;
    double range_lo = -6.0;
    double range_hi = 6.0;
    double omega = 1.0;
    double mass = 1.0;
    std::optional<double> diffusion;

    void add(Binder& b) {
        b.opt("potential", potential, "harmonic | free | (x,phi) CSV file");
        b.opt("grid-points", grid_points, "nodes for builtin potentials");
        b.opt("range-lo", range_lo, "left wall for builtin potentials");
        b.opt("range-hi", range_hi, "right wall for builtin potentials");
        b.opt("omega", omega, "harmonic angular frequency");
        b.opt("mass", mass, "m");
        b.opt("diffusion", diffusion, "D (required)")->required();
    }

    ModelParams params() const { return ModelParams(mass, *diffusion); }
};

std::pair<UniformGrid, std::vector<double>> load_potential(RunContext& ctx, const PotentialOptions& o) {
    if (o.potential == "harmonic" || o.potential == "free") {
        const auto grid = UniformGrid::between_walls(o.range_lo, o.range_hi, o.grid_points);
        std::vector<double> v(grid.n, 0.0);
        if (o.potential == "harmonic")
            for (std::size_t i = 0; i < grid.n; ++i) v[i] = 0.5 * o.mass * o.omega * o.omega * grid.at(i) * grid.at(i);
        return {grid, std::move(v)};
    }
    const Table t = parse_table(ctx.read_input(o.potential), o.potential);
    const auto& x = t.column("x");
    check_uniform(x, o.potential);
    if (x.size() < 8) fail(ErrorKind::InsufficientData, o.potential + ": need at least 8 grid rows");
    const double dx = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
    return {UniformGrid{x.front(), dx, x.size()}, t.column("phi")};
}

std::vector<double> density_of(const WaveState& s) {
    std::vector<double> d(s.psi.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::norm(s.psi[i]);
    return d;
}

// ---------------------------------------------------------------------------
// commands

struct Ingest : Command {
    SeriesOptions o;
    std::string name() const override { return "ingest"; }
    void exec(RunContext& ctx, std::ostream&) override {
        auto s = load_series(ctx, o);
        if (!s.prices) fail(ErrorKind::Format, "ingest expects a dated price file");
        CsvWriter w({"date", "price", "t", "x"});
        for (std::size_t i = 0; i < s.prices->size(); ++i)
            w.text_row({s.prices->dates()[i].iso(), format_number(s.prices->prices()[i]), format_number(s.coords.t()[i]),
                        format_number(s.coords.x()[i])});
        ctx.write_output("ingest.csv", w.str());
    }
};

json scaling_json(const ScalingReport& r) {
    return {{"lags", r.lags},
            {"taus", r.taus},
            {"stddevs", r.stddevs},
            {"hurst", r.hurst},
            {"fractal_dimension", r.fractal_dimension},
            {"slope", r.slope},
            {"intercept", r.intercept},
            {"r_squared", r.r_squared},
            {"diffusion", r.diffusion},
            {"mass", r.mass},
            {"epsilon_tau", r.epsilon_tau},
            {"degenerate", r.degenerate},
            {"zero_diffusion", r.zero_diffusion}};
}

std::string lags_csv(const ScalingReport& r) {
    CsvWriter w({"lag", "tau", "stddev"});
    for (std::size_t i = 0; i < r.lags.size(); ++i) w.row({static_cast<double>(r.lags[i]), r.taus[i], r.stddevs[i]});
    return w.str();
}

struct Scaling : Command {
    SeriesOptions o;
    std::vector<std::size_t> lags = kDefaultLags;
    double mass = 1.0;
    std::size_t window = 0;
    std::size_t step = 1;
    std::string name() const override { return "scaling"; }
    void exec(RunContext& ctx, std::ostream& out) override {
        const auto s = load_series(ctx, o);
        const auto r = estimate_hurst(s.coords, lags, mass);
        if (r.degenerate) ctx.warn("degenerate scaling fit");
        ctx.write_json("scaling.json", scaling_json(r));
        ctx.write_output("scaling_lags.csv", lags_csv(r));
        if (window) {
            const auto roll = rolling_diffusion(s.coords, window, step);
            CsvWriter w({"t", "diffusion", "fluctuation"});
            for (std::size_t i = 0; i < roll.t.size(); ++i) w.row({roll.t[i], roll.diffusion[i], roll.fluctuation[i]});
            ctx.write_output("scaling_rolling.csv", w.str());
            ctx.derived()["mean_diffusion"] = roll.mean;
            ctx.derived()["windows"] = roll.t.size();
        }
        out << "hurst " << format_number(r.hurst) << "\ndiffusion " << format_number(r.diffusion) << "\n";
    }
};

std::string density_csv(const DensityGrid& g) {
    CsvWriter w(g.counts.empty() ? std::vector<std::string>{"x", "p", "a"} : std::vector<std::string>{"x", "count", "p", "a"});
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.counts.empty())
            w.row({g.x[i], g.p[i], g.a[i]});
        else
            w.row({g.x[i], static_cast<double>(g.counts[i]), g.p[i], g.a[i]});
    }
    return w.str();
}

struct Density : Command {
    DensityOptions o;
    std::string name() const override { return "density"; }
    void exec(RunContext& ctx, std::ostream&) override {
        const auto [g, series] = load_density(ctx, o);
        ctx.derived()["dx"] = g.dx;
        ctx.derived()["samples"] = g.samples;
        ctx.derived()["excluded"] = g.excluded;
        ctx.write_output("density.csv", density_csv(g));
    }
};

void write_potential(RunContext& ctx, const std::string& stem, const PotentialProfile& p) {
    CsvWriter w({"x", "phi_minus_e", "phi_anchored", "quantum_potential", "osmotic_velocity"});
    for (std::size_t i = 0; i < p.x.size(); ++i)
        w.row({p.x[i], p.phi_minus_e[i], p.phi_anchored[i], p.quantum_potential[i], p.osmotic_velocity[i]});
    ctx.write_output(stem + ".csv", w.str());

    CsvWriter full({"x", "phi"});
    const auto v = p.full_grid_potential();
    for (std::size_t i = 0; i < v.size(); ++i) full.row({p.full_grid_x0() + static_cast<double>(i) * p.dx, v[i]});
    ctx.write_output(stem + "_grid.csv", full.str());

    ctx.write_json(stem + ".json", {{"anchor_offset", p.anchor_offset},
                                    {"mean_osmotic_energy", p.mean_osmotic_energy},
                                    {"wall_closure_left", p.wall_closure_left},
                                    {"wall_closure_right", p.wall_closure_right},
                                    {"mass", p.mass},
                                    {"diffusion", p.diffusion},
                                    {"hbar_eff", 2.0 * p.mass * p.diffusion},
                                    {"dx", p.dx},
                                    {"floor_eps", p.floor_eps}});
}

struct Potential : Command {
    DensityOptions o;
    double mass = 1.0;
    std::optional<double> diffusion;
    std::string name() const override { return "potential"; }
    void exec(RunContext& ctx, std::ostream&) override {
        const auto [g, series] = load_density(ctx, o);
        const ModelParams params(mass, resolve_diffusion(ctx, diffusion, series));
        write_potential(ctx, "potential", extract_potential(g, params));
    }
};

struct RoundTrip : Command {
    DensityOptions o;
    double mass = 1.0;
    std::optional<double> diffusion;
    std::string name() const override { return "roundtrip"; }
    void exec(RunContext& ctx, std::ostream& out) override {
        const auto [g, series] = load_density(ctx, o);
        const ModelParams params(mass, resolve_diffusion(ctx, diffusion, series));
        const auto profile = extract_potential(g, params);
        const auto eig = ground_state(profile, params);

        double norm = 0.0;
        for (double a : g.a) norm += a * a * g.dx;
        norm = std::sqrt(norm);
        double gap = 0.0;
        CsvWriter w({"x", "amplitude", "psi", "difference"});
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double a = g.a[i] / norm;
            gap = std::max(gap, std::abs(eig.psi[i] - a));
            w.row({g.x[i], a, eig.psi[i], eig.psi[i] - a});
        }
        ctx.derived()["gap"] = gap;
        ctx.derived()["energy"] = eig.energy;
        ctx.derived()["residual"] = eig.residual;
        ctx.write_output("roundtrip.csv", w.str());
        out << "gap " << format_number(gap) << "\n";
    }
};

struct Solve : Command {
    PotentialOptions p;
    std::size_t count = 1;
    std::string name() const override { return "solve"; }
    void exec(RunContext& ctx, std::ostream& out) override {
        const auto [grid, v] = load_potential(ctx, p);
        const auto levels = spectrum(v, grid, p.params(), count);
        CsvWriter lw({"index", "energy", "residual"});
        std::vector<std::string> header{"x", "potential"};
        for (const auto& e : levels) {
            lw.row({static_cast<double>(e.index), e.energy, e.residual});
            header.push_back("psi_" + std::to_string(e.index));
            out << "E" << e.index << " " << format_number(e.energy) << "\n";
        }
        CsvWriter sw(header);
        for (std::size_t i = 0; i < grid.n; ++i) {
            std::vector<double> row{grid.at(i), v[i]};
            for (const auto& e : levels) row.push_back(e.psi[i]);
            sw.row(row);
        }
        json levels_json = json::array();
        for (const auto& e : levels) levels_json.push_back({{"index", e.index}, {"energy", e.energy}, {"residual", e.residual}});
        ctx.write_output("solve_levels.csv", lw.str());
        ctx.write_output("solve_states.csv", sw.str());
        ctx.write_json("solve.json", {{"levels", levels_json},
                                      {"mass", p.mass},
                                      {"diffusion", *p.diffusion},
                                      {"hbar_eff", p.params().hbar_eff()},
                                      {"grid", {{"x0", grid.x0}, {"dx", grid.dx}, {"n", grid.n}}}});
    }
};

DiffusionSchedule parse_schedule(RunContext& ctx, const std::string& spec) {
    if (spec.rfind("constant:", 0) == 0) {
        const double v = std::stod(spec.substr(9));
        return [v](double) { return v; };
    }
    if (spec.rfind("sinusoid:", 0) == 0) {
        const auto rest = spec.substr(9);
        const auto colon = rest.find(':');
        if (colon == std::string::npos) fail(ErrorKind::Parameter, "--delta-d sinusoid:<amplitude>:<period>");
        const double amp = std::stod(rest.substr(0, colon));
        const double period = std::stod(rest.substr(colon + 1));
        if (!(period > 0.0)) fail(ErrorKind::Parameter, "sinusoid period must be positive");
        return [amp, period](double t) { return amp * std::sin(2.0 * std::numbers::pi * t / period); };
    }
    const Table t = parse_table(ctx.read_input(spec), spec);
    auto ts = t.column("t");
    auto ds = t.column("delta");
    if (ts.empty()) fail(ErrorKind::EmptyInput, spec + ": no rows");
    for (std::size_t i = 0; i + 1 < ts.size(); ++i)
        if (!(ts[i + 1] > ts[i])) fail(ErrorKind::Format, spec + ": t must be strictly increasing");
    return [ts, ds](double x) {
        if (x <= ts.front()) return ds.front();
        if (x >= ts.back()) return ds.back();
        const auto k = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), x) - ts.begin()) - 1;
        const double w = (x - ts[k]) / (ts[k + 1] - ts[k]);
        return ds[k] + w * (ds[k + 1] - ds[k]);
    };
}

struct Evolve : Command {
    PotentialOptions p;
    std::string initial = "packet";
    double center = 0.0;
    double width = 0.5;
    double wavenumber = 0.0;
    double dt = 1e-3;
    std::size_t steps = 1000;
    std::size_t record_stride = 100;
    bool generalized = false;
    std::string mode = "full";
    std::optional<std::string> delta_d;
    std::string name() const override { return "evolve"; }
    void exec(RunContext& ctx, std::ostream& out) override {
        if (record_stride == 0) fail(ErrorKind::Parameter, "--record-stride must be positive");
        if (delta_d && !generalized) fail(ErrorKind::Parameter, "--delta-d needs --generalized");
        const auto [grid, v] = load_potential(ctx, p);
        const auto params = p.params();
        WaveState init = initial == "ground" ? from_eigen(grid, ground_state(v, grid, params), params)
                       : initial == "packet" ? gaussian_packet(grid, params, center, width, wavenumber)
                                             : (fail(ErrorKind::Parameter, "--initial must be ground or packet"),
                                                gaussian_packet(grid, params, center, width, wavenumber));

        CsvWriter snaps({"t", "x", "density", "re", "im"});
        CsvWriter moments({"step", "t", "norm", "mean", "variance"});
        std::vector<double> norms;
        std::size_t step = 0;
        const StepObserver observe = [&](const WaveState& s) {
            double n = 0.0, m1 = 0.0, m2 = 0.0;
            for (std::size_t i = 0; i < grid.n; ++i) {
                const double d = std::norm(s.psi[i]) * grid.dx;
                n += d;
                m1 += d * grid.at(i);
                m2 += d * grid.at(i) * grid.at(i);
            }
            const double mean = m1 / n;
            norms.push_back(n);
            moments.row({static_cast<double>(step), s.t, n, mean, m2 / n - mean * mean});
            if (step % record_stride == 0 || step == steps)
                for (std::size_t i = 0; i < grid.n; ++i)
                    snaps.row({s.t, grid.at(i), std::norm(s.psi[i]), s.psi[i].real(), s.psi[i].imag()});
            ++step;
        };

        WaveState final_state = init;
        if (generalized) {
            GeneralizedOptions go;
            if (mode == "full")
                go.mode = GeneralizedMode::Full;
            else if (mode == "perturbative")
                go.mode = GeneralizedMode::Perturbative;
            else
                fail(ErrorKind::Parameter, "--mode must be full or perturbative");
            const auto schedule = parse_schedule(ctx, delta_d.value_or("constant:0"));
            final_state = propagate_generalized(init, v, params.diffusion(), schedule, dt, steps, go, observe);
        } else {
            final_state = propagate(init, v, dt, steps, observe);
        }
        const double drift = std::abs(final_state.norm() - init.norm());
        ctx.derived()["norm_drift"] = drift;
        ctx.derived()["final_time"] = final_state.t;
        ctx.write_output("evolve_snapshots.csv", snaps.str());
        ctx.write_output("evolve_moments.csv", moments.str());
        ctx.write_json("evolve.json", {{"norm_history", norms},
                                       {"norm_drift", drift},
                                       {"final_time", final_state.t},
                                       {"generalized", generalized},
                                       {"hbar_eff", params.hbar_eff()}});
        out << "norm_drift " << format_number(drift) << "\n";
    }
};

std::string paths_csv(const std::vector<CoordinateSeries>& paths) {
    std::vector<std::string> header{"t"};
    if (paths.size() == 1)
        header.push_back("x");
    else
        for (std::size_t p = 0; p < paths.size(); ++p) header.push_back("x_" + std::to_string(p));
    CsvWriter w(header);
    for (std::size_t i = 0; i < paths.front().size(); ++i) {
        std::vector<double> row{paths.front().t()[i]};
        for (const auto& p : paths) row.push_back(p.x()[i]);
        w.row(row);
    }
    return w.str();
}

struct SimulateGbm : Command {
    double sigma = 0.18;
    double mu = 0.0;
    std::size_t steps = 520;
    double dt = 1.0 / 52.0;
    std::uint64_t seed = 0;
    std::size_t paths = 1;
    std::string name() const override { return "simulate gbm"; }
    void exec(RunContext& ctx, std::ostream&) override {
        if (paths == 0) fail(ErrorKind::Parameter, "--paths must be positive");
        ctx.set_seed(seed, kGeneratorName);
        std::vector<CoordinateSeries> out;
        for (std::size_t p = 0; p < paths; ++p) out.push_back(gbm_path(sigma, mu, steps, dt, seed, p));
        ctx.write_output("simulate_gbm.csv", paths_csv(out));
    }
};

struct SimulateFbm : Command {
    double hurst = 0.7;
    double scale = 1.0;
    std::size_t steps = 1024;
    double dt = 1.0 / 52.0;
    std::uint64_t seed = 0;
    std::size_t paths = 1;
    std::string name() const override { return "simulate fbm"; }
    void exec(RunContext& ctx, std::ostream&) override {
        if (paths == 0) fail(ErrorKind::Parameter, "--paths must be positive");
        ctx.set_seed(seed, kGeneratorName);
        std::vector<CoordinateSeries> out;
        for (std::size_t p = 0; p < paths; ++p) out.push_back(fbm_path(hurst, steps, dt, scale, seed, p));
        ctx.write_output("simulate_fbm.csv", paths_csv(out));
    }
};

/// Kolmogorov-Smirnov distance to the piecewise-linear interpolant of node
/// densities, whose CDF is quadratic within each cell.
double ks_to_nodes(std::vector<double> xs, const UniformGrid& grid, const std::vector<double>& d) {
    std::vector<double> cum(grid.n, 0.0);
    for (std::size_t i = 0; i + 1 < grid.n; ++i) cum[i + 1] = cum[i] + 0.5 * (d[i] + d[i + 1]) * grid.dx;
    const double total = cum.back();
    const auto cdf = [&](double x) {
        const double s = (x - grid.x0) / grid.dx;
        if (s <= 0.0) return 0.0;
        if (s >= static_cast<double>(grid.n - 1)) return 1.0;
        const auto i = static_cast<std::size_t>(s);
        const double h = (s - static_cast<double>(i)) * grid.dx;
        return (cum[i] + d[i] * h + (d[i + 1] - d[i]) * h * h / (2.0 * grid.dx)) / total;
    };
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
    }
    return ks;
}

struct SimulateNelson : Command {
    PotentialOptions p;
    std::size_t level = 0;
    std::size_t paths = 1000;
    std::size_t steps = 1000;
    double dt = 1e-3;
    std::uint64_t seed = 0;
    std::string initial = "density";
    double point = 0.0;
    std::size_t record_stride = 0;
    std::size_t bins = 41;
    std::string name() const override { return "simulate nelson"; }
    void exec(RunContext& ctx, std::ostream& out) override {
        ctx.set_seed(seed, kGeneratorName);
        const auto [grid, v] = load_potential(ctx, p);
        const auto params = p.params();
        const auto levels = spectrum(v, grid, params, level + 1);
        const auto state = from_eigen(grid, levels.back(), params);

        NelsonOptions no;
        no.paths = paths;
        no.steps = steps;
        no.dt = dt;
        no.seed = seed;
        no.record_stride = record_stride ? record_stride : steps;
        no.initial_point = point;
        if (initial == "density")
            no.initial = InitialPositions::FromDensity;
        else if (initial == "uniform")
            no.initial = InitialPositions::Uniform;
        else if (initial == "point")
            no.initial = InitialPositions::Point;
        else
            fail(ErrorKind::Parameter, "--initial must be density, uniform or point");
        const auto ens = nelson_sample(state, no);
        for (const auto& w : ens.warnings) ctx.warn(w);

        CsvWriter pw({"snapshot", "step", "t", "path", "x"});
        for (std::size_t s = 0; s < ens.snapshot_count(); ++s)
            for (std::size_t k = 0; k < ens.path_count(); ++k)
                pw.row({static_cast<double>(s), static_cast<double>(ens.step_index[s]), ens.t[s], static_cast<double>(k),
                        ens.positions[s][k]});
        ctx.write_output("simulate_nelson_paths.csv", pw.str());

        const auto d = density_of(state);
        const double lo = grid.x0, hi = grid.at(grid.n - 1);
        const auto hist = ensemble_histogram(ens, std::nullopt, bins, std::make_pair(lo, hi));
        CsvWriter hw({"x", "sampled", "theory"});
        double z = 0.0;
        for (std::size_t i = 0; i + 1 < grid.n; ++i) z += 0.5 * (d[i] + d[i + 1]) * grid.dx;
        for (std::size_t i = 0; i < hist.size(); ++i) {
            const double s = std::clamp((hist.x[i] - grid.x0) / grid.dx, 0.0, static_cast<double>(grid.n - 1));
            const auto j = std::min(static_cast<std::size_t>(s), grid.n - 2);
            const double w = s - static_cast<double>(j);
            hw.row({hist.x[i], hist.p[i], ((1.0 - w) * d[j] + w * d[j + 1]) / z});
        }
        ctx.write_output("simulate_nelson_histogram.csv", hw.str());

        const double ks = ks_to_nodes(ens.positions.back(), grid, d);
        ctx.derived()["energy"] = levels.back().energy;
        ctx.derived()["ks_final"] = ks;
        out << "ks " << format_number(ks) << "\n";
    }
};

struct ReportCmd : Command {
    std::string input;
    std::optional<std::string> column;
    std::optional<std::string> start;
    std::optional<std::string> end;
    std::size_t bins = kDefaultBins;
    std::optional<double> range_lo;
    std::optional<double> range_hi;
    std::vector<std::size_t> lags = kDefaultLags;
    double mass = 1.0;
    std::optional<double> diffusion;
    double floor = kDefaultAmplitudeFloor;
    std::string name() const override { return "report"; }
    void exec(RunContext& ctx, std::ostream& out) override {
        const std::string text = ctx.read_input(input);
        std::istringstream in(text);
        const auto loaded = load_price_csv(in, column, input);
        ReportOptions ro;
        ro.start = parse_date(start);
        ro.end = parse_date(end);
        ro.bins = bins;
        if (range_lo.has_value() != range_hi.has_value())
            fail(ErrorKind::Parameter, "--range-lo and --range-hi must be given together");
        if (range_lo) ro.range = std::make_pair(*range_lo, *range_hi);
        ro.lags = lags;
        ro.mass = mass;
        ro.diffusion = diffusion;
        ro.floor = floor;
        const Report r = build_report(loaded.series, ro);

        json j{{"weeks", r.weekly.size()},
               {"first_week", r.weekly.dates().front().iso()},
               {"last_week", r.weekly.dates().back().iso()},
               {"price_column", loaded.column},
               {"rejected_rows", loaded.rejected_rows},
               {"diffusion_estimate", r.diffusion_estimate},
               {"diffusion", r.diffusion_used},
               {"mass", mass},
               {"hbar_eff", 2.0 * mass * r.diffusion_used},
               {"bins", bins},
               {"dx", r.density.dx},
               {"anchor_offset", r.potential.anchor_offset},
               {"mean_osmotic_energy", r.potential.mean_osmotic_energy},
               {"interior_minimum", r.interior_minimum},
               {"rising_walls", r.rising_walls}};
        j["scaling"] = r.scaling ? scaling_json(*r.scaling) : json(nullptr);
        ctx.derived()["weeks"] = r.weekly.size();
        ctx.derived()["diffusion"] = r.diffusion_used;
        ctx.write_json("report.json", j);
        ctx.write_output("report_density.csv", density_csv(r.density));
        write_potential(ctx, "report_potential", r.potential);
        if (r.scaling) ctx.write_output("report_lags.csv", lags_csv(*r.scaling));
        out << "weeks " << r.weekly.size() << "\ndiffusion " << format_number(r.diffusion_used) << "\n";
    }
};

// ---------------------------------------------------------------------------

std::string absolutize_if_file(const std::string& v) {
    std::error_code ec;
    if (!v.empty() && fs::is_regular_file(v, ec)) return fs::absolute(v).lexically_normal().string();
    return v;
}

std::vector<std::string> args_from_manifest(const json& m) {
    std::vector<std::string> args;
    std::istringstream words(m.at("command").get<std::string>());
    for (std::string w; words >> w;) args.push_back(w);
    for (const auto& [key, val] : m.at("parameters").items()) {
        if (val.is_boolean()) {
            if (val.get<bool>()) args.push_back("--" + key);
        } else if (val.is_array()) {
            std::string joined;
            for (const auto& e : val) joined += (joined.empty() ? "" : ",") + e.dump();
            args.push_back("--" + key + "=" + joined);
        } else if (val.is_number_float()) {
            args.push_back("--" + key + "=" + format_number(val.get<double>()));
        } else if (val.is_string()) {
            args.push_back("--" + key + "=" + val.get<std::string>());
        } else {
            args.push_back("--" + key + "=" + val.dump());
        }
    }
    return args;
}

void verify_inputs(const json& m) {
    for (const auto& in : m.at("inputs")) {
        const auto path = in.at("path").get<std::string>();
        if (sha256_hex(read_file(path)) != in.at("sha256").get<std::string>())
            fail(ErrorKind::Input, "input changed since the manifest was written: " + path);
    }
}

std::string default_out_dir() {
    if (const char* env = std::getenv("QFIN_OUT_DIR"); env && *env) return env;
    return ".";
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"qfin: scaling, density, potential and Schroedinger tools for log-price series", "qfin"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string out_dir = default_out_dir();
    app.add_option("--out-dir", out_dir, "output directory (default $QFIN_OUT_DIR or .)");
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);

    std::vector<std::unique_ptr<Command>> commands;
    const auto attach = [&](CLI::App* parent, const std::string& sub, const std::string& desc, auto cmd,
                            auto&& configure) -> Command* {
        Command* c = commands.emplace_back(std::move(cmd)).get();
        c->app = parent->add_subcommand(sub, desc);
        c->binder = std::make_unique<Binder>(c->app);
        configure(*c->binder, *static_cast<typename decltype(cmd)::element_type*>(c));
        return c;
    };

    attach(&app, "ingest", "normalize a price CSV", std::make_unique<Ingest>(),
           [](Binder& b, Ingest& c) { c.o.add(b); });
    attach(&app, "scaling", "Hurst exponent, fractal dimension and diffusion", std::make_unique<Scaling>(),
           [](Binder& b, Scaling& c) {
               c.o.add(b);
               b.opt("lags", c.lags, "comma-separated return lags")->delimiter(',');
               b.opt("mass", c.mass, "m");
               b.opt("window", c.window, "rolling diffusion window (0: off)");
               b.opt("step", c.step, "rolling diffusion step");
           });
    attach(&app, "density", "binned density and amplitude", std::make_unique<Density>(),
           [](Binder& b, Density& c) { c.o.add(b); });
    attach(&app, "potential", "extract Phi - E, Q and U from a density", std::make_unique<Potential>(),
           [](Binder& b, Potential& c) {
               c.o.add(b);
               b.opt("mass", c.mass, "m");
               b.opt("diffusion", c.diffusion, "D override (default: estimated from the series)");
           });
    attach(&app, "roundtrip", "density -> potential -> ground state, report the gap", std::make_unique<RoundTrip>(),
           [](Binder& b, RoundTrip& c) {
               c.o.add(b);
               b.opt("mass", c.mass, "m");
               b.opt("diffusion", c.diffusion, "D override (default: estimated from the series)");
           });
    attach(&app, "solve", "lowest eigenpairs of H = -2mD^2 d2/dx2 + Phi", std::make_unique<Solve>(),
           [](Binder& b, Solve& c) {
               c.p.add(b);
               b.opt("count", c.count, "number of levels");
           });
    attach(&app, "evolve", "Crank-Nicolson propagation", std::make_unique<Evolve>(), [](Binder& b, Evolve& c) {
        c.p.add(b);
        b.opt("initial", c.initial, "packet | ground");
        b.opt("center", c.center, "packet center");
        b.opt("width", c.width, "packet width (std of |psi|^2)");
        b.opt("wavenumber", c.wavenumber, "packet wavenumber");
        b.opt("dt", c.dt, "time step");
        b.opt("steps", c.steps, "number of steps");
        b.opt("record-stride", c.record_stride, "snapshot every n steps");
        b.flag("generalized", c.generalized, "scale-dependent diffusion <D> + dD(t)");
        b.opt("mode", c.mode, "full | perturbative");
        b.opt("delta-d", c.delta_d, "constant:<v> | sinusoid:<amp>:<period> | (t,delta) CSV");
    });

    auto* sim = app.add_subcommand("simulate", "synthetic paths");
    sim->require_subcommand(1);
    attach(sim, "gbm", "Brownian log-price paths", std::make_unique<SimulateGbm>(), [](Binder& b, SimulateGbm& c) {
        b.opt("sigma", c.sigma, "volatility per sqrt(year)");
        b.opt("mu", c.mu, "drift per year");
        b.opt("steps", c.steps, "steps");
        b.opt("dt", c.dt, "step, years");
        b.opt("seed", c.seed, "seed");
        b.opt("paths", c.paths, "paths");
    });
    attach(sim, "fbm", "exact fractional Brownian paths", std::make_unique<SimulateFbm>(),
           [](Binder& b, SimulateFbm& c) {
               b.opt("hurst", c.hurst, "H in (0, 1)");
               b.opt("scale", c.scale, "std of the unit-time increment");
               b.opt("steps", c.steps, "steps");
               b.opt("dt", c.dt, "step, years");
               b.opt("seed", c.seed, "seed");
               b.opt("paths", c.paths, "paths");
           });
    attach(sim, "nelson", "Nelson diffusion driven by an eigenstate", std::make_unique<SimulateNelson>(),
           [](Binder& b, SimulateNelson& c) {
               c.p.add(b);
               b.opt("level", c.level, "eigenstate index");
               b.opt("paths", c.paths, "paths");
               b.opt("steps", c.steps, "steps");
               b.opt("dt", c.dt, "time step");
               b.opt("seed", c.seed, "seed");
               b.opt("initial", c.initial, "density | uniform | point");
               b.opt("point", c.point, "start for --initial point");
               b.opt("record-stride", c.record_stride, "snapshot every n steps (0: first and last only)");
               b.opt("bins", c.bins, "bins of the final histogram");
           });

    attach(&app, "report", "weekly window: density, diffusion, potential", std::make_unique<ReportCmd>(),
           [](Binder& b, ReportCmd& c) {
               b.opt("input", c.input, "daily or weekly price CSV")->required();
               b.opt("column", c.column, "price column");
               b.opt("start", c.start, "first date (inclusive)");
               b.opt("end", c.end, "last date (inclusive)");
               b.opt("bins", c.bins, "histogram bins");
               b.opt("range-lo", c.range_lo, "histogram lower edge");
               b.opt("range-hi", c.range_hi, "histogram upper edge");
               b.opt("lags", c.lags, "return lags for the Hurst fit")->delimiter(',');
               b.opt("mass", c.mass, "m");
               b.opt("diffusion", c.diffusion, "D override");
               b.opt("floor", c.floor, "amplitude floor, relative to max P");
           });

    std::string manifest;
    auto* rerun = app.add_subcommand("rerun", "repeat a run from its manifest");
    rerun->add_option("--manifest", manifest, "manifest JSON")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolName << " " << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << "\n";
        return 2;
    }

    try {
        if (rerun->parsed()) {
            const json m = json::parse(read_file(manifest));
            verify_inputs(m);
            auto again = args_from_manifest(m);
            again.push_back("--out-dir=" + out_dir);
            return run(again, out, err);
        }
        for (auto& c : commands) {
            if (!c->app->parsed()) continue;
            RunContext ctx(c->name(), out_dir);
            c->binder->dump(ctx.parameters());
            for (auto& [k, v] : ctx.parameters().items())
                if (v.is_string()) v = absolutize_if_file(v.get<std::string>());
            c->exec(ctx, out);
            const auto path = ctx.finish();
            out << "manifest " << path.string() << "\n";
            return 0;
        }
        err << "error: usage: no command\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        err << "error: format: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: input: " << e.what() << "\n";
        return 1;
    }
}

} // namespace qfin::cli
