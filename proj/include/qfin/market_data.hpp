#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qfin {

/// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
public:
    constexpr Date() = default;
    static Date from_days(long days) { Date d; d.days_ = days; return d; }
    static Date from_ymd(int year, unsigned month, unsigned day);
    /// Parses yyyy-mm-dd; throws Error(Format) on anything else.
    static Date parse(std::string_view text);

    long days() const noexcept { return days_; }
    int year() const;
    unsigned month() const;
    unsigned day() const;
    /// 0 = Monday ... 6 = Sunday.
    unsigned weekday() const noexcept;
    /// Monday-based calendar week index, monotone in the date.
    long week_index() const noexcept;
    std::string iso() const;

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

private:
    long days_ = 0;
};

inline constexpr double kDaysPerYear = 365.25;

/// Dated raw prices. Dates strictly increase, prices are strictly positive
/// and there are at least two rows.
class PriceSeries {
public:
    PriceSeries(std::vector<Date> dates, std::vector<double> prices, std::string source = {});

    const std::vector<Date>& dates() const noexcept { return dates_; }
    const std::vector<double>& prices() const noexcept { return prices_; }
    const std::string& source() const noexcept { return source_; }
    std::size_t size() const noexcept { return prices_.size(); }

private:
    std::vector<Date> dates_;
    std::vector<double> prices_;
    std::string source_;
};

/// (t in years, x = ln price) pairs. t[0] = 0 and t strictly increases.
class CoordinateSeries {
public:
    CoordinateSeries(std::vector<double> t, std::vector<double> x);

    const std::vector<double>& t() const noexcept { return t_; }
    const std::vector<double>& x() const noexcept { return x_; }
    std::size_t size() const noexcept { return x_.size(); }

private:
    std::vector<double> t_;
    std::vector<double> x_;
};

struct CsvLoadResult {
    PriceSeries series;
    std::string column;
    std::size_t rejected_rows = 0;
};

/// Reads a historical-quote CSV. The header must name "Date" and at least one
/// price column; `column` selects one explicitly, otherwise "Adj Close" is
/// preferred over "Close". Rows with missing or non-positive prices are
/// dropped and counted. Output is sorted by date.
CsvLoadResult load_price_csv(std::istream& in, std::optional<std::string> column = std::nullopt,
                             std::string source = {});
CsvLoadResult load_price_csv(const std::filesystem::path& path,
                             std::optional<std::string> column = std::nullopt);
CsvLoadResult load_price_csv_text(std::string_view text,
                                  std::optional<std::string> column = std::nullopt);

/// Keeps the last available row of every Monday-based calendar week.
PriceSeries resample_weekly(const PriceSeries& series);

/// Rows with start <= date <= end.
PriceSeries slice_by_date(const PriceSeries& series, Date start, Date end);

CoordinateSeries to_log_coordinates(const PriceSeries& series);

} // namespace qfin
