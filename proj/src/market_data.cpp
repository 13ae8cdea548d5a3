#include "qfin/market_data.hpp"

#include "qfin/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace qfin {

namespace {

// Howard Hinnant's civil-date algorithms.
long days_from_civil(long y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

struct Civil {
    long y;
    unsigned m;
    unsigned d;
};

Civil civil_from_days(long z) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {y + (m <= 2), m, d};
}

bool is_leap(long y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(long y, unsigned m) {
    static constexpr unsigned table[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : table[m - 1];
}

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n\"";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

bool is_missing(std::string_view v) {
    return v.empty() || iequals(v, "null") || iequals(v, "nan") || iequals(v, "na") || v == ".";
}

} // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
    if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month))
        fail(ErrorKind::Format, "invalid calendar date " + std::to_string(year) + "-" +
                                    std::to_string(month) + "-" + std::to_string(day));
    return from_days(days_from_civil(year, month, day));
}

Date Date::parse(std::string_view text) {
    text = trim(text);
    auto bad = [&]() -> Date {
        fail(ErrorKind::Format, "expected yyyy-mm-dd date, got '" + std::string(text) + "'");
    };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return bad();
    int y = 0;
    unsigned m = 0, d = 0;
    auto num = [&](std::size_t off, std::size_t len, auto& out) {
        const auto* first = text.data() + off;
        const auto res = std::from_chars(first, first + len, out);
        return res.ec == std::errc{} && res.ptr == first + len;
    };
    if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return bad();
    return from_ymd(y, m, d);
}

int Date::year() const { return static_cast<int>(civil_from_days(days_).y); }
unsigned Date::month() const { return civil_from_days(days_).m; }
unsigned Date::day() const { return civil_from_days(days_).d; }

unsigned Date::weekday() const noexcept {
    // 1970-01-01 was a Thursday (index 3).
    const long w = (days_ + 3) % 7;
    return static_cast<unsigned>(w < 0 ? w + 7 : w);
}

long Date::week_index() const noexcept {
    const long shifted = days_ + 3;
    return shifted >= 0 ? shifted / 7 : (shifted - 6) / 7;
}

std::string Date::iso() const {
    const auto c = civil_from_days(days_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04ld-%02u-%02u", c.y, c.m, c.d);
    return buf;
}

PriceSeries::PriceSeries(std::vector<Date> dates, std::vector<double> prices, std::string source)
    : dates_(std::move(dates)), prices_(std::move(prices)), source_(std::move(source)) {
    if (dates_.size() != prices_.size())
        fail(ErrorKind::Input, "dates and prices differ in length");
    if (prices_.size() < 2) fail(ErrorKind::InsufficientData, "price series needs at least 2 rows");
    for (std::size_t i = 0; i < prices_.size(); ++i) {
        if (!(prices_[i] > 0.0) || !std::isfinite(prices_[i]))
            fail(ErrorKind::Input, "non-positive price on " + dates_[i].iso());
        if (i > 0 && !(dates_[i - 1] < dates_[i]))
            fail(ErrorKind::Input, "dates not strictly increasing at " + dates_[i].iso());
    }
}

CoordinateSeries::CoordinateSeries(std::vector<double> t, std::vector<double> x)
    : t_(std::move(t)), x_(std::move(x)) {
    if (t_.size() != x_.size()) fail(ErrorKind::Input, "t and x differ in length");
    if (t_.empty()) fail(ErrorKind::EmptyInput, "coordinate series is empty");
    if (t_.front() != 0.0) fail(ErrorKind::Input, "coordinate series must start at t = 0");
    for (std::size_t i = 0; i < x_.size(); ++i) {
        if (!std::isfinite(x_[i])) fail(ErrorKind::Input, "non-finite coordinate");
        if (i > 0 && !(t_[i] > t_[i - 1])) fail(ErrorKind::Input, "t not strictly increasing");
    }
}

CsvLoadResult load_price_csv(std::istream& in, std::optional<std::string> column,
                             std::string source) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) fail(ErrorKind::EmptyInput, "CSV input is empty");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);

    const auto header = split_commas(line);
    std::optional<std::size_t> date_col, price_col;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (iequals(header[i], "Date")) date_col = i;
    if (!date_col) fail(ErrorKind::Format, "CSV header lacks a Date column");

    std::string chosen;
    auto find_col = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (iequals(header[i], name)) return i;
        return std::nullopt;
    };
    if (column) {
        price_col = find_col(*column);
        if (!price_col) fail(ErrorKind::Format, "CSV header lacks requested column '" + *column + "'");
        chosen = *column;
    } else if ((price_col = find_col("Adj Close"))) {
        chosen = "Adj Close";
    } else if ((price_col = find_col("Close"))) {
        chosen = "Close";
    } else {
        fail(ErrorKind::Format, "CSV header lacks an 'Adj Close' or 'Close' column");
    }

    std::vector<std::pair<Date, double>> rows;
    std::size_t rejected = 0;
    const std::size_t need = std::max(*date_col, *price_col) + 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_commas(line);
        if (fields.size() < need)
            fail(ErrorKind::Format, "line " + std::to_string(line_no) + ": expected at least " +
                                        std::to_string(need) + " fields");
        Date date;
        try {
            date = Date::parse(fields[*date_col]);
        } catch (const Error& e) {
            fail(ErrorKind::Format, "line " + std::to_string(line_no) + ": " + e.what());
        }
        const auto v = fields[*price_col];
        if (is_missing(v)) {
            ++rejected;
            continue;
        }
        double price = 0.0;
        const auto res = std::from_chars(v.data(), v.data() + v.size(), price);
        if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
            fail(ErrorKind::Format, "line " + std::to_string(line_no) + ": cannot parse price '" +
                                        std::string(v) + "'");
        if (!(price > 0.0) || !std::isfinite(price)) {
            ++rejected;
            continue;
        }
        rows.emplace_back(date, price);
    }
    if (rows.empty()) fail(ErrorKind::EmptyInput, "CSV contains no valid price rows");

    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].first == rows[i - 1].first)
            fail(ErrorKind::DuplicateDate, "duplicate date " + rows[i].first.iso());
    if (rows.size() < 2)
        fail(ErrorKind::InsufficientData, "CSV contains fewer than 2 valid price rows");

    std::vector<Date> dates;
    std::vector<double> prices;
    dates.reserve(rows.size());
    prices.reserve(rows.size());
    for (const auto& [d, p] : rows) {
        dates.push_back(d);
        prices.push_back(p);
    }
    return {PriceSeries(std::move(dates), std::move(prices), std::move(source)), chosen, rejected};
}

CsvLoadResult load_price_csv(const std::filesystem::path& path, std::optional<std::string> column) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Input, "cannot open " + path.string());
    return load_price_csv(in, std::move(column), path.filename().string());
}

CsvLoadResult load_price_csv_text(std::string_view text, std::optional<std::string> column) {
    std::istringstream in{std::string(text)};
    return load_price_csv(in, std::move(column), "text");
}

PriceSeries resample_weekly(const PriceSeries& series) {
    const auto& dates = series.dates();
    const auto& prices = series.prices();
    std::vector<Date> out_dates;
    std::vector<double> out_prices;
    for (std::size_t i = 0; i < dates.size(); ++i) {
        const bool last_of_week =
            i + 1 == dates.size() || dates[i + 1].week_index() != dates[i].week_index();
        if (last_of_week) {
            out_dates.push_back(dates[i]);
            out_prices.push_back(prices[i]);
        }
    }
    if (out_dates.size() < 2)
        fail(ErrorKind::InsufficientData, "weekly resampling leaves fewer than 2 weeks");
    return PriceSeries(std::move(out_dates), std::move(out_prices), series.source());
}

PriceSeries slice_by_date(const PriceSeries& series, Date start, Date end) {
    if (end < start) fail(ErrorKind::Parameter, "slice start " + start.iso() + " after end " + end.iso());
    std::vector<Date> dates;
    std::vector<double> prices;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto d = series.dates()[i];
        if (start <= d && d <= end) {
            dates.push_back(d);
            prices.push_back(series.prices()[i]);
        }
    }
    if (dates.empty())
        fail(ErrorKind::EmptySlice, "no rows in " + start.iso() + ".." + end.iso());
    if (dates.size() < 2)
        fail(ErrorKind::EmptySlice, "only one row in " + start.iso() + ".." + end.iso());
    return PriceSeries(std::move(dates), std::move(prices), series.source());
}

CoordinateSeries to_log_coordinates(const PriceSeries& series) {
    std::vector<double> t(series.size()), x(series.size());
    const long d0 = series.dates().front().days();
    for (std::size_t i = 0; i < series.size(); ++i) {
        t[i] = static_cast<double>(series.dates()[i].days() - d0) / kDaysPerYear;
        x[i] = std::log(series.prices()[i]);
    }
    return CoordinateSeries(std::move(t), std::move(x));
}

} // namespace qfin
