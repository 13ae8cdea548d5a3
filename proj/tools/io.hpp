#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qfin::cli {

namespace fs = std::filesystem;

/// Shortest decimal that parses back to the same double; '.' radix, no locale.
std::string format_number(double v);

/// Writes to a sibling temp file and renames it into place.
void atomic_write(const fs::path& path, std::string_view content);

std::string read_file(const fs::path& path);
std::string sha256_hex(std::string_view data);

/// Numeric CSV with a header row. Missing cells are rejected.
struct Table {
    std::vector<std::string> header;
    std::map<std::string, std::vector<double>> columns;
    std::size_t rows = 0;

    bool has(const std::string& name) const { return columns.count(name) != 0; }
    const std::vector<double>& column(const std::string& name) const;
};

Table parse_table(std::string_view text, const std::string& source);
std::vector<std::string> header_of(std::string_view text);

/// Row-wise CSV builder using format_number for every value.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void row(std::initializer_list<double> values);
    void row(const std::vector<double>& values);
    void text_row(const std::vector<std::string>& cells);
    const std::string& str() const noexcept { return text_; }

private:
    std::size_t width_;
    std::string text_;
};

/// Collects everything a run reads and writes; flushed as <prefix>.manifest.json.
class RunContext {
public:
    RunContext(std::string command, fs::path out_dir);

    const fs::path& out_dir() const noexcept { return out_dir_; }
    const std::string& command() const noexcept { return command_; }
    std::string prefix() const;

    nlohmann::json& parameters() noexcept { return parameters_; }
    nlohmann::json& derived() noexcept { return derived_; }
    void set_seed(std::uint64_t seed, const std::string& generator);
    void warn(std::string message) { warnings_.push_back(std::move(message)); }

    /// Reads an input file and records its digest.
    std::string read_input(const fs::path& path);
    void write_output(const std::string& name, std::string_view content);
    void write_json(const std::string& name, const nlohmann::json& j);

    /// Writes the manifest and returns its path.
    fs::path finish() const;

private:
    std::string command_;
    fs::path out_dir_;
    nlohmann::json parameters_ = nlohmann::json::object();
    nlohmann::json derived_ = nlohmann::json::object();
    nlohmann::json inputs_ = nlohmann::json::array();
    nlohmann::json outputs_ = nlohmann::json::array();
    std::vector<std::string> warnings_;
    std::optional<std::uint64_t> seed_;
    std::string generator_;
};

std::string utc_timestamp();

inline constexpr const char* kToolName = "qfin";
#ifdef QFIN_VERSION
inline constexpr const char* kToolVersion = QFIN_VERSION;
#else
inline constexpr const char* kToolVersion = "0.0.0";
#endif

} // namespace qfin::cli
