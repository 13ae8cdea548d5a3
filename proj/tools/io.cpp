#include "io.hpp"

#include "qfin/error.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace qfin::cli {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void atomic_write(const fs::path& path, std::string_view content) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) fail(ErrorKind::Input, "cannot write " + tmp.string());
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        f.flush();
        if (!f) {
            f.close();
            fs::remove(tmp);
            fail(ErrorKind::Input, "short write to " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::Input, "cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        fail(ErrorKind::Internal, "sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        auto cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '"')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '"' || cell.back() == '\r')) cell.remove_suffix(1);
        cells.push_back(cell);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) out.push_back(line);
        start = nl + 1;
    }
    return out;
}

} // namespace

const std::vector<double>& Table::column(const std::string& name) const {
    const auto it = columns.find(name);
    if (it == columns.end()) fail(ErrorKind::Format, "missing column '" + name + "'");
    return it->second;
}

std::vector<std::string> header_of(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty()) return {};
    std::vector<std::string> out;
    for (auto c : split(lines.front())) out.emplace_back(c);
    return out;
}

Table parse_table(std::string_view text, const std::string& source) {
    const auto lines = lines_of(text);
    if (lines.empty()) fail(ErrorKind::EmptyInput, source + ": no header row");
    Table t;
    for (auto c : split(lines.front())) t.header.emplace_back(c);
    std::vector<std::vector<double>> cols(t.header.size());
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split(lines[r]);
        if (cells.size() != t.header.size())
            fail(ErrorKind::Format, source + ": row " + std::to_string(r + 1) + " has " + std::to_string(cells.size()) +
                                        " cells, expected " + std::to_string(t.header.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v = 0.0;
            const auto res = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), v);
            if (res.ec != std::errc{} || res.ptr != cells[c].data() + cells[c].size())
                fail(ErrorKind::Format, source + ": row " + std::to_string(r + 1) + ": not a number: '" +
                                            std::string(cells[c]) + "'");
            cols[c].push_back(v);
        }
    }
    t.rows = lines.size() - 1;
    for (std::size_t c = 0; c < cols.size(); ++c) t.columns[t.header[c]] = std::move(cols[c]);
    return t;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) { text_row(header); }

void CsvWriter::row(std::initializer_list<double> values) { row(std::vector<double>(values)); }

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != width_) fail(ErrorKind::Internal, "csv row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) text_.push_back(',');
        text_ += format_number(values[i]);
    }
    text_.push_back('\n');
}

void CsvWriter::text_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) text_.push_back(',');
        text_ += cells[i];
    }
    text_.push_back('\n');
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunContext::RunContext(std::string command, fs::path out_dir)
    : command_(std::move(command)), out_dir_(std::move(out_dir)) {}

std::string RunContext::prefix() const {
    std::string p = command_;
    for (char& c : p)
        if (c == ' ') c = '_';
    return p;
}

void RunContext::set_seed(std::uint64_t seed, const std::string& generator) {
    seed_ = seed;
    generator_ = generator;
}

std::string RunContext::read_input(const fs::path& path) {
    std::string text = read_file(path);
    inputs_.push_back({{"path", fs::absolute(path).lexically_normal().string()}, {"sha256", sha256_hex(text)},
                       {"bytes", text.size()}});
    return text;
}

void RunContext::write_output(const std::string& name, std::string_view content) {
    atomic_write(out_dir_ / name, content);
    outputs_.push_back({{"path", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
}

void RunContext::write_json(const std::string& name, const nlohmann::json& j) { write_output(name, j.dump(2) + "\n"); }

fs::path RunContext::finish() const {
    nlohmann::json m;
    m["tool"] = kToolName;
    m["version"] = kToolVersion;
    m["command"] = command_;
    m["timestamp"] = utc_timestamp();
    m["parameters"] = parameters_;
    m["derived"] = derived_;
    if (seed_) {
        m["seed"] = *seed_;
        m["generator"] = generator_;
    }
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    m["warnings"] = warnings_;
    const fs::path path = out_dir_ / (prefix() + ".manifest.json");
    atomic_write(path, m.dump(2) + "\n");
    return path;
}

} // namespace qfin::cli
