#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <string>

#include "archseg/error.hpp"
#include "archseg/io.hpp"

namespace archseg {
namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::optional<double> parse_double(std::string_view token) {
    double v = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return v;
}

// Splits on ASCII whitespace, tracking line numbers for error messages.
class Tokenizer {
public:
    explicit Tokenizer(std::string_view text) : text_(text) {}

    std::optional<std::string_view> next() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
        if (pos_ >= text_.size()) return std::nullopt;
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        return text_.substr(start, pos_ - start);
    }
    std::optional<std::string_view> peek() {
        const auto saved_pos = pos_;
        const auto saved_line = line_;
        auto tok = next();
        pos_ = saved_pos;
        line_ = saved_line;
        return tok;
    }
    [[nodiscard]] int line() const noexcept { return line_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

constexpr std::array<std::string_view, 8> kHeaderKeys = {
    "ncols", "nrows", "xllcorner", "xllcenter", "yllcorner", "yllcenter", "cellsize",
    "nodata_value"};

bool is_header_key(std::string_view token) {
    const std::string k = lower(token);
    return std::find(kHeaderKeys.begin(), kHeaderKeys.end(), k) != kHeaderKeys.end();
}

}  // namespace

DtmGrid load_ascii_grid(std::string_view text) {
    Tokenizer tok(text);
    std::map<std::string, double> header;

    while (true) {
        auto key = tok.peek();
        if (!key || !std::isalpha(static_cast<unsigned char>(key->front()))) break;
        if (!is_header_key(*key)) {
            // An alphabetic token that is not a header key; let the body parser report it
            // unless it looks like a numeric literal such as "nan".
            if (!parse_double(*key)) {
                throw ParseError("ascii grid: unknown header key '" + std::string(*key) +
                                 "' on line " + std::to_string(tok.line()));
            }
            break;
        }
        tok.next();
        const std::string k = lower(*key);
        auto value = tok.next();
        if (!value) throw ParseError("ascii grid: header key '" + k + "' has no value");
        auto v = parse_double(*value);
        if (!v) {
            throw ParseError("ascii grid: non-numeric value '" + std::string(*value) +
                             "' for header key '" + k + "'");
        }
        if (!header.emplace(k, *v).second) {
            throw ParseError("ascii grid: duplicate header key '" + k + "'");
        }
    }

    auto require = [&](std::string_view key) {
        auto it = header.find(std::string(key));
        if (it == header.end()) {
            throw ParseError("ascii grid: missing header key '" + std::string(key) + "'");
        }
        return it->second;
    };
    auto either = [&](std::string_view corner, std::string_view center) -> std::pair<double, bool> {
        const bool has_corner = header.count(std::string(corner)) != 0;
        const bool has_center = header.count(std::string(center)) != 0;
        if (has_corner && has_center) {
            throw ParseError("ascii grid: both '" + std::string(corner) + "' and '" +
                             std::string(center) + "' given");
        }
        if (has_center) return {header.at(std::string(center)), true};
        return {require(corner), false};
    };

    const double ncols = require("ncols");
    const double nrows = require("nrows");
    const double cellsize = require("cellsize");
    const double nodata_value = require("nodata_value");
    const auto [xll, x_is_center] = either("xllcorner", "xllcenter");
    const auto [yll, y_is_center] = either("yllcorner", "yllcenter");

    if (ncols < 1 || nrows < 1 || ncols != std::floor(ncols) || nrows != std::floor(nrows)) {
        throw ParseError("ascii grid: ncols and nrows must be positive integers");
    }
    if (!(cellsize > 0.0)) throw ParseError("ascii grid: cellsize must be positive");

    GridGeometry g;
    g.width = static_cast<int>(ncols);
    g.height = static_cast<int>(nrows);
    g.cell_size = cellsize;
    g.origin_x = x_is_center ? xll - 0.5 * cellsize : xll;
    const double south = y_is_center ? yll - 0.5 * cellsize : yll;
    g.origin_y = south + static_cast<double>(g.height) * cellsize;

    const std::size_t n = g.pixel_count();
    std::vector<double> z;
    std::vector<std::uint8_t> nodata;
    z.reserve(n);
    nodata.reserve(n);
    while (auto token = tok.next()) {
        auto v = parse_double(*token);
        if (!v) {
            throw ParseError("ascii grid: non-numeric token '" + std::string(*token) +
                             "' on line " + std::to_string(tok.line()));
        }
        if (z.size() == n) {
            throw ParseError("ascii grid: more than ncols*nrows = " + std::to_string(n) +
                             " values");
        }
        const bool missing = std::isnan(*v) || *v == nodata_value;
        z.push_back(missing ? 0.0 : *v);
        nodata.push_back(missing ? 1 : 0);
    }
    if (z.size() != n) {
        throw ParseError("ascii grid: expected ncols*nrows = " + std::to_string(n) +
                         " values, found " + std::to_string(z.size()));
    }
    return DtmGrid(g, std::move(z), std::move(nodata));
}

namespace {

void append_number(std::string& out, double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.append(buf.data(), ptr);
}

}  // namespace

std::string save_ascii_grid(const DtmGrid& grid, double nodata_value) {
    const GridGeometry& g = grid.geometry();
    std::string out;
    out.reserve(g.pixel_count() * 8 + 128);
    out += "ncols ";
    out += std::to_string(g.width);
    out += "\nnrows ";
    out += std::to_string(g.height);
    out += "\nxllcorner ";
    append_number(out, g.origin_x);
    out += "\nyllcorner ";
    append_number(out, g.origin_y - static_cast<double>(g.height) * g.cell_size);
    out += "\ncellsize ";
    append_number(out, g.cell_size);
    out += "\nNODATA_value ";
    append_number(out, nodata_value);
    out += '\n';
    for (int r = 0; r < g.height; ++r) {
        for (int c = 0; c < g.width; ++c) {
            if (c) out += ' ';
            append_number(out, grid.is_nodata(c, r) ? nodata_value : grid.at(c, r));
        }
        out += '\n';
    }
    return out;
}

DtmGrid read_ascii_grid_file(const std::filesystem::path& path) {
    return load_ascii_grid(read_text_file(path));
}

void write_ascii_grid_file(const std::filesystem::path& path, const DtmGrid& grid,
                           double nodata_value) {
    write_text_file(path, save_ascii_grid(grid, nodata_value));
}

}  // namespace archseg
