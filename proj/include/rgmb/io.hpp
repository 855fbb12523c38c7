#pragma once

// File formats: value/stop matrices as CSV, boundary tables, two-column
// tabulations and the stopping-region heatmap.

#include <charconv>
#include <limits>
#include <span>
#include <type_traits>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "mc_solver.hpp"
#include "volterra.hpp"

namespace rgmb::io {

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
        if (text == "-inf") return -std::numeric_limits<double>::infinity();
        throw ConfigurationError("not a number: '" + std::string(text) + "'");
    }
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open " + path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

/// Grid-indexed matrix: header "t,x_0,...,x_M", then one row per t_i.
struct GridTable {
    std::vector<double> t;
    std::vector<double> x;
    Matrix<double> values;
};

template <class T>
void write_grid_csv(const std::string& path, std::span<const double> t, std::span<const double> x,
                    const Matrix<T>& m) {
    auto out = open_out(path);
    out << "t";
    for (double v : x) out << ',' << format_double(v);
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
        out << format_double(t[i]);
        for (std::size_t j = 0; j < x.size(); ++j) {
            if constexpr (std::is_floating_point_v<T>) {
                out << ',' << format_double(m(i, j));
            } else {
                out << ',' << static_cast<int>(m(i, j));
            }
        }
        out << '\n';
    }
}

inline GridTable read_grid_csv(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.size() < 2) throw ConfigurationError(path + ": expected a header and at least one row");
    GridTable table;
    const auto header = split(lines[0], ',');
    if (header.size() < 2 || header[0] != "t") {
        throw ConfigurationError(path + ": header must start with 't'");
    }
    for (std::size_t j = 1; j < header.size(); ++j) table.x.push_back(parse_double(header[j]));
    table.values = Matrix<double>(lines.size() - 1, table.x.size());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split(lines[i], ',');
        if (cells.size() != header.size()) {
            throw ConfigurationError(path + ": row " + std::to_string(i) + " has " +
                                     std::to_string(cells.size()) + " fields, expected " +
                                     std::to_string(header.size()));
        }
        table.t.push_back(parse_double(cells[0]));
        for (std::size_t j = 1; j < cells.size(); ++j) table.values(i - 1, j - 1) = parse_double(cells[j]);
    }
    return table;
}

/// Two numeric columns, optional non-numeric header line.
inline std::pair<std::vector<double>, std::vector<double>> read_two_columns(const std::string& path) {
    std::vector<double> a, b;
    const auto lines = read_lines(path);
    for (std::size_t k = 0; k < lines.size(); ++k) {
        if (lines[k].front() == '#') continue;
        const auto cells = split(lines[k], ',');
        if (cells.size() != 2) throw ConfigurationError(path + ": expected two columns per line");
        try {
            a.push_back(parse_double(cells[0]));
            b.push_back(parse_double(cells[1]));
        } catch (const ConfigurationError&) {
            if (k == 0 && a.empty()) continue;
            throw;
        }
    }
    return {a, b};
}

inline void write_result(const std::string& dir, const SolveResult& r) {
    write_grid_csv(dir + "/V.csv", r.grid.t, r.grid.x, r.value);
    write_grid_csv(dir + "/D.csv", r.grid.t, r.grid.x, r.stop);
}

/// One row per stopping interval: t, interval_low, interval_high.
inline void write_mc_boundary(const std::string& path, const Boundary& b) {
    auto out = open_out(path);
    out << "t,interval_low,interval_high\n";
    for (const auto& slice : b.slices) {
        for (const auto& iv : slice.intervals) {
            out << format_double(slice.t) << ',' << format_double(iv.low) << ','
                << format_double(iv.high) << '\n';
        }
    }
}

inline void write_volterra_boundary(const std::string& path, const std::vector<BoundaryRow>& rows) {
    auto out = open_out(path);
    out << "s,t,b_gain,b_y,b_x\n";
    for (const auto& r : rows) {
        out << format_double(r.s) << ',' << format_double(r.t) << ',' << format_double(r.b_gain) << ','
            << format_double(r.b_y) << ',' << format_double(r.b_x) << '\n';
    }
}

inline void write_convergence_log(const std::string& path, const BoundarySolution& sol) {
    auto out = open_out(path);
    out << "iteration,residual\n";
    for (std::size_t k = 0; k < sol.residual_log.size(); ++k) {
        out << k + 1 << ',' << format_double(sol.residual_log[k]) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Heatmap
// ---------------------------------------------------------------------------

struct HeatmapStyle {
    const char* stop_color = "#d62728";
    const char* continue_color = "#2ca02c";
    double width = 640.0;
    double height = 480.0;
    double margin = 60.0;
};

/// Time on the horizontal axis, x increasing upwards. Cell (i, j) covers the
/// midpoints between neighbouring grid nodes; vertical runs of equal state
/// are merged into one rectangle.
inline std::string heatmap_svg(const GridTable& d, const HeatmapStyle& style = {}) {
    const auto& t = d.t;
    const auto& x = d.x;
    if (t.empty() || x.empty()) throw ConfigurationError("empty stopping matrix");
    const double w = style.width, h = style.height, m = style.margin;
    const double t0 = t.front(), t1 = t.back() > t.front() ? t.back() : t.front() + 1.0;
    const double x0 = x.front(), x1 = x.back() > x.front() ? x.back() : x.front() + 1.0;
    auto px = [&](double tv) { return m + (tv - t0) / (t1 - t0) * w; };
    auto py = [&](double xv) { return m + (x1 - xv) / (x1 - x0) * h; };
    auto edge = [](const std::vector<double>& g, std::size_t k, bool upper) {
        if (upper) return k + 1 < g.size() ? 0.5 * (g[k] + g[k + 1]) : g[k];
        return k > 0 ? 0.5 * (g[k - 1] + g[k]) : g[k];
    };

    std::ostringstream out;
    out.precision(6);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w + 2 * m << "\" height=\""
        << h + 2 * m << "\" viewBox=\"0 0 " << w + 2 * m << ' ' << h + 2 * m << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << w + 2 * m << "\" height=\"" << h + 2 * m
        << "\" fill=\"white\"/>\n<g shape-rendering=\"crispEdges\" stroke=\"none\">\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double left = px(edge(t, i, false)), right = px(edge(t, i, true));
        std::size_t j = 0;
        while (j < x.size()) {
            const bool stop = d.values(i, j) != 0.0;
            std::size_t k = j;
            while (k + 1 < x.size() && (d.values(i, k + 1) != 0.0) == stop) ++k;
            const double top = py(edge(x, k, true)), bottom = py(edge(x, j, false));
            out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << std::max(right - left, 0.5)
                << "\" height=\"" << std::max(bottom - top, 0.5) << "\" fill=\""
                << (stop ? style.stop_color : style.continue_color) << "\"/>\n";
            j = k + 1;
        }
    }
    out << "</g>\n";
    out << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << w << "\" height=\"" << h
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"black\">\n";
    for (int k = 0; k <= 4; ++k) {
        const double tv = t0 + (t1 - t0) * k / 4.0;
        const double xv = x0 + (x1 - x0) * k / 4.0;
        out << "<text x=\"" << px(tv) << "\" y=\"" << m + h + 18 << "\" text-anchor=\"middle\">" << tv
            << "</text>\n";
        out << "<text x=\"" << m - 6 << "\" y=\"" << py(xv) + 4 << "\" text-anchor=\"end\">" << xv
            << "</text>\n";
    }
    out << "<text x=\"" << m + w / 2 << "\" y=\"" << m + h + 42 << "\" text-anchor=\"middle\">t</text>\n";
    out << "<text x=\"" << m - 42 << "\" y=\"" << m + h / 2 << "\" text-anchor=\"middle\">x</text>\n";
    out << "</g>\n</svg>\n";
    return out.str();
}

}  // namespace rgmb::io
