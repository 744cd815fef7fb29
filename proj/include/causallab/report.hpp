#pragma once

// Persistence for experiment results: CSV tables, SVG plots and JSON run
// manifests. Doubles go out with 17 significant digits.
//
// CSV schemas (one header row, comma separated, no quoting needed):
//   sweep     kind,k_x,k_y,alpha_max,n_components,error_rate,std_dev,n_trials,n_hyperpriors
//   trials    cell,hyperprior,trial,truth,predicted
//   heatmap   d,e,f,log_lr,masked
//   confusion repeat,true_class,predicted_class,count

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "causallab/classifier.hpp"
#include "causallab/dataset_io.hpp"
#include "causallab/errors.hpp"
#include "causallab/experiments.hpp"
#include "causallab/version.hpp"

namespace causallab {

inline constexpr int kCsvSchemaVersion = 1;

namespace detail {

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt(double v, int digits = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

/// Diverging blue-white-red; t in [-1, 1].
inline std::string diverging_color(double t) {
    t = std::clamp(t, -1.0, 1.0);
    const auto lerp = [](double a, double b, double u) { return static_cast<int>(std::lround(a + (b - a) * u)); };
    int r, g, b;
    if (t < 0) {
        r = lerp(255, 33, -t);
        g = lerp(255, 102, -t);
        b = lerp(255, 172, -t);
    } else {
        r = lerp(255, 178, t);
        g = lerp(255, 24, t);
        b = lerp(255, 43, t);
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

inline const char* series_color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
    return palette[i % 8];
}

} // namespace detail

inline const std::string kSweepCsvHeader =
    "kind,k_x,k_y,alpha_max,n_components,error_rate,std_dev,n_trials,n_hyperpriors";

inline void emit_csv(const SweepResult& result, const std::string& path) {
    auto out = detail::open_out(path);
    out << kSweepCsvHeader << '\n';
    for (const auto& c : result.cells) {
        out << result.kind << ',' << c.k_x << ',' << c.k_y << ',' << detail::fmt17(c.alpha_max) << ','
            << c.n_components << ',' << detail::fmt17(c.error_rate) << ',' << detail::fmt17(c.std_dev) << ','
            << c.n_trials << ',' << c.n_hyperpriors << '\n';
    }
    detail::finish(out, path);
}

/// Reads a sweep CSV back; per-hyperprior errors are not persisted.
inline SweepResult load_sweep_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line) || line != kSweepCsvHeader) throw ParseError("unexpected sweep CSV header", 0);
    SweepResult r;
    std::size_t record = 0;
    while (std::getline(in, line)) {
        ++record;
        if (line.empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 9) throw ParseError("expected 9 fields", record);
        try {
            if (r.kind.empty()) r.kind = f[0];
            SweepCell c;
            c.k_x = std::stoul(f[1]);
            c.k_y = std::stoul(f[2]);
            c.alpha_max = std::stod(f[3]);
            c.n_components = std::stoul(f[4]);
            c.error_rate = std::stod(f[5]);
            c.std_dev = std::stod(f[6]);
            c.n_trials = std::stoul(f[7]);
            c.n_hyperpriors = std::stoul(f[8]);
            r.cells.push_back(std::move(c));
        } catch (const std::logic_error& e) {
            throw ParseError(std::string("bad field: ") + e.what(), record);
        }
    }
    return r;
}

inline void emit_trials_csv(const SweepResult& result, const std::string& path) {
    auto out = detail::open_out(path);
    out << "cell,hyperprior,trial,truth,predicted\n";
    for (const auto& t : result.trials) {
        out << t.cell << ',' << t.hyperprior << ',' << t.trial << ',' << t.truth << ',' << t.predicted << '\n';
    }
    detail::finish(out, path);
}

inline void emit_csv(const HeatmapGrid& g, const std::string& path) {
    auto out = detail::open_out(path);
    out << "d,e,f,log_lr,masked\n";
    for (std::size_t s = 0; s < g.d_slices.size(); ++s) {
        for (std::size_t row = 0; row < g.resolution; ++row) {
            for (std::size_t col = 0; col < g.resolution; ++col) {
                const bool m = g.is_masked(s, row, col);
                out << detail::fmt17(g.d_slices[s]) << ',' << detail::fmt17(g.coordinate(col)) << ','
                    << detail::fmt17(g.coordinate(row)) << ',' << (m ? std::string("nan") : detail::fmt17(g.value(s, row, col)))
                    << ',' << (m ? 1 : 0) << '\n';
            }
        }
    }
    detail::finish(out, path);
}

inline void emit_csv(const std::vector<ConfusionMatrix>& matrices, const std::string& path) {
    auto out = detail::open_out(path);
    out << "repeat,true_class,predicted_class,count\n";
    for (std::size_t r = 0; r < matrices.size(); ++r) {
        const auto& cm = matrices[r];
        for (std::size_t i = 0; i < cm.n_classes(); ++i) {
            for (std::size_t j = 0; j < cm.n_classes(); ++j) {
                out << r << ',' << cm.class_names()[i] << ',' << cm.class_names()[j] << ',' << cm(i, j) << '\n';
            }
        }
    }
    detail::finish(out, path);
}

/// Error vs alpha_max (or log2 of the component count) with one line per
/// cardinality and +-1 std error bars.
inline void emit_svg_plot(const SweepResult& result, const std::string& path) {
    const bool by_components = result.kind == "components";
    const double W = 640, H = 420, L = 70, R = 150, T = 40, B = 60;
    const double pw = W - L - R, ph = H - T - B;

    std::map<std::pair<std::size_t, std::size_t>, std::vector<const SweepCell*>> series;
    double xmin = 0, xmax = 1, ymax = 0.05;
    bool first = true;
    for (const auto& c : result.cells) {
        series[{c.k_x, c.k_y}].push_back(&c);
        const double x = by_components ? std::log2(static_cast<double>(c.n_components)) : c.alpha_max;
        if (first) xmin = xmax = x;
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymax = std::max(ymax, c.error_rate + c.std_dev);
        first = false;
    }
    if (xmax <= xmin) xmax = xmin + 1;
    ymax = std::min(1.0, ymax * 1.1);
    const auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * pw; };
    const auto py = [&](double y) { return T + ph - y / ymax * ph; };

    auto out = detail::open_out(path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
        << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
        << detail::xml_escape(result.kind) << " sweep</text>\n";
    // axes and ticks
    out << "<g stroke=\"black\" fill=\"none\"><line x1=\"" << L << "\" y1=\"" << T + ph << "\" x2=\"" << L + pw
        << "\" y2=\"" << T + ph << "\"/><line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph
        << "\"/></g>\n";
    const int n_xticks = static_cast<int>(std::min(10.0, std::ceil(xmax - xmin)));
    for (int i = 0; i <= n_xticks; ++i) {
        const double x = xmin + (xmax - xmin) * i / n_xticks;
        const std::string label = by_components ? detail::fmt(std::exp2(x), 4) : detail::fmt(x, 3);
        out << "<line x1=\"" << px(x) << "\" y1=\"" << T + ph << "\" x2=\"" << px(x) << "\" y2=\"" << T + ph + 5
            << "\" stroke=\"black\"/><text x=\"" << px(x) << "\" y=\"" << T + ph + 18
            << "\" text-anchor=\"middle\">" << label << "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        const double y = ymax * i / 5;
        out << "<line x1=\"" << L - 5 << "\" y1=\"" << py(y) << "\" x2=\"" << L << "\" y2=\"" << py(y)
            << "\" stroke=\"black\"/><text x=\"" << L - 8 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">"
            << detail::fmt(y, 3) << "</text>\n";
    }
    out << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
        << (by_components ? "mixture components" : "alpha_max") << "</text>\n"
        << "<text transform=\"translate(18," << T + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">error rate</text>\n";

    std::size_t si = 0;
    for (const auto& [k, cells] : series) {
        const char* color = detail::series_color(si);
        std::ostringstream pts;
        for (const auto* c : cells) {
            const double x = px(by_components ? std::log2(static_cast<double>(c->n_components)) : c->alpha_max);
            pts << x << ',' << py(c->error_rate) << ' ';
            out << "<line x1=\"" << x << "\" y1=\"" << py(std::max(0.0, c->error_rate - c->std_dev)) << "\" x2=\"" << x
                << "\" y2=\"" << py(std::min(ymax, c->error_rate + c->std_dev)) << "\" stroke=\"" << color
                << "\" stroke-opacity=\"0.5\"/>\n";
            out << "<circle cx=\"" << x << "\" cy=\"" << py(c->error_rate) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts.str()
            << "\"/>\n";
        const double ly = T + 10 + 18.0 * static_cast<double>(si);
        out << "<line x1=\"" << L + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << L + pw + 35 << "\" y2=\"" << ly
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << L + pw + 40 << "\" y=\"" << ly + 4
            << "\">k = " << k.first << 'x' << k.second << "</text>\n";
        ++si;
    }
    out << "</svg>\n";
    detail::finish(out, path);
}

/// One panel per d slice, three per row. The color scale is centred at 0
/// and saturates at the 95th percentile of |log LR|; zero-crossings are
/// drawn in black and masked cells in grey.
inline void emit_svg_plot(const HeatmapGrid& g, const std::string& path) {
    const std::size_t n = g.resolution;
    const std::size_t cols = 3;
    const std::size_t rows = (g.d_slices.size() + cols - 1) / cols;
    const double cell = n > 150 ? 1.0 : 200.0 / static_cast<double>(n);
    const double panel = cell * static_cast<double>(n);
    const double gap = 30, top = 30;
    const double W = static_cast<double>(cols) * (panel + gap) + gap + 60;
    const double H = static_cast<double>(rows) * (panel + gap + 10) + top;

    std::vector<double> mags;
    for (std::size_t i = 0; i < g.log_lr.size(); ++i) {
        if (!g.masked[i]) mags.push_back(std::abs(g.log_lr[i]));
    }
    double vmax = 1.0;
    if (!mags.empty()) {
        const auto k = static_cast<std::size_t>(0.95 * static_cast<double>(mags.size() - 1));
        std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end());
        vmax = std::max(mags[k], 1e-12);
    }
    constexpr int kLevels = 20;
    const auto level = [&](double v) {
        return static_cast<int>(std::lround(std::clamp(v / vmax, -1.0, 1.0) * kLevels));
    };

    auto out = detail::open_out(path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"11\" shape-rendering=\"crispEdges\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    for (std::size_t s = 0; s < g.d_slices.size(); ++s) {
        const double ox = gap + static_cast<double>(s % cols) * (panel + gap);
        const double oy = top + static_cast<double>(s / cols) * (panel + gap + 10);
        out << "<g>\n<text x=\"" << ox + panel / 2 << "\" y=\"" << oy - 6 << "\" text-anchor=\"middle\">d = "
            << detail::fmt(g.d_slices[s], 3) << "</text>\n";
        // rows of f, drawn bottom-up so f grows upwards; runs of equal color merged
        for (std::size_t r = 0; r < n; ++r) {
            const double y = oy + panel - cell * static_cast<double>(r + 1);
            std::size_t c = 0;
            while (c < n) {
                const bool m = g.is_masked(s, r, c);
                const int lv = m ? 0 : level(g.value(s, r, c));
                std::size_t end = c + 1;
                while (end < n && g.is_masked(s, r, end) == m && (m || level(g.value(s, r, end)) == lv)) ++end;
                const std::string fill = m ? "#d0d0d0" : detail::diverging_color(static_cast<double>(lv) / kLevels);
                out << "<rect x=\"" << ox + cell * static_cast<double>(c) << "\" y=\"" << y << "\" width=\""
                    << cell * static_cast<double>(end - c) << "\" height=\"" << cell << "\" fill=\"" << fill
                    << "\"/>\n";
                c = end;
            }
        }
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
                if (g.is_masked(s, r, c)) continue;
                const double v = g.value(s, r, c);
                const bool flip_right = c + 1 < n && !g.is_masked(s, r, c + 1) && (v > 0) != (g.value(s, r, c + 1) > 0);
                const bool flip_up = r + 1 < n && !g.is_masked(s, r + 1, c) && (v > 0) != (g.value(s, r + 1, c) > 0);
                if (flip_right || flip_up || v == 0.0) {
                    out << "<rect x=\"" << ox + cell * static_cast<double>(c) << "\" y=\""
                        << oy + panel - cell * static_cast<double>(r + 1) << "\" width=\"" << cell << "\" height=\""
                        << cell << "\" fill=\"black\"/>\n";
                }
            }
        }
        out << "<rect x=\"" << ox << "\" y=\"" << oy << "\" width=\"" << panel << "\" height=\"" << panel
            << "\" fill=\"none\" stroke=\"black\"/>\n"
            << "<text x=\"" << ox + panel / 2 << "\" y=\"" << oy + panel + 13 << "\" text-anchor=\"middle\">e</text>\n"
            << "<text x=\"" << ox - 8 << "\" y=\"" << oy + panel / 2 << "\" text-anchor=\"middle\">f</text>\n</g>\n";
    }
    // color bar
    const double bx = W - 45, by = top, bh = std::min(200.0, H - 2 * top);
    for (int i = -kLevels; i <= kLevels; ++i) {
        const double y = by + bh * (1.0 - static_cast<double>(i + kLevels) / (2 * kLevels + 1));
        out << "<rect x=\"" << bx << "\" y=\"" << y - bh / (2 * kLevels + 1) << "\" width=\"12\" height=\""
            << bh / (2 * kLevels + 1) << "\" fill=\"" << detail::diverging_color(static_cast<double>(i) / kLevels)
            << "\"/>\n";
    }
    out << "<text x=\"" << bx + 6 << "\" y=\"" << by - 12 << "\" text-anchor=\"middle\">log LR</text>\n"
        << "<text x=\"" << bx + 16 << "\" y=\"" << by + 4 << "\">" << detail::fmt(vmax, 3) << "</text>\n"
        << "<text x=\"" << bx + 16 << "\" y=\"" << by + bh / 2 + 4 << "\">0</text>\n"
        << "<text x=\"" << bx + 16 << "\" y=\"" << by + bh + 4 << "\">" << detail::fmt(-vmax, 3) << "</text>\n"
        << "</svg>\n";
    detail::finish(out, path);
}

/// Row-normalized confusion heatmap with raw counts in each cell.
inline void emit_svg_plot(const ConfusionMatrix& cm, const std::string& path, const std::string& title = "") {
    const std::size_t n = cm.n_classes();
    const double cell = 60, L = 110, T = 60;
    const double W = L + cell * static_cast<double>(n) + 20, H = T + cell * static_cast<double>(n) + 50;
    auto out = detail::open_out(path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
        << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">"
        << detail::xml_escape(title.empty() ? "errors = " + std::to_string(cm.errors()) : title) << "</text>\n";
    for (std::size_t i = 0; i < n; ++i) {
        const auto row_total = cm.row_total(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double frac = row_total == 0 ? 0.0 : static_cast<double>(cm(i, j)) / static_cast<double>(row_total);
            const double x = L + cell * static_cast<double>(j), y = T + cell * static_cast<double>(i);
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
                << "\" fill=\"" << detail::diverging_color(frac) << "\" stroke=\"#888\"/>\n"
                << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\">"
                << cm(i, j) << "</text>\n";
        }
        out << "<text x=\"" << L - 6 << "\" y=\"" << T + cell * (static_cast<double>(i) + 0.5) + 4
            << "\" text-anchor=\"end\">" << detail::xml_escape(cm.class_names()[i]) << "</text>\n"
            << "<text x=\"" << L + cell * (static_cast<double>(i) + 0.5) << "\" y=\"" << T - 6
            << "\" text-anchor=\"middle\">" << detail::xml_escape(cm.class_names()[i]) << "</text>\n";
    }
    out << "<text x=\"" << L + cell * static_cast<double>(n) / 2 << "\" y=\"" << H - 15
        << "\" text-anchor=\"middle\">predicted (columns) vs true (rows)</text>\n</svg>\n";
    detail::finish(out, path);
}

/// Writes `dir/<command>.manifest.json` with the command, its resolved
/// config, the seed and every on-disk schema version. Returns the path.
inline std::string write_manifest(const std::string& dir, const std::string& command, const nlohmann::json& config,
                           std::uint64_t seed, const std::vector<std::string>& outputs = {}) {
    const nlohmann::json m = {
        {"tool", "causallab"},
        {"version", kVersionString},
        {"command", command},
        {"seed", seed},
        {"config", config},
        {"outputs", outputs},
        {"schema_versions", {{"dataset", kDatasetSchemaVersion}, {"model", kModelSchemaVersion}, {"csv", kCsvSchemaVersion}}},
    };
    const std::string path = (std::filesystem::path(dir) / (command + ".manifest.json")).string();
    auto out = detail::open_out(path);
    out << m.dump(2) << '\n';
    detail::finish(out, path);
    return path;
}

} // namespace causallab
