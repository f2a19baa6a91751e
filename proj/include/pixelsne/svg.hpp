#pragma once

#include <algorithm>
#include <optional>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "pixelsne/core.hpp"
#include "pixelsne/io.hpp"

namespace pixelsne {

struct SvgOptions {
    double radius = 1.5;
    double opacity = 0.55;
    /// With a resolution the axes span [0, r1) x [0, r2); otherwise the data
    /// bounding box is used.
    std::optional<Resolution> screen;
    int canvas_px = 800;
};

namespace detail {

// Categorical palette (20 entries), cycled by label index.
inline const char* kPalette[20] = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896",
    "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5"};

inline std::string svg_num(double v) {
    char buf[32];
    int n = std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

/// One circle per item; colors cycle a categorical palette keyed by label.
/// The y axis is flipped so larger y renders upward.
inline std::string render_svg(std::span<const double> coords, const LabelVector* labels,
                              const SvgOptions& opts = {}) {
    const std::size_t n = coords.size() / 2;
    for (double v : coords)
        if (!std::isfinite(v)) throw std::invalid_argument("render_svg: non-finite coordinate");
    if (labels && !labels->empty() && labels->size() != n)
        throw std::invalid_argument("render_svg: label count mismatch");

    double x0, y0, x1, y1;
    if (opts.screen) {
        x0 = 0.0;
        y0 = 0.0;
        x1 = static_cast<double>((*opts.screen)[0]);
        y1 = static_cast<double>((*opts.screen)[1]);
    } else {
        x0 = x1 = n ? coords[0] : 0.0;
        y0 = y1 = n ? coords[1] : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x0 = std::min(x0, coords[2 * i]);
            x1 = std::max(x1, coords[2 * i]);
            y0 = std::min(y0, coords[2 * i + 1]);
            y1 = std::max(y1, coords[2 * i + 1]);
        }
        const double pad_x = std::max(1e-9, 0.02 * (x1 - x0));
        const double pad_y = std::max(1e-9, 0.02 * (y1 - y0));
        x0 -= pad_x; x1 += pad_x;
        y0 -= pad_y; y1 += pad_y;
    }

    std::vector<std::size_t> color_of;
    std::vector<std::string> distinct;
    if (labels && !labels->empty()) {
        distinct.assign(labels->begin(), labels->end());
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        color_of.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            color_of[i] = static_cast<std::size_t>(
                std::lower_bound(distinct.begin(), distinct.end(), (*labels)[i]) -
                distinct.begin());
    }

    const double w = x1 - x0;
    const double h = y1 - y0;
    const int canvas_h =
        static_cast<int>(std::max(1.0, static_cast<double>(opts.canvas_px) * h / w));
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.canvas_px << "\" height=\""
       << canvas_h << "\" viewBox=\"" << detail::svg_num(x0) << ' ' << detail::svg_num(y0) << ' ' << detail::svg_num(w)
       << ' ' << detail::svg_num(h) << "\">\n";
    os << "<rect x=\"" << detail::svg_num(x0) << "\" y=\"" << detail::svg_num(y0) << "\" width=\"" << detail::svg_num(w)
       << "\" height=\"" << detail::svg_num(h)
       << "\" fill=\"white\" stroke=\"#888888\" stroke-width=\"" << detail::svg_num(0.002 * w)
       << "\"/>\n";
    for (std::size_t i = 0; i < n; ++i) {
        const char* fill =
            color_of.empty() ? detail::kPalette[0] : detail::kPalette[color_of[i] % 20];
        const double cy = y0 + (y1 - coords[2 * i + 1]);  // flip: +y up
        os << "<circle cx=\"" << detail::svg_num(coords[2 * i]) << "\" cy=\"" << detail::svg_num(cy) << "\" r=\""
           << detail::svg_num(opts.radius) << "\" fill=\"" << fill << "\" fill-opacity=\""
           << detail::svg_num(opts.opacity) << "\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline void write_svg(const std::filesystem::path& path, std::span<const double> coords,
                      const LabelVector* labels, const SvgOptions& opts = {}) {
    write_file_atomic(path, render_svg(coords, labels, opts));
}

}  // namespace pixelsne
