// SPDX-License-Identifier: Apache-2.0
#pragma once
// Minimal SVG bar and line charts for the --plot flag.

#include <string>
#include <vector>

#include "noiseforge/core.hpp"

namespace noiseforge::svg {

struct Series {
    std::string name;
    std::vector<double> values;
};

namespace detail {

inline std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline constexpr const char* kPalette[] = {"#4e79a7", "#e15759", "#59a14f", "#f28e2b", "#76b7b2", "#b07aa1"};

struct Frame {
    double width = 640, height = 360, left = 56, right = 16, top = 36, bottom = 40;
    double plot_w() const { return width - left - right; }
    double plot_h() const { return height - top - bottom; }
};

inline std::string header(const Frame& f, std::string_view title, double ymin, double ymax) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) + "\" height=\"" +
                    num(f.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(f.width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
    s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(f.left) + "\" y2=\"" +
         num(f.top + f.plot_h()) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top + f.plot_h()) + "\" x2=\"" + num(f.left + f.plot_w()) +
         "\" y2=\"" + num(f.top + f.plot_h()) + "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = ymin + (ymax - ymin) * t / 4.0;
        const double y = f.top + f.plot_h() * (1.0 - t / 4.0);
        s += "<text x=\"" + num(f.left - 4) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + format_double(std::round(v * 1000) / 1000) + "</text>\n";
    }
    return s;
}

inline void range(const std::vector<double>& v, double& lo, double& hi) {
    for (double x : v)
        if (std::isfinite(x)) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
}

}  // namespace detail

inline std::string bar_chart(std::string_view title, const std::vector<std::string>& labels, const std::vector<double>& values) {
    detail::Frame f;
    double lo = 0.0, hi = 0.0;
    detail::range(values, lo, hi);
    if (hi <= lo) hi = lo + 1.0;
    std::string s = detail::header(f, title, lo, hi);
    const double bw = f.plot_w() / static_cast<double>(std::max<std::size_t>(values.size(), 1));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = std::isfinite(values[i]) ? values[i] : 0.0;
        const double h = f.plot_h() * (v - lo) / (hi - lo);
        const double x = f.left + bw * static_cast<double>(i) + bw * 0.1;
        s += "<rect x=\"" + detail::num(x) + "\" y=\"" + detail::num(f.top + f.plot_h() - h) + "\" width=\"" +
             detail::num(bw * 0.8) + "\" height=\"" + detail::num(h) + "\" fill=\"" + detail::kPalette[0] + "\"/>\n";
        if (i < labels.size() && values.size() <= 40)
            s += "<text x=\"" + detail::num(x + bw * 0.4) + "\" y=\"" + detail::num(f.top + f.plot_h() + 14) +
                 "\" text-anchor=\"middle\">" + detail::escape(labels[i]) + "</text>\n";
    }
    return s + "</svg>\n";
}

inline std::string line_chart(std::string_view title, const std::vector<Series>& series) {
    detail::Frame f;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t len = 0;
    for (const auto& sr : series) {
        detail::range(sr.values, lo, hi);
        len = std::max(len, sr.values.size());
    }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi <= lo) hi = lo + 1.0;
    std::string s = detail::header(f, title, lo, hi);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& v = series[k].values;
        std::string pts;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!std::isfinite(v[i])) continue;
            const double x = f.left + f.plot_w() * (len > 1 ? static_cast<double>(i) / static_cast<double>(len - 1) : 0.5);
            const double y = f.top + f.plot_h() * (1.0 - (v[i] - lo) / (hi - lo));
            pts += detail::num(x) + "," + detail::num(y) + " ";
        }
        const char* color = detail::kPalette[k % std::size(detail::kPalette)];
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        s += "<text x=\"" + detail::num(f.left + 8) + "\" y=\"" + detail::num(f.top + 12 + 14.0 * static_cast<double>(k)) +
             "\" fill=\"" + color + "\">" + detail::escape(series[k].name) + "</text>\n";
    }
    return s + "</svg>\n";
}

}  // namespace noiseforge::svg
