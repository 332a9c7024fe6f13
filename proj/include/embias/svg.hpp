#pragma once

// Dependency-free deterministic SVG rendering: density curves as polylines,
// histograms as rects, posterior intervals as segments. Coordinates are
// formatted with fixed precision so identical inputs give identical bytes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

namespace embias::svg {

inline constexpr const char* k_palette[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44",
                                            "#66ccee", "#aa3377"};

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

class Canvas {
  public:
    Canvas(double width, double height) : width_(width), height_(height) {
        body_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width_) +
                 "\" height=\"" + fmt(height_) + "\" viewBox=\"0 0 " + fmt(width_) + " " +
                 fmt(height_) + "\">\n";
        body_ += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& color,
              double stroke = 1.0) {
        body_ += "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) +
                 "\" y2=\"" + fmt(y2) + "\" stroke=\"" + color + "\" stroke-width=\"" +
                 fmt(stroke) + "\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                  double stroke = 1.5) {
        body_ += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + fmt(stroke) +
                 "\" points=\"";
        for (const auto& [x, y] : pts) body_ += fmt(x) + "," + fmt(y) + " ";
        body_ += "\"/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill) {
        body_ += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) +
                 "\" height=\"" + fmt(h) + "\" fill=\"" + fill + "\"/>\n";
    }

    void circle(double x, double y, double r, const std::string& fill) {
        body_ += "<circle cx=\"" + fmt(x) + "\" cy=\"" + fmt(y) + "\" r=\"" + fmt(r) +
                 "\" fill=\"" + fill + "\"/>\n";
    }

    void text(double x, double y, const std::string& s, double size = 11.0,
              const std::string& anchor = "start") {
        body_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-family=\"monospace\" " +
                 "font-size=\"" + fmt(size) + "\" text-anchor=\"" + anchor + "\">" + escape(s) +
                 "</text>\n";
    }

    std::string finish() const { return body_ + "</svg>\n"; }

  private:
    static std::string escape(const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == '&') out += "&amp;";
            else if (c == '<') out += "&lt;";
            else if (c == '>') out += "&gt;";
            else out += c;
        }
        return out;
    }
    double width_, height_;
    std::string body_;
};

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Overlaid curves with a labelled x axis; used for density plots.
inline std::string curve_plot(const std::vector<Series>& series, const std::string& title) {
    const double w = 640, h = 360, ml = 50, mr = 20, mt = 36, mb = 40;
    Canvas c(w, h);
    c.text(ml, 20, title, 13);
    double xmin = 0, xmax = 1, ymax = 1e-12;
    bool first = true;
    for (const auto& s : series) {
        for (double v : s.x) {
            if (first) {
                xmin = xmax = v;
                first = false;
            }
            xmin = std::min(xmin, v);
            xmax = std::max(xmax, v);
        }
        for (double v : s.y) ymax = std::max(ymax, v);
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    const auto X = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * (w - ml - mr); };
    const auto Y = [&](double v) { return h - mb - v / ymax * (h - mt - mb); };
    c.line(ml, h - mb, w - mr, h - mb, "#333333");
    for (int t = 0; t <= 4; ++t) {
        const double v = xmin + (xmax - xmin) * t / 4.0;
        c.line(X(v), h - mb, X(v), h - mb + 4, "#333333");
        c.text(X(v), h - mb + 16, fmt(v), 10, "middle");
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        std::vector<std::pair<double, double>> pts;
        pts.reserve(s.x.size());
        for (std::size_t j = 0; j < s.x.size(); ++j) pts.emplace_back(X(s.x[j]), Y(s.y[j]));
        const std::string color = k_palette[i % 6];
        c.polyline(pts, color);
        c.text(w - mr - 140, mt + 14.0 * static_cast<double>(i), s.label, 10);
        c.line(w - mr - 160, mt + 14.0 * static_cast<double>(i) - 4, w - mr - 146,
               mt + 14.0 * static_cast<double>(i) - 4, color, 2.0);
    }
    return c.finish();
}

// Histogram with optional vertical marker lines.
inline std::string histogram(std::span<const double> values, int bins, const std::string& title,
                             const std::vector<double>& marks = {}) {
    const double w = 640, h = 360, ml = 50, mr = 20, mt = 36, mb = 40;
    Canvas c(w, h);
    c.text(ml, 20, title, 13);
    double lo = values.empty() ? 0.0 : values[0];
    double hi = lo;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == lo) hi = lo + 1.0;
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * bins);
        if (b >= counts.size()) b = counts.size() - 1;
        counts[b] += 1;
    }
    std::size_t cmax = 1;
    for (auto k : counts) cmax = std::max(cmax, k);
    const auto X = [&](double v) { return ml + (v - lo) / (hi - lo) * (w - ml - mr); };
    const double bw = (w - ml - mr) / bins;
    for (int b = 0; b < bins; ++b) {
        const double frac = static_cast<double>(counts[static_cast<std::size_t>(b)]) /
                            static_cast<double>(cmax);
        const double bh = frac * (h - mt - mb);
        c.rect(ml + b * bw, h - mb - bh, bw * 0.92, bh, "#88aacc");
    }
    c.line(ml, h - mb, w - mr, h - mb, "#333333");
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        c.text(X(v), h - mb + 16, fmt(v), 10, "middle");
    }
    for (std::size_t i = 0; i < marks.size(); ++i)
        c.line(X(marks[i]), mt, X(marks[i]), h - mb, "#ee6677", 1.5);
    return c.finish();
}

struct IntervalEntry {
    std::string label;
    double low = 0.0;
    double mid = 0.0;
    double high = 0.0;
    int color = 0;
};

// Horizontal interval segments with midpoint dots, one row per entry.
inline std::string interval_plot(const std::vector<IntervalEntry>& entries,
                                 const std::string& title) {
    const double row_h = 16.0, ml = 170, mr = 30, mt = 40, mb = 30;
    const double h = mt + mb + row_h * static_cast<double>(entries.size());
    const double w = 640;
    Canvas c(w, h);
    c.text(ml, 20, title, 13);
    double lo = 0, hi = 1;
    bool first = true;
    for (const auto& e : entries) {
        if (first) {
            lo = e.low;
            hi = e.high;
            first = false;
        }
        lo = std::min(lo, e.low);
        hi = std::max(hi, e.high);
    }
    if (hi == lo) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const auto X = [&](double v) { return ml + (v - lo) / (hi - lo) * (w - ml - mr); };
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const double y = mt + row_h * (static_cast<double>(i) + 0.5);
        const std::string color = k_palette[e.color % 6];
        c.text(ml - 8, y + 3, e.label, 10, "end");
        c.line(X(e.low), y, X(e.high), y, color, 2.0);
        c.circle(X(e.mid), y, 2.5, color);
    }
    c.line(ml, h - mb + 4, w - mr, h - mb + 4, "#333333");
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        c.text(X(v), h - mb + 18, fmt(v), 10, "middle");
    }
    return c.finish();
}

}  // namespace embias::svg
