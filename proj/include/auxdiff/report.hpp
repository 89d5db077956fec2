#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "auxdiff/common.hpp"
#include "auxdiff/runlog.hpp"

namespace auxdiff {

/// Linear-interpolation percentile (p in [0,1]) of an unsorted sample.
inline double percentile(Vec values, double p) {
    if (values.empty()) throw ConfigError("percentile of empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (values[lo + 1] - values[lo]) * (h - static_cast<double>(lo));
}

struct AggregateRow {
    std::string variant;
    std::string prediction;
    double sigma_c_sq = 0.0;
    double rho = 1.0;
    int n = 0;
    long step = 0;
    int seeds = 0;
    double wd_med = 0, wd_p10 = 0, wd_p90 = 0;
    double mmd_med = 0, mmd_p10 = 0, mmd_p90 = 0;
    double ks_med = 0, ks_p10 = 0, ks_p90 = 0;
};

/// Groups run-log rows by model configuration and reduces over seeds to
/// medians with 10th/90th percentile bands per step.
inline std::vector<AggregateRow> aggregate_runlogs(const std::vector<RunLogRow>& rows) {
    using Key = std::tuple<std::string, std::string, double, double, int, long>;
    std::map<Key, std::vector<const RunLogRow*>> groups;
    for (const auto& r : rows)
        groups[{r.variant, r.prediction, r.sigma_c_sq, r.rho, r.n, r.step}].push_back(&r);

    std::vector<AggregateRow> out;
    for (const auto& [key, members] : groups) {
        AggregateRow a;
        std::tie(a.variant, a.prediction, a.sigma_c_sq, a.rho, a.n, a.step) = key;
        a.seeds = static_cast<int>(members.size());
        Vec wd, mm, ks;
        for (const auto* m : members) {
            if (std::isfinite(m->wd1)) wd.push_back(m->wd1);
            if (std::isfinite(m->mmd)) mm.push_back(m->mmd);
            if (std::isfinite(m->ks)) ks.push_back(m->ks);
        }
        if (wd.empty()) continue;
        a.wd_med = percentile(wd, 0.5);
        a.wd_p10 = percentile(wd, 0.1);
        a.wd_p90 = percentile(wd, 0.9);
        a.mmd_med = percentile(mm, 0.5);
        a.mmd_p10 = percentile(mm, 0.1);
        a.mmd_p90 = percentile(mm, 0.9);
        a.ks_med = percentile(ks, 0.5);
        a.ks_p10 = percentile(ks, 0.1);
        a.ks_p90 = percentile(ks, 0.9);
        out.push_back(a);
    }
    return out;
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::string out =
        "variant,prediction,sigma_c_sq,rho,n,step,seeds,"
        "wd_med,wd_p10,wd_p90,mmd_med,mmd_p10,mmd_p90,ks_med,ks_p10,ks_p90\n";
    char buf[512];
    for (const auto& a : rows) {
        std::snprintf(buf, sizeof(buf),
                      "%s,%s,%g,%g,%d,%ld,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      a.variant.c_str(), a.prediction.c_str(), a.sigma_c_sq, a.rho, a.n, a.step,
                      a.seeds, a.wd_med, a.wd_p10, a.wd_p90, a.mmd_med, a.mmd_p10, a.mmd_p90,
                      a.ks_med, a.ks_p10, a.ks_p90);
        out += buf;
    }
    return out;
}

struct Histogram {
    Vec edges;                // nbins + 1 interior edges over [-k, k]
    std::vector<long> counts;  // nbins + 2 with under/overflow at the ends
    long total = 0;
};

/// Fixed-width bins over [-k, k] plus underflow/overflow bins.
inline Histogram brightness_histogram(const Vec& values, double k, int nbins = 10) {
    if (nbins < 1) throw ConfigError("histogram needs >= 1 bin");
    Histogram h;
    h.edges.resize(nbins + 1);
    for (int i = 0; i <= nbins; ++i) h.edges[i] = -k + 2.0 * k * i / nbins;
    h.counts.assign(nbins + 2, 0);
    for (double v : values) {
        ++h.total;
        if (v < -k) {
            ++h.counts.front();
        } else if (v >= k) {
            ++h.counts.back();
        } else {
            int bin = static_cast<int>((v + k) / (2.0 * k) * nbins);
            bin = std::clamp(bin, 0, nbins - 1);
            ++h.counts[bin + 1];
        }
    }
    return h;
}

/// CSV with one column of bin fractions per named series.
inline std::string histogram_csv(const std::vector<std::pair<std::string, Histogram>>& series) {
    if (series.empty()) throw ConfigError("histogram_csv: nothing to write");
    std::string out = "bin_lo,bin_hi";
    for (const auto& [name, hist] : series) out += "," + name + "_count," + name + "_frac";
    out += "\n";
    const auto& ref = series.front().second;
    const int nbins = static_cast<int>(ref.edges.size()) - 1;
    char buf[128];
    for (int b = 0; b < nbins + 2; ++b) {
        if (b == 0)
            out += "-inf," + std::to_string(ref.edges.front());
        else if (b == nbins + 1)
            out += std::to_string(ref.edges.back()) + ",inf";
        else {
            std::snprintf(buf, sizeof(buf), "%g,%g", ref.edges[b - 1], ref.edges[b]);
            out += buf;
        }
        for (const auto& [name, hist] : series) {
            std::snprintf(buf, sizeof(buf), ",%ld,%.8g", hist.counts[b],
                          hist.total ? static_cast<double>(hist.counts[b]) / hist.total : 0.0);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

namespace svg {

inline const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

struct Series {
    std::string name;
    Vec x;
    Vec y;
    Vec y_lo;  // optional band
    Vec y_hi;
};

/// Self-contained line plot with optional percentile bands.
inline std::string line_plot(const std::string& title, const std::vector<Series>& series,
                             bool log_y = false) {
    const double W = 820, H = 520, ml = 70, mr = 170, mt = 40, mb = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    auto yv = [&](double v) { return log_y ? std::log10(std::max(v, 1e-12)) : v; };
    for (const auto& s : series) {
        for (double v : s.x) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
        for (double v : s.y) ymin = std::min(ymin, yv(v)), ymax = std::max(ymax, yv(v));
        for (double v : s.y_lo) ymin = std::min(ymin, yv(v));
        for (double v : s.y_hi) ymax = std::max(ymax, yv(v));
    }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (yv(y) - ymin) / (ymax - ymin) * (H - mt - mb); };

    char buf[512];
    std::string o;
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns='http://www.w3.org/2000/svg' width='%g' height='%g' "
                  "font-family='sans-serif' font-size='12'>\n",
                  W, H);
    o += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x='%g' y='20' font-size='15'>%s</text>\n"
                  "<rect x='%g' y='%g' width='%g' height='%g' fill='none' stroke='#333'/>\n",
                  ml, title.c_str(), ml, mt, W - ml - mr, H - mt - mb);
    o += buf;
    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0;
        const double fyl = ymin + (ymax - ymin) * i / 4.0;
        const double fy = log_y ? std::pow(10.0, fyl) : fyl;
        std::snprintf(buf, sizeof(buf), "<text x='%g' y='%g' text-anchor='middle'>%g</text>\n",
                      px(fx), H - mb + 18, fx);
        o += buf;
        std::snprintf(buf, sizeof(buf), "<text x='%g' y='%g' text-anchor='end'>%.3g</text>\n",
                      ml - 6, H - mb - (fyl - ymin) / (ymax - ymin) * (H - mt - mb) + 4, fy);
        o += buf;
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % 8];
        if (s.y_lo.size() == s.x.size() && s.y_hi.size() == s.x.size()) {
            std::string pts;
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%g,%g ", px(s.x[i]), py(s.y_hi[i]));
                pts += buf;
            }
            for (std::size_t i = s.x.size(); i-- > 0;) {
                std::snprintf(buf, sizeof(buf), "%g,%g ", px(s.x[i]), py(s.y_lo[i]));
                pts += buf;
            }
            o += "<polygon points='" + pts + "' fill='" + color + "' opacity='0.15'/>\n";
        }
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%g,%g ", px(s.x[i]), py(s.y[i]));
            pts += buf;
        }
        o += "<polyline points='" + pts + "' fill='none' stroke='" + color + "' stroke-width='1.8'/>\n";
        std::snprintf(buf, sizeof(buf),
                      "<text x='%g' y='%g' fill='%s'>%s</text>\n", W - mr + 8,
                      mt + 16.0 * (si + 1), color, s.name.c_str());
        o += buf;
    }
    o += "</svg>\n";
    return o;
}

/// Grouped bar chart of bin fractions (under/overflow bins included).
inline std::string histogram_plot(const std::string& title,
                                  const std::vector<std::pair<std::string, Histogram>>& series) {
    const double W = 820, H = 420, ml = 60, mr = 150, mt = 40, mb = 60;
    const auto& ref = series.front().second;
    const int nb = static_cast<int>(ref.counts.size());
    double fmax = 0;
    for (const auto& [name, h] : series)
        for (long c : h.counts)
            fmax = std::max(fmax, h.total ? static_cast<double>(c) / h.total : 0.0);
    if (fmax <= 0) fmax = 1;
    const double bw = (W - ml - mr) / nb;
    const double gw = bw / (series.size() + 0.5);

    char buf[512];
    std::string o;
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns='http://www.w3.org/2000/svg' width='%g' height='%g' "
                  "font-family='sans-serif' font-size='11'>\n<text x='%g' y='20' "
                  "font-size='15'>%s</text>\n",
                  W, H, ml, title.c_str());
    o += buf;
    for (int b = 0; b < nb; ++b) {
        for (std::size_t si = 0; si < series.size(); ++si) {
            const auto& h = series[si].second;
            const double frac = h.total ? static_cast<double>(h.counts[b]) / h.total : 0.0;
            const double bh = frac / fmax * (H - mt - mb);
            std::snprintf(buf, sizeof(buf),
                          "<rect x='%g' y='%g' width='%g' height='%g' fill='%s' opacity='0.85'/>\n",
                          ml + b * bw + si * gw, H - mb - bh, gw * 0.95, bh, kPalette[si % 8]);
            o += buf;
        }
        std::string label = b == 0 ? "<" : (b == nb - 1 ? ">" : "");
        if (b > 0 && b < nb - 1) {
            std::snprintf(buf, sizeof(buf), "%.1f", ref.edges[b - 1]);
            label = buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "<text x='%g' y='%g' text-anchor='middle'>%s</text>\n", ml + b * bw,
                      H - mb + 16, label.c_str());
        o += buf;
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
        std::snprintf(buf, sizeof(buf), "<text x='%g' y='%g' fill='%s'>%s</text>\n", W - mr + 8,
                      mt + 16.0 * (si + 1), kPalette[si % 8], series[si].first.c_str());
        o += buf;
    }
    o += "</svg>\n";
    return o;
}

}  // namespace svg

}  // namespace auxdiff
