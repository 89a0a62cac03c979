#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "hierts/bounds.hpp"
#include "hierts/harness.hpp"

namespace hierts {

namespace detail {

/// Shortest decimal that round-trips the double exactly.
inline std::string format_double(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

inline std::string format_fixed(double value, int decimals) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, value);
    return buffer;
}

inline std::ofstream open_output(const std::string& path) {
    const std::filesystem::path target(path);
    if (target.has_parent_path()) {
        std::filesystem::create_directories(target.parent_path());
    }
    std::ofstream out(target, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    return out;
}

}  // namespace detail

/// Writes the per-round regret table. One row per (round, agent), rounds
/// 1-based; the bound column is empty when bound reporting is disabled.
inline void emit_csv(const std::vector<AgentTrace>& traces, const std::string& path) {
    std::ofstream out = detail::open_output(path);
    out << "round,agent,mean_instant_regret,mean_cum_regret,stderr_cum_regret,bound_value\n";
    std::size_t rounds = 0;
    for (const AgentTrace& trace : traces) rounds = std::max(rounds, trace.mean_instant.size());
    for (std::size_t t = 0; t < rounds; ++t) {
        for (const AgentTrace& trace : traces) {
            if (t >= trace.mean_instant.size()) continue;
            out << (t + 1) << ',' << trace.agent << ','
                << detail::format_double(trace.mean_instant[t]) << ','
                << detail::format_double(trace.mean_cumulative[t]) << ','
                << detail::format_double(trace.stderr_cumulative[t]) << ',';
            if (trace.bound) out << detail::format_double(trace.bound->bound);
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

/// Writes the per-agent bound constants table.
inline void emit_bounds_csv(const std::vector<AgentTrace>& traces, const std::string& path) {
    std::ofstream out = detail::open_output(path);
    out << "agent,regime,c,c_q,c1,c2,c3,c4,bound\n";
    for (const AgentTrace& trace : traces) {
        if (!trace.bound) continue;
        const BoundReport& report = *trace.bound;
        out << trace.agent << ',' << to_string(report.regime) << ','
            << detail::format_double(report.c) << ',' << detail::format_double(report.c_q) << ','
            << detail::format_double(report.c1) << ',' << detail::format_double(report.c2) << ','
            << detail::format_double(report.c3) << ',' << detail::format_double(report.c4) << ','
            << detail::format_double(report.bound) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

/// Writes the regret-versus-concurrency table produced by sweep_concurrency.
inline void emit_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
    std::ofstream out = detail::open_output(path);
    out << "L,agent,final_mean_cum_regret,final_stderr_cum_regret\n";
    for (const SweepPoint& point : points) {
        for (std::size_t i = 0; i < point.agent.size(); ++i) {
            out << point.L << ',' << point.agent[i] << ','
                << detail::format_double(point.final_mean_cumulative[i]) << ','
                << detail::format_double(point.final_stderr_cumulative[i]) << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

/// Renders cumulative-regret curves with a shaded standard-error band per
/// agent as a standalone SVG. The output is a pure function of the traces.
inline void emit_plot(const std::vector<AgentTrace>& traces, const std::string& path) {
    if (traces.empty() || traces.front().mean_cumulative.empty()) {
        throw std::runtime_error("emit_plot needs a non-empty trace");
    }
    constexpr double width = 880.0, height = 540.0;
    constexpr double left = 70.0, right = 20.0, top = 20.0, bottom = 55.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    std::size_t rounds = 0;
    double y_max = 0.0;
    for (const AgentTrace& trace : traces) {
        rounds = std::max(rounds, trace.mean_cumulative.size());
        for (std::size_t t = 0; t < trace.mean_cumulative.size(); ++t) {
            y_max = std::max(y_max, trace.mean_cumulative[t] + trace.stderr_cumulative[t]);
        }
    }
    if (y_max <= 0.0) y_max = 1.0;
    const double x_max = static_cast<double>(rounds);

    auto x_at = [&](double round) { return left + plot_w * (round / x_max); };
    auto y_at = [&](double value) { return top + plot_h * (1.0 - value / y_max); };
    auto fmt = [](double v) { return detail::format_fixed(v, 2); };

    static const char* palette[] = {"#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
    constexpr int palette_size = 5;

    std::ofstream out = detail::open_output(path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
        << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << ' ' << fmt(height) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // axes
    out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + plot_h) << "\" x2=\""
        << fmt(left + plot_w) << "\" y2=\"" << fmt(top + plot_h)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left)
        << "\" y2=\"" << fmt(top + plot_h) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << fmt(left + plot_w / 2) << "\" y=\"" << fmt(height - 12)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">round"
        << "</text>\n";
    out << "<text x=\"18\" y=\"" << fmt(top + plot_h / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\" "
        << "transform=\"rotate(-90 18 " << fmt(top + plot_h / 2)
        << ")\">cumulative regret</text>\n";

    // tick labels at the extremes
    out << "<text x=\"" << fmt(left) << "\" y=\"" << fmt(top + plot_h + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">0</text>\n";
    out << "<text x=\"" << fmt(left + plot_w) << "\" y=\"" << fmt(top + plot_h + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << rounds << "</text>\n";
    out << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(top + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
        << detail::format_fixed(y_max, 1) << "</text>\n";

    for (std::size_t idx = 0; idx < traces.size(); ++idx) {
        const AgentTrace& trace = traces[idx];
        const char* color = palette[idx % palette_size];
        const std::size_t n = trace.mean_cumulative.size();
        if (n == 0) continue;

        // standard-error band: mean + se forward, mean - se backward
        out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
        for (std::size_t t = 0; t < n; ++t) {
            out << fmt(x_at(static_cast<double>(t + 1))) << ','
                << fmt(y_at(trace.mean_cumulative[t] + trace.stderr_cumulative[t])) << ' ';
        }
        for (std::size_t t = n; t-- > 0;) {
            out << fmt(x_at(static_cast<double>(t + 1))) << ','
                << fmt(y_at(trace.mean_cumulative[t] - trace.stderr_cumulative[t])) << ' ';
        }
        out << "\"/>\n";

        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t t = 0; t < n; ++t) {
            out << fmt(x_at(static_cast<double>(t + 1))) << ','
                << fmt(y_at(trace.mean_cumulative[t])) << ' ';
        }
        out << "\"/>\n";

        // legend entry
        const double legend_y = top + 18.0 + 20.0 * static_cast<double>(idx);
        out << "<rect x=\"" << fmt(left + 12) << "\" y=\"" << fmt(legend_y - 9)
            << "\" width=\"14\" height=\"14\" fill=\"" << color << "\"/>\n";
        out << "<text x=\"" << fmt(left + 32) << "\" y=\"" << fmt(legend_y + 3)
            << "\" font-family=\"sans-serif\" font-size=\"13\">" << trace.agent << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace hierts
