#include "perminv/plot.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "perminv/experiment.hpp"

namespace perminv {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 190.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 50.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_plot(const std::vector<PlotSeries>& series, std::optional<double> reference,
                        int window) {
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : series) {
    for (const auto& r : s.curve.epochs) {
      x_lo = std::min(x_lo, static_cast<double>(r.epoch));
      x_hi = std::max(x_hi, static_cast<double>(r.epoch));
      if (std::isfinite(r.mean_return)) {
        y_lo = std::min(y_lo, r.mean_return);
        y_hi = std::max(y_hi, r.mean_return);
      }
    }
  }
  if (reference) {
    y_lo = std::min(y_lo, *reference);
    y_hi = std::max(y_hi, *reference);
  }
  if (!std::isfinite(x_lo)) x_lo = 0.0, x_hi = 1.0;
  if (!std::isfinite(y_lo)) y_lo = 0.0, y_hi = 1.0;
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  if (y_hi <= y_lo) y_lo -= 0.5, y_hi += 0.5;
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double y) { return kTop + (y_hi - y) / (y_hi - y_lo) * plot_h; };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      kWidth, kHeight, kWidth, kHeight);
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n",
                     kWidth, kHeight);
  svg += fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
      "stroke=\"black\"/>\n",
      kLeft, kTop, plot_w, plot_h);

  for (int i = 0; i <= 4; ++i) {
    const double xv = x_lo + (x_hi - x_lo) * i / 4.0;
    const double yv = y_lo + (y_hi - y_lo) * i / 4.0;
    svg += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"middle\">{:.0f}</text>\n",
        px(xv), kHeight - kBottom + 16.0, xv);
    svg += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{:.2f}</text>\n",
        kLeft - 6.0, py(yv) + 4.0, yv);
  }
  svg += fmt::format(
      "<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n",
      kLeft + plot_w / 2.0, kHeight - 12.0);
  svg += fmt::format(
      "<text x=\"16\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 16 {:.2f})\">mean return</text>\n",
      kTop + plot_h / 2.0, kTop + plot_h / 2.0);

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    std::string points;
    for (const auto& r : s.curve.epochs) {
      if (!std::isfinite(r.mean_return)) continue;
      if (!points.empty()) points += ' ';
      points += fmt::format("{:.2f},{:.2f}", px(r.epoch), py(r.mean_return));
    }
    svg += fmt::format(
        "<polyline class=\"series\" fill=\"none\" stroke=\"{}\" stroke-width=\"1\" "
        "stroke-opacity=\"0.6\" points=\"{}\"/>\n",
        color, points);

    const auto avg = moving_average(s.curve, window);
    std::string avg_points;
    for (std::size_t e = 0; e < avg.size(); ++e) {
      if (!std::isfinite(avg[e])) continue;
      if (!avg_points.empty()) avg_points += ' ';
      avg_points += fmt::format("{:.2f},{:.2f}", px(s.curve.epochs[e].epoch), py(avg[e]));
    }
    if (!avg_points.empty()) {
      svg += fmt::format(
          "<polyline class=\"moving-average\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\" "
          "stroke-dasharray=\"6,3\" points=\"{}\"/>\n",
          color, avg_points);
    }

    const double ly = kTop + 14.0 + 18.0 * static_cast<double>(i);
    const double lx = kWidth - kRight + 14.0;
    svg += fmt::format(
        "<g class=\"legend\"><line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" "
        "stroke=\"{}\" stroke-width=\"2\"/><text x=\"{:.2f}\" y=\"{:.2f}\" "
        "font-size=\"11\">{}</text></g>\n",
        lx, ly, lx + 20.0, ly, color, lx + 26.0, ly + 4.0, escape(s.label));
  }

  if (reference) {
    svg += fmt::format(
        "<line class=\"reference\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" "
        "stroke=\"black\" stroke-dasharray=\"2,2\"/>\n",
        kLeft, py(*reference), kLeft + plot_w, py(*reference));
    svg += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\">greedy {:.3f}</text>\n",
        kLeft + plot_w + 4.0, py(*reference) + 4.0, *reference);
  }
  svg += "</svg>\n";
  return svg;
}

void emit_plot(const std::vector<std::filesystem::path>& curve_files,
               const std::filesystem::path& out, std::optional<double> reference, int window) {
  if (curve_files.empty()) throw std::invalid_argument("plot: need at least one curve file");
  std::vector<PlotSeries> series;
  for (const auto& f : curve_files) {
    try {
      series.push_back({f.stem().string(), TrainingCurve::read_csv(f)});
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(f.string() + ": " + e.what());
    }
  }
  std::ofstream file(out, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + out.string() + " for writing");
  file << render_plot(series, reference, window);
}

}  // namespace perminv
