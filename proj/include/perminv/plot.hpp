#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "perminv/trainer.hpp"

namespace perminv {

struct PlotSeries {
  std::string label;
  TrainingCurve curve;
};

/// SVG of mean return per epoch: one polyline per series, a dashed
/// moving-average overlay once a series has a full window, and a horizontal
/// reference line when `reference` is set. Output depends only on inputs.
std::string render_plot(const std::vector<PlotSeries>& series, std::optional<double> reference,
                        int window = 50);

/// Reads curve CSVs (labels are file stems) and writes the SVG to `out`.
/// Throws std::invalid_argument for an empty file list and std::runtime_error
/// with the line number for malformed CSV.
void emit_plot(const std::vector<std::filesystem::path>& curve_files,
               const std::filesystem::path& out, std::optional<double> reference,
               int window = 50);

}  // namespace perminv
