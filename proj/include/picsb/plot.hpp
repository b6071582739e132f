#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "picsb/field.hpp"

namespace picsb {

struct PlotOptions {
  /// Frame along axis 0 of rank-3 fields; defaults to the last frame.
  std::optional<std::size_t> frame;
  /// Color range symmetric about zero (vorticity); data range otherwise.
  bool symmetric = false;
  /// Pixels per grid node.
  std::size_t scale = 4;
};

/// The 2D slice of `f` that gets drawn.
Field plot_slice(const Field& f, std::optional<std::size_t> frame);

/// Heatmap PNG of one field.
void plot_field(const Field& f, const PlotOptions& opt, const std::filesystem::path& out_png);

/// Panels left to right on a shared color range (e.g. lf, obs, pred, ref).
void plot_side_by_side(const std::vector<Field>& fields, const PlotOptions& opt, const std::filesystem::path& out_png);

/// Decoded RGB pixels of a PNG (for tests).
struct Image {
  std::size_t width = 0, height = 0;
  std::vector<unsigned char> rgb;
};
Image read_png(const std::filesystem::path& path);

}  // namespace picsb
