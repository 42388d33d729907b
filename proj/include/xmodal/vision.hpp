#pragma once

#include <optional>

#include "xmodal/raster.hpp"
#include "xmodal/textlab.hpp"
#include "xmodal/vocab.hpp"

namespace xmodal {

struct ExtractionConfig {
  int min_foreground_area = 500;
  /// Acceptance threshold applied to every field's confidence.
  double iou_accept = 0.6;
  double color_match_max_dist = 80.0;
};

/// Per-field result; an empty optional means the field is indeterminate.
/// Confidences: shape = best candidate IoU, color = fraction of mask pixels
/// within color_match_max_dist of the chosen palette entry, position = the
/// same IoU as shape, since candidates are rendered at the cell center.
struct ExtractedAttributes {
  std::optional<ShapeKind> shape;
  std::optional<FgColor> color;
  std::optional<PositionBin> position;
  double shape_confidence = 0.0;
  double color_confidence = 0.0;
  double position_confidence = 0.0;

  bool fully_indeterminate() const { return !shape && !color && !position; }
};

/// Nearest background-palette entry to the modal color of the 1-pixel border.
BgColor estimate_background(const Raster& raster);

/// Analysis-by-synthesis: segments the foreground against the estimated
/// background, bins the mask centroid, then re-renders each candidate kind at
/// that bin's cell center and keeps the best IoU. A candidate's size comes
/// from the mask extents on the sides not cut off by the canvas edge.
ExtractedAttributes extract_attributes(const Raster& raster, const ExtractionConfig& config = {});

/// Fraction of {shape, color, position} on which extraction and claim agree;
/// indeterminate fields count at their chance rate (1/8, 1/10, 1/9).
double agreement(const ExtractedAttributes& extracted, const ClaimedAttributes& claimed);

}  // namespace xmodal
