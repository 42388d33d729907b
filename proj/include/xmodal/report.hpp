#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/harness.hpp"

namespace xmodal::report {

struct Tables {
  std::string table1_csv;       ///< model, normal accuracy, avg drop
  std::string table2_csv;       ///< strategy x model drop matrix plus an Average row
  std::string comparisons_csv;  ///< pooled paired tests between every pair of reports
  std::string text;             ///< plain-text rendering of all three
};

/// Values are rounded to 3 decimals; CSV follows RFC 4180 (CRLF, quoted
/// fields where needed). Throws ConfigError for an empty list.
Tables render_tables(const std::vector<EvalReport>& reports, double alpha = 0.05);

/// Pooled comparisons of each later report against each earlier one, Holm
/// corrected as one family.
std::vector<Comparison> pairwise_comparisons(const std::vector<EvalReport>& reports,
                                             double alpha);

enum class FigureKind { bar_comparison, grouped_bar, heatmap, ci_plot, tdi_bar };

std::string_view name(FigureKind kind);
std::optional<FigureKind> figure_kind_from_name(std::string_view s);
inline constexpr std::array<FigureKind, 5> kAllFigures = {
    FigureKind::bar_comparison, FigureKind::grouped_bar, FigureKind::heatmap,
    FigureKind::ci_plot, FigureKind::tdi_bar};

/// One plotted series: a JSON pointer into the serialized report. For
/// ci-plot the pointer names a phase object holding accuracy and ci.
struct Binding {
  std::string label;
  std::string pointer;
};

struct FigureSpec {
  FigureKind kind = FigureKind::bar_comparison;
  std::string title;
  std::vector<Binding> bindings;
  std::filesystem::path output;
};

FigureSpec default_figure(FigureKind kind);
/// Same, with strategy series limited to those present in every report.
FigureSpec default_figure(FigureKind kind, const std::vector<EvalReport>& reports);

/// Standalone SVG. Every plotted value also appears as a 3-decimal text node.
/// Throws SchemaError when a binding does not resolve in some report.
std::string render_figure(const FigureSpec& spec, const std::vector<EvalReport>& reports);

/// Display name for a report's model ("persona:baseline" -> "baseline").
std::string model_label(const EvalReport& report);

std::string format3(double v);
std::string format_p(double p);

}  // namespace xmodal::report
