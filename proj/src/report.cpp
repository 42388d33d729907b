#include "xmodal/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "xmodal/error.hpp"

namespace xmodal::report {
namespace {

constexpr std::array<const char*, 6> kSeriesColors = {"#4c72b0", "#dd8452", "#55a868",
                                                      "#c44e52", "#8172b3", "#937860"};
constexpr int kWidth = 720;
constexpr int kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 170;
constexpr double kTop = 50;
constexpr double kBottom = 60;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string xml_escape(std::string_view s) {
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

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  return out + "\r\n";
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

// Aligned plain-text table from CSV-like rows.
std::string text_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& r : rows) {
    widths.resize(std::max(widths.size(), r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) line += pad(r[i], widths[i] + 2);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string csv_of(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& r : rows) out += csv_row(r);
  return out;
}

const nlohmann::json& resolve(const nlohmann::json& doc, const std::string& pointer,
                              const std::string& model) {
  try {
    return doc.at(nlohmann::json::json_pointer(pointer));
  } catch (const nlohmann::json::exception&) {
    throw SchemaError("binding '" + pointer + "' does not resolve in the report for " + model);
  }
}

double resolve_number(const nlohmann::json& doc, const std::string& pointer,
                      const std::string& model) {
  const auto& v = resolve(doc, pointer, model);
  if (!v.is_number()) throw SchemaError("binding '" + pointer + "' is not a number");
  return v.get<double>();
}

struct Canvas {
  std::ostringstream os;

  explicit Canvas(std::string_view title) {
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
       << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" fill=\"#ffffff\"/>\n";
    text(kWidth / 2.0, 28, title, "middle", 16);
  }

  void text(double x, double y, std::string_view s, std::string_view anchor = "start",
            int size = 12, std::string_view fill = "#222222") {
    os << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor
       << "\" font-size=\"" << size << "\" fill=\"" << fill << "\">" << xml_escape(s)
       << "</text>\n";
  }
  void line(double x1, double y1, double x2, double y2, std::string_view stroke = "#222222",
            double width = 1) {
    os << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
       << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
       << num(width) << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, std::string_view fill) {
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
       << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"/>\n";
  }
  void circle(double x, double y, double r, std::string_view fill) {
    os << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r)
       << "\" fill=\"" << fill << "\"/>\n";
  }
  void legend(const std::vector<std::string>& labels) {
    const double x = kWidth - kRight + 20;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double y = kTop + 10 + 20.0 * i;
      rect(x, y - 10, 12, 12, kSeriesColors[i % kSeriesColors.size()]);
      text(x + 18, y, labels[i]);
    }
  }
  std::string finish() {
    os << "</svg>\n";
    return os.str();
  }
};

struct Axis {
  double lo = 0.0;
  double hi = 1.0;

  double y(double v) const {
    const double plot_h = kHeight - kTop - kBottom;
    return kTop + plot_h * (hi - v) / (hi - lo);
  }
};

Axis value_axis(const std::vector<double>& values) {
  Axis a;
  double mx = 0.0, mn = 0.0;
  for (double v : values) {
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  a.hi = std::max(0.1, std::ceil(mx * 10.0 - 1e-9) / 10.0);
  a.lo = std::floor(mn * 10.0 + 1e-9) / 10.0;
  return a;
}

void draw_value_axis(Canvas& c, const Axis& a, std::string_view label) {
  const double x = kLeft;
  c.line(x, a.y(a.hi), x, a.y(a.lo));
  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double v = a.lo + (a.hi - a.lo) * i / ticks;
    c.line(x - 4, a.y(v), x, a.y(v));
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    c.text(x - 6, a.y(v) + 4, buf, "end", 10);
  }
  c.line(kLeft, a.y(0.0), kWidth - kRight, a.y(0.0));
  c.os << "<text x=\"16\" y=\"" << num(kTop + (kHeight - kTop - kBottom) / 2)
       << "\" text-anchor=\"middle\" font-size=\"12\" fill=\"#222222\" transform=\"rotate(-90 16 "
       << num(kTop + (kHeight - kTop - kBottom) / 2) << ")\">" << xml_escape(label)
       << "</text>\n";
}

// groups x series bar chart; values[g][s].
std::string bar_chart(std::string_view title, std::string_view y_label,
                      const std::vector<std::string>& groups,
                      const std::vector<std::string>& series,
                      const std::vector<std::vector<double>>& values) {
  Canvas c(title);
  std::vector<double> flat;
  for (const auto& g : values) flat.insert(flat.end(), g.begin(), g.end());
  const Axis axis = value_axis(flat);
  draw_value_axis(c, axis, y_label);
  const double plot_w = kWidth - kLeft - kRight;
  const double group_w = plot_w / double(groups.size());
  const double bar_w = group_w * 0.8 / double(std::max<std::size_t>(1, series.size()));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = kLeft + group_w * g + group_w * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = values[g][s];
      const double x = gx + bar_w * s;
      const double y0 = axis.y(std::max(v, 0.0));
      const double y1 = axis.y(std::min(v, 0.0));
      c.rect(x + 1, y0, bar_w - 2, y1 - y0, kSeriesColors[s % kSeriesColors.size()]);
      c.text(x + bar_w / 2, v >= 0 ? y0 - 4 : y1 + 12, format3(v), "middle", 10);
    }
    c.text(kLeft + group_w * (g + 0.5), kHeight - kBottom + 18, groups[g], "middle");
  }
  if (series.size() > 1 || !series.front().empty()) c.legend(series);
  return c.finish();
}

std::string lerp_color(double t) {
  // #f7f7f7 -> #67000d
  t = std::clamp(t, 0.0, 1.0);
  auto mix = [t](int a, int b) { return int(std::lround(a + (b - a) * t)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(0xf7, 0x67), mix(0xf7, 0x00),
                mix(0xf7, 0x0d));
  return buf;
}

}  // namespace

std::string format3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  // Avoid "-0.000".
  if (std::string_view(buf) == "-0.000") return "0.000";
  return buf;
}

std::string format_p(double p) {
  if (p < 1e-12) return "<1e-12";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", p);
  return buf;
}

std::string model_label(const EvalReport& report) {
  constexpr std::string_view prefix = "persona:";
  if (report.model.rfind(prefix, 0) == 0) return report.model.substr(prefix.size());
  return report.model;
}

std::vector<Comparison> pairwise_comparisons(const std::vector<EvalReport>& reports,
                                             double alpha) {
  std::vector<Comparison> out;
  for (std::size_t later = 1; later < reports.size(); ++later) {
    for (std::size_t earlier = 0; earlier < later; ++earlier) {
      Comparison c = compare_pooled(reports[later], reports[earlier]);
      c.name = model_label(reports[later]) + " vs " + model_label(reports[earlier]);
      out.push_back(std::move(c));
    }
  }
  std::vector<double> p;
  for (const auto& c : out) p.push_back(c.degenerate ? 1.0 : c.test.p_value);
  const auto adjusted = stats::holm_adjusted(p);
  const auto reject = stats::holm_bonferroni(p, alpha);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].p_adjusted = adjusted[i];
    out[i].test.adjusted_reject = reject[i];
  }
  return out;
}

Tables render_tables(const std::vector<EvalReport>& reports, double alpha) {
  if (reports.empty()) throw ConfigError("no reports to tabulate");
  Tables t;

  std::vector<std::vector<std::string>> t1 = {{"model", "normal_accuracy", "avg_drop"}};
  for (const auto& r : reports) {
    t1.push_back({model_label(r), format3(r.normal.accuracy), format3(r.avg_drop)});
  }
  t.table1_csv = csv_of(t1);

  std::vector<std::vector<std::string>> t2 = {{"strategy"}};
  for (const auto& r : reports) t2[0].push_back(model_label(r));
  for (Strategy s : kAllStrategies) {
    std::vector<std::string> row = {std::string(name(s))};
    bool any = false;
    for (const auto& r : reports) {
      const auto* sr = r.find(s);
      row.push_back(sr ? format3(sr->drop) : "");
      any = any || sr;
    }
    if (any) t2.push_back(std::move(row));
  }
  std::vector<std::string> avg = {"Average"};
  for (const auto& r : reports) avg.push_back(format3(r.avg_drop));
  t2.push_back(std::move(avg));
  t.table2_csv = csv_of(t2);

  std::vector<std::vector<std::string>> t5 = {
      {"comparison", "mean_diff", "t", "dof", "p", "p_adjusted", "cohens_d", "reject"}};
  for (const auto& c : pairwise_comparisons(reports, alpha)) {
    if (c.degenerate) {
      t5.push_back({c.name, format3(c.test.mean_diff), "", std::to_string(c.test.dof), "", "",
                    "", "degenerate"});
      continue;
    }
    t5.push_back({c.name, format3(c.test.mean_diff), format3(c.test.t_stat),
                  std::to_string(c.test.dof), format_p(c.test.p_value), format_p(c.p_adjusted),
                  format3(c.test.cohens_d), c.test.adjusted_reject ? "yes" : "no"});
  }
  t.comparisons_csv = csv_of(t5);

  std::string text = "Overall comparison\n" + text_table(t1) + "\nDrop by adversarial strategy\n" +
                     text_table(t2);
  if (t5.size() > 1) text += "\nPaired t-tests on pooled adversarial correctness (Holm)\n" +
                             text_table(t5);
  t.text = std::move(text);
  return t;
}

std::string_view name(FigureKind kind) {
  switch (kind) {
    case FigureKind::bar_comparison: return "bar-comparison";
    case FigureKind::grouped_bar: return "grouped-bar";
    case FigureKind::heatmap: return "heatmap";
    case FigureKind::ci_plot: return "ci-plot";
    case FigureKind::tdi_bar: return "tdi-bar";
  }
  return "";
}

std::optional<FigureKind> figure_kind_from_name(std::string_view s) {
  for (FigureKind k : kAllFigures) {
    if (name(k) == s) return k;
  }
  return std::nullopt;
}

FigureSpec default_figure(FigureKind kind) {
  FigureSpec f;
  f.kind = kind;
  f.output = std::string(name(kind)) + ".svg";
  auto strategy_bindings = [] {
    std::vector<Binding> b;
    for (Strategy s : kAllStrategies) {
      b.push_back({std::string(name(s)), "/strategies/" + std::string(name(s)) + "/drop"});
    }
    return b;
  };
  switch (kind) {
    case FigureKind::bar_comparison:
      f.title = "Overall comparison";
      f.bindings = {{"Normal Acc", "/normal/accuracy"}, {"Avg Drop", "/avg_drop"}};
      break;
    case FigureKind::grouped_bar:
      f.title = "Drop by adversarial strategy";
      f.bindings = strategy_bindings();
      break;
    case FigureKind::heatmap:
      f.title = "Drop heatmap";
      f.bindings = strategy_bindings();
      break;
    case FigureKind::ci_plot:
      f.title = "95% Wilson confidence intervals";
      f.bindings = {{"normal", "/normal"}, {"adversarial", "/adversarial"}};
      break;
    case FigureKind::tdi_bar:
      f.title = "Text Dependency Index";
      f.bindings = {{"TDI", "/tdi/value"}};
      break;
  }
  return f;
}

FigureSpec default_figure(FigureKind kind, const std::vector<EvalReport>& reports) {
  FigureSpec f = default_figure(kind);
  if (kind != FigureKind::grouped_bar && kind != FigureKind::heatmap) return f;
  std::erase_if(f.bindings, [&](const Binding& b) {
    const auto s = strategy_from_name(b.label);
    return std::any_of(reports.begin(), reports.end(),
                       [&](const EvalReport& r) { return !s || !r.find(*s); });
  });
  return f;
}

std::string render_figure(const FigureSpec& spec, const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ConfigError("no reports to plot");
  if (spec.bindings.empty()) throw SchemaError("figure has no bindings");
  std::vector<nlohmann::json> docs;
  std::vector<std::string> models;
  for (const auto& r : reports) {
    docs.push_back(report_to_json(r));
    models.push_back(model_label(r));
  }
  std::vector<std::string> series;
  for (const auto& b : spec.bindings) series.push_back(b.label);

  // values[m][b]
  auto numbers = [&] {
    std::vector<std::vector<double>> v(reports.size());
    for (std::size_t m = 0; m < reports.size(); ++m) {
      for (const auto& b : spec.bindings) v[m].push_back(resolve_number(docs[m], b.pointer, models[m]));
    }
    return v;
  };

  switch (spec.kind) {
    case FigureKind::bar_comparison:
      return bar_chart(spec.title, "value", models, series, numbers());
    case FigureKind::tdi_bar:
      return bar_chart(spec.title, "TDI", models, series, numbers());
    case FigureKind::grouped_bar: {
      const auto v = numbers();
      std::vector<std::vector<double>> by_binding(spec.bindings.size());
      for (std::size_t b = 0; b < spec.bindings.size(); ++b) {
        for (std::size_t m = 0; m < reports.size(); ++m) by_binding[b].push_back(v[m][b]);
      }
      return bar_chart(spec.title, "Drop", series, models, by_binding);
    }
    case FigureKind::heatmap: {
      const auto v = numbers();
      double mx = 0.0;
      for (const auto& row : v) {
        for (double x : row) mx = std::max(mx, x);
      }
      Canvas c(spec.title);
      const double plot_w = kWidth - kLeft - kRight - 40;
      const double plot_h = kHeight - kTop - kBottom;
      const double left = kLeft + 60;
      const double cw = plot_w / double(reports.size());
      const double ch = plot_h / double(spec.bindings.size());
      for (std::size_t b = 0; b < spec.bindings.size(); ++b) {
        c.text(left - 6, kTop + ch * (b + 0.5) + 4, series[b], "end");
        for (std::size_t m = 0; m < reports.size(); ++m) {
          const double t = mx > 0.0 ? v[m][b] / mx : 0.0;
          c.rect(left + cw * m, kTop + ch * b, cw, ch, lerp_color(t));
          c.text(left + cw * (m + 0.5), kTop + ch * (b + 0.5) + 4, format3(v[m][b]), "middle", 12,
                 t > 0.5 ? "#ffffff" : "#222222");
        }
      }
      for (std::size_t m = 0; m < reports.size(); ++m) {
        c.text(left + cw * (m + 0.5), kTop + plot_h + 18, models[m], "middle");
      }
      // Ramp legend.
      const double lx = kWidth - kRight + 40;
      for (int i = 0; i < 10; ++i) {
        c.rect(lx, kTop + plot_h * (9 - i) / 10.0, 16, plot_h / 10.0, lerp_color((i + 0.5) / 10.0));
      }
      c.text(lx + 22, kTop + 10, format3(mx));
      c.text(lx + 22, kTop + plot_h, format3(0.0));
      return c.finish();
    }
    case FigureKind::ci_plot: {
      Canvas c(spec.title);
      const double plot_w = kWidth - kLeft - kRight - 60;
      const double left = kLeft + 60;
      const double plot_h = kHeight - kTop - kBottom;
      const std::size_t rows = reports.size() * spec.bindings.size();
      const double rh = plot_h / double(rows);
      auto xpos = [&](double v) { return left + plot_w * v; };
      c.line(left, kTop + plot_h, left + plot_w, kTop + plot_h);
      for (int i = 0; i <= 4; ++i) {
        const double v = i / 4.0;
        c.line(xpos(v), kTop + plot_h, xpos(v), kTop + plot_h + 4);
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        c.text(xpos(v), kTop + plot_h + 16, buf, "middle", 10);
      }
      c.text(left + plot_w / 2, kHeight - 16, "accuracy", "middle");
      std::size_t row = 0;
      for (std::size_t m = 0; m < reports.size(); ++m) {
        for (std::size_t b = 0; b < spec.bindings.size(); ++b, ++row) {
          const auto& phase = resolve(docs[m], spec.bindings[b].pointer, models[m]);
          double acc, lo, hi;
          try {
            acc = phase.at("accuracy").get<double>();
            lo = phase.at("ci").at(0).get<double>();
            hi = phase.at("ci").at(1).get<double>();
          } catch (const nlohmann::json::exception&) {
            throw SchemaError("binding '" + spec.bindings[b].pointer +
                              "' is not a phase with accuracy and ci");
          }
          const double y = kTop + rh * (row + 0.5);
          const char* color = kSeriesColors[b % kSeriesColors.size()];
          c.text(left - 8, y + 4, models[m], "end");
          c.line(xpos(lo), y, xpos(hi), y, color, 3);
          c.line(xpos(lo), y - 5, xpos(lo), y + 5, color, 1.5);
          c.line(xpos(hi), y - 5, xpos(hi), y + 5, color, 1.5);
          c.circle(xpos(acc), y, 4, color);
          c.text(xpos(hi) + 8 > left + plot_w - 120 ? xpos(lo) - 8 : xpos(hi) + 8, y + 4,
                 format3(acc) + " [" + format3(lo) + ", " + format3(hi) + "]",
                 xpos(hi) + 8 > left + plot_w - 120 ? "end" : "start", 10);
        }
      }
      c.legend(series);
      return c.finish();
    }
  }
  throw SchemaError("unknown figure kind");
}

}  // namespace xmodal::report
