#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xmodal/calibration.hpp"
#include "xmodal/cli.hpp"
#include "xmodal/error.hpp"
#include "xmodal/harness.hpp"
#include "xmodal/png_io.hpp"
#include "xmodal/remote.hpp"
#include "xmodal/scenegen.hpp"
#include "xmodal/stats.hpp"
#include "xmodal/textlab.hpp"
#include "xmodal/vision.hpp"

namespace py = pybind11;
using namespace xmodal;

namespace {

template <typename E>
py::object optional_name(const std::optional<E>& v) {
  if (!v) return py::none();
  return py::str(std::string(name(*v)));
}

py::dict claim_dict(const ClaimedAttributes& c) {
  py::dict d;
  d["shape"] = std::string(name(c.shape));
  d["color"] = std::string(name(c.color));
  d["position"] = std::string(name(c.position));
  d["background"] = std::string(name(c.background));
  return d;
}

SceneSpec spec_from(const std::string& shape, const std::string& color, const std::string& position,
                    const std::string& background, int scale) {
  SceneSpec s;
  auto sh = shape_from_name(shape);
  auto co = fg_color_from_name(color);
  auto po = position_from_name(position);
  auto bg = bg_color_from_name(background);
  if (!sh || !co || !po || !bg) throw ConfigError("unknown attribute name");
  if (scale < kMinScale || scale > kMaxScale) throw ConfigError("scale out of range");
  s.shape = *sh;
  s.color = *co;
  s.position = *po;
  s.background = *bg;
  s.scale = scale;
  return s;
}

py::bytes png_bytes(const Raster& r) {
  const auto png = encode_png(r);
  return py::bytes(reinterpret_cast<const char*>(png.data()), png.size());
}

Raster raster_from_png(const py::bytes& data) {
  const std::string s = data;
  return decode_png(std::vector<std::uint8_t>(s.begin(), s.end()));
}

}  // namespace

PYBIND11_MODULE(xmodal_py, m) {
  m.doc() = "Bindings for the xmodal text-dependency toolkit";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<StatsError>(m, "StatsError", PyExc_ArithmeticError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<RemoteError>(m, "RemoteError", PyExc_RuntimeError);

  m.def("caption", [](const std::string& shape, const std::string& color, const std::string& position,
                      const std::string& background, int scale) {
    return make_caption(spec_from(shape, color, position, background, scale));
  }, py::arg("shape"), py::arg("color"), py::arg("position") = "center",
     py::arg("background") = "white", py::arg("scale") = 96);

  m.def("render_png", [](const std::string& shape, const std::string& color, const std::string& position,
                         const std::string& background, int scale) {
    return png_bytes(render_scene(spec_from(shape, color, position, background, scale)));
  }, py::arg("shape"), py::arg("color"), py::arg("position") = "center",
     py::arg("background") = "white", py::arg("scale") = 96,
     "Render one scene and return it as PNG bytes.");

  m.def("noise_png", [](std::uint64_t seed) { return png_bytes(render_noise_image(seed)); });

  m.def("sample", [](std::uint64_t seed, std::uint64_t index) {
    const SceneSpec s = sample_scene(seed, index);
    py::dict d = claim_dict(claimed_from_spec(s));
    d["scale"] = s.scale;
    d["caption"] = make_caption(s);
    return d;
  }, py::arg("seed"), py::arg("index"));

  m.def("extract", [](const py::bytes& png) {
    const auto e = extract_attributes(raster_from_png(png));
    py::dict d;
    d["shape"] = optional_name(e.shape);
    d["color"] = optional_name(e.color);
    d["position"] = optional_name(e.position);
    d["shape_confidence"] = e.shape_confidence;
    d["color_confidence"] = e.color_confidence;
    d["position_confidence"] = e.position_confidence;
    return d;
  }, py::arg("png"), "Recover (shape, color, position) from a PNG; None where indeterminate.");

  m.def("parse_caption", [](const std::string& text) { return claim_dict(parse_caption(text)); });

  m.def("perturb", [](const std::string& caption, const std::string& strategy, std::uint64_t seed) {
    const auto s = strategy_from_name(strategy);
    if (!s) throw ConfigError("unknown strategy '" + strategy + "'");
    return perturb(caption, *s, seed).caption;
  }, py::arg("caption"), py::arg("strategy"), py::arg("seed"));

  m.def("oracle_score", [](const py::bytes& png, const std::string& text) {
    return oracle_score(raster_from_png(png), text);
  });

  m.def("persona_score", [](const py::bytes& png, const std::string& text, double text_reliance,
                            std::array<double, 3> reliability, double noise_sigma,
                            const std::string& pair_id) {
    PersonaParams p;
    p.label = "py";
    p.text_reliance = text_reliance;
    p.visual_reliability = {reliability[0], reliability[1], reliability[2]};
    p.noise_sigma = noise_sigma;
    return persona_score(raster_from_png(png), text, p, pair_id);
  }, py::arg("png"), py::arg("text"), py::arg("text_reliance"),
     py::arg("reliability") = std::array<double, 3>{1.0, 1.0, 1.0}, py::arg("noise_sigma") = 0.0,
     py::arg("pair_id") = "");

  m.def("wilson_ci", [](long k, long n, double z) {
    const auto ci = stats::wilson_ci(k, n, z);
    return py::make_tuple(ci.lo, ci.hi);
  }, py::arg("successes"), py::arg("n"), py::arg("z") = 1.96);
  m.def("student_t_cdf", &stats::student_t_cdf, py::arg("t"), py::arg("dof"));
  m.def("holm_bonferroni", [](const std::vector<double>& p, double alpha) {
    return stats::holm_bonferroni(p, alpha);
  }, py::arg("p_values"), py::arg("alpha") = 0.05);
  m.def("paired_t_test", [](const std::vector<double>& diffs) {
    const auto r = stats::paired_t_test(diffs);
    py::dict d;
    d["mean_diff"] = r.mean_diff;
    d["t"] = r.t_stat;
    d["p"] = r.p_value;
    d["dof"] = r.dof;
    d["cohens_d"] = r.cohens_d;
    return d;
  });
  m.def("compute_improvement", &compute_improvement, py::arg("baseline_avg_drop"),
        py::arg("optimized_avg_drop"));

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = 0;
    {
      py::gil_scoped_release release;
      code = cli::run(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Run the command-line tool in process; returns (exit_code, stdout, stderr).");
}
