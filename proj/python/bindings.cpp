#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "exprforge/backends.hpp"
#include "exprforge/bench.hpp"
#include "exprforge/canny.hpp"
#include "exprforge/diff_analyzer.hpp"
#include "exprforge/edit_pipeline.hpp"
#include "exprforge/error.hpp"
#include "exprforge/expression_db.hpp"
#include "exprforge/png_io.hpp"
#include "exprforge/prompting.hpp"
#include "exprforge/retrieval.hpp"

namespace py = pybind11;
namespace ef = exprforge;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// HxWx4 (or HxWx3, alpha filled with 255) uint8 -> RasterImage.
ef::RasterImage to_raster(const U8Array& a) {
  if (a.ndim() != 3 || (a.shape(2) != 3 && a.shape(2) != 4)) {
    throw ef::Error(ef::ErrorCode::InvalidImage, "expected an HxWx3 or HxWx4 uint8 array");
  }
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  const int c = static_cast<int>(a.shape(2));
  std::vector<std::uint8_t> rgba(static_cast<std::size_t>(w) * h * 4, 255);
  const std::uint8_t* src = a.data();
  for (std::size_t i = 0, n = static_cast<std::size_t>(w) * h; i < n; ++i) {
    for (int k = 0; k < c; ++k) rgba[i * 4 + k] = src[i * c + k];
  }
  return ef::RasterImage(w, h, std::move(rgba));
}

U8Array from_raster(const ef::RasterImage& img) {
  U8Array out({img.height(), img.width(), 4});
  std::copy(img.bytes().begin(), img.bytes().end(), out.mutable_data());
  return out;
}

// HxW array, nonzero = selected.
ef::SelectionMask to_mask(const U8Array& a) {
  if (a.ndim() != 2) throw ef::Error(ef::ErrorCode::InvalidImage, "expected an HxW mask array");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  ef::SelectionMask m(w, h);
  const std::uint8_t* src = a.data();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, src[static_cast<std::size_t>(y) * w + x] != 0);
  return m;
}

U8Array from_gray(const ef::GrayImage& g) {
  U8Array out({g.height(), g.width()});
  std::copy(g.bytes().begin(), g.bytes().end(), out.mutable_data());
  return out;
}

py::dict tag_dict(const ef::ExpressionTag& t) {
  py::list aliases;
  for (const auto& a : t.aliases) aliases.append(py::make_tuple(a.text, std::string(ef::to_string(a.language))));
  py::dict d;
  d["name"] = t.name;
  d["definition"] = t.definition;
  d["aliases"] = aliases;
  d["transformation_free"] = t.transformation_free;
  d["story_count"] = t.stories.size();
  return d;
}

py::dict stats_dict(const ef::DiffStats& s) {
  py::dict d;
  d["pixel_count"] = s.pixel_count;
  d["changed_pixel_count"] = s.changed_pixel_count;
  d["max_l1"] = s.max_l1;
  d["mean_l1"] = s.mean_l1;
  d["fraction_changed"] = s.fraction_changed;
  d["has_mask"] = s.has_mask;
  if (s.has_mask) {
    d["changed_outside_mask"] = s.changed_outside_mask;
    d["max_l1_outside_mask"] = s.max_l1_outside_mask;
  }
  return d;
}

std::shared_ptr<ef::GenerationBackend> stub_backend(const std::string& mode, int edge_width) {
  return std::make_shared<ef::StubBackend>(ef::parse_stub_mode(mode), edge_width);
}

}  // namespace

PYBIND11_MODULE(_exprforge, m) {
  m.doc() = "exprforge core: expression-tag retrieval, masked editing and diff analysis";

  static py::handle error = py::exception<ef::Error>(m, "ExprforgeError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ef::Error& e) {
      PyErr_SetString(error.ptr(), (std::string(ef::to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  py::class_<ef::ScoredTag>(m, "ScoredTag")
      .def_readonly("tag_name", &ef::ScoredTag::tag_name)
      .def_readonly("score", &ef::ScoredTag::score)
      .def_property_readonly("matched_fields",
                             [](const ef::ScoredTag& t) {
                               std::vector<std::string> out;
                               for (auto f : t.matched_fields) out.emplace_back(ef::to_string(f));
                               return out;
                             })
      .def("__repr__", [](const ef::ScoredTag& t) {
        return "ScoredTag(" + t.tag_name + ", " + std::to_string(t.score) + ")";
      });

  py::class_<ef::ExpressionDatabase>(m, "ExpressionDatabase")
      .def("__len__", &ef::ExpressionDatabase::size)
      .def("names",
           [](const ef::ExpressionDatabase& db) {
             std::vector<std::string> out;
             for (const auto& t : db.tags()) out.push_back(t.name);
             return out;
           })
      .def("get_tag",
           [](const ef::ExpressionDatabase& db, const std::string& name) -> py::object {
             const auto* t = db.get_tag(name);
             return t ? py::object(tag_dict(*t)) : py::none();
           })
      .def("resolve_alias",
           [](const ef::ExpressionDatabase& db, const std::string& alias) -> py::object {
             const auto* t = db.resolve_alias(alias);
             return t ? py::object(py::str(t->name)) : py::none();
           })
      .def("transformation_free",
           [](const ef::ExpressionDatabase& db) {
             std::vector<std::string> out;
             for (const auto* t : db.list_transformation_free()) out.push_back(t->name);
             return out;
           })
      .def("counts",
           [](const ef::ExpressionDatabase& db) {
             const auto c = db.counts();
             py::dict d;
             d["tags"] = c.tags;
             d["aliases"] = c.aliases;
             d["stories"] = c.stories;
             d["image_refs"] = c.image_refs;
             d["transformation_free"] = c.transformation_free;
             return d;
           })
      .def("story_prompt",
           [](const ef::ExpressionDatabase& db, const std::string& name, const std::string& lang, int n) {
             const auto* t = db.resolve_alias(name);
             if (!t) throw ef::Error(ef::ErrorCode::SchemaViolation, "unknown tag '" + name + "'", name);
             return ef::build_story_generation_prompt(*t, ef::parse_language(lang), n);
           },
           py::arg("name"), py::arg("language") = "en", py::arg("n") = 5);

  m.def("load_database", [](const std::filesystem::path& p) { return ef::load_database(p); }, py::arg("path"));
  m.def("parse_database", [](const std::string& text) { return ef::parse_database(text); }, py::arg("jsonl"));

  py::class_<ef::RetrievalIndex>(m, "RetrievalIndex")
      .def(py::init([](const ef::ExpressionDatabase& db) { return ef::build_index(db); }), py::arg("db"))
      .def("retrieve",
           [](const ef::RetrievalIndex& index, const std::string& text, int k) {
             return ef::retrieve(index, ef::RetrievalQuery{text, std::nullopt, k});
           },
           py::arg("text"), py::arg("k") = 5);
  m.def("tokenize", &ef::tokenize, py::arg("text"));

  m.def("assemble_prompt",
        [](const std::string& prefix, const std::vector<std::string>& tags, const std::string& suffix) {
          return ef::assemble_prompt({prefix, suffix}, tags);
        },
        py::arg("prefix"), py::arg("tags"), py::arg("suffix"));

  m.def("extract_canny",
        [](const U8Array& image, double low, double high, double sigma) {
          return from_gray(ef::extract_canny(to_raster(image), {low, high, sigma}));
        },
        py::arg("image"), py::arg("low") = 100.0, py::arg("high") = 200.0, py::arg("sigma") = 1.4);

  m.def("run_edit",
        [](const U8Array& image, const U8Array& mask, const std::string& prompt, std::optional<std::uint64_t> seed,
           const std::string& backend, int edge_width, int sampling_steps, double denoising_strength,
           double controlnet_steps, double cfg_scale) {
          ef::EditRequest req;
          req.image = to_raster(image);
          req.mask = to_mask(mask);
          req.prompt = prompt;
          req.params.seed = seed;
          req.params.sampling_steps = sampling_steps;
          req.params.denoising_strength = denoising_strength;
          req.params.controlnet_steps = controlnet_steps;
          req.params.cfg_scale = cfg_scale;
          auto be = stub_backend(backend, edge_width);
          ef::EditResult r;
          {
            py::gil_scoped_release release;
            r = ef::run_edit(req, *be);
          }
          py::dict meta;
          meta["seed"] = r.layer.metadata.seed;
          meta["backend_id"] = r.layer.metadata.backend_id;
          meta["latency_ms"] = r.layer.metadata.latency_ms;
          meta["request_hash"] = r.layer.metadata.request_hash;
          return py::make_tuple(from_raster(r.layer.pixels), from_raster(r.composited_preview), meta);
        },
        py::arg("image"), py::arg("mask"), py::arg("prompt") = "", py::arg("seed") = py::none(),
        py::arg("backend") = "procedural", py::arg("edge_width") = 2, py::arg("sampling_steps") = 30,
        py::arg("denoising_strength") = 1.0, py::arg("controlnet_steps") = 0.5, py::arg("cfg_scale") = 7.0,
        "Runs one masked edit with a stub backend; returns (layer, composite, metadata).");

  m.def("apply_region_transform",
        [](const U8Array& image, const U8Array& mask, double scale, double dx, double dy) {
          return from_raster(ef::apply_region_transform(to_raster(image), to_mask(mask), scale, dx, dy));
        },
        py::arg("image"), py::arg("mask"), py::arg("scale") = 1.0, py::arg("dx") = 0.0, py::arg("dy") = 0.0);

  m.def("l1_map",
        [](const U8Array& a, const U8Array& b) {
          const auto map = ef::l1_map(to_raster(a), to_raster(b));
          py::array_t<std::uint16_t> out({map.height(), map.width()});
          std::copy(map.values().begin(), map.values().end(), out.mutable_data());
          return out;
        },
        py::arg("original"), py::arg("edited"));
  m.def("diff_stats",
        [](const U8Array& a, const U8Array& b, std::optional<U8Array> mask) {
          const auto map = ef::l1_map(to_raster(a), to_raster(b));
          if (mask) {
            const auto sel = to_mask(*mask);
            return stats_dict(ef::stats(map, sel));
          }
          return stats_dict(ef::stats(map));
        },
        py::arg("original"), py::arg("edited"), py::arg("mask") = py::none());
  m.def("render_diff",
        [](const U8Array& a, const U8Array& b, int threshold) {
          return from_gray(ef::render_grayscale(ef::l1_map(to_raster(a), to_raster(b)), threshold));
        },
        py::arg("original"), py::arg("edited"), py::arg("threshold") = ef::kDefaultDiffThreshold);
  m.def("gray_level", &ef::gray_level, py::arg("value"), py::arg("threshold") = ef::kDefaultDiffThreshold);

  m.def("read_png", [](const std::filesystem::path& p) { return from_raster(ef::read_png(p)); }, py::arg("path"));
  m.def("write_png",
        [](const std::filesystem::path& p, const U8Array& image) {
          ef::write_file_bytes(p, ef::encode_png(to_raster(image)));
        },
        py::arg("path"), py::arg("image"));

  m.def("sample_mean", &ef::sample_mean, py::arg("values"));
  m.def("sample_std", &ef::sample_std, py::arg("values"));
  m.def("format_percent", &ef::format_percent, py::arg("fraction"));
  m.def("compare_means",
        [](const std::vector<double>& means) {
          std::vector<ef::LatencyReport> reports;
          for (std::size_t i = 0; i < means.size(); ++i) {
            ef::LatencyReport r;
            r.label = "config " + std::to_string(i + 1);
            r.mean_ms = means[i];
            reports.push_back(r);
          }
          std::vector<double> out;
          for (const auto& c : ef::compare(reports)) out.push_back(c.reduction);
          return out;
        },
        py::arg("means"), "Reductions relative to the first mean.");
}
