// JSON crosses the boundary as text; the Python package decodes it.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gbi/error.hpp"
#include "gbi/eval.hpp"
#include "gbi/json_io.hpp"
#include "gbi/pipeline.hpp"
#include "gbi/random.hpp"
#include "gbi/service.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

gbi::OntologyGenConfig profile(const std::string& name) {
  if (name == "hi") return gbi::OntologyGenConfig::hi();
  if (name == "ahi") return gbi::OntologyGenConfig::ahi();
  throw gbi::ConfigError("unknown ontology profile: " + name);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Guided BI recommendation engine core";

  static py::exception<gbi::Error> error(m, "Error");
  static py::exception<gbi::ValidationError> validation(m, "ValidationError", error.ptr());
  static py::exception<gbi::NotFoundError> not_found(m, "NotFoundError", error.ptr());
  static py::exception<gbi::UnavailableError> unavailable(m, "UnavailableError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const gbi::ValidationError& e) {
      py::set_error(validation, e.what());
    } catch (const gbi::NotFoundError& e) {
      py::set_error(not_found, e.what());
    } catch (const gbi::UnavailableError& e) {
      py::set_error(unavailable, e.what());
    } catch (const gbi::Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("derive_seed", &gbi::derive_seed, py::arg("master"), py::arg("tag"), py::arg("index") = 0);

  py::class_<gbi::Ontology>(m, "Ontology")
      .def_static("from_json", &gbi::ontology_from_json)
      .def_static("load", &gbi::load_ontology)
      .def_static("generate", [](const std::string& name, std::uint64_t seed) {
        return gbi::generate_synthetic_ontology(profile(name), seed);
      }, py::arg("profile") = "hi", py::arg("seed") = 7)
      .def("to_json", &gbi::ontology_to_json)
      .def("save", [](const gbi::Ontology& o, const std::string& path) { gbi::save_ontology(o, path); })
      .def_property_readonly("measures", [](const gbi::Ontology& o) { return o.measures(); })
      .def_property_readonly("dimensions", [](const gbi::Ontology& o) { return o.dimensions(); })
      .def_property_readonly("measure_groups", [](const gbi::Ontology& o) { return o.measure_groups(); })
      .def_property_readonly("dimension_groups", [](const gbi::Ontology& o) { return o.dimension_groups(); })
      .def("label", &gbi::Ontology::label)
      .def("parent_measure_group", [](const gbi::Ontology& o, const std::string& id) { return gbi::parent_measure_group(o, id); })
      .def("sibling_measures", [](const gbi::Ontology& o, const std::string& id) { return gbi::sibling_measures(o, id); })
      .def("connected_dimensions", [](const gbi::Ontology& o, const std::set<std::string>& ids) {
        return gbi::connected_dimensions(o, ids);
      });

  py::class_<gbi::Workload>(m, "Workload")
      .def_static("generate", [](const gbi::Ontology& o, const std::string& config_json, std::uint64_t seed) {
        return gbi::generate_workload(o, gbi::workload_config_from_json(json::parse(config_json)), seed);
      }, py::arg("ontology"), py::arg("config_json"), py::arg("seed"))
      .def_static("from_jsonl", &gbi::log_from_jsonl)
      .def("to_jsonl", [](const gbi::Workload& w, const gbi::Ontology& o) { return gbi::log_to_jsonl(w, o); })
      .def("__len__", [](const gbi::Workload& w) { return w.sessions.size(); })
      .def_property_readonly("state_count", &gbi::Workload::state_count);

  m.def("workload_preset", [](const std::string& name, bool ahi) {
    return gbi::workload_config_to_json(gbi::WorkloadConfig::preset(name, ahi)).dump();
  }, py::arg("name"), py::arg("ahi") = false);

  m.def("default_pipeline_config", [] { return gbi::pipeline_config_to_json(gbi::PipelineConfig{}).dump(); });

  m.def("evaluate", [](const gbi::Ontology& o, const gbi::Workload& w, const std::string& config_json) {
    const auto cfg = gbi::pipeline_config_from_json(json::parse(config_json));
    gbi::EvalReport r;
    {
      py::gil_scoped_release release;
      r = gbi::evaluate(o, w, cfg);
    }
    return gbi::report_to_json(r).dump();
  }, py::arg("ontology"), py::arg("workload"), py::arg("config_json") = "{}");

  m.def("train_bundle", [](const gbi::Ontology& o, const gbi::Workload& w, const std::string& config_json,
                           const std::string& out_dir) {
    const auto cfg = gbi::pipeline_config_from_json(json::parse(config_json));
    py::gil_scoped_release release;
    const gbi::TrainedPipeline tp = gbi::train_pipeline(o, w, cfg, cfg.seed);
    gbi::save_ontology(o, out_dir + "/ontology.json");
    gbi::save_model(tp.embedder, out_dir + "/embedder.json");
    gbi::save_intent_model(tp.intent, out_dir + "/intent.json");
    gbi::write_text_file(out_dir + "/index.json", gbi::index_bundle_to_json(tp.index, tp.cooccurrence, tp.level).dump() + "\n");
  }, py::arg("ontology"), py::arg("workload"), py::arg("config_json"), py::arg("out_dir"),
     "Trains embedder, intent model and index and writes ontology/embedder/intent/index JSON into out_dir.");

  m.def("pattern_jaccard", [](const std::string& expected, const std::string& predicted) {
    return gbi::pattern_jaccard(gbi::pattern_from_json(json::parse(expected)), gbi::pattern_from_json(json::parse(predicted)));
  });
  m.def("precision_at_3", [](const std::string& log) { return gbi::precision_at_3(gbi::feedback_from_json(json::parse(log))); });
  m.def("mrr", [](const std::string& log) { return gbi::mrr(gbi::feedback_from_json(json::parse(log))); });

  py::class_<gbi::RecommendationService>(m, "Service")
      .def(py::init([](int k, double w_s, int n_inferred) {
        gbi::ServiceConfig cfg{k, w_s, n_inferred};
        cfg.validate();
        return std::make_unique<gbi::RecommendationService>(cfg);
      }), py::arg("k") = 3, py::arg("w_s") = 0.5, py::arg("n_inferred") = 3)
      .def("load", [](gbi::RecommendationService& s, const std::string& ontology, const std::string& embedder,
                      const std::string& intent, const std::string& index) {
        s.load(std::make_shared<const gbi::ModelBundle>(gbi::load_bundle(ontology, embedder, intent, index)));
      }, py::arg("ontology"), py::arg("embedder"), py::arg("intent"), py::arg("index"))
      .def_property_readonly("ready", &gbi::RecommendationService::ready)
      .def("create_session", &gbi::RecommendationService::create_session)
      .def("submit_query", [](gbi::RecommendationService& s, const std::string& id, const std::string& pattern) {
        return gbi::query_response_to_json(s.submit_query(id, gbi::pattern_from_json(json::parse(pattern)))).dump();
      })
      .def("submit_feedback", &gbi::RecommendationService::submit_feedback)
      .def("get_session", [](const gbi::RecommendationService& s, const std::string& id) {
        return gbi::session_view_to_json(s.get_session(id)).dump();
      })
      .def("ontology_summary", [](const gbi::RecommendationService& s) { return s.ontology_summary().dump(); })
      .def("export_feedback", [](const gbi::RecommendationService& s) { return gbi::feedback_to_json(s.export_feedback()).dump(); });
}
