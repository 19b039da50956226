#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dpcr/class_stats.hpp"
#include "dpcr/classifier.hpp"
#include "dpcr/drift_sim.hpp"
#include "dpcr/error.hpp"
#include "dpcr/ingestion.hpp"
#include "dpcr/protocol.hpp"
#include "dpcr/shift_estimation.hpp"

namespace py = pybind11;
using namespace dpcr;

namespace {

py::dict metrics_to_dict(const Metrics& m) {
    py::list old_new;
    for (const auto& s : m.old_new) {
        py::dict d;
        d["old"] = s.old_accuracy ? py::cast(*s.old_accuracy) : py::none();
        d["new"] = s.new_accuracy;
        old_new.append(d);
    }
    py::dict d;
    d["A_f"] = m.final_accuracy;
    d["A_avg"] = m.average_incremental;
    d["per_task"] = m.per_task;
    d["old_new"] = old_new;
    return d;
}

MethodVariant make_variant(const std::string& method, double gamma, double eps, const RankPolicy& policy) {
    MethodVariant v;
    v.name = method_from_string(method);
    v.gamma = gamma;
    v.eps = eps;
    v.rank_policy = policy;
    return v;
}

py::dict result_to_dict(const ProtocolResult& r) {
    py::dict d;
    d["method"] = display_name(r.variant.name);
    d["accuracy_matrix"] = r.accuracy;
    d["test_counts"] = r.test_counts;
    d["metrics"] = metrics_to_dict(r.metrics);
    d["information"] = r.information;
    d["classifier"] = r.classifier ? py::cast(*r.classifier) : py::none();
    d["persistent_scalars"] = r.persistent_scalars();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Dual-projection shift estimation and ridge classifier reconstruction";

    static py::exception<Error> base_error(m, "Error");
    py::register_exception<InvalidInput>(m, "InvalidInput", base_error.ptr());
    py::register_exception<SingularSystem>(m, "SingularSystem", base_error.ptr());
    py::register_exception<Conflict>(m, "Conflict", base_error.ptr());
    py::register_exception<FormatError>(m, "FormatError", base_error.ptr());
    py::register_exception<IoError>(m, "IoError", base_error.ptr());

    // numerics
    py::class_<RankPolicy>(m, "RankPolicy")
        .def_static("relative", &RankPolicy::relative, py::arg("threshold") = 1e-6)
        .def_static("absolute", &RankPolicy::absolute, py::arg("threshold"))
        .def_static("fixed", &RankPolicy::fixed, py::arg("k"))
        .def_property_readonly("mode", [](const RankPolicy& p) { return to_string(p.mode); })
        .def_readonly("threshold", &RankPolicy::threshold)
        .def_readonly("k", &RankPolicy::k);

    m.def("spd_solve", &spd_solve, py::arg("m"), py::arg("ridge"), py::arg("b"));
    m.def("sym_eig", [](const Matrix& mat) {
        SymEig e = sym_eig(mat);
        return py::make_tuple(e.values, e.vectors);
    }, py::arg("m"), "Returns (values nonincreasing, vectors).");
    m.def("numerical_rank", &numerical_rank, py::arg("values"), py::arg("policy") = RankPolicy{});

    // class statistics
    py::class_<ClassStatistics>(m, "ClassStatistics")
        .def_readonly("class_id", &ClassStatistics::class_id)
        .def_readonly("count", &ClassStatistics::count)
        .def_readonly("covariance", &ClassStatistics::covariance)
        .def_property_readonly("prototype", [](const ClassStatistics& s) { return Vector(s.prototype.transpose()); });
    m.def("accumulate_class_stats", &accumulate_class_stats, py::arg("embeddings"), py::arg("class_id"));
    m.def("correlation_block", &correlation_block, py::arg("stats"), py::arg("total_classes"));

    py::class_<InformationSet>(m, "InformationSet")
        .def(py::init<Eigen::Index>(), py::arg("dim"))
        .def_property_readonly("dim", &InformationSet::dim)
        .def_property_readonly("task_count", &InformationSet::task_count)
        .def("__len__", &InformationSet::size)
        .def("stored_scalars", &InformationSet::stored_scalars)
        .def("insert_task", &InformationSet::insert_task, py::arg("new_stats"))
        .def("entries", [](const InformationSet& s) {
            py::list out;
            for (const auto& [key, stats] : s.entries()) out.append(py::make_tuple(key.task, key.class_id, stats));
            return out;
        });

    // shift estimation
    py::class_<ShiftProjection>(m, "ShiftProjection")
        .def_readonly("matrix", &ShiftProjection::matrix)
        .def_property_readonly("kind", [](const ShiftProjection& p) { return to_string(p.kind); });
    m.def("fit_tssp", &fit_tssp, py::arg("x_prev"), py::arg("x_curr"), py::arg("eps") = kDefaultTsspEps);
    m.def("cip_projector", &cip_projector, py::arg("covariance"), py::arg("policy") = RankPolicy{});
    m.def("dual_projection", &dual_projection, py::arg("task_wise"), py::arg("category"));
    m.def("calibrate_class", &calibrate_class, py::arg("stats"), py::arg("projection"));
    m.def("calibrate_information_set",
          py::overload_cast<const InformationSet&, const ShiftProjection&, const RankPolicy&>(
              &calibrate_information_set),
          py::arg("set"), py::arg("task_wise"), py::arg("policy") = RankPolicy{});

    // classifier
    py::class_<ClassifierWeights>(m, "ClassifierWeights")
        .def_readonly("matrix", &ClassifierWeights::matrix)
        .def_readonly("normalized", &ClassifierWeights::normalized);
    m.def("reconstruct_classifier", &reconstruct_classifier, py::arg("set"), py::arg("new_stats"),
          py::arg("gamma") = kDefaultGamma);
    m.def("category_normalize", &category_normalize, py::arg("weights"));
    m.def("predict", &predict, py::arg("weights"), py::arg("embeddings"));
    m.def("ncm_predict", &ncm_predict, py::arg("set"), py::arg("embeddings"));

    // simulator
    py::class_<DriftScenario>(m, "DriftScenario")
        .def(py::init<>())
        .def_static("standard", &DriftScenario::standard)
        .def_readwrite("seed", &DriftScenario::seed)
        .def_readwrite("dim", &DriftScenario::dim)
        .def_readwrite("tasks", &DriftScenario::tasks)
        .def_readwrite("classes_per_task", &DriftScenario::classes_per_task)
        .def_readwrite("train_per_class", &DriftScenario::train_per_class)
        .def_readwrite("test_per_class", &DriftScenario::test_per_class)
        .def_readwrite("mean_radius", &DriftScenario::mean_radius)
        .def_readwrite("within_class_std", &DriftScenario::within_class_std)
        .def_property("drift_kind",
                      [](const DriftScenario& s) { return to_string(s.drift_kind); },
                      [](DriftScenario& s, const std::string& k) { s.drift_kind = drift_kind_from_string(k); })
        .def_readwrite("drift_strength", &DriftScenario::drift_strength)
        .def_readwrite("observation_noise_std", &DriftScenario::observation_noise_std);

    m.def("generate_task", [](const DriftScenario& sc, TaskIndex t) {
        TaskBatch b = generate_task(sc, t);
        py::list tests;
        for (auto& tb : b.tests) tests.append(py::make_tuple(tb.task, tb.data.x, tb.data.labels));
        py::dict d;
        d["task"] = b.task;
        d["train_prev"] = b.train_prev;
        d["train_curr"] = b.train_curr;
        d["labels"] = b.labels;
        d["tests"] = tests;
        return d;
    }, py::arg("scenario"), py::arg("task"));
    m.def("ground_truth_shift", &ground_truth_shift, py::arg("scenario"), py::arg("task"));
    m.attr("GENERATOR_ID") = kGeneratorId;

    // ingestion
    m.def("write_dump", [](const std::filesystem::path& path, const std::vector<ClassId>& labels,
                           const Matrix& x) { write_dump(path, labels, x); },
          py::arg("path"), py::arg("labels"), py::arg("embeddings"));
    m.def("read_dump", [](const std::filesystem::path& path) {
        EmbeddingDump d = read_dump(path);
        return py::make_tuple(d.labels, d.embeddings);
    }, py::arg("path"));

    // protocol
    m.def("compute_metrics", [](const std::vector<std::vector<double>>& acc, const std::vector<std::size_t>& counts) {
        return metrics_to_dict(compute_metrics(acc, counts));
    }, py::arg("accuracy_matrix"), py::arg("test_counts"));
    m.def("run_protocol", [](const DriftScenario& sc, const std::string& method, double gamma, double eps,
                             const RankPolicy& policy) {
        SimulatorSource source(sc);
        return result_to_dict(run_protocol(source, make_variant(method, gamma, eps, policy)));
    }, py::arg("scenario"), py::arg("method") = "DPCR", py::arg("gamma") = kDefaultGamma,
       py::arg("eps") = kDefaultTsspEps, py::arg("policy") = RankPolicy{});
    m.def("run_protocol_on_dumps", [](const std::filesystem::path& dir, const std::string& method, double gamma,
                                      double eps, const RankPolicy& policy) {
        DumpSource source(resolve_stream(dir));
        return result_to_dict(run_protocol(source, make_variant(method, gamma, eps, policy)));
    }, py::arg("directory"), py::arg("method") = "DPCR", py::arg("gamma") = kDefaultGamma,
       py::arg("eps") = kDefaultTsspEps, py::arg("policy") = RankPolicy{});
}
