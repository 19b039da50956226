#include "dpcr/report.hpp"

#include <cstdio>

namespace dpcr {

using nlohmann::json;

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

json result_to_json(const RunConfig& config, const std::string& source_description,
                    const ProtocolResult& result) {
    json doc;
    doc["format"] = "dpcr-result/v1";
    doc["config"] = config.to_json();
    doc["generator"] = kGeneratorId;
    doc["source"] = source_description;
    const auto& v = result.variant;
    doc["method"] = {
        {"name", display_name(v.name)},
        {"gamma", v.gamma},
        {"eps", v.eps},
        {"rank_policy",
         {{"mode", to_string(v.rank_policy.mode)}, {"threshold", v.rank_policy.threshold}, {"k", v.rank_policy.k}}},
        {"calibration", v.calibration() ? (*v.calibration() == CalibrationMode::dual ? "dual" : "task-wise") : "none"},
        {"category_normalization", v.normalizes()},
        {"head", v.uses_ncm() ? "ncm" : "ridge"},
    };

    json old_new = json::array();
    for (std::size_t t = 0; t < result.metrics.old_new.size(); ++t) {
        const auto& s = result.metrics.old_new[t];
        old_new.push_back({{"task", t + 1},
                           {"old", s.old_accuracy ? json(*s.old_accuracy) : json(nullptr)},
                           {"new", s.new_accuracy}});
    }
    doc["metrics"] = {
        {"A_f", result.metrics.final_accuracy},
        {"A_avg", result.metrics.average_incremental},
        {"per_task", result.metrics.per_task},
        {"old_new", old_new},
    };
    doc["accuracy_matrix"] = result.accuracy;
    doc["test_counts"] = result.test_counts;

    const auto dim = static_cast<std::size_t>(result.information.dim());
    doc["persistent_state"] = {
        {"classes", result.information.size()},
        {"dim", dim},
        {"scalars_per_class", scalars_per_class(dim)},
        {"information_scalars", result.information.stored_scalars()},
        {"classifier_scalars", result.classifier ? result.classifier->stored_scalars() : 0},
    };

    json timing = json::array();
    for (std::size_t t = 0; t < result.timing.size(); ++t) {
        const auto& p = result.timing[t];
        timing.push_back({{"task", t + 1},
                          {"shift", p.shift_ms},
                          {"calibrate", p.calibrate_ms},
                          {"stats", p.stats_ms},
                          {"reconstruct", p.reconstruct_ms},
                          {"evaluate", p.evaluate_ms}});
    }
    doc[kWallTimeKey] = timing;
    return doc;
}

void write_accuracy_csv(std::ostream& out, const ProtocolResult& result) {
    out << "after_task,eval_task,accuracy,test_count\n";
    for (std::size_t t = 0; t < result.accuracy.size(); ++t) {
        for (std::size_t i = 0; i < result.accuracy[t].size(); ++i) {
            out << t + 1 << ',' << i + 1 << ',' << number(result.accuracy[t][i]) << ','
                << result.test_counts[i] << '\n';
        }
    }
}

void write_grid_csv(std::ostream& out, const std::string& source_description,
                    const std::vector<GridRow>& rows) {
    out << "method,gamma,eps,rank_mode,rank_threshold,rank_k,source,status,A_f,A_avg,final_old,"
           "final_new,error\n";
    for (const auto& row : rows) {
        const auto& v = row.variant;
        out << csv_field(display_name(v.name)) << ',' << number(v.gamma) << ',' << number(v.eps) << ','
            << to_string(v.rank_policy.mode) << ',' << number(v.rank_policy.threshold) << ','
            << v.rank_policy.k << ',' << csv_field(source_description) << ','
            << (row.ok ? "ok" : "error") << ',';
        if (row.ok) {
            const auto& last = row.metrics.old_new.back();
            out << number(row.metrics.final_accuracy) << ',' << number(row.metrics.average_incremental)
                << ',' << (last.old_accuracy ? number(*last.old_accuracy) : std::string()) << ','
                << number(last.new_accuracy) << ',';
        } else {
            out << ",,,,";
        }
        out << csv_field(row.error) << '\n';
    }
}

std::string summary_line(const Metrics& metrics) {
    return "A_f=" + fixed(metrics.final_accuracy) + " A_avg=" + fixed(metrics.average_incremental);
}

}  // namespace dpcr
