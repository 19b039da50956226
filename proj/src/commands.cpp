#include "dpcr/commands.hpp"

#include <fstream>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "dpcr/error.hpp"
#include "dpcr/ingestion.hpp"
#include "dpcr/report.hpp"

namespace dpcr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory '" + dir.string() + "'");
    }
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

}  // namespace

std::unique_ptr<EmbeddingSource> make_source(const SourceConfig& source) {
    if (source.kind == SourceConfig::Kind::sim) {
        return std::make_unique<SimulatorSource>(source.scenario);
    }
    return std::make_unique<DumpSource>(resolve_stream(source.directory));
}

std::vector<fs::path> cmd_generate(const RunConfig& config, std::ostream& out) {
    if (config.source.kind != SourceConfig::Kind::sim) {
        throw ConfigError("generate needs 'source.kind' = 'sim'");
    }
    const DriftScenario& sc = config.source.scenario;
    sc.validate();
    const fs::path dir = config.output.directory;
    ensure_directory(dir);

    // Every (task, backbone, split) any method variant reads: the paired
    // training features, backbone-1 features for the frozen baseline, and
    // test features of each seen task under every later backbone.
    std::set<DumpKey> wanted;
    for (TaskIndex t = 1; t <= sc.tasks; ++t) {
        wanted.insert({t, t, Split::train});
        if (t >= 2) wanted.insert({t, t - 1, Split::train});
        wanted.insert({t, 1, Split::train});
        wanted.insert({t, 1, Split::test});
        for (TaskIndex i = 1; i <= t; ++i) wanted.insert({i, t, Split::test});
    }

    StreamNaming naming;
    std::vector<fs::path> written;
    json files = json::array();
    for (const auto& key : wanted) {
        const LabeledEmbeddings block = embed(sc, key.task, key.split, key.backbone);
        const fs::path path = dir / naming.file_name(key.task, key.backbone, key.split);
        write_dump(path, block.labels, block.x);
        written.push_back(path);
        files.push_back(path.filename().string());
        spdlog::debug("wrote {}", path.string());
    }

    json drift = json::array();
    for (TaskIndex t = 2; t <= sc.tasks; ++t) {
        const Matrix a = ground_truth_shift(sc, t);
        const auto d = a.rows();
        drift.push_back({
            {"task", t},
            {"distance_from_identity", (a - Matrix::Identity(d, d)).norm()},
            {"orthogonality_error", (a.transpose() * a - Matrix::Identity(d, d)).norm()},
            {"determinant", a.determinant()},
            {"offset_norm", ground_truth_offset(sc, t).norm()},
        });
    }
    json manifest = {
        {"format", "dpcr-manifest/v1"},
        {"generator", kGeneratorId},
        {"seed", sc.seed},
        {"config", config.to_json()},
        {"files", files},
        {"ground_truth_drift", drift},
    };
    auto mf = open_output(dir / "manifest.json");
    mf << manifest.dump(2) << '\n';
    out << "wrote " << written.size() << " dumps to " << dir.string() << '\n';
    return written;
}

ProtocolResult cmd_run(const RunConfig& config, std::ostream& out) {
    auto source = make_source(config.source);
    spdlog::info("running {} on {}", display_name(config.method.name), source->describe());
    ProtocolResult result =
        run_protocol(*source, config.method, RunOptions{config.effective_threads()});

    const fs::path dir = config.output.directory;
    ensure_directory(dir);
    if (config.output.wants("json")) {
        auto f = open_output(dir / "results.json");
        f << result_to_json(config, source->describe(), result).dump(2) << '\n';
    }
    if (config.output.wants("csv")) {
        auto f = open_output(dir / "accuracy.csv");
        write_accuracy_csv(f, result);
    }
    if (config.output.wants("checkpoint")) {
        write_checkpoint(dir / "state.dpck", result.information,
                         result.classifier ? &*result.classifier : nullptr);
    }
    out << summary_line(result.metrics) << '\n';
    return result;
}

std::vector<GridRow> cmd_ablate(const RunConfig& config, std::ostream& out) {
    const AblationAxes axes = config.ablation.axes();
    std::string description;
    {
        auto probe = make_source(config.source);
        description = probe->describe();
    }
    const SourceConfig source_config = config.source;
    auto rows = ablation_grid([source_config] { return make_source(source_config); }, config.method,
                              axes, RunOptions{config.effective_threads()});

    const fs::path dir = config.output.directory;
    ensure_directory(dir);
    auto f = open_output(dir / "grid.csv");
    write_grid_csv(f, description, rows);
    for (const auto& row : rows) {
        out << display_name(row.variant.name) << " gamma=" << row.variant.gamma << ' '
            << (row.ok ? summary_line(row.metrics) : "error: " + row.error) << '\n';
    }
    return rows;
}

void cmd_inspect(const fs::path& path, std::ostream& out) {
    const std::string magic = read_magic(path);
    if (magic == std::string(kDumpMagic, 4)) {
        DumpReader reader(path);
        const auto& h = reader.header();
        out << "kind: embedding dump\n"
            << "version: " << h.version << '\n'
            << "dim: " << h.dim << '\n'
            << "records: " << h.record_count << '\n';
        std::map<ClassId, std::uint64_t> histogram;
        std::vector<ClassId> labels;
        Matrix values;
        while (reader.next_batch(1024, labels, values)) {
            for (ClassId l : labels) ++histogram[l];
        }
        out << "classes: " << histogram.size() << '\n';
        for (const auto& [label, n] : histogram) out << "  label " << label << ": " << n << '\n';
        return;
    }
    if (magic == std::string(kCheckpointMagic, 4)) {
        const Checkpoint cp = read_checkpoint(path);
        const auto& info = cp.information;
        out << "kind: checkpoint\n"
            << "dim: " << info.dim() << '\n'
            << "task_count: " << info.task_count() << '\n'
            << "classes: " << info.size() << '\n'
            << "scalars_per_class: " << scalars_per_class(static_cast<std::size_t>(info.dim())) << '\n';
        for (const auto& [key, s] : info.entries()) {
            out << "  task " << key.task << " class " << key.class_id << ": " << s.count << " samples\n";
        }
        if (cp.classifier) {
            out << "classifier: " << cp.classifier->matrix.rows() << "x" << cp.classifier->matrix.cols()
                << (cp.classifier->normalized ? " (normalized)" : "") << '\n';
        } else {
            out << "classifier: none\n";
        }
        return;
    }
    throw FormatError("'" + path.string() + "': unrecognized magic, not a DPCR dump or DPCK checkpoint");
}

}  // namespace dpcr
