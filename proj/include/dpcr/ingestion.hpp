#pragma once

// On-disk formats.
//
// Embedding dump (.emb), all fields little-endian:
//   magic "DPCR" | version u32 | dim u32 | record_count u64      (20 bytes)
//   record_count x { label u32 | dim x f32 }
// Values are float32 on disk and float64 in memory.
//
// Checkpoint (.dpck), little-endian, values float64:
//   magic "DPCK" | version u32 | dim u32 | task_count u32 | class_count u64
//   class_count x { task u32 | class_id u32 | count u64 | prototype d x f64
//                   | covariance d*d x f64 (row-major) }
//   has_classifier u32 | [ classes u64 | normalized u32 | weights d*classes x f64 (row-major) ]

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpcr/class_stats.hpp"
#include "dpcr/classifier.hpp"
#include "dpcr/drift_sim.hpp"
#include "dpcr/numerics.hpp"

namespace dpcr {

inline constexpr char kDumpMagic[4] = {'D', 'P', 'C', 'R'};
inline constexpr char kCheckpointMagic[4] = {'D', 'P', 'C', 'K'};
inline constexpr std::uint32_t kDumpVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kDumpHeaderBytes = 20;
inline constexpr std::size_t kCheckpointHeaderBytes = 24;

constexpr std::uint64_t dump_record_bytes(std::uint32_t dim) { return 4 + 4 * std::uint64_t{dim}; }
constexpr std::uint64_t dump_file_bytes(std::uint32_t dim, std::uint64_t records) {
    return kDumpHeaderBytes + records * dump_record_bytes(dim);
}
/// Fixed metadata (task, class id) plus d^2 + d + 1 numeric fields.
constexpr std::uint64_t checkpoint_class_bytes(std::uint32_t dim) {
    return 8 + 8 * scalars_per_class(dim);
}

struct DumpHeader {
    std::uint32_t version = kDumpVersion;
    std::uint32_t dim = 0;
    std::uint64_t record_count = 0;
};

struct EmbeddingDump {
    std::uint32_t dim = 0;
    std::vector<ClassId> labels;
    Matrix embeddings;  // record_count x dim
};

void write_dump(const std::filesystem::path& path, std::span<const ClassId> labels,
                const Matrix& embeddings);

EmbeddingDump read_dump(const std::filesystem::path& path);

/// Validates the header and file length up front, then yields records in
/// batches so arbitrarily large dumps can be scanned in bounded memory.
class DumpReader {
public:
    explicit DumpReader(const std::filesystem::path& path);

    const DumpHeader& header() const { return header_; }
    std::uint64_t remaining() const { return header_.record_count - consumed_; }

    /// Reads up to max_records records; returns false once exhausted.
    bool next_batch(std::size_t max_records, std::vector<ClassId>& labels, Matrix& values);

private:
    std::filesystem::path path_;
    std::ifstream in_;
    DumpHeader header_;
    std::uint64_t consumed_ = 0;
    std::vector<char> buffer_;
};

struct Checkpoint {
    InformationSet information;
    std::optional<ClassifierWeights> classifier;
};

void write_checkpoint(const std::filesystem::path& path, const InformationSet& set,
                      const ClassifierWeights* classifier = nullptr);

Checkpoint read_checkpoint(const std::filesystem::path& path);

/// First four bytes of a file, or an empty string if shorter.
std::string read_magic(const std::filesystem::path& path);

struct StreamNaming {
    std::string extension = ".emb";

    std::string file_name(TaskIndex task, TaskIndex backbone, Split split) const;
};

struct DumpKey {
    TaskIndex task = 0;
    TaskIndex backbone = 0;
    Split split = Split::train;
    auto operator<=>(const DumpKey&) const = default;
};

/// Dump files of a directory keyed by (task, backbone, split).
struct StreamLayout {
    std::filesystem::path directory;
    StreamNaming naming;
    std::size_t tasks = 0;
    std::map<DumpKey, std::filesystem::path> files;

    bool has(TaskIndex task, TaskIndex backbone, Split split) const;
    /// Throws MissingFile naming the expected file.
    const std::filesystem::path& path(TaskIndex task, TaskIndex backbone, Split split) const;
};

/// Maps task{t}_backbone{s}_{train,test}.emb files. Requires, for every task
/// t, the train dump under backbone t, the train dump under backbone t-1
/// when t >= 2, and the test dumps of tasks 1..t under backbone t.
StreamLayout resolve_stream(const std::filesystem::path& directory, const StreamNaming& naming = {});

}  // namespace dpcr
