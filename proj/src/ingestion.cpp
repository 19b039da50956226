#include "dpcr/ingestion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <regex>
#include <sstream>
#include <system_error>

#include "dpcr/error.hpp"

namespace dpcr {

namespace fs = std::filesystem;

namespace {

// Explicit little-endian encoding, independent of host byte order.
template <typename U>
void put_le(std::vector<char>& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
    }
}

template <typename U>
U get_le(const char* p) {
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        value |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return value;
}

void put_f32(std::vector<char>& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::vector<char>& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
float get_f32(const char* p) { return std::bit_cast<float>(get_le<std::uint32_t>(p)); }
double get_f64(const char* p) { return std::bit_cast<double>(get_le<std::uint64_t>(p)); }

std::uintmax_t file_size_or_throw(const fs::path& path) {
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec) throw IoError("cannot stat '" + path.string() + "': " + ec.message());
    return size;
}

std::ifstream open_for_read(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

// Writes to a sibling temporary and renames, so a failed write never leaves
// a partial file under the final name.
void write_file_atomically(const fs::path& path, const std::vector<char>& bytes) {
    fs::path tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("write to '" + path.string() + "' failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move dump into place at '" + path.string() + "'");
    }
}

std::string length_mismatch(const fs::path& path, std::uint64_t expected, std::uint64_t actual) {
    std::ostringstream os;
    os << "'" << path.string() << "': length mismatch, expected " << expected << " bytes, found "
       << actual;
    return os.str();
}

}  // namespace

void write_dump(const fs::path& path, std::span<const ClassId> labels, const Matrix& embeddings) {
    if (static_cast<Eigen::Index>(labels.size()) != embeddings.rows()) {
        std::ostringstream os;
        os << "write_dump: " << labels.size() << " labels for " << embeddings.rows() << " rows";
        throw InvalidInput(os.str());
    }
    if (embeddings.cols() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidInput("write_dump: dimension does not fit in 32 bits");
    }
    const auto dim = static_cast<std::uint32_t>(embeddings.cols());
    const auto n = static_cast<std::uint64_t>(embeddings.rows());

    std::vector<char> bytes;
    bytes.reserve(dump_file_bytes(dim, n));
    bytes.insert(bytes.end(), std::begin(kDumpMagic), std::end(kDumpMagic));
    put_le(bytes, kDumpVersion);
    put_le(bytes, dim);
    put_le(bytes, n);
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
        put_le(bytes, labels[static_cast<std::size_t>(i)]);
        for (Eigen::Index k = 0; k < embeddings.cols(); ++k) {
            const auto v = static_cast<float>(embeddings(i, k));
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "write_dump: non-finite value at record " << i << ", component " << k
                   << " (as float32)";
                throw InvalidInput(os.str());
            }
            put_f32(bytes, v);
        }
    }
    write_file_atomically(path, bytes);
}

DumpReader::DumpReader(const fs::path& path) : path_(path), in_(open_for_read(path)) {
    const auto actual = file_size_or_throw(path);
    char head[kDumpHeaderBytes];
    in_.read(head, static_cast<std::streamsize>(std::min<std::uintmax_t>(actual, kDumpHeaderBytes)));
    if (actual < 4 || std::memcmp(head, kDumpMagic, 4) != 0) {
        throw FormatError("'" + path.string() + "' is not a DPCR dump");
    }
    if (actual < kDumpHeaderBytes) {
        throw FormatError(length_mismatch(path, kDumpHeaderBytes, actual));
    }
    header_.version = get_le<std::uint32_t>(head + 4);
    if (header_.version != kDumpVersion) {
        throw VersionError("'" + path.string() + "': unsupported dump version " +
                           std::to_string(header_.version) + " (supported: " +
                           std::to_string(kDumpVersion) + ")");
    }
    header_.dim = get_le<std::uint32_t>(head + 8);
    header_.record_count = get_le<std::uint64_t>(head + 12);
    const std::uint64_t expected = dump_file_bytes(header_.dim, header_.record_count);
    if (expected != actual) {
        throw FormatError(length_mismatch(path, expected, actual));
    }
}

bool DumpReader::next_batch(std::size_t max_records, std::vector<ClassId>& labels, Matrix& values) {
    const std::uint64_t take = std::min<std::uint64_t>(max_records, remaining());
    labels.resize(static_cast<std::size_t>(take));
    values.resize(static_cast<Eigen::Index>(take), header_.dim);
    if (take == 0) return false;

    const std::uint64_t record = dump_record_bytes(header_.dim);
    buffer_.resize(static_cast<std::size_t>(take * record));
    in_.read(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    if (!in_) throw IoError("read from '" + path_.string() + "' failed");

    for (std::uint64_t r = 0; r < take; ++r) {
        const char* p = buffer_.data() + r * record;
        labels[r] = get_le<std::uint32_t>(p);
        for (std::uint32_t k = 0; k < header_.dim; ++k) {
            const float v = get_f32(p + 4 + 4 * k);
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "'" << path_.string() << "': non-finite value in record " << consumed_ + r;
                throw FormatError(os.str());
            }
            values(static_cast<Eigen::Index>(r), k) = v;
        }
    }
    consumed_ += take;
    return true;
}

EmbeddingDump read_dump(const fs::path& path) {
    DumpReader reader(path);
    EmbeddingDump dump;
    dump.dim = reader.header().dim;
    const auto n = static_cast<std::size_t>(reader.header().record_count);
    dump.labels.reserve(n);
    dump.embeddings.resize(static_cast<Eigen::Index>(n), dump.dim);
    constexpr std::size_t kBatch = 4096;
    std::vector<ClassId> labels;
    Matrix values;
    Eigen::Index row = 0;
    while (reader.next_batch(kBatch, labels, values)) {
        dump.labels.insert(dump.labels.end(), labels.begin(), labels.end());
        dump.embeddings.middleRows(row, values.rows()) = values;
        row += values.rows();
    }
    return dump;
}

void write_checkpoint(const fs::path& path, const InformationSet& set,
                      const ClassifierWeights* classifier) {
    const auto dim = static_cast<std::uint32_t>(set.dim());
    std::vector<char> bytes;
    bytes.insert(bytes.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    put_le(bytes, kCheckpointVersion);
    put_le(bytes, dim);
    put_le(bytes, static_cast<std::uint32_t>(set.task_count()));
    put_le(bytes, static_cast<std::uint64_t>(set.size()));
    for (const auto& [key, s] : set.entries()) {
        put_le(bytes, static_cast<std::uint32_t>(key.task));
        put_le(bytes, static_cast<std::uint32_t>(key.class_id));
        put_le(bytes, static_cast<std::uint64_t>(s.count));
        for (Eigen::Index k = 0; k < s.prototype.size(); ++k) put_f64(bytes, s.prototype[k]);
        for (Eigen::Index i = 0; i < s.covariance.rows(); ++i)
            for (Eigen::Index j = 0; j < s.covariance.cols(); ++j) put_f64(bytes, s.covariance(i, j));
    }
    if (classifier != nullptr) {
        if (static_cast<std::uint32_t>(classifier->matrix.rows()) != dim && !set.empty()) {
            throw InvalidInput("write_checkpoint: classifier dimension differs from information set");
        }
        put_le(bytes, std::uint32_t{1});
        put_le(bytes, static_cast<std::uint64_t>(classifier->matrix.cols()));
        put_le(bytes, std::uint32_t{classifier->normalized ? 1u : 0u});
        for (Eigen::Index i = 0; i < classifier->matrix.rows(); ++i)
            for (Eigen::Index j = 0; j < classifier->matrix.cols(); ++j)
                put_f64(bytes, classifier->matrix(i, j));
    } else {
        put_le(bytes, std::uint32_t{0});
    }
    write_file_atomically(path, bytes);
}

Checkpoint read_checkpoint(const fs::path& path) {
    const auto actual = file_size_or_throw(path);
    std::ifstream in = open_for_read(path);
    std::vector<char> bytes(static_cast<std::size_t>(actual));
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw IoError("read from '" + path.string() + "' failed");

    if (actual < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        throw FormatError("'" + path.string() + "' is not a DPCK checkpoint");
    }
    if (actual < kCheckpointHeaderBytes) {
        throw FormatError(length_mismatch(path, kCheckpointHeaderBytes, actual));
    }
    const char* p = bytes.data();
    const auto version = get_le<std::uint32_t>(p + 4);
    if (version != kCheckpointVersion) {
        throw VersionError("'" + path.string() + "': unsupported checkpoint version " +
                           std::to_string(version));
    }
    const auto dim = get_le<std::uint32_t>(p + 8);
    const auto task_count = get_le<std::uint32_t>(p + 12);
    const auto class_count = get_le<std::uint64_t>(p + 16);

    std::uint64_t expected = kCheckpointHeaderBytes + class_count * checkpoint_class_bytes(dim) + 4;
    if (actual < expected) throw FormatError(length_mismatch(path, expected, actual));

    std::size_t off = kCheckpointHeaderBytes;
    std::vector<std::pair<StatsKey, ClassStatistics>> entries;
    entries.reserve(static_cast<std::size_t>(class_count));
    for (std::uint64_t c = 0; c < class_count; ++c) {
        StatsKey key{get_le<std::uint32_t>(p + off), get_le<std::uint32_t>(p + off + 4)};
        ClassStatistics s;
        s.class_id = key.class_id;
        s.count = static_cast<std::size_t>(get_le<std::uint64_t>(p + off + 8));
        off += 16;
        s.prototype.resize(dim);
        for (std::uint32_t k = 0; k < dim; ++k, off += 8) s.prototype[k] = get_f64(p + off);
        s.covariance.resize(dim, dim);
        for (std::uint32_t i = 0; i < dim; ++i)
            for (std::uint32_t j = 0; j < dim; ++j, off += 8) s.covariance(i, j) = get_f64(p + off);
        entries.emplace_back(key, std::move(s));
    }

    Checkpoint cp;
    const auto has_classifier = get_le<std::uint32_t>(p + off);
    off += 4;
    if (has_classifier == 1) {
        expected += 12;
        if (actual < expected) throw FormatError(length_mismatch(path, expected, actual));
        const auto classes = get_le<std::uint64_t>(p + off);
        const auto normalized = get_le<std::uint32_t>(p + off + 8);
        off += 12;
        expected += 8ULL * dim * classes;
        if (actual != expected) throw FormatError(length_mismatch(path, expected, actual));
        ClassifierWeights w;
        w.normalized = normalized != 0;
        w.matrix.resize(dim, static_cast<Eigen::Index>(classes));
        for (std::uint32_t i = 0; i < dim; ++i)
            for (std::uint64_t j = 0; j < classes; ++j, off += 8)
                w.matrix(i, static_cast<Eigen::Index>(j)) = get_f64(p + off);
        cp.classifier = std::move(w);
    } else if (has_classifier != 0) {
        throw FormatError("'" + path.string() + "': corrupt classifier flag");
    } else if (actual != expected) {
        throw FormatError(length_mismatch(path, expected, actual));
    }
    cp.information = InformationSet::from_entries(dim, task_count, std::move(entries));
    return cp;
}

std::string read_magic(const fs::path& path) {
    std::ifstream in = open_for_read(path);
    char head[4];
    in.read(head, 4);
    if (in.gcount() < 4) return {};
    return std::string(head, 4);
}

std::string StreamNaming::file_name(TaskIndex task, TaskIndex backbone, Split split) const {
    return "task" + std::to_string(task) + "_backbone" + std::to_string(backbone) + "_" +
           to_string(split) + extension;
}

bool StreamLayout::has(TaskIndex task, TaskIndex backbone, Split split) const {
    return files.contains(DumpKey{task, backbone, split});
}

const fs::path& StreamLayout::path(TaskIndex task, TaskIndex backbone, Split split) const {
    const auto it = files.find(DumpKey{task, backbone, split});
    if (it == files.end()) {
        throw MissingFile("missing dump file '" + (directory / naming.file_name(task, backbone, split)).string() +
                          "'");
    }
    return it->second;
}

StreamLayout resolve_stream(const fs::path& directory, const StreamNaming& naming) {
    std::error_code ec;
    if (!fs::is_directory(directory, ec)) {
        throw IoError("'" + directory.string() + "' is not a readable directory");
    }
    std::string ext;
    for (char ch : naming.extension) {
        if (std::string("\\^$.|?*+()[]{}").find(ch) != std::string::npos) ext += '\\';
        ext += ch;
    }
    const std::regex pattern("task([0-9]+)_backbone([0-9]+)_(train|test)" + ext);

    StreamLayout layout;
    layout.directory = directory;
    layout.naming = naming;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        std::smatch m;
        if (!std::regex_match(name, m, pattern)) continue;
        const auto task = static_cast<TaskIndex>(std::stoul(m[1].str()));
        const auto backbone = static_cast<TaskIndex>(std::stoul(m[2].str()));
        if (task == 0 || backbone == 0) continue;
        const Split split = m[3].str() == "train" ? Split::train : Split::test;
        layout.files.emplace(DumpKey{task, backbone, split}, entry.path());
        if (split == Split::train) layout.tasks = std::max<std::size_t>(layout.tasks, task);
    }
    if (layout.tasks == 0) {
        throw MissingFile("no dump files in '" + directory.string() + "'; expected '" +
                          naming.file_name(1, 1, Split::train) + "'");
    }

    std::vector<std::string> missing;
    auto need = [&](TaskIndex t, TaskIndex s, Split split) {
        if (!layout.has(t, s, split)) missing.push_back(naming.file_name(t, s, split));
    };
    for (TaskIndex t = 1; t <= layout.tasks; ++t) {
        need(t, t, Split::train);
        if (t >= 2) need(t, t - 1, Split::train);
        for (TaskIndex i = 1; i <= t; ++i) need(i, t, Split::test);
    }
    if (!missing.empty()) {
        std::string msg = "dump stream in '" + directory.string() + "' is incomplete; missing:";
        for (const auto& m : missing) msg += " " + m;
        throw MissingFile(msg);
    }
    return layout;
}

}  // namespace dpcr
