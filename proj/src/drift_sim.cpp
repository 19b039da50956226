#include "dpcr/drift_sim.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "dpcr/error.hpp"

namespace dpcr {

namespace {

// Substream tags.
constexpr std::uint64_t kStreamMeans = 1;
constexpr std::uint64_t kStreamLatent = 2;
constexpr std::uint64_t kStreamDrift = 3;
constexpr std::uint64_t kStreamScale = 4;
constexpr std::uint64_t kStreamOffset = 5;
constexpr std::uint64_t kStreamNoise = 6;

std::uint64_t split_tag(Split s) { return s == Split::train ? 0 : 1; }

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

Matrix random_rotation(Rng& rng, Eigen::Index d) {
    const Matrix g = gaussian_matrix(rng, d, d);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < d; ++j) {
        if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }
    if (q.determinant() < 0.0) q.col(0) *= -1.0;
    return q;
}

// Nearest orthogonal matrix (polar factor).
Matrix orthogonal_part(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

void check_task(const DriftScenario& sc, TaskIndex t, TaskIndex lowest, const char* what) {
    if (t < lowest || t > sc.tasks) {
        std::ostringstream os;
        os << what << ": task " << t << " outside " << lowest << ".." << sc.tasks;
        throw InvalidInput(os.str());
    }
}

Matrix drift_map(const DriftScenario& sc, TaskIndex t) {
    const auto d = static_cast<Eigen::Index>(sc.dim);
    const Matrix identity = Matrix::Identity(d, d);
    if (t <= 1 || sc.drift_kind == DriftKind::none) return identity;
    const double s = sc.drift_strength;

    switch (sc.drift_kind) {
    case DriftKind::none:
        return identity;
    case DriftKind::orthogonal: {
        Rng rng(sc.seed, kStreamDrift, t);
        const Matrix q = random_rotation(rng, d);
        return orthogonal_part((1.0 - s) * identity + s * q);
    }
    case DriftKind::orthogonal_plus_scale: {
        Rng rng(sc.seed, kStreamDrift, t);
        const Matrix q = random_rotation(rng, d);
        Rng scale_rng(sc.seed, kStreamScale, t);
        Vector scales(d);
        for (Eigen::Index i = 0; i < d; ++i) scales[i] = std::exp(s * (scale_rng.uniform() - 0.5));
        return orthogonal_part((1.0 - s) * identity + s * q) * scales.asDiagonal();
    }
    case DriftKind::affine: {
        Rng rng(sc.seed, kStreamDrift, t);
        const Matrix g = gaussian_matrix(rng, d, d) / std::sqrt(static_cast<double>(d));
        return (1.0 - s) * identity + s * g;
    }
    }
    return identity;
}

RowVector drift_offset(const DriftScenario& sc, TaskIndex t) {
    const auto d = static_cast<Eigen::Index>(sc.dim);
    if (t <= 1 || sc.drift_kind != DriftKind::affine) return RowVector::Zero(d);
    Rng rng(sc.seed, kStreamOffset, t);
    RowVector b(d);
    for (Eigen::Index i = 0; i < d; ++i) b[i] = rng.normal();
    const double norm = b.norm();
    if (norm > 0.0) b *= 0.25 * sc.mean_radius * sc.drift_strength / norm;
    return b;
}

struct BackboneTransform {
    Matrix map;
    RowVector offset;
};

BackboneTransform backbone_transform(const DriftScenario& sc, TaskIndex s) {
    const auto d = static_cast<Eigen::Index>(sc.dim);
    BackboneTransform tf{Matrix::Identity(d, d), RowVector::Zero(d)};
    for (TaskIndex t = 2; t <= s; ++t) {
        const Matrix a = drift_map(sc, t);
        tf.map = tf.map * a;
        tf.offset = tf.offset * a + drift_offset(sc, t);
    }
    return tf;
}

RowVector class_mean(const DriftScenario& sc, ClassId c) {
    const auto d = static_cast<Eigen::Index>(sc.dim);
    Rng rng(sc.seed, kStreamMeans, c);
    RowVector mu(d);
    double norm = 0.0;
    // Redraw in the (practically impossible) all-zero case.
    do {
        for (Eigen::Index i = 0; i < d; ++i) mu[i] = rng.normal();
        norm = mu.norm();
    } while (norm == 0.0);
    return mu * (sc.mean_radius / norm);
}

LabeledEmbeddings latent_block(const DriftScenario& sc, TaskIndex task, Split split) {
    const auto d = static_cast<Eigen::Index>(sc.dim);
    const std::size_t per_class = split == Split::train ? sc.train_per_class : sc.test_per_class;
    const auto classes = task_classes(sc, task);
    LabeledEmbeddings out;
    out.x.resize(static_cast<Eigen::Index>(classes.size() * per_class), d);
    out.labels.reserve(classes.size() * per_class);
    Rng rng(sc.seed, kStreamLatent, task, split_tag(split));
    Eigen::Index row = 0;
    for (const ClassId c : classes) {
        const RowVector mu = class_mean(sc, c);
        for (std::size_t j = 0; j < per_class; ++j, ++row) {
            for (Eigen::Index k = 0; k < d; ++k) {
                out.x(row, k) = mu[k] + sc.within_class_std * rng.normal();
            }
            out.labels.push_back(c);
        }
    }
    return out;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t a, std::uint64_t b)
    : engine_(splitmix64(splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ a) ^ b)) {}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

const char* to_string(DriftKind kind) {
    switch (kind) {
    case DriftKind::none: return "none";
    case DriftKind::orthogonal: return "orthogonal";
    case DriftKind::orthogonal_plus_scale: return "orthogonal-plus-scale";
    case DriftKind::affine: return "affine";
    }
    return "none";
}

DriftKind drift_kind_from_string(const std::string& name) {
    if (name == "none") return DriftKind::none;
    if (name == "orthogonal") return DriftKind::orthogonal;
    if (name == "orthogonal-plus-scale") return DriftKind::orthogonal_plus_scale;
    if (name == "affine") return DriftKind::affine;
    throw InvalidInput("unknown drift kind '" + name + "'");
}

const char* to_string(Split split) {
    return split == Split::train ? "train" : "test";
}

void DriftScenario::validate() const {
    auto positive = [](std::size_t v, const char* key) {
        if (v == 0) throw InvalidInput(std::string("scenario: ") + key + " must be positive");
    };
    positive(dim, "dim");
    positive(tasks, "tasks");
    positive(classes_per_task, "classes_per_task");
    positive(train_per_class, "train_per_class");
    positive(test_per_class, "test_per_class");
    auto finite_nonneg = [](double v, const char* key) {
        if (!std::isfinite(v) || v < 0.0) {
            throw InvalidInput(std::string("scenario: ") + key + " must be finite and nonnegative");
        }
    };
    finite_nonneg(mean_radius, "mean_radius");
    finite_nonneg(within_class_std, "within_class_std");
    finite_nonneg(observation_noise_std, "observation_noise_std");
    if (!std::isfinite(drift_strength) || drift_strength < 0.0 || drift_strength > 1.0) {
        throw InvalidInput("scenario: drift_strength must lie in [0, 1]");
    }
}

DriftScenario DriftScenario::standard() {
    DriftScenario sc;
    sc.seed = 7;
    sc.dim = 32;
    sc.tasks = 5;
    sc.classes_per_task = 5;
    sc.train_per_class = 200;
    sc.test_per_class = 100;
    sc.drift_kind = DriftKind::orthogonal;
    sc.drift_strength = 0.5;
    sc.observation_noise_std = 0.05 * sc.within_class_std;
    return sc;
}

std::vector<ClassId> task_classes(const DriftScenario& sc, TaskIndex task) {
    check_task(sc, task, 1, "task_classes");
    std::vector<ClassId> ids(sc.classes_per_task);
    for (std::size_t c = 0; c < sc.classes_per_task; ++c) {
        ids[c] = static_cast<ClassId>((task - 1) * sc.classes_per_task + c);
    }
    return ids;
}

LabeledEmbeddings embed(const DriftScenario& sc, TaskIndex task, Split split, TaskIndex backbone) {
    sc.validate();
    check_task(sc, task, 1, "embed");
    check_task(sc, backbone, 1, "embed backbone");
    LabeledEmbeddings out = latent_block(sc, task, split);
    const BackboneTransform tf = backbone_transform(sc, backbone);
    out.x = out.x * tf.map;
    out.x.rowwise() += tf.offset;
    if (sc.observation_noise_std > 0.0) {
        Rng rng(sc.seed, kStreamNoise, (static_cast<std::uint64_t>(task) << 32) | backbone,
                split_tag(split));
        for (Eigen::Index i = 0; i < out.x.rows(); ++i)
            for (Eigen::Index k = 0; k < out.x.cols(); ++k)
                out.x(i, k) += sc.observation_noise_std * rng.normal();
    }
    return out;
}

Matrix ground_truth_shift(const DriftScenario& sc, TaskIndex task) {
    sc.validate();
    check_task(sc, task, 2, "ground_truth_shift");
    return drift_map(sc, task);
}

RowVector ground_truth_offset(const DriftScenario& sc, TaskIndex task) {
    sc.validate();
    check_task(sc, task, 2, "ground_truth_offset");
    return drift_offset(sc, task);
}

Matrix backbone_map(const DriftScenario& sc, TaskIndex backbone) {
    sc.validate();
    check_task(sc, backbone, 1, "backbone_map");
    return backbone_transform(sc, backbone).map;
}

TaskBatch generate_task(const DriftScenario& sc, TaskIndex task) {
    sc.validate();
    check_task(sc, task, 1, "generate_task");
    TaskBatch batch;
    batch.task = task;
    LabeledEmbeddings curr = embed(sc, task, Split::train, task);
    batch.labels = std::move(curr.labels);
    batch.train_curr = std::move(curr.x);
    if (task >= 2) {
        batch.train_prev = embed(sc, task, Split::train, task - 1).x;
    } else {
        batch.train_prev = Matrix(0, static_cast<Eigen::Index>(sc.dim));
    }
    for (TaskIndex i = 1; i <= task; ++i) {
        batch.tests.push_back({i, embed(sc, i, Split::test, task)});
    }
    return batch;
}

}  // namespace dpcr
