#include "dpcr/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include "dpcr/error.hpp"

namespace dpcr {

ClassifierWeights reconstruct_classifier(const InformationSet& set,
                                         const std::vector<ClassStatistics>& new_stats,
                                         double gamma) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw InvalidInput("reconstruct_classifier: gamma must be a nonnegative finite value");
    }
    Eigen::Index d = set.dim();
    if (set.empty() && !new_stats.empty()) d = new_stats.front().dim();

    std::size_t total = set.class_span();
    std::set<ClassId> new_ids;
    for (const auto& s : new_stats) {
        if (s.dim() != d) {
            std::ostringstream os;
            os << "reconstruct_classifier: class " << s.class_id << " has dimension " << s.dim()
               << ", expected " << d;
            throw InvalidInput(os.str());
        }
        if (set.contains_class(s.class_id) || !new_ids.insert(s.class_id).second) {
            throw Conflict("reconstruct_classifier: class id " + std::to_string(s.class_id) +
                           " supplied twice");
        }
        total = std::max(total, static_cast<std::size_t>(s.class_id) + 1);
    }

    Matrix phi = Matrix::Zero(d, d);
    Matrix h = Matrix::Zero(d, static_cast<Eigen::Index>(total));
    auto add = [&](const ClassStatistics& s) {
        phi += s.covariance;
        h.col(s.class_id) += static_cast<double>(s.count) * s.prototype.transpose();
    };
    for (const auto& [key, s] : set.entries()) add(s);
    // New classes in ascending id order regardless of how they were passed.
    std::vector<const ClassStatistics*> ordered;
    for (const auto& s : new_stats) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const auto* a, const auto* b) { return a->class_id < b->class_id; });
    for (const auto* s : ordered) add(*s);

    try {
        return {spd_solve(phi, gamma, h), false};
    } catch (const SingularSystem& e) {
        std::ostringstream os;
        os << "reconstruct_classifier: regularized covariance is singular with gamma = " << gamma
           << "; use gamma > 0 (" << e.what() << ")";
        throw SingularSystem(os.str(), e.smallest_pivot());
    }
}

ClassifierWeights category_normalize(const ClassifierWeights& w) {
    ClassifierWeights out = w;
    if (w.normalized) return out;
    for (Eigen::Index j = 0; j < out.matrix.cols(); ++j) {
        const double norm = out.matrix.col(j).norm();
        if (norm > 0.0) out.matrix.col(j) /= norm;
    }
    out.normalized = true;
    return out;
}

std::vector<ClassId> predict(const ClassifierWeights& w, const Matrix& embeddings) {
    if (embeddings.cols() != w.matrix.rows()) {
        std::ostringstream os;
        os << "predict: embeddings have dimension " << embeddings.cols() << ", classifier has "
           << w.matrix.rows();
        throw InvalidInput(os.str());
    }
    const Matrix logits = embeddings * w.matrix;
    if (!logits.allFinite()) {
        throw InvalidInput("predict: non-finite logits");
    }
    std::vector<bool> live(static_cast<std::size_t>(w.matrix.cols()));
    bool any_live = false;
    for (Eigen::Index j = 0; j < w.matrix.cols(); ++j) {
        live[j] = !w.matrix.col(j).isZero(0.0);
        any_live = any_live || live[j];
    }
    if (!any_live) std::fill(live.begin(), live.end(), true);

    std::vector<ClassId> labels(static_cast<std::size_t>(embeddings.rows()), 0);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        ClassId arg = 0;
        bool found = false;
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            if (!live[j]) continue;
            if (!found || logits(i, j) > best) {
                best = logits(i, j);
                arg = static_cast<ClassId>(j);
                found = true;
            }
        }
        labels[i] = arg;
    }
    return labels;
}

std::vector<ClassId> ncm_predict(const InformationSet& set, const Matrix& embeddings) {
    std::vector<const ClassStatistics*> protos;
    for (const auto& [key, s] : set.entries()) {
        if (s.count > 0) protos.push_back(&s);
    }
    if (protos.empty()) {
        throw InvalidInput("ncm_predict: information set holds no prototypes");
    }
    std::sort(protos.begin(), protos.end(),
              [](const auto* a, const auto* b) { return a->class_id < b->class_id; });
    if (embeddings.cols() != set.dim()) {
        std::ostringstream os;
        os << "ncm_predict: embeddings have dimension " << embeddings.cols()
           << ", prototypes have " << set.dim();
        throw InvalidInput(os.str());
    }
    require_finite(embeddings, "ncm_predict");

    std::vector<ClassId> labels(static_cast<std::size_t>(embeddings.rows()), 0);
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
        const auto x = embeddings.row(i);
        double best = std::numeric_limits<double>::infinity();
        ClassId arg = protos.front()->class_id;
        for (const auto* p : protos) {
            const double dist = (x - p->prototype).squaredNorm();
            if (dist < best) {
                best = dist;
                arg = p->class_id;
            }
        }
        labels[i] = arg;
    }
    return labels;
}

}  // namespace dpcr
