#pragma once

#include <array>
#include <map>
#include <set>
#include <vector>

#include "protokd/core.hpp"

namespace protokd::metrics {

struct ClassificationReport {
    double top1 = 0.0;  ///< percent
    std::map<int, double> per_class;  ///< percent, keyed by class index
    long n_correct = 0;
    long n_total = 0;
};

struct BaseNovelReport {
    double base = 0.0;
    double novel = 0.0;
    double hm = 0.0;
};

struct RetrievalReport {
    std::array<double, 3> i2t{};  ///< R@1, R@5, R@10
    std::array<double, 3> t2i{};
    double mr = 0.0;
};

/// Argmax-cosine classification. `class_indices[c]` names column c of `class_embeddings`;
/// `labels` are class indices. Ties go to the lowest column.
ClassificationReport classify(const std::vector<Vec>& image_feats,
                              const std::vector<Vec>& class_embeddings,
                              const std::vector<int>& class_indices, const std::vector<int>& labels);

/// Convenience overload with class index == column.
ClassificationReport classify(const std::vector<Vec>& image_feats,
                              const std::vector<Vec>& class_embeddings,
                              const std::vector<int>& labels);

double harmonic_mean(double base, double novel);

/// Recall@K (percent) for each K: a query hits when any of its top-K gallery items (ties by
/// lower gallery index) is relevant. `relevance[q]` holds gallery positions.
std::vector<double> retrieval_eval(const std::vector<Vec>& queries, const std::vector<Vec>& gallery,
                                   const std::vector<std::set<int>>& relevance,
                                   const std::vector<int>& ks = {1, 5, 10});

double mean_recall(const std::array<double, 3>& i2t, const std::array<double, 3>& t2i);

RetrievalReport retrieval_report(const std::array<double, 3>& i2t, const std::array<double, 3>& t2i);

/// Base accuracy among base classes on base samples, novel accuracy among novel classes on
/// novel samples, and their harmonic mean. `class_embeddings` is keyed by class index.
BaseNovelReport base_novel_eval(const std::vector<Vec>& image_feats,
                                const std::map<int, Vec>& class_embeddings,
                                const ClassIndexSets& sets, const std::vector<int>& labels);

}  // namespace protokd::metrics
