#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "protokd/core.hpp"
#include "protokd/rsflag.hpp"

namespace protokd::prototype {

struct AggregationConfig {
    double beta = 10.0;
    double gamma = 2.0;
    double zeta = 3.0;
    double epsilon = 1e-8;
    /// Off by default: the class mean of teacher features is used as-is for scoring.
    bool renormalize_visual_prototype = false;

    void validate() const;
};

/// One aggregated teacher text prototype per class, with the full scoring/pruning/weight trail.
struct ClassPrototype {
    int class_index = 0;
    Vec prototype;
    std::vector<int> caption_indices;  ///< caption_index of each candidate, in scoring order
    std::set<int> kept_indices;        ///< positions (into scores/weights) that survived pruning
    Vec scores;
    std::vector<int> flags;
    Vec weights;  ///< zero for pruned positions
    RobustStats stats;
};

struct PruneResult {
    std::set<int> kept;
    RobustStats stats;
};

/// Mean of the class's teacher image features (not re-normalized).
Vec visual_prototype(const std::vector<Vec>& features, int class_index = -1);

Vec score_candidates(std::span<const double> v_hat, const std::vector<Vec>& caption_embeddings);

/// Keeps every index with z <= zeta (two-sided band around the median).
PruneResult prune(std::span<const double> scores, const AggregationConfig& cfg);

/// w_j proportional to exp(beta*s_j + gamma*flag_j) over kept indices, zero elsewhere.
Vec candidate_weights(std::span<const double> scores, std::span<const int> flags,
                      const std::set<int>& kept, const AggregationConfig& cfg);

ClassPrototype aggregate_class(const std::vector<Vec>& features,
                               const std::vector<rsflag::CaptionCandidate>& candidates,
                               const AggregationConfig& cfg);

/// Builds prototypes for every class present in the data, or only for `restrict_to->base`.
/// Classes are aggregated in parallel; each class touches only its own records.
std::map<int, ClassPrototype> build_all_prototypes(
    const std::vector<EmbeddingRecord>& dataset,
    const std::vector<rsflag::CaptionCandidate>& corpus, const AggregationConfig& cfg,
    const std::optional<ClassIndexSets>& restrict_to = std::nullopt);

}  // namespace protokd::prototype
