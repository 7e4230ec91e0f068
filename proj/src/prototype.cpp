#include "protokd/prototype.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

namespace protokd::prototype {

void AggregationConfig::validate() const {
    if (!(beta > 0.0)) throw ValidationError("aggregation: beta must be > 0");
    if (!(gamma >= 0.0)) throw ValidationError("aggregation: gamma must be >= 0");
    if (!(zeta > 0.0)) throw ValidationError("aggregation: zeta must be > 0");
    if (!(epsilon > 0.0)) throw ValidationError("aggregation: epsilon must be > 0");
}

Vec visual_prototype(const std::vector<Vec>& features, int class_index) {
    if (features.empty()) {
        throw ValidationError("visual_prototype: class " + std::to_string(class_index) +
                              " has no image features");
    }
    const std::size_t dim = features.front().size();
    Vec mean(dim, 0.0);
    for (const auto& f : features) {
        if (f.size() != dim) throw ValidationError("visual_prototype: dimension mismatch");
        for (std::size_t d = 0; d < dim; ++d) mean[d] += f[d];
    }
    for (double& x : mean) x /= static_cast<double>(features.size());
    return mean;
}

Vec score_candidates(std::span<const double> v_hat, const std::vector<Vec>& caption_embeddings) {
    Vec scores;
    scores.reserve(caption_embeddings.size());
    for (const auto& t : caption_embeddings) scores.push_back(dot(v_hat, t));
    return scores;
}

PruneResult prune(std::span<const double> scores, const AggregationConfig& cfg) {
    PruneResult out;
    out.stats = robust_stats(scores, cfg.epsilon);
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (out.stats.zscores[j] <= cfg.zeta) out.kept.insert(static_cast<int>(j));
    }
    return out;
}

Vec candidate_weights(std::span<const double> scores, std::span<const int> flags,
                      const std::set<int>& kept, const AggregationConfig& cfg) {
    if (scores.size() != flags.size()) {
        throw ValidationError("candidate_weights: scores and flags differ in length");
    }
    if (kept.empty()) throw ValidationError("candidate_weights: empty kept set");
    Vec logits;
    logits.reserve(kept.size());
    for (int j : kept) {
        if (j < 0 || static_cast<std::size_t>(j) >= scores.size()) {
            throw ValidationError("candidate_weights: kept index out of range");
        }
        logits.push_back(cfg.beta * scores[j] + cfg.gamma * flags[j]);
    }
    const Vec p = softmax(logits);
    Vec w(scores.size(), 0.0);
    std::size_t i = 0;
    for (int j : kept) w[j] = p[i++];
    return w;
}

ClassPrototype aggregate_class(const std::vector<Vec>& features,
                               const std::vector<rsflag::CaptionCandidate>& candidates,
                               const AggregationConfig& cfg) {
    cfg.validate();
    if (candidates.empty()) throw ValidationError("aggregate_class: no caption candidates");
    ClassPrototype out;
    out.class_index = candidates.front().class_index;

    std::vector<Vec> embeddings;
    std::set<int> seen;
    for (const auto& c : candidates) {
        if (c.class_index != out.class_index) {
            throw ValidationError("aggregate_class: candidates span several classes");
        }
        if (!seen.insert(c.caption_index).second) {
            throw ValidationError("aggregate_class: duplicate caption index " +
                                  std::to_string(c.caption_index) + " in class " +
                                  std::to_string(c.class_index));
        }
        if (!c.embedding) {
            throw ValidationError("aggregate_class: class " + std::to_string(c.class_index) +
                                  " caption " + std::to_string(c.caption_index) +
                                  " has no embedding");
        }
        if (!c.rs_flag) {
            throw ValidationError("aggregate_class: class " + std::to_string(c.class_index) +
                                  " caption " + std::to_string(c.caption_index) +
                                  " is not flag-annotated");
        }
        embeddings.push_back(*c.embedding);
        out.flags.push_back(*c.rs_flag);
        out.caption_indices.push_back(c.caption_index);
    }

    Vec v_hat = visual_prototype(features, out.class_index);
    if (cfg.renormalize_visual_prototype) v_hat = l2_normalize(v_hat);

    out.scores = score_candidates(v_hat, embeddings);
    auto pruned = prune(out.scores, cfg);
    out.kept_indices = std::move(pruned.kept);
    out.stats = std::move(pruned.stats);
    out.weights = candidate_weights(out.scores, out.flags, out.kept_indices, cfg);

    Vec sum(embeddings.front().size(), 0.0);
    for (int j : out.kept_indices) {
        for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += out.weights[j] * embeddings[j][d];
    }
    try {
        out.prototype = l2_normalize(sum);
    } catch (const NumericalError&) {
        throw NumericalError("degenerate prototype for class " + std::to_string(out.class_index) +
                             ": weighted caption sum is the zero vector");
    }
    return out;
}

std::map<int, ClassPrototype> build_all_prototypes(
    const std::vector<EmbeddingRecord>& dataset,
    const std::vector<rsflag::CaptionCandidate>& corpus, const AggregationConfig& cfg,
    const std::optional<ClassIndexSets>& restrict_to) {
    cfg.validate();
    std::map<int, std::vector<Vec>> features;
    for (const auto& r : dataset) {
        if (r.label) features[*r.label].push_back(r.vec);
    }
    std::map<int, std::vector<rsflag::CaptionCandidate>> captions;
    for (const auto& c : corpus) captions[c.class_index].push_back(c);

    std::set<int> scope;
    if (restrict_to) {
        restrict_to->validate();
        scope = restrict_to->base;
    } else {
        for (const auto& [k, _] : features) scope.insert(k);
        for (const auto& [k, _] : captions) scope.insert(k);
    }

    std::string missing;
    for (int k : scope) {
        const bool has_f = features.count(k) > 0;
        const bool has_c = captions.count(k) > 0;
        if (!has_f || !has_c) {
            missing += " " + std::to_string(k) + (has_f ? "(captions)" : has_c ? "(features)"
                                                                              : "(features,captions)");
        }
    }
    if (!missing.empty()) throw ValidationError("missing class data:" + missing);

    const std::vector<int> classes(scope.begin(), scope.end());
    std::vector<ClassPrototype> built(classes.size());
    std::vector<std::exception_ptr> errors(classes.size());
    const auto n = static_cast<std::ptrdiff_t>(classes.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const int k = classes[i];
        try {
            built[i] = aggregate_class(features.at(k), captions.at(k), cfg);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::map<int, ClassPrototype> out;
    for (std::size_t i = 0; i < classes.size(); ++i) out.emplace(classes[i], std::move(built[i]));
    return out;
}

}  // namespace protokd::prototype
