#include "protokd/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "protokd/kernels.hpp"

namespace protokd::metrics {

ClassificationReport classify(const std::vector<Vec>& image_feats,
                              const std::vector<Vec>& class_embeddings,
                              const std::vector<int>& class_indices,
                              const std::vector<int>& labels) {
    if (image_feats.empty() || class_embeddings.empty()) {
        throw ValidationError("classify: empty images or classes");
    }
    if (image_feats.size() != labels.size()) {
        throw ValidationError("classify: one label per image required");
    }
    if (class_indices.size() != class_embeddings.size()) {
        throw ValidationError("classify: one class index per embedding required");
    }
    const Matrix sims = kernels::similarity_omp(image_feats, class_embeddings);
    ClassificationReport rep;
    std::map<int, long> seen;
    std::map<int, long> hit;
    for (std::size_t i = 0; i < image_feats.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < class_embeddings.size(); ++c) {
            if (sims(i, c) > sims(i, best)) best = c;
        }
        const bool ok = class_indices[best] == labels[i];
        ++seen[labels[i]];
        if (ok) {
            ++hit[labels[i]];
            ++rep.n_correct;
        }
    }
    rep.n_total = static_cast<long>(image_feats.size());
    rep.top1 = 100.0 * static_cast<double>(rep.n_correct) / static_cast<double>(rep.n_total);
    for (const auto& [k, n] : seen) {
        rep.per_class[k] = 100.0 * static_cast<double>(hit[k]) / static_cast<double>(n);
    }
    return rep;
}

ClassificationReport classify(const std::vector<Vec>& image_feats,
                              const std::vector<Vec>& class_embeddings,
                              const std::vector<int>& labels) {
    std::vector<int> idx(class_embeddings.size());
    std::iota(idx.begin(), idx.end(), 0);
    return classify(image_feats, class_embeddings, idx, labels);
}

double harmonic_mean(double base, double novel) {
    if (base < 0.0 || novel < 0.0) throw ValidationError("harmonic_mean: negative accuracy");
    if (base + novel == 0.0) return 0.0;
    return 2.0 * base * novel / (base + novel);
}

std::vector<double> retrieval_eval(const std::vector<Vec>& queries, const std::vector<Vec>& gallery,
                                   const std::vector<std::set<int>>& relevance,
                                   const std::vector<int>& ks) {
    if (gallery.empty()) throw ValidationError("retrieval_eval: empty gallery");
    if (queries.empty()) throw ValidationError("retrieval_eval: no queries");
    if (relevance.size() != queries.size()) {
        throw ValidationError("retrieval_eval: one relevance set per query required");
    }
    for (std::size_t q = 0; q < relevance.size(); ++q) {
        if (relevance[q].empty()) {
            throw ValidationError("retrieval_eval: query " + std::to_string(q) +
                                  " has no relevant gallery items");
        }
    }
    for (const auto& rel : relevance) {
        for (int r : rel) {
            if (r < 0 || static_cast<std::size_t>(r) >= gallery.size()) {
                throw ValidationError("retrieval_eval: relevant index out of range");
            }
        }
    }
    for (int k : ks) {
        if (k <= 0) throw ValidationError("retrieval_eval: K must be positive");
    }
    const Matrix sims = kernels::similarity_omp(queries, gallery);

    // Rank of the best relevant item = number of gallery items ordered strictly before it.
    std::vector<std::size_t> best_rank(queries.size());
    const auto nq = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t q = 0; q < nq; ++q) {
        std::size_t best = gallery.size();
        for (int r : relevance[q]) {
            const double sr = sims(q, r);
            std::size_t ahead = 0;
            for (std::size_t j = 0; j < gallery.size(); ++j) {
                const double sj = sims(q, j);
                if (sj > sr || (sj == sr && static_cast<int>(j) < r)) ++ahead;
            }
            best = std::min(best, ahead);
        }
        best_rank[q] = best;
    }

    std::vector<double> out;
    for (int k : ks) {
        const auto hits = std::count_if(best_rank.begin(), best_rank.end(),
                                        [k](std::size_t r) { return r < static_cast<std::size_t>(k); });
        out.push_back(100.0 * static_cast<double>(hits) / static_cast<double>(queries.size()));
    }
    return out;
}

double mean_recall(const std::array<double, 3>& i2t, const std::array<double, 3>& t2i) {
    double s = 0.0;
    for (const auto* dir : {&i2t, &t2i}) {
        for (double v : *dir) {
            if (v < 0.0 || v > 100.0) throw ValidationError("mean_recall: recall outside [0, 100]");
            s += v;
        }
    }
    return s / 6.0;
}

RetrievalReport retrieval_report(const std::array<double, 3>& i2t,
                                 const std::array<double, 3>& t2i) {
    return RetrievalReport{i2t, t2i, mean_recall(i2t, t2i)};
}

BaseNovelReport base_novel_eval(const std::vector<Vec>& image_feats,
                                const std::map<int, Vec>& class_embeddings,
                                const ClassIndexSets& sets, const std::vector<int>& labels) {
    sets.validate();
    if (image_feats.size() != labels.size()) {
        throw ValidationError("base_novel_eval: one label per image required");
    }
    const auto side = [&](const std::set<int>& classes, const char* name) {
        std::vector<Vec> emb;
        std::vector<int> idx;
        for (int k : classes) {
            const auto it = class_embeddings.find(k);
            if (it == class_embeddings.end()) {
                throw ValidationError(std::string("base_novel_eval: no embedding for ") + name +
                                      " class " + std::to_string(k));
            }
            emb.push_back(it->second);
            idx.push_back(k);
        }
        std::vector<Vec> feats;
        std::vector<int> ys;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (classes.count(labels[i])) {
                feats.push_back(image_feats[i]);
                ys.push_back(labels[i]);
            }
        }
        if (feats.empty() || emb.empty()) {
            throw ValidationError(std::string("base_novel_eval: no ") + name + " samples");
        }
        return classify(feats, emb, idx, ys).top1;
    };
    BaseNovelReport rep;
    rep.base = side(sets.base, "base");
    rep.novel = side(sets.novel, "novel");
    rep.hm = harmonic_mean(rep.base, rep.novel);
    return rep;
}

}  // namespace protokd::metrics
