#include "protokd/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace protokd {

void ClassIndexSets::validate() const {
    for (int k : base) {
        if (novel.count(k)) {
            throw ValidationError("class " + std::to_string(k) + " is both base and novel");
        }
    }
}

std::set<int> ClassIndexSets::all() const {
    std::set<int> out = base;
    out.insert(novel.begin(), novel.end());
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ValidationError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool is_unit(std::span<const double> v, double tol) { return std::abs(norm(v) - 1.0) <= tol; }

Vec l2_normalize(std::span<const double> v) {
    if (!all_finite(v)) throw NumericalError("l2_normalize: non-finite entry");
    const double n = norm(v);
    if (n == 0.0) throw NumericalError("l2_normalize: zero vector has no direction");
    Vec out(v.begin(), v.end());
    for (double& x : out) x /= n;
    return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    return std::clamp(dot(a, b), -1.0, 1.0);
}

Vec softmax(std::span<const double> logits) {
    if (logits.empty()) throw ValidationError("softmax: empty input");
    if (!all_finite(logits)) throw ValidationError("softmax: non-finite logit");
    const double mx = *std::max_element(logits.begin(), logits.end());
    Vec out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        total += out[i];
    }
    for (double& p : out) p /= total;
    return out;
}

double median(std::span<const double> values) {
    if (values.empty()) throw ValidationError("median of empty set");
    Vec sorted(values.begin(), values.end());
    const std::size_t n = sorted.size();
    const std::size_t mid = n / 2;
    std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
    const double upper = sorted[mid];
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + mid);
    return 0.5 * (lower + upper);
}

RobustStats robust_stats(std::span<const double> scores, double epsilon) {
    if (scores.empty()) throw ValidationError("robust_stats: no scores");
    if (!(epsilon > 0.0)) throw ValidationError("robust_stats: epsilon must be positive");
    RobustStats st;
    st.median = median(scores);
    Vec dev(scores.size());
    for (std::size_t j = 0; j < scores.size(); ++j) dev[j] = std::abs(scores[j] - st.median);
    st.mad = median(dev);
    st.zscores.resize(scores.size());
    for (std::size_t j = 0; j < scores.size(); ++j) st.zscores[j] = dev[j] / (st.mad + epsilon);
    return st;
}

}  // namespace protokd
