#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace protokd {

using Vec = std::vector<double>;

/// Input violates a documented precondition (bad shape, empty set, out-of-range label).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Arithmetic produced something unusable: zero vector where a direction is needed,
/// non-finite loss or gradient, degenerate prototype.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

struct EmbeddingRecord {
    std::string id;
    std::optional<int> label;
    std::string split = "train";
    Vec vec;
};

struct ClassIndexSets {
    std::set<int> base;
    std::set<int> novel;

    /// Throws ValidationError if base and novel overlap.
    void validate() const;
    std::set<int> all() const;
};

struct RobustStats {
    double median = 0.0;
    double mad = 0.0;
    Vec zscores;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

/// Throws NumericalError on a zero (or non-finite) input.
Vec l2_normalize(std::span<const double> v);

/// Dot product of two unit vectors, clamped to [-1, 1] to absorb rounding.
double cosine(std::span<const double> a, std::span<const double> b);

/// Max-subtracted softmax. Throws ValidationError on empty or non-finite input.
Vec softmax(std::span<const double> logits);

/// Order-statistic median; even counts use the midpoint of the two central values.
double median(std::span<const double> values);

/// Median, MAD and robust z-scores |s - median| / (mad + epsilon).
RobustStats robust_stats(std::span<const double> scores, double epsilon = 1e-8);

bool all_finite(std::span<const double> v);
bool is_unit(std::span<const double> v, double tol = 1e-6);

}  // namespace protokd
