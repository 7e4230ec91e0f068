#pragma once

#include <cstdint>

#include "protokd/core.hpp"

namespace protokd::linalg {

/// Tallies multiply-adds by kernel category while a forward pass runs.
struct OpCounter {
    std::uint64_t attention = 0;   ///< Q K^T scores and attention-weighted value sums
    std::uint64_t projection = 0;  ///< Q/K/V/output projections
    std::uint64_t mlp = 0;         ///< position-wise feed-forward
};

/// C = A B
Matrix matmul(const Matrix& a, const Matrix& b, std::uint64_t* mas = nullptr);
/// C = A B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b, std::uint64_t* mas = nullptr);
/// C = A^T B
Matrix matmul_tn(const Matrix& a, const Matrix& b);

void add_inplace(Matrix& a, const Matrix& b);

/// Rows [first, first + count) as a new matrix.
Matrix slice_rows(const Matrix& m, std::size_t first, std::size_t count);

/// Vertical concatenation [top; bottom].
Matrix vstack(const Matrix& top, const Matrix& bottom);

}  // namespace protokd::linalg
