#include "protokd/linalg.hpp"

#include <algorithm>

namespace protokd::linalg {

Matrix matmul(const Matrix& a, const Matrix& b, std::uint64_t* mas) {
    if (a.cols != b.rows) throw ValidationError("matmul: inner dimensions differ");
    Matrix c(a.rows, b.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            const double* brow = &b.data[k * b.cols];
            double* crow = &c.data[i * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    if (mas) *mas += static_cast<std::uint64_t>(a.rows) * a.cols * b.cols;
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b, std::uint64_t* mas) {
    if (a.cols != b.cols) throw ValidationError("matmul_nt: inner dimensions differ");
    Matrix c(a.rows, b.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.rows; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
            c(i, j) = s;
        }
    }
    if (mas) *mas += static_cast<std::uint64_t>(a.rows) * b.rows * a.cols;
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw ValidationError("matmul_tn: inner dimensions differ");
    Matrix c(a.cols, b.cols, 0.0);
    for (std::size_t k = 0; k < a.rows; ++k) {
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = a(k, i);
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aki * b(k, j);
        }
    }
    return c;
}

void add_inplace(Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw ValidationError("add_inplace: shape mismatch");
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

Matrix slice_rows(const Matrix& m, std::size_t first, std::size_t count) {
    Matrix out(count, m.cols);
    std::copy(m.data.begin() + static_cast<std::ptrdiff_t>(first * m.cols),
              m.data.begin() + static_cast<std::ptrdiff_t>((first + count) * m.cols),
              out.data.begin());
    return out;
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
    if (top.rows > 0 && bottom.rows > 0 && top.cols != bottom.cols) {
        throw ValidationError("vstack: column counts differ");
    }
    Matrix out(top.rows + bottom.rows, top.rows > 0 ? top.cols : bottom.cols);
    std::copy(top.data.begin(), top.data.end(), out.data.begin());
    std::copy(bottom.data.begin(), bottom.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(top.data.size()));
    return out;
}

}  // namespace protokd::linalg
