#include "protokd/kernels.hpp"

#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace protokd::kernels {

using student::EncoderTrace;
using student::ToyEncoder;

namespace {

std::vector<Matrix> zero_prompt_grads(const ToyEncoder& enc) {
    std::vector<Matrix> out;
    for (const auto& p : enc.prompts) out.emplace_back(p.rows, p.cols, 0.0);
    return out;
}

void accumulate(std::vector<Matrix>& total, const std::vector<Matrix>& part) {
    for (std::size_t l = 0; l < total.size(); ++l) {
        for (std::size_t i = 0; i < total[l].data.size(); ++i) total[l].data[i] += part[l].data[i];
    }
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::vector<EncoderTrace> encode_batch_serial(const ToyEncoder& enc,
                                              const std::vector<const Matrix*>& inputs) {
    std::vector<EncoderTrace> out;
    out.reserve(inputs.size());
    for (const Matrix* x : inputs) out.push_back(student::encode_traced(enc, *x));
    return out;
}

std::vector<EncoderTrace> encode_batch_omp(const ToyEncoder& enc,
                                           const std::vector<const Matrix*>& inputs) {
    std::vector<EncoderTrace> out(inputs.size());
    std::vector<std::exception_ptr> errors(inputs.size());
    const auto n = static_cast<std::ptrdiff_t>(inputs.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[i] = student::encode_traced(enc, *inputs[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    rethrow_first(errors);
    return out;
}

std::vector<Matrix> backward_batch_serial(const ToyEncoder& enc,
                                          const std::vector<EncoderTrace>& traces,
                                          const std::vector<Vec>& d_outs) {
    if (traces.size() != d_outs.size()) {
        throw ValidationError("backward_batch: traces and output gradients differ in count");
    }
    std::vector<Matrix> total = zero_prompt_grads(enc);
    for (std::size_t i = 0; i < traces.size(); ++i) {
        accumulate(total, student::encode_backward(enc, traces[i], d_outs[i]));
    }
    return total;
}

std::vector<Matrix> backward_batch_omp(const ToyEncoder& enc,
                                       const std::vector<EncoderTrace>& traces,
                                       const std::vector<Vec>& d_outs) {
    if (traces.size() != d_outs.size()) {
        throw ValidationError("backward_batch: traces and output gradients differ in count");
    }
    std::vector<Matrix> total = zero_prompt_grads(enc);
    if (total.empty()) return total;
    std::vector<std::vector<Matrix>> parts(traces.size());
    std::vector<std::exception_ptr> errors(traces.size());
    const auto n = static_cast<std::ptrdiff_t>(traces.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            parts[i] = student::encode_backward(enc, traces[i], d_outs[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    rethrow_first(errors);
    // Fixed-order reduction keeps the sum identical to the serial kernel.
    for (const auto& p : parts) accumulate(total, p);
    return total;
}

Matrix similarity_serial(const std::vector<Vec>& queries, const std::vector<Vec>& gallery) {
    Matrix out(queries.size(), gallery.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t j = 0; j < gallery.size(); ++j) out(i, j) = dot(queries[i], gallery[j]);
    }
    return out;
}

Matrix similarity_omp(const std::vector<Vec>& queries, const std::vector<Vec>& gallery) {
    Matrix out(queries.size(), gallery.size());
    if (!queries.empty() && !gallery.empty()) {
        for (const auto& q : queries) {
            if (q.size() != gallery.front().size()) {
                throw ValidationError("similarity: query/gallery dimension mismatch");
            }
        }
        for (const auto& g : gallery) {
            if (g.size() != gallery.front().size()) {
                throw ValidationError("similarity: ragged gallery");
            }
        }
    }
    const auto nq = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < nq; ++i) {
        for (std::size_t j = 0; j < gallery.size(); ++j) {
            const Vec& q = queries[i];
            const Vec& g = gallery[j];
            double s = 0.0;
            for (std::size_t d = 0; d < q.size(); ++d) s += q[d] * g[d];
            out(i, j) = s;
        }
    }
    return out;
}

}  // namespace protokd::kernels
