#pragma once

// Data-parallel batch kernels. Each has a serial reference and an OpenMP version; the parallel
// versions write per-item results into preallocated slots and reduce in item order, so both
// produce bit-identical output for any thread count.

#include <vector>

#include "protokd/core.hpp"
#include "protokd/student.hpp"

namespace protokd::kernels {

std::vector<student::EncoderTrace> encode_batch_serial(const student::ToyEncoder& enc,
                                                       const std::vector<const Matrix*>& inputs);
std::vector<student::EncoderTrace> encode_batch_omp(const student::ToyEncoder& enc,
                                                    const std::vector<const Matrix*>& inputs);

/// Sum over items of encode_backward(trace_i, d_out_i).
std::vector<Matrix> backward_batch_serial(const student::ToyEncoder& enc,
                                          const std::vector<student::EncoderTrace>& traces,
                                          const std::vector<Vec>& d_outs);
std::vector<Matrix> backward_batch_omp(const student::ToyEncoder& enc,
                                       const std::vector<student::EncoderTrace>& traces,
                                       const std::vector<Vec>& d_outs);

/// out(i, j) = <queries[i], gallery[j]>
Matrix similarity_serial(const std::vector<Vec>& queries, const std::vector<Vec>& gallery);
Matrix similarity_omp(const std::vector<Vec>& queries, const std::vector<Vec>& gallery);

int max_threads();

}  // namespace protokd::kernels
