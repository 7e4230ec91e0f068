// Serial reference vs OpenMP kernels on a fixed random workload.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include "protokd/kernels.hpp"
#include "protokd/student.hpp"

using namespace protokd;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
    student::ToyEncoderConfig cfg;
    cfg.dim = 64;
    cfg.seq_len = 16;
    cfg.prompt_tokens = 8;
    cfg.layers = 4;
    const auto enc = student::init_encoder(cfg);

    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Matrix> inputs(256, Matrix(cfg.seq_len, cfg.dim));
    for (auto& m : inputs) {
        for (auto& x : m.data) x = n(rng);
    }
    std::vector<const Matrix*> ptrs;
    for (const auto& m : inputs) ptrs.push_back(&m);

    const auto traces = kernels::encode_batch_serial(enc, ptrs);
    std::vector<Vec> d_outs;
    std::vector<Vec> queries, gallery;
    for (const auto& t : traces) {
        d_outs.push_back(t.output);
        queries.push_back(t.output);
    }
    for (int i = 0; i < 2048; ++i) gallery.push_back(queries[i % queries.size()]);

    std::printf("threads: %d\n", kernels::max_threads());
    std::printf("%-12s %12s %12s %8s %s\n", "kernel", "serial ms", "omp ms", "speedup", "identical");
    const auto row = [](const char* name, double s, double p, bool same) {
        std::printf("%-12s %12.3f %12.3f %8.2f %s\n", name, s, p, s / p, same ? "yes" : "NO");
    };

    {
        const bool same = kernels::encode_batch_omp(enc, ptrs).size() == traces.size() &&
                          kernels::encode_batch_omp(enc, ptrs).back().output == traces.back().output;
        row("encode", time_ms([&] { kernels::encode_batch_serial(enc, ptrs); }, 5),
            time_ms([&] { kernels::encode_batch_omp(enc, ptrs); }, 5), same);
    }
    {
        const bool same = kernels::backward_batch_serial(enc, traces, d_outs) ==
                          kernels::backward_batch_omp(enc, traces, d_outs);
        row("backward", time_ms([&] { kernels::backward_batch_serial(enc, traces, d_outs); }, 5),
            time_ms([&] { kernels::backward_batch_omp(enc, traces, d_outs); }, 5), same);
    }
    {
        const bool same = kernels::similarity_serial(queries, gallery) ==
                          kernels::similarity_omp(queries, gallery);
        row("similarity", time_ms([&] { kernels::similarity_serial(queries, gallery); }, 5),
            time_ms([&] { kernels::similarity_omp(queries, gallery); }, 5), same);
    }
    return 0;
}
