#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "protokd/core.hpp"
#include "protokd/distill.hpp"
#include "protokd/linalg.hpp"

namespace protokd::student {

/// Toy stand-in for one prompt-tuned transformer branch.
struct ToyEncoderConfig {
    int dim = 32;            ///< D
    int seq_len = 8;         ///< N content tokens per input
    int prompt_tokens = 4;   ///< P learnable tokens per prompted layer (0 disables prompting)
    int layers = 2;          ///< L
    int prompt_depth = -1;   ///< number of leading layers that receive prompts; -1 means all
    int ff_mult = 2;         ///< feed-forward hidden width = ff_mult * dim
    std::uint64_t seed = 1;

    void validate() const;
    int prompted_layers() const;
    int hidden() const { return ff_mult * dim; }
};

struct LayerWeights {
    Matrix wq, wk, wv, wo;  // D x D
    Matrix w1;              // D x H
    Matrix w2;              // H x D

    bool operator==(const LayerWeights&) const = default;
};

struct ToyEncoder {
    ToyEncoderConfig cfg;
    std::vector<LayerWeights> frozen;
    std::vector<Matrix> prompts;  ///< one P x D block per prompted layer
};

struct ToyStudent {
    ToyEncoder vision;
    ToyEncoder text;
    double tau_s = 1.0;
};

/// Frozen weights ~ N(0, 1/D) and prompts ~ N(0, 0.02^2), both from a generator seeded by cfg.seed.
ToyEncoder init_encoder(const ToyEncoderConfig& cfg);
ToyStudent init_student(const ToyEncoderConfig& vision, const ToyEncoderConfig& text,
                        double tau_s = 1.0);

struct LayerTrace {
    Matrix s;     ///< [prompts; content] input, T x D
    Matrix q, k, v;
    Matrix attn;  ///< row-softmax of q k^T / sqrt(D)
    Matrix ctx;   ///< attn v
    Matrix r;     ///< s + ctx wo
    Matrix g;     ///< tanh(r w1)
    std::size_t prompt_rows = 0;
};

struct EncoderTrace {
    std::vector<LayerTrace> layers;
    Vec pooled;  ///< mean over content tokens, before normalization
    Vec output;  ///< unit vector
};

/// Deep-prompted forward pass: per layer prepend that layer's prompts, single-head attention and
/// a tanh feed-forward (both residual), then drop the prompt rows. Output is the l2-normalized
/// mean of the final content tokens.
Vec encode(const ToyEncoder& enc, const Matrix& tokens, linalg::OpCounter* counter = nullptr);
EncoderTrace encode_traced(const ToyEncoder& enc, const Matrix& tokens,
                           linalg::OpCounter* counter = nullptr);

/// Gradient of <d_out, output> w.r.t. each prompted layer's prompt block.
std::vector<Matrix> encode_backward(const ToyEncoder& enc, const EncoderTrace& trace,
                                    std::span<const double> d_out);

struct MultiplyAddCounts {
    std::uint64_t attention = 0;
    std::uint64_t projection = 0;
    std::uint64_t mlp = 0;
};

/// Multiply-adds of one forward pass, measured by running the instrumented kernels.
MultiplyAddCounts count_multiply_adds(const ToyEncoderConfig& cfg);

/// Training data in column space: column c of the logits is class `classes[c]`.
struct TrainingSet {
    std::vector<Matrix> image_tokens;
    std::vector<Vec> teacher_image;   ///< empty when no teacher image guidance
    std::vector<int> labels;          ///< column index per sample
    std::vector<int> classes;
    std::vector<Matrix> class_tokens; ///< text-branch input per column
    std::map<int, Vec> prototypes;    ///< teacher prototype per class index (guided classes only)

    void validate(const ToyStudent& student) const;
};

struct StudentGradients {
    std::vector<Matrix> vision_prompts;
    std::vector<Matrix> text_prompts;
    double tau_s = 0.0;
};

enum class ExecPolicy { Serial, Parallel };

struct StepResult {
    distill::LossBreakdown loss;
    StudentGradients grads;
};

/// Loss and exact gradients w.r.t. every prompt entry and tau_s for the given batch.
/// Throws NumericalError naming the parameter if any gradient is non-finite.
StepResult backward(const ToyStudent& student, const TrainingSet& data,
                    std::span<const std::size_t> batch, const distill::DistillConfig& cfg,
                    long step, long total_steps, ExecPolicy policy = ExecPolicy::Parallel);

/// Loss only (no gradients).
distill::LossBreakdown evaluate_loss(const ToyStudent& student, const TrainingSet& data,
                                     std::span<const std::size_t> batch,
                                     const distill::DistillConfig& cfg, long step,
                                     long total_steps);

struct TrainOptions {
    int epochs = 100;
    double learning_rate = 0.05;
    std::optional<double> scale_learning_rate;  ///< step size for log(tau_s); unset = learning_rate
    int batch_size = 0;  ///< 0 = full batch
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    ExecPolicy policy = ExecPolicy::Parallel;
};

struct StudentParams {
    std::vector<Matrix> vision_prompts;
    std::vector<Matrix> text_prompts;
    double tau_s = 1.0;
};

struct TrainState {
    long step = 0;
    double learning_rate = 0.0;
    StudentParams params_snapshot;
    std::vector<distill::LossBreakdown> loss_history;
};

long total_steps(std::size_t n_samples, const TrainOptions& opts);

/// Plain gradient descent on prompts and log(tau_s). Frozen weights are never written.
TrainState train(ToyStudent& student, const TrainingSet& data, const distill::DistillConfig& cfg,
                 const TrainOptions& opts);

std::vector<Vec> student_text_embeddings(const ToyStudent& student,
                                         const std::vector<Matrix>& class_tokens,
                                         ExecPolicy policy = ExecPolicy::Parallel);
std::vector<Vec> student_image_embeddings(const ToyStudent& student,
                                          const std::vector<Matrix>& image_tokens,
                                          ExecPolicy policy = ExecPolicy::Parallel);

}  // namespace protokd::student
