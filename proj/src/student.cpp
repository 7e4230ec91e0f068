#include "protokd/student.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "protokd/kernels.hpp"

namespace protokd::student {

using linalg::matmul;
using linalg::matmul_nt;
using linalg::matmul_tn;

void ToyEncoderConfig::validate() const {
    if (dim <= 0 || seq_len <= 0 || layers <= 0 || ff_mult <= 0) {
        throw ValidationError("encoder: dim, seq_len, layers and ff_mult must be positive");
    }
    if (prompt_tokens < 0) throw ValidationError("encoder: prompt_tokens must be >= 0");
    if (prompt_depth < -1 || prompt_depth > layers) {
        throw ValidationError("encoder: prompt_depth must be -1 or within [0, layers]");
    }
}

int ToyEncoderConfig::prompted_layers() const {
    if (prompt_tokens == 0) return 0;
    return prompt_depth < 0 ? layers : prompt_depth;
}

namespace {

Matrix gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double stddev) {
    std::normal_distribution<double> normal(0.0, stddev);
    Matrix m(rows, cols);
    for (double& x : m.data) x = normal(rng);
    return m;
}

void row_softmax(Matrix& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        auto row = m.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double& x : row) {
            x = std::exp(x - mx);
            z += x;
        }
        for (double& x : row) x /= z;
    }
}

void check_finite(const Matrix& m, const std::string& path) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (!std::isfinite(m(i, j))) {
                throw NumericalError("non-finite gradient at " + path + "[token=" +
                                     std::to_string(i) + "][dim=" + std::to_string(j) + "]");
            }
        }
    }
}

}  // namespace

ToyEncoder init_encoder(const ToyEncoderConfig& cfg) {
    cfg.validate();
    ToyEncoder enc;
    enc.cfg = cfg;
    std::mt19937_64 rng(cfg.seed);
    const auto d = static_cast<std::size_t>(cfg.dim);
    const auto h = static_cast<std::size_t>(cfg.hidden());
    const double wstd = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    const double hstd = 1.0 / std::sqrt(static_cast<double>(cfg.hidden()));
    for (int l = 0; l < cfg.layers; ++l) {
        LayerWeights w;
        w.wq = gaussian(rng, d, d, wstd);
        w.wk = gaussian(rng, d, d, wstd);
        w.wv = gaussian(rng, d, d, wstd);
        w.wo = gaussian(rng, d, d, wstd);
        w.w1 = gaussian(rng, d, h, wstd);
        w.w2 = gaussian(rng, h, d, hstd);
        enc.frozen.push_back(std::move(w));
    }
    for (int l = 0; l < cfg.prompted_layers(); ++l) {
        enc.prompts.push_back(gaussian(rng, static_cast<std::size_t>(cfg.prompt_tokens), d, 0.02));
    }
    return enc;
}

ToyStudent init_student(const ToyEncoderConfig& vision, const ToyEncoderConfig& text,
                        double tau_s) {
    if (vision.dim != text.dim) {
        throw ValidationError("student: vision and text branches must share the embedding dim");
    }
    if (!(tau_s > 0.0)) throw ValidationError("student: tau_s must be > 0");
    return ToyStudent{init_encoder(vision), init_encoder(text), tau_s};
}

EncoderTrace encode_traced(const ToyEncoder& enc, const Matrix& tokens,
                           linalg::OpCounter* counter) {
    const auto& cfg = enc.cfg;
    if (tokens.rows != static_cast<std::size_t>(cfg.seq_len) ||
        tokens.cols != static_cast<std::size_t>(cfg.dim)) {
        throw ValidationError("encode: expected " + std::to_string(cfg.seq_len) + "x" +
                              std::to_string(cfg.dim) + " tokens, got " +
                              std::to_string(tokens.rows) + "x" + std::to_string(tokens.cols));
    }
    auto* attn_mas = counter ? &counter->attention : nullptr;
    auto* proj_mas = counter ? &counter->projection : nullptr;
    auto* mlp_mas = counter ? &counter->mlp : nullptr;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.dim));

    EncoderTrace trace;
    Matrix x = tokens;
    for (int l = 0; l < cfg.layers; ++l) {
        const LayerWeights& w = enc.frozen[l];
        LayerTrace t;
        const bool prompted = l < static_cast<int>(enc.prompts.size());
        t.prompt_rows = prompted ? enc.prompts[l].rows : 0;
        t.s = prompted ? linalg::vstack(enc.prompts[l], x) : x;

        t.q = matmul(t.s, w.wq, proj_mas);
        t.k = matmul(t.s, w.wk, proj_mas);
        t.v = matmul(t.s, w.wv, proj_mas);
        t.attn = matmul_nt(t.q, t.k, attn_mas);
        for (double& a : t.attn.data) a *= inv_sqrt_d;
        row_softmax(t.attn);
        t.ctx = matmul(t.attn, t.v, attn_mas);
        t.r = t.s;
        linalg::add_inplace(t.r, matmul(t.ctx, w.wo, proj_mas));

        t.g = matmul(t.r, w.w1, mlp_mas);
        for (double& z : t.g.data) z = std::tanh(z);
        Matrix y = t.r;
        linalg::add_inplace(y, matmul(t.g, w.w2, mlp_mas));

        x = linalg::slice_rows(y, t.prompt_rows, y.rows - t.prompt_rows);
        trace.layers.push_back(std::move(t));
    }

    trace.pooled.assign(x.cols, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t d = 0; d < x.cols; ++d) trace.pooled[d] += x(i, d);
    }
    for (double& p : trace.pooled) p /= static_cast<double>(x.rows);
    trace.output = l2_normalize(trace.pooled);
    return trace;
}

Vec encode(const ToyEncoder& enc, const Matrix& tokens, linalg::OpCounter* counter) {
    return encode_traced(enc, tokens, counter).output;
}

std::vector<Matrix> encode_backward(const ToyEncoder& enc, const EncoderTrace& trace,
                                    std::span<const double> d_out) {
    const auto& cfg = enc.cfg;
    const auto d = static_cast<std::size_t>(cfg.dim);
    const auto n = static_cast<std::size_t>(cfg.seq_len);
    if (d_out.size() != d) throw ValidationError("encode_backward: gradient dimension mismatch");
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.dim));

    // Through u = p / |p| and the mean over content rows.
    const Vec& u = trace.output;
    const double pnorm = norm(trace.pooled);
    const double ud = dot(u, d_out);
    Matrix dx(n, d);
    for (std::size_t j = 0; j < d; ++j) {
        const double g = (d_out[j] - u[j] * ud) / pnorm / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) dx(i, j) = g;
    }

    std::vector<Matrix> d_prompts(enc.prompts.size());
    for (int l = cfg.layers - 1; l >= 0; --l) {
        const LayerWeights& w = enc.frozen[l];
        const LayerTrace& t = trace.layers[l];
        const std::size_t rows = t.s.rows;

        Matrix dy(rows, d, 0.0);
        std::copy(dx.data.begin(), dx.data.end(),
                  dy.data.begin() + static_cast<std::ptrdiff_t>(t.prompt_rows * d));

        Matrix dz = matmul_nt(dy, w.w2);
        for (std::size_t i = 0; i < dz.data.size(); ++i) {
            dz.data[i] *= 1.0 - t.g.data[i] * t.g.data[i];
        }
        Matrix dr = dy;
        linalg::add_inplace(dr, matmul_nt(dz, w.w1));

        Matrix dctx = matmul_nt(dr, w.wo);
        Matrix dattn = matmul_nt(dctx, t.v);
        Matrix dv = matmul_tn(t.attn, dctx);
        Matrix dscores(rows, rows);
        for (std::size_t i = 0; i < rows; ++i) {
            double inner = 0.0;
            for (std::size_t j = 0; j < rows; ++j) inner += t.attn(i, j) * dattn(i, j);
            for (std::size_t j = 0; j < rows; ++j) {
                dscores(i, j) = t.attn(i, j) * (dattn(i, j) - inner) * inv_sqrt_d;
            }
        }
        Matrix dq = matmul(dscores, t.k);
        Matrix dk = matmul_tn(dscores, t.q);

        Matrix ds = std::move(dr);
        linalg::add_inplace(ds, matmul_nt(dq, w.wq));
        linalg::add_inplace(ds, matmul_nt(dk, w.wk));
        linalg::add_inplace(ds, matmul_nt(dv, w.wv));

        if (t.prompt_rows > 0) d_prompts[l] = linalg::slice_rows(ds, 0, t.prompt_rows);
        dx = linalg::slice_rows(ds, t.prompt_rows, rows - t.prompt_rows);
    }
    return d_prompts;
}

MultiplyAddCounts count_multiply_adds(const ToyEncoderConfig& cfg) {
    ToyEncoder enc = init_encoder(cfg);
    Matrix tokens(static_cast<std::size_t>(cfg.seq_len), static_cast<std::size_t>(cfg.dim), 0.0);
    tokens(0, 0) = 1.0;  // keep the pooled output away from the zero vector
    linalg::OpCounter counter;
    encode(enc, tokens, &counter);
    return {counter.attention, counter.projection, counter.mlp};
}

void TrainingSet::validate(const ToyStudent& student) const {
    if (image_tokens.size() != labels.size()) {
        throw ValidationError("training set: one label per image required");
    }
    if (!teacher_image.empty() && teacher_image.size() != image_tokens.size()) {
        throw ValidationError("training set: teacher features must match images one-to-one");
    }
    if (class_tokens.size() != classes.size()) {
        throw ValidationError("training set: one text input per class column required");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes.size()) {
            throw ValidationError("training set: label column " + std::to_string(y) +
                                  " out of range");
        }
    }
    for (const auto& [k, p] : prototypes) {
        if (p.size() != static_cast<std::size_t>(student.text.cfg.dim)) {
            throw ValidationError("training set: prototype for class " + std::to_string(k) +
                                  " has wrong dimension");
        }
    }
}

namespace {

distill::ObjectiveInputs objective_inputs(const ToyStudent& student, const TrainingSet& data,
                                          std::span<const std::size_t> batch,
                                          const std::vector<Vec>& img_out,
                                          const std::vector<Vec>& txt_out) {
    distill::ObjectiveInputs in;
    in.student_image = img_out;
    in.student_text = txt_out;
    in.classes = data.classes;
    in.tau_s = student.tau_s;
    for (std::size_t i : batch) {
        in.labels.push_back(data.labels[i]);
        if (!data.teacher_image.empty()) in.teacher_image.push_back(data.teacher_image[i]);
    }
    if (!data.prototypes.empty()) {
        const std::size_t dim = static_cast<std::size_t>(student.text.cfg.dim);
        for (std::size_t c = 0; c < data.classes.size(); ++c) {
            const auto it = data.prototypes.find(data.classes[c]);
            if (it == data.prototypes.end()) {
                in.teacher_protos.emplace_back(dim, 0.0);
            } else {
                in.teacher_protos.push_back(it->second);
                in.distill_cols.insert(static_cast<int>(c));
            }
        }
    }
    return in;
}

std::vector<EncoderTrace> run_batch(const ToyEncoder& enc, const std::vector<const Matrix*>& inputs,
                                    ExecPolicy policy) {
    return policy == ExecPolicy::Serial ? kernels::encode_batch_serial(enc, inputs)
                                        : kernels::encode_batch_omp(enc, inputs);
}

std::vector<Vec> outputs_of(std::vector<EncoderTrace>& traces) {
    std::vector<Vec> out;
    out.reserve(traces.size());
    for (auto& t : traces) out.push_back(t.output);
    return out;
}

}  // namespace

StepResult backward(const ToyStudent& student, const TrainingSet& data,
                    std::span<const std::size_t> batch, const distill::DistillConfig& cfg,
                    long step, long total_steps, ExecPolicy policy) {
    if (batch.empty()) throw ValidationError("backward: empty batch");
    std::vector<const Matrix*> images;
    for (std::size_t i : batch) images.push_back(&data.image_tokens.at(i));
    std::vector<const Matrix*> texts;
    for (const auto& m : data.class_tokens) texts.push_back(&m);

    auto img_traces = run_batch(student.vision, images, policy);
    auto txt_traces = run_batch(student.text, texts, policy);
    const auto in = objective_inputs(student, data, batch, outputs_of(img_traces),
                                     outputs_of(txt_traces));

    StepResult res;
    distill::ObjectiveGradients g;
    res.loss = distill::total_loss(in, cfg, step, total_steps, &g);

    if (policy == ExecPolicy::Serial) {
        res.grads.vision_prompts = kernels::backward_batch_serial(student.vision, img_traces,
                                                                  g.student_image);
        res.grads.text_prompts = kernels::backward_batch_serial(student.text, txt_traces,
                                                                g.student_text);
    } else {
        res.grads.vision_prompts = kernels::backward_batch_omp(student.vision, img_traces,
                                                               g.student_image);
        res.grads.text_prompts = kernels::backward_batch_omp(student.text, txt_traces,
                                                             g.student_text);
    }
    res.grads.tau_s = g.tau_s;

    for (std::size_t l = 0; l < res.grads.vision_prompts.size(); ++l) {
        check_finite(res.grads.vision_prompts[l], "vision.prompts[layer=" + std::to_string(l) + "]");
    }
    for (std::size_t l = 0; l < res.grads.text_prompts.size(); ++l) {
        check_finite(res.grads.text_prompts[l], "text.prompts[layer=" + std::to_string(l) + "]");
    }
    if (!std::isfinite(res.grads.tau_s)) throw NumericalError("non-finite gradient at tau_s");
    return res;
}

distill::LossBreakdown evaluate_loss(const ToyStudent& student, const TrainingSet& data,
                                     std::span<const std::size_t> batch,
                                     const distill::DistillConfig& cfg, long step,
                                     long total_steps) {
    if (batch.empty()) throw ValidationError("evaluate_loss: empty batch");
    std::vector<Vec> img;
    for (std::size_t i : batch) img.push_back(encode(student.vision, data.image_tokens.at(i)));
    std::vector<Vec> txt;
    for (const auto& m : data.class_tokens) txt.push_back(encode(student.text, m));
    return distill::total_loss(objective_inputs(student, data, batch, img, txt), cfg, step,
                               total_steps);
}

long total_steps(std::size_t n_samples, const TrainOptions& opts) {
    if (n_samples == 0 || opts.epochs <= 0) return 0;
    const std::size_t bs = opts.batch_size <= 0 ? n_samples
                                                : std::min<std::size_t>(opts.batch_size, n_samples);
    return static_cast<long>(opts.epochs) * static_cast<long>((n_samples + bs - 1) / bs);
}

TrainState train(ToyStudent& student, const TrainingSet& data, const distill::DistillConfig& cfg,
                 const TrainOptions& opts) {
    cfg.validate();
    data.validate(student);
    if (opts.learning_rate < 0.0) throw ValidationError("train: learning rate must be >= 0");
    if (opts.scale_learning_rate && *opts.scale_learning_rate < 0.0) {
        throw ValidationError("train: scale learning rate must be >= 0");
    }
    if (opts.epochs < 0) throw ValidationError("train: epochs must be >= 0");

    TrainState state;
    state.learning_rate = opts.learning_rate;
    const std::size_t n = data.image_tokens.size();
    const long steps = total_steps(n, opts);
    const std::size_t bs = opts.batch_size <= 0 ? n : std::min<std::size_t>(opts.batch_size, n);

    std::mt19937_64 rng(opts.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    const double lr = opts.learning_rate;
    const double lr_scale = opts.scale_learning_rate.value_or(lr);
    const auto apply = [&](std::vector<Matrix>& params, const std::vector<Matrix>& grads) {
        for (std::size_t l = 0; l < params.size(); ++l) {
            for (std::size_t i = 0; i < params[l].data.size(); ++i) {
                double& p = params[l].data[i];
                p -= lr * grads[l].data[i] + lr * opts.weight_decay * p;
            }
        }
    };

    for (int epoch = 0; epoch < opts.epochs && n > 0; ++epoch) {
        if (bs < n) std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += bs) {
            const std::span<const std::size_t> batch(order.data() + start, std::min(bs, n - start));
            StepResult res = backward(student, data, batch, cfg, state.step, steps, opts.policy);
            if (!std::isfinite(res.loss.total)) {
                throw NumericalError("training diverged at step " + std::to_string(state.step));
            }
            state.loss_history.push_back(res.loss);
            apply(student.vision.prompts, res.grads.vision_prompts);
            apply(student.text.prompts, res.grads.text_prompts);
            // Multiplicative step on tau_s (gradient descent on log tau_s) keeps it positive.
            student.tau_s *= std::exp(-lr_scale * student.tau_s * res.grads.tau_s);
            ++state.step;
        }
    }
    state.params_snapshot = {student.vision.prompts, student.text.prompts, student.tau_s};
    return state;
}

std::vector<Vec> student_text_embeddings(const ToyStudent& student,
                                         const std::vector<Matrix>& class_tokens,
                                         ExecPolicy policy) {
    std::vector<const Matrix*> inputs;
    for (const auto& m : class_tokens) inputs.push_back(&m);
    auto traces = run_batch(student.text, inputs, policy);
    return outputs_of(traces);
}

std::vector<Vec> student_image_embeddings(const ToyStudent& student,
                                          const std::vector<Matrix>& image_tokens,
                                          ExecPolicy policy) {
    std::vector<const Matrix*> inputs;
    for (const auto& m : image_tokens) inputs.push_back(&m);
    auto traces = run_batch(student.vision, inputs, policy);
    return outputs_of(traces);
}

}  // namespace protokd::student
