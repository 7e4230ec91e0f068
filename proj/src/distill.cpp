#include "protokd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace protokd::distill {

void DistillConfig::validate() const {
    if (!(tau > 0.0) || !(tau_s > 0.0) || !(tau_t > 0.0)) {
        throw ValidationError("distill: tau, tau_s and tau_t must be > 0");
    }
    if (lambda_img < 0.0 || lambda_text < 0.0 || lambda_logit < 0.0) {
        throw ValidationError("distill: loss weights must be >= 0");
    }
    if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
        throw ValidationError("distill: warmup_fraction must lie in [0, 1]");
    }
}

LogitMatrix compute_logits(const std::vector<Vec>& image_feats, const std::vector<Vec>& text_protos,
                           double scale) {
    LogitMatrix out{Matrix(image_feats.size(), text_protos.size()), scale};
    for (std::size_t i = 0; i < image_feats.size(); ++i) {
        for (std::size_t k = 0; k < text_protos.size(); ++k) {
            out.values(i, k) = scale * dot(image_feats[i], text_protos[k]);
        }
    }
    return out;
}

double loss_img(const std::vector<Vec>& student_feats, const std::vector<Vec>& teacher_feats) {
    if (student_feats.size() != teacher_feats.size()) {
        throw ValidationError("loss_img: student and teacher batches differ in length");
    }
    if (student_feats.empty()) throw ValidationError("loss_img: empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < student_feats.size(); ++i) {
        s += 1.0 - dot(student_feats[i], teacher_feats[i]);
    }
    return s / static_cast<double>(student_feats.size());
}

double loss_text(const std::map<int, Vec>& student_text,
                 const std::map<int, prototype::ClassPrototype>& teacher_protos,
                 const std::set<int>& class_set) {
    if (class_set.empty()) throw ValidationError("loss_text: empty class set");
    double s = 0.0;
    for (int k : class_set) {
        const auto p = teacher_protos.find(k);
        if (p == teacher_protos.end()) {
            throw ValidationError("loss_text: no teacher prototype for class " + std::to_string(k));
        }
        const auto t = student_text.find(k);
        if (t == student_text.end()) {
            throw ValidationError("loss_text: no student text embedding for class " +
                                  std::to_string(k));
        }
        s += 1.0 - dot(t->second, p->second.prototype);
    }
    return s / static_cast<double>(class_set.size());
}

Matrix masked_distribution(const LogitMatrix& logits, const std::set<int>& base, double tau) {
    if (base.empty()) throw ValidationError("masked_distribution: empty base class set");
    if (!(tau > 0.0)) throw ValidationError("masked_distribution: tau must be > 0");
    const Matrix& s = logits.values;
    for (int k : base) {
        if (k < 0 || static_cast<std::size_t>(k) >= s.cols) {
            throw ValidationError("masked_distribution: base column " + std::to_string(k) +
                                  " out of range");
        }
    }
    Matrix out(s.rows, s.cols, 0.0);
    Vec scaled;
    for (std::size_t i = 0; i < s.rows; ++i) {
        scaled.clear();
        for (int k : base) scaled.push_back(s(i, k) / tau);
        const Vec p = softmax(scaled);
        std::size_t c = 0;
        for (int k : base) out(i, k) = p[c++];
    }
    return out;
}

double loss_logit(const LogitMatrix& teacher, const LogitMatrix& student, const std::set<int>& base,
                  double tau) {
    if (teacher.values.rows != student.values.rows || teacher.values.cols != student.values.cols) {
        throw ValidationError("loss_logit: teacher and student logit shapes differ");
    }
    if (teacher.values.rows == 0) throw ValidationError("loss_logit: empty batch");
    const Matrix q = masked_distribution(teacher, base, tau);
    const Matrix p = masked_distribution(student, base, tau);
    double s = 0.0;
    for (std::size_t i = 0; i < q.rows; ++i) {
        double kl = 0.0;
        for (int k : base) {
            if (q(i, k) > 0.0) kl += q(i, k) * (std::log(q(i, k)) - std::log(p(i, k)));
        }
        s += std::max(kl, 0.0);
    }
    return tau * tau * s / static_cast<double>(q.rows);
}

double loss_task(const LogitMatrix& student, std::span<const int> labels) {
    const Matrix& s = student.values;
    if (labels.size() != s.rows) throw ValidationError("loss_task: label count != batch size");
    if (s.rows == 0) throw ValidationError("loss_task: empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < s.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= s.cols) {
            throw ValidationError("loss_task: label " + std::to_string(y) + " out of range");
        }
        const auto row = s.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        total += std::log(z) + mx - row[y];
    }
    return total / static_cast<double>(s.rows);
}

long warmup_steps(long total_steps, double fraction) {
    const double x = fraction * static_cast<double>(total_steps);
    const double r = std::nearbyint(x);
    // 0.3 * 10 evaluates to 3.0000000000000004; treat it as the integer it denotes.
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<long>(r);
    return static_cast<long>(std::ceil(x));
}

double effective_lambda_logit(long step, long total_steps, const DistillConfig& cfg) {
    if (total_steps <= 0) throw ValidationError("effective_lambda_logit: total_steps must be > 0");
    const long w = warmup_steps(total_steps, cfg.warmup_fraction);
    if (w == 0 || step >= w) return cfg.lambda_logit;
    if (step <= 0) return 0.0;
    if (cfg.schedule == LogitSchedule::TwoStage) return 0.0;
    return cfg.lambda_logit * static_cast<double>(step) / static_cast<double>(w);
}

LossBreakdown total_loss(const ObjectiveInputs& in, const DistillConfig& cfg, long step,
                         long total_steps, ObjectiveGradients* grads) {
    cfg.validate();
    const std::size_t batch = in.student_image.size();
    const std::size_t ncls = in.classes.size();
    if (batch == 0) throw ValidationError("total_loss: empty batch");
    if (in.student_text.size() != ncls) {
        throw ValidationError("total_loss: need one student text embedding per class column");
    }
    const std::size_t dim = in.student_image.front().size();
    const bool use_img = !in.teacher_image.empty();
    const bool use_protos = !in.distill_cols.empty();
    if (cfg.lambda_img > 0.0 && !use_img) {
        throw ValidationError("total_loss: lambda_img > 0 but no teacher image features");
    }
    if ((cfg.lambda_text > 0.0 || cfg.lambda_logit > 0.0) && !use_protos) {
        throw ValidationError("total_loss: text/logit alignment enabled but no teacher prototypes");
    }
    if (cfg.lambda_logit > 0.0 && !use_img) {
        throw ValidationError("total_loss: lambda_logit > 0 but no teacher image features");
    }
    if (use_protos && in.teacher_protos.size() != ncls) {
        throw ValidationError("total_loss: teacher_protos must have one entry per class column");
    }

    LossBreakdown out;
    out.effective_lambda_logit = effective_lambda_logit(step, total_steps, cfg);

    const LogitMatrix student = compute_logits(in.student_image, in.student_text, in.tau_s);
    out.task = loss_task(student, in.labels);

    Matrix d_logits(batch, ncls, 0.0);
    // Cross-entropy: (softmax - onehot) / B.
    for (std::size_t i = 0; i < batch; ++i) {
        const Vec p = softmax(student.values.row(i));
        for (std::size_t k = 0; k < ncls; ++k) d_logits(i, k) = p[k] / static_cast<double>(batch);
        d_logits(i, in.labels[i]) -= 1.0 / static_cast<double>(batch);
    }

    std::vector<Vec> g_img(batch, Vec(dim, 0.0));
    std::vector<Vec> g_txt(ncls, Vec(dim, 0.0));

    if (use_img) {
        out.img = loss_img(in.student_image, in.teacher_image);
        const double c = cfg.lambda_img / static_cast<double>(batch);
        for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t d = 0; d < dim; ++d) g_img[i][d] -= c * in.teacher_image[i][d];
        }
    }

    if (use_protos) {
        double s = 0.0;
        const double c = cfg.lambda_text / static_cast<double>(in.distill_cols.size());
        for (int col : in.distill_cols) {
            s += 1.0 - dot(in.student_text[col], in.teacher_protos[col]);
            for (std::size_t d = 0; d < dim; ++d) g_txt[col][d] -= c * in.teacher_protos[col][d];
        }
        out.text = s / static_cast<double>(in.distill_cols.size());
    }

    if (use_protos && use_img) {
        std::vector<Vec> protos(ncls, Vec(dim, 0.0));
        for (int col : in.distill_cols) protos[col] = in.teacher_protos[col];
        const LogitMatrix teacher = compute_logits(in.teacher_image, protos, cfg.tau_t);
        out.logit = loss_logit(teacher, student, in.distill_cols, cfg.tau);
        // d/ds of tau^2 KL(q || softmax(s/tau)) = tau * (p - q), averaged over the batch.
        const Matrix q = masked_distribution(teacher, in.distill_cols, cfg.tau);
        const Matrix p = masked_distribution(student, in.distill_cols, cfg.tau);
        const double c2 = out.effective_lambda_logit * cfg.tau / static_cast<double>(batch);
        for (std::size_t i = 0; i < batch; ++i) {
            for (int col : in.distill_cols) d_logits(i, col) += c2 * (p(i, col) - q(i, col));
        }
    }

    out.total = out.task + cfg.lambda_img * out.img + cfg.lambda_text * out.text +
                out.effective_lambda_logit * out.logit;

    if (grads) {
        double g_scale = 0.0;
        for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t k = 0; k < ncls; ++k) {
                const double g = d_logits(i, k);
                if (g == 0.0) continue;
                g_scale += g * dot(in.student_image[i], in.student_text[k]);
                for (std::size_t d = 0; d < dim; ++d) {
                    g_img[i][d] += g * in.tau_s * in.student_text[k][d];
                    g_txt[k][d] += g * in.tau_s * in.student_image[i][d];
                }
            }
        }
        grads->student_image = std::move(g_img);
        grads->student_text = std::move(g_txt);
        grads->student_logits = std::move(d_logits);
        grads->tau_s = g_scale;
    }
    return out;
}

}  // namespace protokd::distill
