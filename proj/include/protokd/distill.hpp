#pragma once

#include <map>
#include <set>
#include <vector>

#include "protokd/core.hpp"
#include "protokd/prototype.hpp"

namespace protokd::distill {

/// How the logit-alignment weight ramps in over training.
enum class LogitSchedule {
    LinearWarmup,  ///< 0 -> lambda_logit linearly over ceil(warmup_fraction * T) steps
    TwoStage,      ///< 0 until ceil(warmup_fraction * T), then lambda_logit
};

struct DistillConfig {
    double lambda_img = 0.5;
    double lambda_text = 0.5;
    double lambda_logit = 1.0;
    double tau = 2.0;
    double tau_s = 1.0;  ///< initial student logit scale
    double tau_t = 1.0;  ///< fixed teacher logit scale
    double warmup_fraction = 0.3;
    LogitSchedule schedule = LogitSchedule::LinearWarmup;

    void validate() const;
};

struct LogitMatrix {
    Matrix values;
    double scale_applied = 1.0;
};

struct LossBreakdown {
    double task = 0.0;
    double img = 0.0;
    double text = 0.0;
    double logit = 0.0;
    double total = 0.0;
    double effective_lambda_logit = 0.0;
};

/// values(i, k) = scale * <image_feats[i], text_protos[k]>.
LogitMatrix compute_logits(const std::vector<Vec>& image_feats, const std::vector<Vec>& text_protos,
                           double scale);

/// Mean of (1 - <student_i, teacher_i>) over the batch.
double loss_img(const std::vector<Vec>& student_feats, const std::vector<Vec>& teacher_feats);

/// Mean of (1 - <t^S_k, t*_k>) over exactly the classes in `class_set`.
double loss_text(const std::map<int, Vec>& student_text,
                 const std::map<int, prototype::ClassPrototype>& teacher_protos,
                 const std::set<int>& class_set);

/// Temperature softmax restricted to the `base` columns; other columns are exactly zero.
Matrix masked_distribution(const LogitMatrix& logits, const std::set<int>& base, double tau);

/// Batch mean of tau^2 * KL(teacher || student) over masked, renormalized distributions.
double loss_logit(const LogitMatrix& teacher, const LogitMatrix& student, const std::set<int>& base,
                  double tau);

/// Mean cross-entropy of row softmax against `labels` (column indices).
double loss_task(const LogitMatrix& student, std::span<const int> labels);

double effective_lambda_logit(long step, long total_steps, const DistillConfig& cfg);

/// Number of steps before lambda_logit reaches its full value: ceil(fraction * total_steps).
long warmup_steps(long total_steps, double fraction);

/// Everything the objective needs for one batch. Column c of both logit matrices refers to
/// class `classes[c]`; `labels` are column indices.
struct ObjectiveInputs {
    std::vector<Vec> student_image;     ///< v^S_i, unit
    std::vector<Vec> teacher_image;     ///< v^T_i, unit
    std::vector<Vec> student_text;      ///< t^S for each column class, unit
    std::vector<int> classes;           ///< class index per column
    std::vector<int> labels;            ///< column index of each sample's label
    std::vector<Vec> teacher_protos;    ///< t* per column; may be empty for columns outside distill_cols
    std::set<int> distill_cols;         ///< columns carrying teacher guidance (base classes)
    double tau_s = 1.0;
};

struct ObjectiveGradients {
    std::vector<Vec> student_image;
    std::vector<Vec> student_text;
    Matrix student_logits;
    double tau_s = 0.0;
};

/// total = task + lambda_img*img + lambda_text*text + lambda_logit_eff(step)*logit.
/// When `grads` is non-null, fills analytic gradients of `total` w.r.t. the student outputs.
LossBreakdown total_loss(const ObjectiveInputs& in, const DistillConfig& cfg, long step,
                         long total_steps, ObjectiveGradients* grads = nullptr);

}  // namespace protokd::distill
