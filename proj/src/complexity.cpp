#include "protokd/complexity.hpp"

#include "protokd/core.hpp"

namespace protokd::complexity {

void PromptBudget::validate() const {
    if (d_v <= 0 || d_t <= 0 || l_v <= 0 || l_t <= 0 || n_v <= 0 || n_t <= 0) {
        throw ValidationError("budget: widths, layer counts and token counts must be positive");
    }
    if (p_v < 0 || p_t < 0) throw ValidationError("budget: prompt counts must be >= 0");
    if (backbone_params < 0) throw ValidationError("budget: backbone_params must be >= 0");
}

std::int64_t prompt_param_count(const PromptBudget& b) {
    return b.l_v * b.p_v * b.d_v + b.l_t * b.p_t * b.d_t;
}

double attention_overhead(std::int64_t n, std::int64_t p) {
    if (n <= 0) throw ValidationError("attention_overhead: n must be positive");
    if (p < 0) throw ValidationError("attention_overhead: p must be >= 0");
    const double x = static_cast<double>(p) / static_cast<double>(n);
    return 2.0 * x + x * x;
}

double mlp_overhead(std::int64_t n, std::int64_t p) {
    if (n <= 0) throw ValidationError("mlp_overhead: n must be positive");
    if (p < 0) throw ValidationError("mlp_overhead: p must be >= 0");
    return static_cast<double>(p) / static_cast<double>(n);
}

BudgetReport budget_report(const PromptBudget& b) {
    b.validate();
    if (b.backbone_params <= 0) throw ValidationError("budget_report: backbone_params must be > 0");
    const std::int64_t n_v = b.n_v + (b.include_class_token ? 1 : 0);
    BudgetReport r;
    r.prompt_params = prompt_param_count(b);
    r.param_fraction = static_cast<double>(r.prompt_params) / static_cast<double>(b.backbone_params);
    r.vision_attention_overhead = attention_overhead(n_v, b.p_v);
    r.vision_mlp_overhead = mlp_overhead(n_v, b.p_v);
    r.text_attention_overhead = attention_overhead(b.n_t, b.p_t);
    r.text_mlp_overhead = mlp_overhead(b.n_t, b.p_t);
    r.below_one_percent = r.param_fraction < 0.01;
    return r;
}

PromptBudget reference_budget(std::int64_t backbone_params) {
    PromptBudget b;
    b.d_v = 768;
    b.l_v = 12;
    b.p_v = 8;
    b.n_v = 49;
    b.d_t = 512;
    b.l_t = 12;
    b.p_t = 4;
    b.n_t = 77;
    b.backbone_params = backbone_params;
    return b;
}

}  // namespace protokd::complexity
