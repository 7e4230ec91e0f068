#pragma once

#include <cstdint>

namespace protokd::complexity {

/// Prompt configuration of a two-branch (vision + text) prompted model.
struct PromptBudget {
    std::int64_t d_v = 0, d_t = 0;  ///< widths
    std::int64_t l_v = 0, l_t = 0;  ///< prompted layers
    std::int64_t p_v = 0, p_t = 0;  ///< prompt tokens per layer
    std::int64_t n_v = 0, n_t = 0;  ///< content tokens (class token excluded unless counted in)
    std::int64_t backbone_params = 0;
    bool include_class_token = false;  ///< adds one token to n_v for exact accounting

    void validate() const;
};

/// L_v * P_v * D_v + L_t * P_t * D_t
std::int64_t prompt_param_count(const PromptBudget& b);

/// ((n + p)^2 - n^2) / n^2 = 2p/n + (p/n)^2
double attention_overhead(std::int64_t n, std::int64_t p);

/// p / n
double mlp_overhead(std::int64_t n, std::int64_t p);

struct BudgetReport {
    std::int64_t prompt_params = 0;
    double param_fraction = 0.0;
    double vision_attention_overhead = 0.0;
    double vision_mlp_overhead = 0.0;
    double text_attention_overhead = 0.0;
    double text_mlp_overhead = 0.0;
    bool below_one_percent = false;
};

BudgetReport budget_report(const PromptBudget& b);

/// ViT-B/32 + CLIP text encoder prompt setup (768/12/8 vision, 512/12/4 text, N = 49 / 77).
/// The backbone size is a caller-supplied figure, not a property of the prompt budget.
PromptBudget reference_budget(std::int64_t backbone_params = 87'849'216);

}  // namespace protokd::complexity
