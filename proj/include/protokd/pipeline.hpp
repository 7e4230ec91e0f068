#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "protokd/complexity.hpp"
#include "protokd/config.hpp"

namespace protokd::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

/// Resolved settings shared by every command.
struct Context {
    config::PipelineConfig cfg;
    fs::path out = ".";
    fs::path data;  ///< where inputs without an explicit config path are looked up; defaults to out
};

Context make_context(const std::optional<fs::path>& config_path, std::optional<std::uint64_t> seed,
                     const fs::path& out, const std::optional<fs::path>& data = std::nullopt);

/// Explicit config path if given, otherwise the default file name inside ctx.data. Stage outputs
/// (flagged captions, prototypes, checkpoint) are taken from ctx.out when present there.
fs::path resolve(const Context& ctx, const std::string& key);

/// Every command returns its report; files land in ctx.out.
ordered_json cmd_gen_synth(const Context& ctx);
ordered_json cmd_flag(const Context& ctx);
ordered_json cmd_aggregate(const Context& ctx);
ordered_json cmd_train(const Context& ctx);

enum class EvalMode { FewShot, Base2Novel, Retrieval };
EvalMode parse_eval_mode(const std::string& s);
ordered_json cmd_eval(const Context& ctx, EvalMode mode);

ordered_json cmd_complexity(const complexity::PromptBudget& budget);
complexity::PromptBudget paper_default_budget();

/// Aligned plain-text rendering of a command report.
std::string render_table(const ordered_json& report);

}  // namespace protokd::pipeline
