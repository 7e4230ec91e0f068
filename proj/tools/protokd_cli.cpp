#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "protokd/core.hpp"
#include "protokd/pipeline.hpp"

namespace fs = std::filesystem;
using namespace protokd;

int main(int argc, char** argv) {
    CLI::App app{"prototype-guided prompt distillation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::string data_dir;
    bool as_json = false;
    bool as_table = false;
    app.add_option("--config", config_path, "pipeline config (JSON)")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--data", data_dir, "input directory for files not named in the config (default: --out)");
    auto* json_flag = app.add_flag("--json", as_json, "print the report as JSON");
    app.add_flag("--table", as_table, "print the report as an aligned table (default)")
        ->excludes(json_flag);

    auto* flag = app.add_subcommand("flag", "assign RS flags to a caption file");
    auto* aggregate = app.add_subcommand("aggregate", "build class prototypes from captions");
    auto* train = app.add_subcommand("train", "train student prompts against the teacher");
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string mode = "base2novel";
    eval->add_option("--mode", mode, "fewshot | base2novel | retrieval");
    auto* cx = app.add_subcommand("complexity", "prompt parameter and FLOPs overheads");
    complexity::PromptBudget budget = pipeline::paper_default_budget();
    bool paper_defaults = false;
    cx->add_flag("--paper-defaults", paper_defaults, "ViT-B/32 + text encoder reference setup");
    cx->add_option("--d-v", budget.d_v);
    cx->add_option("--l-v", budget.l_v);
    cx->add_option("--p-v", budget.p_v);
    cx->add_option("--n-v", budget.n_v);
    cx->add_option("--d-t", budget.d_t);
    cx->add_option("--l-t", budget.l_t);
    cx->add_option("--p-t", budget.p_t);
    cx->add_option("--n-t", budget.n_t);
    cx->add_option("--backbone-params", budget.backbone_params);
    cx->add_flag("--include-class-token", budget.include_class_token);
    auto* gen = app.add_subcommand("gen-synth", "write a seeded synthetic benchmark");

    CLI11_PARSE(app, argc, argv);

    try {
        nlohmann::ordered_json report;
        if (cx->parsed()) {
            if (paper_defaults) budget = complexity::reference_budget(budget.backbone_params);
            report = pipeline::cmd_complexity(budget);
        } else {
            const auto ctx = pipeline::make_context(
                config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path),
                seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, out_dir,
                data_dir.empty() ? std::nullopt : std::optional<fs::path>(data_dir));
            if (flag->parsed()) {
                report = pipeline::cmd_flag(ctx);
            } else if (aggregate->parsed()) {
                report = pipeline::cmd_aggregate(ctx);
            } else if (train->parsed()) {
                report = pipeline::cmd_train(ctx);
            } else if (eval->parsed()) {
                const auto m = pipeline::parse_eval_mode(mode);
                report = pipeline::cmd_eval(ctx, m);
            } else if (gen->parsed()) {
                report = pipeline::cmd_gen_synth(ctx);
            }
        }
        if (as_json) {
            std::cout << report.dump(2) << '\n';
        } else {
            std::cout << pipeline::render_table(report);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
