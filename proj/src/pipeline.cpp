#include "protokd/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "protokd/io.hpp"
#include "protokd/metrics.hpp"
#include "protokd/prototype.hpp"
#include "protokd/rsflag.hpp"
#include "protokd/student.hpp"
#include "protokd/synth.hpp"

namespace protokd::pipeline {

namespace {

void require_files(const Context& ctx, const std::vector<std::string>& keys) {
    std::string missing;
    for (const auto& key : keys) {
        const fs::path p = resolve(ctx, key);
        if (!fs::is_regular_file(p)) missing += "\n  " + key + ": " + p.string();
    }
    if (!missing.empty()) throw ValidationError("missing input files:" + missing);
}

std::set<int> base_set(const Context& ctx) {
    if (!ctx.cfg.base_classes) return {};
    return {ctx.cfg.base_classes->begin(), ctx.cfg.base_classes->end()};
}

std::vector<EmbeddingRecord> split_of(const std::vector<EmbeddingRecord>& records,
                                      const std::string& split) {
    std::vector<EmbeddingRecord> out;
    for (const auto& r : records) {
        if (r.split == split) out.push_back(r);
    }
    return out;
}

// Seeded Fisher-Yates on each class's indices, then the first k. Depends only on (seed, class, k).
std::vector<std::size_t> select_k_shot(const std::vector<io::TokenRecord>& records,
                                       const std::vector<std::size_t>& candidates, int k,
                                       std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> per_class;
    for (std::size_t i : candidates) per_class[*records[i].label].push_back(i);
    std::vector<std::size_t> out;
    for (auto& [cls, idx] : per_class) {
        if (static_cast<int>(idx.size()) < k) {
            throw ValidationError("k_shot=" + std::to_string(k) + " but class " +
                                  std::to_string(cls) + " has only " + std::to_string(idx.size()) +
                                  " training samples");
        }
        std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(cls) + 1);
        for (std::size_t j = idx.size() - 1; j > 0; --j) {
            std::swap(idx[j], idx[rng() % (j + 1)]);
        }
        idx.resize(static_cast<std::size_t>(k));
        std::sort(idx.begin(), idx.end());
        out.insert(out.end(), idx.begin(), idx.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::map<int, Vec> student_class_embeddings(const student::ToyStudent& s,
                                            const std::vector<io::TokenRecord>& class_tokens) {
    std::vector<Matrix> tokens;
    for (const auto& r : class_tokens) tokens.push_back(r.tokens);
    const auto emb = student::student_text_embeddings(s, tokens);
    std::map<int, Vec> out;
    for (std::size_t c = 0; c < class_tokens.size(); ++c) {
        if (!class_tokens[c].label) {
            throw ValidationError("class token record " + class_tokens[c].id + " has no label");
        }
        if (!out.emplace(*class_tokens[c].label, emb[c]).second) {
            throw ValidationError("class tokens: duplicate class " +
                                  std::to_string(*class_tokens[c].label));
        }
    }
    return out;
}

ordered_json per_class_json(const std::map<int, double>& m) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : m) j[std::to_string(k)] = v;
    return j;
}

std::string fmt(double v, int prec = 2) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

std::string table(const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    std::ostringstream os;
    const auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c) os << "  ";
            if (c == 0) {
                os << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
            } else {
                os << std::right << std::setw(static_cast<int>(width[c])) << cells[c];
            }
        }
        os << '\n';
    };
    line(header);
    std::size_t total = 0;
    for (auto w : width) total += w;
    os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    for (const auto& r : rows) line(r);
    return os.str();
}

}  // namespace

Context make_context(const std::optional<fs::path>& config_path, std::optional<std::uint64_t> seed,
                     const fs::path& out, const std::optional<fs::path>& data) {
    Context ctx;
    ctx.cfg = config_path ? config::load_config(*config_path) : config::default_config();
    if (seed) ctx.cfg.seed = *seed;
    ctx.out = out;
    ctx.data = data ? *data : out;
    return ctx;
}

fs::path resolve(const Context& ctx, const std::string& key) {
    if (auto it = ctx.cfg.paths.find(key); it != ctx.cfg.paths.end()) return it->second;
    const auto& names = synth::default_file_names();
    auto it = names.find(key);
    if (it == names.end()) throw ValidationError("no default file name for \"" + key + "\"");
    // Files written by earlier stages live in out; prefer them over a copy in data.
    static const std::set<std::string> produced{"flagged_captions", "prototypes", "checkpoint"};
    if (produced.count(key) && fs::exists(ctx.out / it->second)) return ctx.out / it->second;
    return ctx.data / it->second;
}

// ---- gen-synth ----

ordered_json cmd_gen_synth(const Context& ctx) {
    const auto data = synth::generate(ctx.cfg.synth, ctx.cfg.aggregation, ctx.cfg.base_classes,
                                      ctx.cfg.seed);
    auto manifest = synth::write(data, ctx.out, ctx.cfg);
    ordered_json report;
    report["command"] = "gen-synth";
    report["classes"] = ctx.cfg.synth.classes;
    report["dim"] = ctx.cfg.synth.dim;
    report["images"] = data.teacher_images.size();
    report["captions"] = data.caption_embeddings.size();
    report["planted_outliers"] = manifest["planted_outliers"];
    report["files"] = manifest["files"];
    return report;
}

// ---- flag ----

ordered_json cmd_flag(const Context& ctx) {
    require_files(ctx, {"captions"});
    auto classes = io::read_caption_file(resolve(ctx, "captions"));
    auto annotated = rsflag::annotate_corpus(io::to_candidates(classes), ctx.cfg.rules);
    std::size_t pos = 0;
    ordered_json per_class = ordered_json::array();
    long total_flagged = 0, total = 0;
    for (auto& cls : classes) {
        int flagged = 0;
        for (std::size_t j = 0; j < cls.captions.size(); ++j, ++pos) {
            cls.flags[j] = annotated[pos].rs_flag;
            flagged += *annotated[pos].rs_flag;
        }
        const int n = static_cast<int>(cls.captions.size());
        per_class.push_back({{"class", cls.class_index},
                             {"class_name", cls.class_name},
                             {"captions", n},
                             {"flagged", flagged},
                             {"rate", static_cast<double>(flagged) / n}});
        total_flagged += flagged;
        total += n;
    }
    fs::create_directories(ctx.out);
    const fs::path out_file = ctx.out / synth::default_file_names().at("flagged_captions");
    io::write_caption_file(out_file, classes);
    ordered_json report;
    report["command"] = "flag";
    report["output"] = out_file.filename().string();
    report["captions"] = total;
    report["flagged"] = total_flagged;
    report["per_class"] = per_class;
    return report;
}

// ---- aggregate ----

ordered_json cmd_aggregate(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    std::optional<ClassIndexSets> scope;
    if (cfg.base_classes) scope = ClassIndexSets{base_set(ctx), {}};

    std::map<int, prototype::ClassPrototype> protos;
    if (cfg.prototype_source == "class_names") {
        require_files(ctx, {"class_name_embeddings"});
        const auto names = io::read_embedding_cache(resolve(ctx, "class_name_embeddings"), true);
        std::set<int> missing = scope ? scope->base : std::set<int>{};
        for (const auto& r : names) {
            if (!r.label) throw ValidationError("class name embedding " + r.id + " has no label");
            if (scope && !scope->base.count(*r.label)) continue;
            prototype::ClassPrototype p;
            p.class_index = *r.label;
            p.prototype = r.vec;
            if (!protos.emplace(p.class_index, p).second) {
                throw ValidationError("class name embeddings: duplicate class " +
                                      std::to_string(p.class_index));
            }
            missing.erase(*r.label);
        }
        if (!missing.empty()) {
            std::string list;
            for (int k : missing) list += (list.empty() ? "" : ", ") + std::to_string(k);
            throw ValidationError("missing class name embeddings for classes: " + list);
        }
    } else {
        require_files(ctx, {"teacher_images", "flagged_captions", "caption_embeddings"});
        const auto teacher =
            split_of(io::read_embedding_cache(resolve(ctx, "teacher_images"), true), "train");
        const auto classes = io::read_caption_file(resolve(ctx, "flagged_captions"));
        auto candidates = io::to_candidates(classes);
        io::attach_embeddings(candidates,
                              io::read_embedding_cache(resolve(ctx, "caption_embeddings"), true));
        protos = prototype::build_all_prototypes(teacher, candidates, cfg.aggregation, scope);
    }
    fs::create_directories(ctx.out);
    const fs::path out_file = ctx.out / synth::default_file_names().at("prototypes");
    io::write_json(out_file, io::prototypes_json(protos, cfg.aggregation));

    ordered_json report;
    report["command"] = "aggregate";
    report["source"] = cfg.prototype_source;
    report["output"] = out_file.filename().string();
    ordered_json per_class = ordered_json::array();
    for (const auto& [k, p] : protos) {
        per_class.push_back({{"class", k},
                             {"candidates", p.scores.size()},
                             {"kept", p.kept_indices.size()},
                             {"pruned", p.scores.size() - p.kept_indices.size()}});
    }
    report["per_class"] = per_class;
    return report;
}

// ---- train ----

ordered_json cmd_train(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const bool need_teacher = cfg.distill.lambda_img > 0.0 || cfg.distill.lambda_logit > 0.0;
    const bool need_protos = cfg.distill.lambda_text > 0.0 || cfg.distill.lambda_logit > 0.0;
    std::vector<std::string> inputs{"student_images", "class_tokens"};
    if (need_teacher) inputs.push_back("teacher_images");
    if (need_protos) inputs.push_back("prototypes");
    require_files(ctx, inputs);

    const auto images = io::read_token_cache(resolve(ctx, "student_images"));
    const auto class_tokens = io::read_token_cache(resolve(ctx, "class_tokens"));
    const std::set<int> base = base_set(ctx);

    // training scope: base classes in base-to-novel mode, otherwise every class with text input
    std::vector<int> classes;
    std::map<int, int> column;
    std::vector<Matrix> col_tokens;
    for (const auto& r : class_tokens) {
        if (!r.label) throw ValidationError("class token record " + r.id + " has no label");
        if (!base.empty() && !base.count(*r.label)) continue;
        column[*r.label] = static_cast<int>(classes.size());
        classes.push_back(*r.label);
        col_tokens.push_back(r.tokens);
    }
    for (int k : base) {
        if (!column.count(k)) {
            throw ValidationError("base class " + std::to_string(k) + " has no class tokens");
        }
    }

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& r = images[i];
        if (r.split != "train") continue;
        if (!r.label) throw ValidationError("training image " + r.id + " has no label");
        if (!column.count(*r.label)) {
            if (base.empty()) {
                throw ValidationError("training image " + r.id + " has class " +
                                      std::to_string(*r.label) + " without class tokens");
            }
            continue;
        }
        pool.push_back(i);
    }
    if (pool.empty()) throw ValidationError("no training images in scope (split \"train\")");
    if (cfg.k_shot) pool = select_k_shot(images, pool, *cfg.k_shot, cfg.seed);

    student::TrainingSet data;
    data.classes = classes;
    data.class_tokens = col_tokens;
    std::map<std::string, Vec> teacher_by_id;
    if (need_teacher) {
        for (auto& r : io::read_embedding_cache(resolve(ctx, "teacher_images"), true)) {
            teacher_by_id.emplace(r.id, std::move(r.vec));
        }
    }
    std::vector<std::string> sample_ids;
    for (std::size_t i : pool) {
        data.image_tokens.push_back(images[i].tokens);
        data.labels.push_back(column.at(*images[i].label));
        sample_ids.push_back(images[i].id);
        if (need_teacher) {
            auto it = teacher_by_id.find(images[i].id);
            if (it == teacher_by_id.end()) {
                throw ValidationError("no teacher embedding for training image " + images[i].id);
            }
            data.teacher_image.push_back(it->second);
        }
    }
    if (need_protos) {
        const auto protos = io::read_prototypes(resolve(ctx, "prototypes"));
        std::string missing;
        for (int k : classes) {
            auto it = protos.find(k);
            if (it == protos.end()) {
                missing += (missing.empty() ? "" : ", ") + std::to_string(k);
                continue;
            }
            data.prototypes[k] = it->second.prototype;
        }
        if (!missing.empty()) throw ValidationError("prototypes missing for classes: " + missing);
    }

    auto student = student::init_student(cfg.vision, cfg.text, cfg.distill.tau_s);
    student::TrainOptions opts;
    opts.epochs = cfg.train.epochs;
    opts.learning_rate = cfg.train.learning_rate;
    opts.scale_learning_rate = cfg.train.scale_learning_rate;
    opts.batch_size = cfg.train.batch_size;
    opts.weight_decay = cfg.train.weight_decay;
    opts.seed = cfg.seed;
    const auto state = student::train(student, data, cfg.distill, opts);

    fs::create_directories(ctx.out);
    io::Checkpoint ckpt;
    ckpt.vision = cfg.vision;
    ckpt.text = cfg.text;
    ckpt.step = state.step;
    ckpt.seed = cfg.seed;
    ckpt.params.vision_prompts = student.vision.prompts;
    ckpt.params.text_prompts = student.text.prompts;
    ckpt.params.tau_s = student.tau_s;
    const fs::path ckpt_file = ctx.out / synth::default_file_names().at("checkpoint");
    io::write_json(ckpt_file, io::checkpoint_json(ckpt));
    io::write_loss_log(ctx.out / "loss_log.jsonl", state.loss_history);

    ordered_json echo;
    echo["config"] = config::config_json(cfg);
    ordered_json in_files = ordered_json::object();
    for (const auto& key : inputs) {
        in_files[key] = {{"path", resolve(ctx, key).string()},
                         {"digest", io::file_digest(resolve(ctx, key))}};
    }
    echo["inputs"] = in_files;
    echo["classes"] = classes;
    echo["samples"] = sample_ids;
    io::write_json(ctx.out / "config_echo.json", echo);

    ordered_json report;
    report["command"] = "train";
    report["mode"] = base.empty() ? "fewshot" : "base2novel";
    report["classes"] = classes;
    report["samples"] = data.image_tokens.size();
    report["steps"] = state.step;
    const auto& first = state.loss_history.empty() ? distill::LossBreakdown{}
                                                   : state.loss_history.front();
    const auto& last = state.loss_history.empty() ? distill::LossBreakdown{}
                                                  : state.loss_history.back();
    report["initial_loss"] = first.total;
    report["final_loss"] = last.total;
    report["tau_s"] = student.tau_s;
    report["checkpoint_digest"] = io::file_digest(ckpt_file);
    return report;
}

// ---- eval ----

EvalMode parse_eval_mode(const std::string& s) {
    if (s == "fewshot") return EvalMode::FewShot;
    if (s == "base2novel") return EvalMode::Base2Novel;
    if (s == "retrieval") return EvalMode::Retrieval;
    throw ValidationError("eval mode must be fewshot, base2novel or retrieval (got \"" + s + "\")");
}

namespace {

ordered_json eval_report(const Context& ctx, EvalMode mode) {
    const auto& cfg = ctx.cfg;
    std::vector<std::string> inputs{"checkpoint", "student_images"};
    if (mode == EvalMode::Retrieval) {
        inputs.insert(inputs.end(), {"text_gallery", "image_gallery", "relevance"});
    } else {
        inputs.push_back("class_tokens");
    }
    if (mode == EvalMode::Base2Novel && !cfg.base_classes) {
        throw ValidationError("base2novel evaluation needs base_classes in the config");
    }
    require_files(ctx, inputs);

    const fs::path ckpt_file = resolve(ctx, "checkpoint");
    const auto student = io::restore_student(io::read_checkpoint(ckpt_file));
    std::vector<io::TokenRecord> test;
    for (auto& r : io::read_token_cache(resolve(ctx, "student_images"))) {
        if (r.split == "test") test.push_back(std::move(r));
    }
    if (test.empty()) throw ValidationError("no test split in " + resolve(ctx, "student_images").string());
    std::vector<Matrix> tokens;
    for (const auto& r : test) tokens.push_back(r.tokens);
    const auto feats = student::student_image_embeddings(student, tokens);

    ordered_json report;
    report["command"] = "eval";
    report["checkpoint_digest"] = io::file_digest(ckpt_file);

    if (mode == EvalMode::Retrieval) {
        report["mode"] = "retrieval";
        const fs::path tg = resolve(ctx, "text_gallery");
        const fs::path ig = resolve(ctx, "image_gallery");
        const std::string tg_before = io::file_digest(tg);
        const std::string ig_before = io::file_digest(ig);
        const auto text_gallery = io::read_embedding_cache(tg, true);
        const auto image_gallery = io::read_embedding_cache(ig, true);
        const auto rel = io::read_relevance(resolve(ctx, "relevance"));

        const auto positions = [](const std::vector<EmbeddingRecord>& g) {
            std::map<std::string, int> m;
            for (std::size_t i = 0; i < g.size(); ++i) m[g[i].id] = static_cast<int>(i);
            return m;
        };
        const auto to_sets = [](const std::map<std::string, std::vector<std::string>>& rel_map,
                                const std::string& qid, const std::map<std::string, int>& pos,
                                const char* dir) {
            std::set<int> s;
            auto it = rel_map.find(qid);
            if (it == rel_map.end()) {
                throw ValidationError(std::string("relevance.") + dir + ": no entry for " + qid);
            }
            for (const auto& gid : it->second) {
                auto p = pos.find(gid);
                if (p == pos.end()) {
                    throw ValidationError(std::string("relevance.") + dir + ": unknown gallery id " + gid);
                }
                s.insert(p->second);
            }
            return s;
        };

        // image -> text: student-encoded test images against the frozen caption gallery
        const auto tpos = positions(text_gallery);
        std::vector<std::set<int>> rel_i2t;
        for (const auto& r : test) rel_i2t.push_back(to_sets(rel.i2t, r.id, tpos, "i2t"));
        std::vector<Vec> tvecs;
        for (const auto& r : text_gallery) tvecs.push_back(r.vec);
        const auto i2t = metrics::retrieval_eval(feats, tvecs, rel_i2t);

        // text -> image: gallery captions as queries against the frozen image gallery
        const auto ipos = positions(image_gallery);
        std::vector<std::set<int>> rel_t2i;
        for (const auto& r : text_gallery) rel_t2i.push_back(to_sets(rel.t2i, r.id, ipos, "t2i"));
        std::vector<Vec> ivecs;
        for (const auto& r : image_gallery) ivecs.push_back(r.vec);
        const auto t2i = metrics::retrieval_eval(tvecs, ivecs, rel_t2i);

        const auto rr = metrics::retrieval_report({i2t[0], i2t[1], i2t[2]}, {t2i[0], t2i[1], t2i[2]});
        report["i2t"] = {{"R@1", rr.i2t[0]}, {"R@5", rr.i2t[1]}, {"R@10", rr.i2t[2]}};
        report["t2i"] = {{"R@1", rr.t2i[0]}, {"R@5", rr.t2i[1]}, {"R@10", rr.t2i[2]}};
        report["mR"] = rr.mr;
        if (io::file_digest(tg) != tg_before || io::file_digest(ig) != ig_before) {
            throw NumericalError("frozen gallery changed during evaluation");
        }
        report["gallery_digests"] = {{"text", tg_before}, {"image", ig_before}};
        return report;
    }

    const auto class_emb =
        student_class_embeddings(student, io::read_token_cache(resolve(ctx, "class_tokens")));
    std::vector<int> labels;
    for (const auto& r : test) {
        if (!r.label) throw ValidationError("test image " + r.id + " has no label");
        if (!class_emb.count(*r.label)) {
            throw ValidationError("test image " + r.id + " has class " + std::to_string(*r.label) +
                                  " without class tokens");
        }
        labels.push_back(*r.label);
    }

    if (mode == EvalMode::FewShot) {
        std::vector<int> idx;
        std::vector<Vec> emb;
        for (const auto& [k, v] : class_emb) {
            idx.push_back(k);
            emb.push_back(v);
        }
        const auto rep = metrics::classify(feats, emb, idx, labels);
        report["mode"] = "fewshot";
        report["top1"] = rep.top1;
        report["n_correct"] = rep.n_correct;
        report["n_total"] = rep.n_total;
        report["per_class"] = per_class_json(rep.per_class);
        return report;
    }

    ClassIndexSets sets;
    sets.base = base_set(ctx);
    for (const auto& [k, _] : class_emb) {
        if (!sets.base.count(k)) sets.novel.insert(k);
    }
    sets.validate();
    const auto bn = metrics::base_novel_eval(feats, class_emb, sets, labels);
    report["mode"] = "base2novel";
    report["base"] = bn.base;
    report["novel"] = bn.novel;
    report["hm"] = bn.hm;
    report["base_classes"] = std::vector<int>(sets.base.begin(), sets.base.end());
    report["novel_classes"] = std::vector<int>(sets.novel.begin(), sets.novel.end());
    return report;
}

}  // namespace

ordered_json cmd_eval(const Context& ctx, EvalMode mode) {
    auto report = eval_report(ctx, mode);
    fs::create_directories(ctx.out);
    io::write_json(ctx.out / ("report_" + report["mode"].get<std::string>() + ".json"), report);
    return report;
}

// ---- complexity ----

complexity::PromptBudget paper_default_budget() { return complexity::reference_budget(); }

ordered_json cmd_complexity(const complexity::PromptBudget& b) {
    const auto r = complexity::budget_report(b);
    ordered_json report;
    report["command"] = "complexity";
    report["budget"] = {{"d_v", b.d_v}, {"l_v", b.l_v}, {"p_v", b.p_v}, {"n_v", b.n_v},
                        {"d_t", b.d_t}, {"l_t", b.l_t}, {"p_t", b.p_t}, {"n_t", b.n_t},
                        {"backbone_params", b.backbone_params},
                        {"include_class_token", b.include_class_token}};
    report["prompt_params"] = r.prompt_params;
    report["param_fraction"] = r.param_fraction;
    report["below_one_percent"] = r.below_one_percent;
    report["vision"] = {{"attention_overhead", r.vision_attention_overhead},
                        {"mlp_overhead", r.vision_mlp_overhead}};
    report["text"] = {{"attention_overhead", r.text_attention_overhead},
                      {"mlp_overhead", r.text_mlp_overhead}};
    return report;
}

// ---- tables ----

std::string render_table(const ordered_json& report) {
    const std::string cmd = report.value("command", "");
    const auto pct = [](const ordered_json& v) { return fmt(v.get<double>()); };
    if (cmd == "eval") {
        const std::string mode = report.at("mode");
        if (mode == "base2novel") {
            return table({"", "Base", "Novel", "HM"},
                         {{"acc", pct(report["base"]), pct(report["novel"]), pct(report["hm"])}});
        }
        if (mode == "retrieval") {
            const auto& a = report["i2t"];
            const auto& b = report["t2i"];
            return table({"", "I2T R@1", "R@5", "R@10", "T2I R@1", "R@5", "R@10", "mR"},
                         {{"recall", pct(a["R@1"]), pct(a["R@5"]), pct(a["R@10"]), pct(b["R@1"]),
                           pct(b["R@5"]), pct(b["R@10"]), pct(report["mR"])}});
        }
        std::vector<std::vector<std::string>> rows;
        for (const auto& [k, v] : report["per_class"].items()) rows.push_back({"class " + k, pct(v)});
        rows.push_back({"top-1", pct(report["top1"])});
        return table({"", "Acc"}, rows);
    }
    if (cmd == "complexity") {
        return table({"", "value"},
                     {{"prompt params", std::to_string(report["prompt_params"].get<long>())},
                      {"param fraction %", fmt(100.0 * report["param_fraction"].get<double>(), 3)},
                      {"vision attention %",
                       fmt(100.0 * report["vision"]["attention_overhead"].get<double>(), 1)},
                      {"vision mlp %", fmt(100.0 * report["vision"]["mlp_overhead"].get<double>(), 1)},
                      {"text attention %",
                       fmt(100.0 * report["text"]["attention_overhead"].get<double>(), 1)},
                      {"text mlp %", fmt(100.0 * report["text"]["mlp_overhead"].get<double>(), 1)}});
    }
    if (cmd == "flag") {
        std::vector<std::vector<std::string>> rows;
        for (const auto& c : report["per_class"]) {
            rows.push_back({std::to_string(c["class"].get<int>()) + " " +
                                c["class_name"].get<std::string>(),
                            std::to_string(c["captions"].get<int>()),
                            std::to_string(c["flagged"].get<int>()), fmt(c["rate"].get<double>())});
        }
        return table({"class", "captions", "flagged", "rate"}, rows);
    }
    if (cmd == "aggregate") {
        std::vector<std::vector<std::string>> rows;
        for (const auto& c : report["per_class"]) {
            rows.push_back({std::to_string(c["class"].get<int>()),
                            std::to_string(c["candidates"].get<std::size_t>()),
                            std::to_string(c["kept"].get<std::size_t>()),
                            std::to_string(c["pruned"].get<std::size_t>())});
        }
        return table({"class", "candidates", "kept", "pruned"}, rows);
    }
    if (cmd == "train") {
        return table({"", "value"},
                     {{"samples", std::to_string(report["samples"].get<std::size_t>())},
                      {"steps", std::to_string(report["steps"].get<long>())},
                      {"initial loss", fmt(report["initial_loss"].get<double>(), 6)},
                      {"final loss", fmt(report["final_loss"].get<double>(), 6)},
                      {"tau_s", fmt(report["tau_s"].get<double>(), 6)}});
    }
    if (cmd == "gen-synth") {
        std::vector<std::vector<std::string>> rows;
        for (const auto& [k, v] : report["files"].items()) {
            rows.push_back({k, v["file"].get<std::string>(), v["digest"].get<std::string>()});
        }
        return table({"key", "file", "digest"}, rows);
    }
    return report.dump(2) + "\n";
}

}  // namespace protokd::pipeline
