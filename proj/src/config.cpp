#include "protokd/config.hpp"

#include <algorithm>
#include <set>

#include "protokd/io.hpp"

namespace protokd::config {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void strict(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ValidationError("config " + where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) {
            throw ValidationError("config " + where + ": unknown key \"" + key + "\"");
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, T& dst, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        dst = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError("config " + where + "." + key + ": " + e.what());
    }
}

distill::LogitSchedule parse_schedule(const std::string& s) {
    if (s == "linear") return distill::LogitSchedule::LinearWarmup;
    if (s == "two_stage") return distill::LogitSchedule::TwoStage;
    throw ValidationError("config distill.schedule: expected \"linear\" or \"two_stage\"");
}

const char* schedule_name(distill::LogitSchedule s) {
    return s == distill::LogitSchedule::TwoStage ? "two_stage" : "linear";
}

}  // namespace

void SynthSpec::validate() const {
    if (classes <= 0 || dim <= 0 || seq_len <= 0 || train_per_class <= 0 || test_per_class <= 0) {
        throw ValidationError("synth: classes, dim, seq_len and per-class counts must be positive");
    }
    if (captions_per_class <= 0) throw ValidationError("synth: captions_per_class must be positive");
    if (planted_outliers < 0 || 2 * planted_outliers >= captions_per_class) {
        throw ValidationError("synth: planted_outliers must be >= 0 and a minority of the captions");
    }
    if (!(flag_rate >= 0.0 && flag_rate <= 1.0)) throw ValidationError("synth: flag_rate in [0, 1]");
    for (double v : {spread, token_noise, view_bias, style, text_bias, name_noise, novel_shift,
                     caption_spread, ground_bias}) {
        if (!(v >= 0.0)) throw ValidationError("synth: scales must be non-negative");
    }
    if (gallery_captions_per_class <= 0) {
        throw ValidationError("synth: gallery_captions_per_class must be positive");
    }
}

const std::vector<std::string>& path_keys() {
    static const std::vector<std::string> keys{
        "teacher_images", "student_images", "class_tokens",   "captions", "flagged_captions",
        "caption_embeddings", "prototypes", "checkpoint",     "image_gallery",
        "text_gallery",   "relevance",      "class_name_embeddings"};
    return keys;
}

void PipelineConfig::validate() const {
    aggregation.validate();
    distill.validate();
    vision.validate();
    text.validate();
    if (vision.dim != text.dim) throw ValidationError("config: vision and text dims must match");
    rules.validate();
    synth.validate();
    if (train.epochs < 0) throw ValidationError("config train.epochs must be >= 0");
    if (train.learning_rate < 0.0) throw ValidationError("config train.learning_rate must be >= 0");
    if (train.scale_learning_rate && *train.scale_learning_rate < 0.0) {
        throw ValidationError("config train.scale_learning_rate must be >= 0");
    }
    if (train.batch_size < 0) throw ValidationError("config train.batch_size must be >= 0");
    if (train.weight_decay < 0.0) throw ValidationError("config train.weight_decay must be >= 0");
    if (prototype_source != "captions" && prototype_source != "class_names") {
        throw ValidationError("config prototype_source: expected \"captions\" or \"class_names\"");
    }
    if (k_shot && *k_shot <= 0) throw ValidationError("config k_shot must be positive");
    if (base_classes) {
        std::set<int> uniq(base_classes->begin(), base_classes->end());
        if (uniq.size() != base_classes->size() || base_classes->empty()) {
            throw ValidationError("config base_classes must be a non-empty list of distinct classes");
        }
    }
}

PipelineConfig default_config() {
    PipelineConfig cfg;
    cfg.name = "default";
    // one frozen backbone shared by both branches, so the unprompted student already has a
    // common image-text space
    cfg.vision.seed = 11;
    cfg.text.seed = 11;
    return cfg;
}

PipelineConfig parse_config(const json& doc) {
    PipelineConfig cfg = default_config();
    strict(doc, {"name", "seed", "k_shot", "base_classes", "prototype_source", "aggregation", "distill", "encoder",
                 "rules", "train", "synth", "paths"},
           "root");
    read(doc, "name", cfg.name, "root");
    read(doc, "seed", cfg.seed, "root");
    read(doc, "prototype_source", cfg.prototype_source, "root");
    if (doc.contains("k_shot") && !doc["k_shot"].is_null()) {
        int k = 0;
        read(doc, "k_shot", k, "root");
        cfg.k_shot = k;
    }
    if (doc.contains("base_classes") && !doc["base_classes"].is_null()) {
        std::vector<int> b;
        read(doc, "base_classes", b, "root");
        cfg.base_classes = b;
    }
    if (doc.contains("aggregation")) {
        const auto& a = doc["aggregation"];
        strict(a, {"beta", "gamma", "zeta", "epsilon", "renormalize_visual_prototype"}, "aggregation");
        read(a, "beta", cfg.aggregation.beta, "aggregation");
        read(a, "gamma", cfg.aggregation.gamma, "aggregation");
        read(a, "zeta", cfg.aggregation.zeta, "aggregation");
        read(a, "epsilon", cfg.aggregation.epsilon, "aggregation");
        read(a, "renormalize_visual_prototype", cfg.aggregation.renormalize_visual_prototype,
             "aggregation");
    }
    if (doc.contains("distill")) {
        const auto& d = doc["distill"];
        strict(d, {"lambda_img", "lambda_text", "lambda_logit", "tau", "tau_s", "tau_t",
                   "warmup_fraction", "schedule"},
               "distill");
        read(d, "lambda_img", cfg.distill.lambda_img, "distill");
        read(d, "lambda_text", cfg.distill.lambda_text, "distill");
        read(d, "lambda_logit", cfg.distill.lambda_logit, "distill");
        read(d, "tau", cfg.distill.tau, "distill");
        read(d, "tau_s", cfg.distill.tau_s, "distill");
        read(d, "tau_t", cfg.distill.tau_t, "distill");
        read(d, "warmup_fraction", cfg.distill.warmup_fraction, "distill");
        if (d.contains("schedule")) {
            std::string s;
            read(d, "schedule", s, "distill");
            cfg.distill.schedule = parse_schedule(s);
        }
    }
    if (doc.contains("encoder")) {
        const auto& e = doc["encoder"];
        strict(e, {"vision", "text"}, "encoder");
        const auto merge = [](const json& over, const student::ToyEncoderConfig& base,
                              const std::string& where) {
            json merged = json::parse(io::encoder_config_json(base).dump());
            for (const auto& [k, v] : over.items()) merged[k] = v;
            return io::parse_encoder_config(merged, "config encoder." + where);
        };
        if (e.contains("vision")) {
            strict(e["vision"], {"dim", "seq_len", "prompt_tokens", "layers", "prompt_depth",
                                 "ff_mult", "seed"},
                   "encoder.vision");
            cfg.vision = merge(e["vision"], cfg.vision, "vision");
        }
        if (e.contains("text")) {
            strict(e["text"], {"dim", "seq_len", "prompt_tokens", "layers", "prompt_depth",
                               "ff_mult", "seed"},
                   "encoder.text");
            cfg.text = merge(e["text"], cfg.text, "text");
        }
    }
    if (doc.contains("rules")) {
        const auto& r = doc["rules"];
        strict(r, {"positive_tokens", "negative_tokens", "min_words", "max_words"}, "rules");
        read(r, "positive_tokens", cfg.rules.positive_tokens, "rules");
        read(r, "negative_tokens", cfg.rules.negative_tokens, "rules");
        read(r, "min_words", cfg.rules.min_words, "rules");
        read(r, "max_words", cfg.rules.max_words, "rules");
    }
    if (doc.contains("train")) {
        const auto& t = doc["train"];
        strict(t, {"epochs", "learning_rate", "scale_learning_rate", "batch_size", "weight_decay"},
               "train");
        read(t, "epochs", cfg.train.epochs, "train");
        read(t, "learning_rate", cfg.train.learning_rate, "train");
        if (t.contains("scale_learning_rate") && !t["scale_learning_rate"].is_null()) {
            double v = 0.0;
            read(t, "scale_learning_rate", v, "train");
            cfg.train.scale_learning_rate = v;
        }
        read(t, "batch_size", cfg.train.batch_size, "train");
        read(t, "weight_decay", cfg.train.weight_decay, "train");
    }
    if (doc.contains("synth")) {
        const auto& s = doc["synth"];
        strict(s, {"classes", "dim", "seq_len", "train_per_class", "test_per_class", "spread",
                   "token_noise", "view_bias", "style", "text_bias", "name_noise", "novel_shift",
                   "captions_per_class", "planted_outliers", "flag_rate", "caption_spread",
                   "ground_bias", "gallery_captions_per_class"},
               "synth");
        auto& sp = cfg.synth;
        read(s, "classes", sp.classes, "synth");
        read(s, "dim", sp.dim, "synth");
        read(s, "seq_len", sp.seq_len, "synth");
        read(s, "train_per_class", sp.train_per_class, "synth");
        read(s, "test_per_class", sp.test_per_class, "synth");
        read(s, "spread", sp.spread, "synth");
        read(s, "token_noise", sp.token_noise, "synth");
        read(s, "view_bias", sp.view_bias, "synth");
        read(s, "style", sp.style, "synth");
        read(s, "text_bias", sp.text_bias, "synth");
        read(s, "name_noise", sp.name_noise, "synth");
        read(s, "novel_shift", sp.novel_shift, "synth");
        read(s, "captions_per_class", sp.captions_per_class, "synth");
        read(s, "planted_outliers", sp.planted_outliers, "synth");
        read(s, "flag_rate", sp.flag_rate, "synth");
        read(s, "caption_spread", sp.caption_spread, "synth");
        read(s, "ground_bias", sp.ground_bias, "synth");
        read(s, "gallery_captions_per_class", sp.gallery_captions_per_class, "synth");
    }
    if (doc.contains("paths")) {
        const auto& p = doc["paths"];
        const auto& keys = path_keys();
        strict(p, std::set<std::string>(keys.begin(), keys.end()), "paths");
        for (const auto& [k, v] : p.items()) {
            if (!v.is_string()) throw ValidationError("config paths." + k + ": expected a string");
            cfg.paths[k] = v.get<std::string>();
        }
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    return parse_config(io::read_json(path));
}

ordered_json config_json(const PipelineConfig& cfg) {
    ordered_json j;
    j["name"] = cfg.name;
    j["seed"] = cfg.seed;
    j["k_shot"] = cfg.k_shot ? ordered_json(*cfg.k_shot) : ordered_json(nullptr);
    j["base_classes"] = cfg.base_classes ? ordered_json(*cfg.base_classes) : ordered_json(nullptr);
    j["prototype_source"] = cfg.prototype_source;
    j["aggregation"] = {{"beta", cfg.aggregation.beta},
                        {"gamma", cfg.aggregation.gamma},
                        {"zeta", cfg.aggregation.zeta},
                        {"epsilon", cfg.aggregation.epsilon},
                        {"renormalize_visual_prototype", cfg.aggregation.renormalize_visual_prototype}};
    j["distill"] = {{"lambda_img", cfg.distill.lambda_img},
                    {"lambda_text", cfg.distill.lambda_text},
                    {"lambda_logit", cfg.distill.lambda_logit},
                    {"tau", cfg.distill.tau},
                    {"tau_s", cfg.distill.tau_s},
                    {"tau_t", cfg.distill.tau_t},
                    {"warmup_fraction", cfg.distill.warmup_fraction},
                    {"schedule", schedule_name(cfg.distill.schedule)}};
    j["encoder"] = {{"vision", io::encoder_config_json(cfg.vision)},
                    {"text", io::encoder_config_json(cfg.text)}};
    j["rules"] = {{"positive_tokens", cfg.rules.positive_tokens},
                  {"negative_tokens", cfg.rules.negative_tokens},
                  {"min_words", cfg.rules.min_words},
                  {"max_words", cfg.rules.max_words}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"learning_rate", cfg.train.learning_rate},
                  {"scale_learning_rate", cfg.train.scale_learning_rate
                                              ? ordered_json(*cfg.train.scale_learning_rate)
                                              : ordered_json(nullptr)},
                  {"batch_size", cfg.train.batch_size},
                  {"weight_decay", cfg.train.weight_decay}};
    const auto& s = cfg.synth;
    j["synth"] = {{"classes", s.classes},
                  {"dim", s.dim},
                  {"seq_len", s.seq_len},
                  {"train_per_class", s.train_per_class},
                  {"test_per_class", s.test_per_class},
                  {"spread", s.spread},
                  {"token_noise", s.token_noise},
                  {"view_bias", s.view_bias},
                  {"style", s.style},
                  {"text_bias", s.text_bias},
                  {"name_noise", s.name_noise},
                  {"novel_shift", s.novel_shift},
                  {"captions_per_class", s.captions_per_class},
                  {"planted_outliers", s.planted_outliers},
                  {"flag_rate", s.flag_rate},
                  {"caption_spread", s.caption_spread},
                  {"ground_bias", s.ground_bias},
                  {"gallery_captions_per_class", s.gallery_captions_per_class}};
    ordered_json paths = ordered_json::object();
    for (const auto& [k, v] : cfg.paths) paths[k] = v;
    j["paths"] = paths;
    return j;
}

}  // namespace protokd::config
