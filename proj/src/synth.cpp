#include "protokd/synth.hpp"

#include <cmath>
#include <random>
#include <set>

#include "protokd/prototype.hpp"

namespace protokd::synth {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Independent stream per purpose so that changing one count does not reshuffle everything else.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t sub = 0) {
    return std::mt19937_64(splitmix64(splitmix64(seed ^ (tag * 0x100000001B3ULL)) + sub));
}

// Isotropic noise with expected norm close to `scale`.
Vec noise(std::mt19937_64& rng, int dim, double scale) {
    std::normal_distribution<double> n(0.0, scale / std::sqrt(static_cast<double>(dim)));
    Vec v(static_cast<std::size_t>(dim));
    for (auto& x : v) x = n(rng);
    return v;
}

Vec random_unit(std::mt19937_64& rng, int dim) {
    return l2_normalize(noise(rng, dim, 1.0));
}

Vec axpy(const Vec& a, double s, const Vec& b) {
    Vec out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * b[i];
    return out;
}

Matrix token_block(std::mt19937_64& rng, const Vec& signal, const Vec& bias, int seq_len,
                   double noise_scale) {
    const int dim = static_cast<int>(signal.size());
    Matrix m(static_cast<std::size_t>(seq_len), static_cast<std::size_t>(dim));
    for (int t = 0; t < seq_len; ++t) {
        const Vec e = noise(rng, dim, noise_scale);
        for (int d = 0; d < dim; ++d) m(t, d) = signal[d] + bias[d] + e[d];
    }
    return m;
}

const std::vector<std::string> kRsTemplates{
    "an aerial view of a {} with clearly visible structures and layout",
    "overhead satellite imagery showing a {} seen from high above",
    "a nadir image of a {} captured by an orbiting sensor",
    "multispectral overhead scene of a {} and the surrounding land",
    "high resolution aerial view of a {} with sharp edges",
};

const std::vector<std::string> kGroundTemplates{
    "a street level photo of a {} taken by a passerby",
    "people standing at ground level near the {} on a sunny day",
    "an indoor picture related to the {} with soft warm lighting",
    "a close-up snapshot of the {} entrance with a sign",
};

const std::vector<std::string> kOffTopic{
    "a close-up portrait of a smiling person holding a coffee cup",
    "a blurry selfie taken inside a crowded shopping mall at night",
    "a street vendor selling fruit from a small wooden cart",
};

std::string fill(const std::string& tmpl, const std::string& name) {
    const auto pos = tmpl.find("{}");
    return tmpl.substr(0, pos) + name + tmpl.substr(pos + 2);
}

}  // namespace

std::vector<std::string> default_class_names(int classes) {
    static const std::vector<std::string> names{
        "airport", "farmland", "forest",  "harbor", "residential area",
        "river",   "stadium",  "desert",  "parking lot", "bridge"};
    std::vector<std::string> out;
    for (int k = 0; k < classes; ++k) {
        out.push_back(k < static_cast<int>(names.size()) ? names[k]
                                                         : "landmark " + std::to_string(k));
    }
    return out;
}

const std::map<std::string, std::string>& default_file_names() {
    static const std::map<std::string, std::string> names{
        {"teacher_images", "teacher_images.jsonl"},
        {"student_images", "student_images.tokens.jsonl"},
        {"class_tokens", "class_tokens.tokens.jsonl"},
        {"captions", "captions.json"},
        {"flagged_captions", "captions_flagged.json"},
        {"caption_embeddings", "caption_embeddings.jsonl"},
        {"class_name_embeddings", "class_name_embeddings.jsonl"},
        {"text_gallery", "text_gallery.jsonl"},
        {"image_gallery", "image_gallery.jsonl"},
        {"relevance", "relevance.json"},
        {"prototypes", "prototypes.json"},
        {"checkpoint", "checkpoint.json"},
    };
    return names;
}

SynthData generate(const config::SynthSpec& spec, const prototype::AggregationConfig& agg,
                   const std::optional<std::vector<int>>& base_classes, std::uint64_t seed) {
    spec.validate();
    agg.validate();
    const int C = spec.classes;
    const int D = spec.dim;
    std::set<int> novel;
    if (base_classes) {
        const std::set<int> base(base_classes->begin(), base_classes->end());
        for (int k : base) {
            if (k < 0 || k >= C) {
                throw ValidationError("synth: base class " + std::to_string(k) + " out of range");
            }
        }
        for (int k = 0; k < C; ++k) {
            if (!base.count(k)) novel.insert(k);
        }
    }

    SynthData out;
    out.class_names = default_class_names(C);

    auto geo = stream(seed, 1);
    for (int k = 0; k < C; ++k) out.centers.push_back(random_unit(geo, D));
    const Vec view_dir = random_unit(geo, D);
    const Vec text_dir = random_unit(geo, D);
    const Vec ground_dir = random_unit(geo, D);
    const Vec shift_dir = random_unit(geo, D);
    const Vec style_dir = random_unit(geo, D);
    const Vec g_v = axpy(Vec(D, 0.0), spec.view_bias, view_dir);
    const Vec g_t = axpy(Vec(D, 0.0), spec.text_bias, text_dir);

    // images: teacher raw vector and the student's noisy token view of it
    std::map<int, std::vector<Vec>> train_feats;
    for (const std::string split : {"train", "test"}) {
        const int per = split == "train" ? spec.train_per_class : spec.test_per_class;
        for (int k = 0; k < C; ++k) {
            auto rng = stream(seed, split == "train" ? 2 : 3, static_cast<std::uint64_t>(k));
            const Vec bias = novel.count(k) ? axpy(g_v, spec.novel_shift, shift_dir) : g_v;
            std::normal_distribution<double> style_coef(0.0, spec.style);
            for (int i = 0; i < per; ++i) {
                const std::string id = (split == "train" ? "tr-" : "te-") + std::to_string(k) +
                                       "-" + std::to_string(i);
                Vec raw = axpy(out.centers[k], 1.0, noise(rng, D, spec.spread));
                const Vec unit = l2_normalize(raw);
                if (split == "train") train_feats[k].push_back(unit);
                out.teacher_images.push_back({id, k, split, raw});
                const Vec styled = spec.style > 0.0 ? axpy(bias, style_coef(rng), style_dir) : bias;
                out.student_images.push_back(
                    {id, k, split, token_block(rng, unit, styled, spec.seq_len, spec.token_noise)});
            }
        }
    }
    for (const auto& r : out.teacher_images) {
        if (r.split == "test") out.image_gallery.push_back(r);
    }

    // class names: one class-level perturbation shared by the teacher name embedding and the
    // student's text input
    for (int k = 0; k < C; ++k) {
        auto rng = stream(seed, 4, static_cast<std::uint64_t>(k));
        const Vec name_vec = axpy(out.centers[k], 1.0, noise(rng, D, spec.name_noise));
        out.class_name_embeddings.push_back({"class/" + std::to_string(k), k, "train", name_vec});
        out.class_tokens.push_back({"class/" + std::to_string(k), k, "train",
                                    token_block(rng, l2_normalize(name_vec), g_t, spec.seq_len,
                                                0.25 * spec.token_noise)});
    }

    // caption candidates
    const int n_cap = spec.captions_per_class;
    const int n_out = spec.planted_outliers;
    const int n_in = n_cap - n_out;
    const int n_rs = static_cast<int>(std::lround(spec.flag_rate * n_in));
    for (int k = 0; k < C; ++k) {
        const Vec v_hat = prototype::visual_prototype(train_feats[k], k);
        auto rng = stream(seed, 5, static_cast<std::uint64_t>(k));
        bool planted = false;
        for (int attempt = 0; attempt < 1000 && !planted; ++attempt) {
            // role per position: 0 = ground-view inlier, 1 = RS inlier, 2 = outlier
            std::vector<int> role(static_cast<std::size_t>(n_cap), 0);
            for (int j = 0; j < n_rs; ++j) role[j] = 1;
            for (int j = n_in; j < n_cap; ++j) role[j] = 2;
            for (int j = n_cap - 1; j > 0; --j) {
                std::swap(role[j], role[rng() % static_cast<std::uint64_t>(j + 1)]);
            }
            std::vector<Vec> raw;
            Vec scores;
            for (int j = 0; j < n_cap; ++j) {
                Vec v;
                if (role[j] == 2) {
                    v = axpy(axpy(Vec(D, 0.0), -1.0, out.centers[k]), 1.0, noise(rng, D, 0.3));
                } else {
                    v = axpy(out.centers[k], 1.0, noise(rng, D, spec.caption_spread));
                    if (role[j] == 0) v = axpy(v, spec.ground_bias, ground_dir);
                }
                scores.push_back(dot(v_hat, l2_normalize(v)));
                raw.push_back(std::move(v));
            }
            const auto stats = robust_stats(scores, agg.epsilon);
            const auto kept = prototype::prune(scores, agg).kept;
            bool ok = true;
            for (int j = 0; j < n_cap && ok; ++j) {
                if (role[j] == 2) {
                    ok = scores[j] < stats.median - 10.0 * stats.mad && !kept.count(j);
                } else {
                    ok = kept.count(j) > 0;
                }
            }
            if (!ok) continue;
            planted = true;

            io::CaptionClass cls;
            cls.class_index = k;
            cls.class_name = out.class_names[k];
            int rs_i = 0, gr_i = 0, off_i = 0;
            for (int j = 0; j < n_cap; ++j) {
                std::string text;
                int flag = 0;
                if (role[j] == 1) {
                    text = fill(kRsTemplates[rs_i++ % kRsTemplates.size()], cls.class_name);
                    flag = 1;
                } else if (role[j] == 0) {
                    text = fill(kGroundTemplates[gr_i++ % kGroundTemplates.size()], cls.class_name);
                } else {
                    text = kOffTopic[off_i++ % kOffTopic.size()];
                    out.planted_outliers[k].push_back(j);
                }
                cls.captions.push_back(text);
                cls.flags.push_back(std::nullopt);
                out.intended_flags[k].push_back(flag);
                out.caption_embeddings.push_back(
                    {io::caption_embedding_id(k, j), k, "train", raw[j]});
            }
            out.captions.push_back(std::move(cls));
        }
        if (!planted) {
            throw ValidationError("synth: could not plant outliers for class " + std::to_string(k) +
                                  "; reduce caption_spread or planted_outliers");
        }
    }

    // retrieval: a frozen caption gallery against the test images
    for (int k = 0; k < C; ++k) {
        auto rng = stream(seed, 6, static_cast<std::uint64_t>(k));
        for (int j = 0; j < spec.gallery_captions_per_class; ++j) {
            const std::string id = "cap-" + std::to_string(k) + "-" + std::to_string(j);
            out.text_gallery.push_back(
                {id, k, "test", axpy(out.centers[k], 1.0, noise(rng, D, spec.caption_spread))});
        }
    }
    for (const auto& img : out.image_gallery) {
        auto& rel = out.relevance.i2t[img.id];
        for (const auto& cap : out.text_gallery) {
            if (cap.label == img.label) rel.push_back(cap.id);
        }
    }
    for (const auto& cap : out.text_gallery) {
        auto& rel = out.relevance.t2i[cap.id];
        for (const auto& img : out.image_gallery) {
            if (img.label == cap.label) rel.push_back(img.id);
        }
    }
    return out;
}

nlohmann::ordered_json write(const SynthData& data, const std::filesystem::path& dir,
                             const config::PipelineConfig& cfg) {
    std::filesystem::create_directories(dir);
    const auto& names = default_file_names();
    const auto at = [&](const char* key) { return dir / names.at(key); };
    io::write_embedding_cache(at("teacher_images"), data.teacher_images);
    io::write_token_cache(at("student_images"), data.student_images);
    io::write_token_cache(at("class_tokens"), data.class_tokens);
    io::write_caption_file(at("captions"), data.captions);
    io::write_embedding_cache(at("caption_embeddings"), data.caption_embeddings);
    io::write_embedding_cache(at("class_name_embeddings"), data.class_name_embeddings);
    io::write_embedding_cache(at("text_gallery"), data.text_gallery);
    io::write_embedding_cache(at("image_gallery"), data.image_gallery);
    io::write_relevance(at("relevance"), data.relevance);

    nlohmann::ordered_json manifest;
    manifest["seed"] = cfg.seed;
    manifest["synth"] = config::config_json(cfg)["synth"];
    manifest["class_names"] = data.class_names;
    nlohmann::ordered_json planted = nlohmann::ordered_json::object();
    for (const auto& [k, pos] : data.planted_outliers) planted[std::to_string(k)] = pos;
    manifest["planted_outliers"] = planted;
    nlohmann::ordered_json files = nlohmann::ordered_json::object();
    for (const char* key : {"teacher_images", "student_images", "class_tokens", "captions",
                            "caption_embeddings", "class_name_embeddings", "text_gallery",
                            "image_gallery", "relevance"}) {
        files[key] = {{"file", names.at(key)}, {"digest", io::file_digest(at(key))}};
    }
    manifest["files"] = files;
    io::write_json(dir / "manifest.json", manifest);
    return manifest;
}

}  // namespace protokd::synth
