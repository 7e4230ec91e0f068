#include "protokd/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace protokd::io {

namespace {

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    return out;
}

std::string where_line(const std::string& source, std::size_t line) {
    return source + ":" + std::to_string(line);
}

void require_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) throw ValidationError(where + ": unknown key \"" + key + "\"");
    }
}

std::optional<int> parse_label(const json& obj, const std::string& where) {
    if (!obj.contains("label") || obj["label"].is_null()) return std::nullopt;
    if (!obj["label"].is_number_integer()) throw ValidationError(where + ": label must be an integer");
    return obj["label"].get<int>();
}

std::string parse_split(const json& obj, const std::string& where) {
    if (!obj.contains("split")) return "train";
    const auto& s = obj["split"];
    if (!s.is_string() || (s != "train" && s != "test")) {
        throw ValidationError(where + ": split must be \"train\" or \"test\"");
    }
    return s.get<std::string>();
}

template <typename F>
void for_each_line(std::istream& in, const std::string& source, F&& fn) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(where_line(source, lineno) + ": malformed JSON (" + e.what() + ")");
        }
        fn(obj, where_line(source, lineno));
    }
}

}  // namespace

ordered_json vec_json(std::span<const double> v) {
    return ordered_json(std::vector<double>(v.begin(), v.end()));
}

Vec parse_vec(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ValidationError(where + ": expected a non-empty number array");
    Vec v;
    v.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number()) throw ValidationError(where + ": vector entries must be numbers");
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw ValidationError(where + ": non-finite vector entry");
        v.push_back(d);
    }
    return v;
}

ordered_json matrix_json(const Matrix& m) {
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < m.rows; ++i) rows.push_back(vec_json(m.row(i)));
    return rows;
}

Matrix parse_matrix(const json& j, const std::string& where) {
    if (!j.is_array()) throw ValidationError(where + ": expected an array of rows");
    if (j.empty()) return Matrix{};
    Matrix m;
    m.rows = j.size();
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Vec row = parse_vec(j[i], where);
        if (i == 0) m.cols = row.size();
        if (row.size() != m.cols) throw ValidationError(where + ": ragged matrix rows");
        m.data.insert(m.data.end(), row.begin(), row.end());
    }
    return m;
}

// ---- embedding cache ----

std::vector<EmbeddingRecord> read_embedding_cache(std::istream& in, bool normalize,
                                                  const std::string& source) {
    std::vector<EmbeddingRecord> out;
    std::size_t dim = 0;
    std::set<std::string> ids;
    for_each_line(in, source, [&](const json& obj, const std::string& where) {
        require_keys(obj, {"id", "label", "split", "vec"}, where);
        if (!obj.contains("id") || !obj["id"].is_string()) {
            throw ValidationError(where + ": missing string \"id\"");
        }
        if (!obj.contains("vec")) throw ValidationError(where + ": missing \"vec\"");
        EmbeddingRecord r;
        r.id = obj["id"].get<std::string>();
        if (!ids.insert(r.id).second) throw ValidationError(where + ": duplicate id " + r.id);
        r.label = parse_label(obj, where);
        r.split = parse_split(obj, where);
        r.vec = parse_vec(obj["vec"], where);
        if (dim == 0) dim = r.vec.size();
        if (r.vec.size() != dim) {
            throw ValidationError(where + ": dimension " + std::to_string(r.vec.size()) +
                                  " differs from " + std::to_string(dim));
        }
        if (normalize) {
            try {
                r.vec = l2_normalize(r.vec);
            } catch (const NumericalError&) {
                throw ValidationError(where + ": zero vector cannot be normalized");
            }
        }
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<EmbeddingRecord> read_embedding_cache(const fs::path& path, bool normalize) {
    auto in = open_in(path);
    return read_embedding_cache(in, normalize, path.string());
}

void write_embedding_cache(std::ostream& out, const std::vector<EmbeddingRecord>& records) {
    for (const auto& r : records) {
        ordered_json j;
        j["id"] = r.id;
        j["label"] = r.label ? ordered_json(*r.label) : ordered_json(nullptr);
        j["split"] = r.split;
        j["vec"] = r.vec;
        out << j.dump() << '\n';
    }
}

void write_embedding_cache(const fs::path& path, const std::vector<EmbeddingRecord>& records) {
    auto out = open_out(path);
    write_embedding_cache(out, records);
}

// ---- token cache ----

std::vector<TokenRecord> read_token_cache(std::istream& in, const std::string& source) {
    std::vector<TokenRecord> out;
    std::set<std::string> ids;
    for_each_line(in, source, [&](const json& obj, const std::string& where) {
        require_keys(obj, {"id", "label", "split", "tokens"}, where);
        if (!obj.contains("id") || !obj["id"].is_string()) {
            throw ValidationError(where + ": missing string \"id\"");
        }
        if (!obj.contains("tokens")) throw ValidationError(where + ": missing \"tokens\"");
        TokenRecord r;
        r.id = obj["id"].get<std::string>();
        if (!ids.insert(r.id).second) throw ValidationError(where + ": duplicate id " + r.id);
        r.label = parse_label(obj, where);
        r.split = parse_split(obj, where);
        r.tokens = parse_matrix(obj["tokens"], where);
        if (!out.empty() && (r.tokens.rows != out.front().tokens.rows ||
                             r.tokens.cols != out.front().tokens.cols)) {
            throw ValidationError(where + ": token shape differs from earlier records");
        }
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<TokenRecord> read_token_cache(const fs::path& path) {
    auto in = open_in(path);
    return read_token_cache(in, path.string());
}

void write_token_cache(const fs::path& path, const std::vector<TokenRecord>& records) {
    auto out = open_out(path);
    for (const auto& r : records) {
        ordered_json j;
        j["id"] = r.id;
        j["label"] = r.label ? ordered_json(*r.label) : ordered_json(nullptr);
        j["split"] = r.split;
        j["tokens"] = matrix_json(r.tokens);
        out << j.dump() << '\n';
    }
}

// ---- captions ----

std::vector<CaptionClass> parse_caption_file(const json& doc) {
    if (!doc.is_array()) throw ValidationError("caption file: top level must be an array");
    std::vector<CaptionClass> out;
    std::set<int> seen;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string where = "caption file entry " + std::to_string(i);
        const json& e = doc[i];
        require_keys(e, {"class", "class_name", "captions"}, where);
        if (!e.contains("class") || !e["class"].is_number_integer()) {
            throw ValidationError(where + ": \"class\" must be an integer");
        }
        CaptionClass c;
        c.class_index = e["class"].get<int>();
        if (!seen.insert(c.class_index).second) {
            throw ValidationError(where + ": duplicate class " + std::to_string(c.class_index));
        }
        if (e.contains("class_name")) {
            if (!e["class_name"].is_string()) throw ValidationError(where + ": class_name must be a string");
            c.class_name = e["class_name"].get<std::string>();
        }
        if (!e.contains("captions") || !e["captions"].is_array() || e["captions"].empty()) {
            throw ValidationError(where + " (class " + std::to_string(c.class_index) +
                                  "): \"captions\" must be a non-empty array");
        }
        for (std::size_t j = 0; j < e["captions"].size(); ++j) {
            const json& cap = e["captions"][j];
            const std::string cw = where + " caption " + std::to_string(j);
            if (cap.is_string()) {
                c.captions.push_back(cap.get<std::string>());
                c.flags.emplace_back();
            } else {
                require_keys(cap, {"text", "rs_flag"}, cw);
                if (!cap.contains("text") || !cap["text"].is_string()) {
                    throw ValidationError(cw + ": missing string \"text\"");
                }
                c.captions.push_back(cap["text"].get<std::string>());
                if (cap.contains("rs_flag")) {
                    const auto& f = cap["rs_flag"];
                    if (!f.is_number_integer() || (f != 0 && f != 1)) {
                        throw ValidationError(cw + ": rs_flag must be 0 or 1");
                    }
                    c.flags.emplace_back(f.get<int>());
                } else {
                    c.flags.emplace_back();
                }
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<CaptionClass> read_caption_file(const fs::path& path) {
    return parse_caption_file(read_json(path));
}

ordered_json caption_file_json(const std::vector<CaptionClass>& classes) {
    ordered_json doc = ordered_json::array();
    for (const auto& c : classes) {
        ordered_json e;
        e["class"] = c.class_index;
        e["class_name"] = c.class_name;
        ordered_json caps = ordered_json::array();
        for (std::size_t j = 0; j < c.captions.size(); ++j) {
            if (j < c.flags.size() && c.flags[j]) {
                ordered_json cap;
                cap["text"] = c.captions[j];
                cap["rs_flag"] = *c.flags[j];
                caps.push_back(cap);
            } else {
                caps.push_back(c.captions[j]);
            }
        }
        e["captions"] = caps;
        doc.push_back(e);
    }
    return doc;
}

void write_caption_file(const fs::path& path, const std::vector<CaptionClass>& classes) {
    write_json(path, caption_file_json(classes));
}

std::vector<rsflag::CaptionCandidate> to_candidates(const std::vector<CaptionClass>& classes) {
    std::vector<rsflag::CaptionCandidate> out;
    for (const auto& c : classes) {
        for (std::size_t j = 0; j < c.captions.size(); ++j) {
            rsflag::CaptionCandidate cand;
            cand.class_index = c.class_index;
            cand.caption_index = static_cast<int>(j);
            cand.text = c.captions[j];
            if (j < c.flags.size()) cand.rs_flag = c.flags[j];
            out.push_back(std::move(cand));
        }
    }
    return out;
}

std::string caption_embedding_id(int class_index, int caption_index) {
    return std::to_string(class_index) + "/" + std::to_string(caption_index);
}

void attach_embeddings(std::vector<rsflag::CaptionCandidate>& candidates,
                       const std::vector<EmbeddingRecord>& embeddings) {
    std::map<std::string, const EmbeddingRecord*> by_id;
    for (const auto& r : embeddings) by_id[r.id] = &r;
    for (auto& c : candidates) {
        const std::string id = caption_embedding_id(c.class_index, c.caption_index);
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw ValidationError("no caption embedding with id " + id);
        c.embedding = it->second->vec;
    }
}

// ---- prototypes ----

ordered_json prototypes_json(const std::map<int, prototype::ClassPrototype>& protos,
                     const prototype::AggregationConfig& cfg) {
    ordered_json doc = ordered_json::array();
    prototype::AggregationConfig plain = cfg;
    plain.gamma = 0.0;
    for (const auto& [k, p] : protos) {
        ordered_json e;
        e["class"] = k;
        e["prototype"] = p.prototype;
        e["caption_indices"] = p.caption_indices;
        e["kept"] = std::vector<int>(p.kept_indices.begin(), p.kept_indices.end());
        e["scores"] = p.scores;
        e["median"] = p.stats.median;
        e["mad"] = p.stats.mad;
        e["zscores"] = p.stats.zscores;
        e["flags"] = p.flags;
        e["weights"] = p.weights;
        // no caption trail when the prototype came straight from a class-name embedding
        e["weights_uncalibrated"] =
            p.kept_indices.empty()
                ? Vec{}
                : prototype::candidate_weights(p.scores, p.flags, p.kept_indices, plain);
        doc.push_back(e);
    }
    return doc;
}

std::map<int, prototype::ClassPrototype> parse_prototypes(const json& doc) {
    if (!doc.is_array()) throw ValidationError("prototype file: top level must be an array");
    std::map<int, prototype::ClassPrototype> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string where = "prototype entry " + std::to_string(i);
        const json& e = doc[i];
        if (!e.is_object() || !e.contains("class") || !e.contains("prototype")) {
            throw ValidationError(where + ": needs \"class\" and \"prototype\"");
        }
        prototype::ClassPrototype p;
        p.class_index = e["class"].get<int>();
        p.prototype = parse_vec(e["prototype"], where);
        if (!is_unit(p.prototype)) throw ValidationError(where + ": prototype is not unit-norm");
        if (e.contains("caption_indices")) p.caption_indices = e["caption_indices"].get<std::vector<int>>();
        if (e.contains("kept")) {
            const auto kept = e["kept"].get<std::vector<int>>();
            p.kept_indices = std::set<int>(kept.begin(), kept.end());
        }
        if (e.contains("scores")) p.scores = e["scores"].get<Vec>();
        if (e.contains("median")) p.stats.median = e["median"].get<double>();
        if (e.contains("mad")) p.stats.mad = e["mad"].get<double>();
        if (e.contains("zscores")) p.stats.zscores = e["zscores"].get<Vec>();
        if (e.contains("flags")) p.flags = e["flags"].get<std::vector<int>>();
        if (e.contains("weights")) p.weights = e["weights"].get<Vec>();
        if (!out.emplace(p.class_index, std::move(p)).second) {
            throw ValidationError(where + ": duplicate class");
        }
    }
    return out;
}

std::map<int, prototype::ClassPrototype> read_prototypes(const fs::path& path) {
    return parse_prototypes(read_json(path));
}

// ---- checkpoint ----

ordered_json encoder_config_json(const student::ToyEncoderConfig& cfg) {
    ordered_json j;
    j["dim"] = cfg.dim;
    j["seq_len"] = cfg.seq_len;
    j["prompt_tokens"] = cfg.prompt_tokens;
    j["layers"] = cfg.layers;
    j["prompt_depth"] = cfg.prompt_depth;
    j["ff_mult"] = cfg.ff_mult;
    j["seed"] = cfg.seed;
    return j;
}

student::ToyEncoderConfig parse_encoder_config(const json& j, const std::string& where) {
    require_keys(j, {"dim", "seq_len", "prompt_tokens", "layers", "prompt_depth", "ff_mult", "seed"},
                 where);
    student::ToyEncoderConfig cfg;
    try {
        if (j.contains("dim")) cfg.dim = j["dim"].get<int>();
        if (j.contains("seq_len")) cfg.seq_len = j["seq_len"].get<int>();
        if (j.contains("prompt_tokens")) cfg.prompt_tokens = j["prompt_tokens"].get<int>();
        if (j.contains("layers")) cfg.layers = j["layers"].get<int>();
        if (j.contains("prompt_depth")) cfg.prompt_depth = j["prompt_depth"].get<int>();
        if (j.contains("ff_mult")) cfg.ff_mult = j["ff_mult"].get<int>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ValidationError(where + ": " + e.what());
    }
    cfg.validate();
    return cfg;
}

ordered_json checkpoint_json(const Checkpoint& ckpt) {
    ordered_json j;
    j["format"] = "protokd-checkpoint-v1";
    j["vision"] = encoder_config_json(ckpt.vision);
    j["text"] = encoder_config_json(ckpt.text);
    j["step"] = ckpt.step;
    j["seed"] = ckpt.seed;
    j["tau_s"] = ckpt.params.tau_s;
    ordered_json vp = ordered_json::array();
    for (const auto& m : ckpt.params.vision_prompts) vp.push_back(matrix_json(m));
    ordered_json tp = ordered_json::array();
    for (const auto& m : ckpt.params.text_prompts) tp.push_back(matrix_json(m));
    j["vision_prompts"] = vp;
    j["text_prompts"] = tp;
    return j;
}

Checkpoint parse_checkpoint(const json& doc) {
    require_keys(doc, {"format", "vision", "text", "step", "seed", "tau_s", "vision_prompts",
                       "text_prompts"},
                 "checkpoint");
    if (doc.value("format", "") != "protokd-checkpoint-v1") {
        throw ValidationError("checkpoint: unsupported format");
    }
    Checkpoint c;
    c.vision = parse_encoder_config(doc.at("vision"), "checkpoint.vision");
    c.text = parse_encoder_config(doc.at("text"), "checkpoint.text");
    c.step = doc.at("step").get<long>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.params.tau_s = doc.at("tau_s").get<double>();
    for (const auto& m : doc.at("vision_prompts")) {
        c.params.vision_prompts.push_back(parse_matrix(m, "checkpoint.vision_prompts"));
    }
    for (const auto& m : doc.at("text_prompts")) {
        c.params.text_prompts.push_back(parse_matrix(m, "checkpoint.text_prompts"));
    }
    return c;
}

Checkpoint read_checkpoint(const fs::path& path) { return parse_checkpoint(read_json(path)); }

student::ToyStudent restore_student(const Checkpoint& ckpt) {
    auto s = student::init_student(ckpt.vision, ckpt.text, ckpt.params.tau_s);
    const auto install = [](std::vector<Matrix>& dst, const std::vector<Matrix>& src,
                            const char* branch) {
        if (dst.size() != src.size()) {
            throw ValidationError(std::string("checkpoint: ") + branch +
                                  " prompt layer count does not match its config");
        }
        for (std::size_t l = 0; l < dst.size(); ++l) {
            if (dst[l].rows != src[l].rows || dst[l].cols != src[l].cols) {
                throw ValidationError(std::string("checkpoint: ") + branch +
                                      " prompt shape does not match its config");
            }
            dst[l] = src[l];
        }
    };
    install(s.vision.prompts, ckpt.params.vision_prompts, "vision");
    install(s.text.prompts, ckpt.params.text_prompts, "text");
    return s;
}

ordered_json loss_record_json(long step, const distill::LossBreakdown& loss) {
    ordered_json j;
    j["step"] = step;
    j["task"] = loss.task;
    j["img"] = loss.img;
    j["text"] = loss.text;
    j["logit"] = loss.logit;
    j["total"] = loss.total;
    j["effective_lambda_logit"] = loss.effective_lambda_logit;
    return j;
}

void write_loss_log(const fs::path& path, const std::vector<distill::LossBreakdown>& history) {
    auto out = open_out(path);
    for (std::size_t s = 0; s < history.size(); ++s) {
        out << loss_record_json(static_cast<long>(s), history[s]).dump() << '\n';
    }
}

// ---- relevance ----

RelevanceMaps read_relevance(const fs::path& path) {
    const json doc = read_json(path);
    require_keys(doc, {"i2t", "t2i"}, path.string());
    RelevanceMaps rel;
    try {
        if (doc.contains("i2t")) rel.i2t = doc["i2t"].get<std::map<std::string, std::vector<std::string>>>();
        if (doc.contains("t2i")) rel.t2i = doc["t2i"].get<std::map<std::string, std::vector<std::string>>>();
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return rel;
}

void write_relevance(const fs::path& path, const RelevanceMaps& rel) {
    json doc;
    doc["i2t"] = rel.i2t;
    doc["t2i"] = rel.t2i;
    write_json(path, doc);
}

// ---- helpers ----

json read_json(const fs::path& path) {
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": malformed JSON (" + e.what() + ")");
    }
}

void write_json(const fs::path& path, const json& doc) {
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

void write_json(const fs::path& path, const ordered_json& doc) {
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

std::string read_bytes(const fs::path& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string file_digest(const fs::path& path) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : read_bytes(path)) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << h;
    return ss.str();
}

}  // namespace protokd::io
