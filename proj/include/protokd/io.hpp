#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "protokd/core.hpp"
#include "protokd/distill.hpp"
#include "protokd/prototype.hpp"
#include "protokd/rsflag.hpp"
#include "protokd/student.hpp"

namespace protokd::io {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---- embedding cache: one {"id", "label", "split", "vec"} object per line ----

/// Parses line-delimited embedding records. Vectors are l2-normalized when `normalize` is set.
/// Malformed lines, ragged dimensions and zero vectors raise ValidationError with the line number.
std::vector<EmbeddingRecord> read_embedding_cache(std::istream& in, bool normalize = true,
                                                  const std::string& source = "<stream>");
std::vector<EmbeddingRecord> read_embedding_cache(const fs::path& path, bool normalize = true);
void write_embedding_cache(std::ostream& out, const std::vector<EmbeddingRecord>& records);
void write_embedding_cache(const fs::path& path, const std::vector<EmbeddingRecord>& records);

// ---- token cache: {"id", "label", "split", "tokens": [[...], ...]} per line ----

struct TokenRecord {
    std::string id;
    std::optional<int> label;
    std::string split = "train";
    Matrix tokens;
};

std::vector<TokenRecord> read_token_cache(std::istream& in, const std::string& source = "<stream>");
std::vector<TokenRecord> read_token_cache(const fs::path& path);
void write_token_cache(const fs::path& path, const std::vector<TokenRecord>& records);

// ---- caption file: [{"class", "class_name", "captions": [text | {"text", "rs_flag"}]}] ----

struct CaptionClass {
    int class_index = 0;
    std::string class_name;
    std::vector<std::string> captions;
    std::vector<std::optional<int>> flags;  ///< parallel to captions
};

std::vector<CaptionClass> parse_caption_file(const json& doc);
std::vector<CaptionClass> read_caption_file(const fs::path& path);
ordered_json caption_file_json(const std::vector<CaptionClass>& classes);
void write_caption_file(const fs::path& path, const std::vector<CaptionClass>& classes);

/// Flattens to candidates (caption_index = position within the class list).
std::vector<rsflag::CaptionCandidate> to_candidates(const std::vector<CaptionClass>& classes);

/// Caption embedding ids are "<class>/<caption_index>".
std::string caption_embedding_id(int class_index, int caption_index);

/// Attaches embeddings from a caption-embedding cache; every candidate must find its id.
void attach_embeddings(std::vector<rsflag::CaptionCandidate>& candidates,
                       const std::vector<EmbeddingRecord>& embeddings);

// ---- prototype file: JSON array of class prototypes with their audit trail ----

ordered_json prototypes_json(const std::map<int, prototype::ClassPrototype>& protos,
                     const prototype::AggregationConfig& cfg);
std::map<int, prototype::ClassPrototype> parse_prototypes(const json& doc);
std::map<int, prototype::ClassPrototype> read_prototypes(const fs::path& path);

// ---- checkpoints and loss logs ----

ordered_json encoder_config_json(const student::ToyEncoderConfig& cfg);
student::ToyEncoderConfig parse_encoder_config(const json& j, const std::string& where);

struct Checkpoint {
    student::ToyEncoderConfig vision;
    student::ToyEncoderConfig text;
    long step = 0;
    std::uint64_t seed = 0;
    student::StudentParams params;
};

ordered_json checkpoint_json(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const json& doc);
Checkpoint read_checkpoint(const fs::path& path);
/// Rebuilds frozen weights from the stored seeds and installs the stored prompts.
student::ToyStudent restore_student(const Checkpoint& ckpt);

ordered_json loss_record_json(long step, const distill::LossBreakdown& loss);
void write_loss_log(const fs::path& path, const std::vector<distill::LossBreakdown>& history);

// ---- relevance maps: {"i2t": {query_id: [gallery_id, ...]}, "t2i": {...}} ----

struct RelevanceMaps {
    std::map<std::string, std::vector<std::string>> i2t;
    std::map<std::string, std::vector<std::string>> t2i;
};

RelevanceMaps read_relevance(const fs::path& path);
void write_relevance(const fs::path& path, const RelevanceMaps& rel);

// ---- helpers ----

json read_json(const fs::path& path);
/// Writes `doc.dump(2)` plus a trailing newline.
void write_json(const fs::path& path, const json& doc);
void write_json(const fs::path& path, const ordered_json& doc);
std::string read_bytes(const fs::path& path);
/// FNV-1a 64-bit digest of a file's bytes, as 16 hex digits.
std::string file_digest(const fs::path& path);

ordered_json vec_json(std::span<const double> v);
Vec parse_vec(const json& j, const std::string& where);
ordered_json matrix_json(const Matrix& m);
Matrix parse_matrix(const json& j, const std::string& where);

}  // namespace protokd::io
