#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "protokd/config.hpp"
#include "protokd/core.hpp"
#include "protokd/io.hpp"

namespace protokd::synth {

/// Seeded Gaussian-cluster benchmark. Teacher-side vectors are stored raw (normalized on load).
struct SynthData {
    std::vector<Vec> centers;  ///< unit class centers
    std::vector<std::string> class_names;
    std::vector<EmbeddingRecord> teacher_images;  ///< train and test splits
    std::vector<io::TokenRecord> student_images;  ///< same ids as teacher_images
    std::vector<io::TokenRecord> class_tokens;    ///< one per class, id "class/<k>"
    std::vector<io::CaptionClass> captions;       ///< texts only; flags come from the rules
    std::vector<EmbeddingRecord> caption_embeddings;  ///< ids "<k>/<j>"
    std::vector<EmbeddingRecord> class_name_embeddings;
    std::vector<EmbeddingRecord> text_gallery;   ///< retrieval gallery of captions
    std::vector<EmbeddingRecord> image_gallery;  ///< test-split teacher images
    io::RelevanceMaps relevance;
    std::map<int, std::vector<int>> planted_outliers;  ///< caption positions per class
    std::map<int, std::vector<int>> intended_flags;    ///< flag each caption text was written for
};

std::vector<std::string> default_class_names(int classes);

/// Caption positions are resampled per class until the planted outliers score below
/// median - 10 MAD against the class's visual prototype and every inlier survives pruning with
/// `agg`. Novel classes (those outside `base_classes`, if given) get an extra input shift.
SynthData generate(const config::SynthSpec& spec, const prototype::AggregationConfig& agg,
                   const std::optional<std::vector<int>>& base_classes, std::uint64_t seed);

/// File name used by gen-synth for each path key.
const std::map<std::string, std::string>& default_file_names();

/// Writes every file plus manifest.json into `dir`; returns the manifest.
nlohmann::ordered_json write(const SynthData& data, const std::filesystem::path& dir,
                             const config::PipelineConfig& cfg);

}  // namespace protokd::synth
