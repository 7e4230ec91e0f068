#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "protokd/distill.hpp"
#include "protokd/prototype.hpp"
#include "protokd/rsflag.hpp"
#include "protokd/student.hpp"

namespace protokd::config {

struct TrainConfig {
    int epochs = 100;
    double learning_rate = 0.05;
    std::optional<double> scale_learning_rate;  ///< null = learning_rate
    int batch_size = 0;  ///< 0 = full batch
    double weight_decay = 0.0;
};

/// Gaussian-cluster benchmark description used by gen-synth.
struct SynthSpec {
    int classes = 10;
    int dim = 32;
    int seq_len = 8;
    int train_per_class = 16;
    int test_per_class = 30;
    double spread = 0.35;         ///< teacher image scatter around the class center
    double token_noise = 0.6;     ///< per-token noise in student image inputs
    double view_bias = 1.0;       ///< norm of the shared nuisance direction in student image inputs
    double style = 1.0;           ///< per-image random multiple of a fixed style direction
    double text_bias = 1.0;       ///< norm of the shared nuisance direction in student text inputs
    double name_noise = 0.8;      ///< class-level noise of class-name text inputs and embeddings
    double novel_shift = 0.0;     ///< extra shift of novel-class student inputs
    int captions_per_class = 30;  ///< K_p
    int planted_outliers = 3;
    double flag_rate = 0.6;       ///< fraction of inlier captions written with RS-positive wording
    double caption_spread = 0.35;
    double ground_bias = 0.6;     ///< pull of flag-0 captions toward a generic ground-view direction
    int gallery_captions_per_class = 5;

    void validate() const;
};

struct PipelineConfig {
    std::string name;
    std::uint64_t seed = 0;
    std::optional<int> k_shot;
    std::optional<std::vector<int>> base_classes;
    /// "captions": aggregated caption prototypes; "class_names": the class-name embeddings as-is.
    std::string prototype_source = "captions";
    prototype::AggregationConfig aggregation;
    distill::DistillConfig distill;
    student::ToyEncoderConfig vision;
    student::ToyEncoderConfig text;
    rsflag::RsFlagRuleset rules;
    TrainConfig train;
    SynthSpec synth;
    std::map<std::string, std::string> paths;

    void validate() const;
};

/// Default configuration: aggregation and loss weights as used for the main experiments, desk-scale
/// encoders sharing frozen seed 11.
PipelineConfig default_config();

/// Strict parse on top of default_config(): any unknown key anywhere is a ValidationError.
PipelineConfig parse_config(const nlohmann::json& doc);
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_json(const PipelineConfig& cfg);

/// Keys accepted in the "paths" section.
const std::vector<std::string>& path_keys();

}  // namespace protokd::config
