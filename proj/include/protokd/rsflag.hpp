#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "protokd/core.hpp"

namespace protokd::rsflag {

/// Token and length rules deciding whether a caption reads like a remote-sensing description.
struct RsFlagRuleset {
    std::vector<std::string> positive_tokens{"overhead",       "aerial view",   "satellite imagery",
                                             "nadir",          "orthorectified", "multispectral",
                                             "SAR"};
    std::vector<std::string> negative_tokens{"street",   "indoor",   "selfie",
                                             "portrait", "close-up", "ground level"};
    int min_words = 6;
    int max_words = 20;

    void validate() const;
};

struct CaptionCandidate {
    int class_index = 0;
    int caption_index = 0;
    std::string text;
    std::optional<int> rs_flag;
    std::optional<Vec> embedding;
};

/// Number of maximal non-whitespace runs.
int word_count(std::string_view text);

/// Case-insensitive phrase match with a non-alphanumeric (or string edge) boundary on both sides.
bool contains_token(std::string_view text, std::string_view phrase);

int assign_flag(std::string_view text, const RsFlagRuleset& rules);

std::vector<CaptionCandidate> annotate_corpus(std::vector<CaptionCandidate> captions,
                                              const RsFlagRuleset& rules);

}  // namespace protokd::rsflag
