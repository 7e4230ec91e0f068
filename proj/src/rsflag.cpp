#include "protokd/rsflag.hpp"

#include <algorithm>
#include <cctype>

namespace protokd::rsflag {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

void RsFlagRuleset::validate() const {
    if (min_words <= 0 || max_words <= 0 || min_words > max_words) {
        throw ValidationError("rsflag: need 0 < min_words <= max_words");
    }
    for (const auto* list : {&positive_tokens, &negative_tokens}) {
        for (const auto& t : *list) {
            if (t.empty()) throw ValidationError("rsflag: empty token in rule list");
        }
    }
}

int word_count(std::string_view text) {
    int count = 0;
    bool in_word = false;
    for (char c : text) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

bool contains_token(std::string_view text, std::string_view phrase) {
    if (phrase.empty()) throw ValidationError("contains_token: empty phrase");
    const std::string hay = lower(text);
    const std::string needle = lower(phrase);
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
        const std::size_t end = pos + needle.size();
        const bool left_ok = pos == 0 || !is_alnum(hay[pos - 1]);
        const bool right_ok = end == hay.size() || !is_alnum(hay[end]);
        if (left_ok && right_ok) return true;
    }
    return false;
}

int assign_flag(std::string_view text, const RsFlagRuleset& rules) {
    const int words = word_count(text);
    if (words < rules.min_words || words > rules.max_words) return 0;
    const auto present = [&](const std::string& t) { return contains_token(text, t); };
    if (std::any_of(rules.negative_tokens.begin(), rules.negative_tokens.end(), present)) return 0;
    return std::any_of(rules.positive_tokens.begin(), rules.positive_tokens.end(), present) ? 1 : 0;
}

std::vector<CaptionCandidate> annotate_corpus(std::vector<CaptionCandidate> captions,
                                              const RsFlagRuleset& rules) {
    rules.validate();
    const auto n = static_cast<std::ptrdiff_t>(captions.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        captions[i].rs_flag = assign_flag(captions[i].text, rules);
    }
    return captions;
}

}  // namespace protokd::rsflag
