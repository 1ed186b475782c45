#include "rangekit/orchestrator/tokens.hpp"

#include <cctype>
#include <cstdio>

#include "rangekit/core/error.hpp"

namespace rangekit::orchestrator {

TokenGenerator::TokenGenerator(std::uint64_t seed, std::vector<std::string> words)
    : rng_(seed), words_(std::move(words)) {
    if (words_.empty()) throw Error(ErrorCode::InvalidValue, "token word list is empty");
    for (const auto& w : words_) {
        if (!well_formed(w + "-0000")) throw Error(ErrorCode::InvalidValue, "token word '" + w + "' is not lowercase a-z");
    }
}

std::vector<std::string> TokenGenerator::default_words() {
    return {"anchor", "badger", "cobalt", "delta",  "ember",  "falcon", "garnet", "harbor", "indigo", "juniper",
            "kestrel", "lantern", "marble", "nectar", "onyx",  "pepper", "quartz", "raven",  "saffron", "tundra",
            "umber",  "violet", "walnut", "xenon",  "yarrow", "zephyr"};
}

std::string TokenGenerator::next() {
    std::lock_guard lock(mutex_);
    const auto& word = words_[std::uniform_int_distribution<std::size_t>(0, words_.size() - 1)(rng_)];
    char digits[8];
    std::snprintf(digits, sizeof digits, "%04d", std::uniform_int_distribution<int>(0, 9999)(rng_));
    return word + "-" + digits;
}

bool TokenGenerator::well_formed(const std::string& token) {
    auto dash = token.find('-');
    if (dash == std::string::npos || dash == 0 || token.size() != dash + 5) return false;
    for (std::size_t i = 0; i < dash; ++i) {
        if (token[i] < 'a' || token[i] > 'z') return false;
    }
    for (std::size_t i = dash + 1; i < token.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(token[i]))) return false;
    }
    return true;
}

}  // namespace rangekit::orchestrator
