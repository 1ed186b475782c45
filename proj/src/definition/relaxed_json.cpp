#include "relaxed_json.hpp"

namespace rangekit::definition::detail {

namespace {

bool is_blank(char c) { return c == ' ' || c == '\t'; }
bool is_space(char c) { return is_blank(c) || c == '\n' || c == '\r'; }

}  // namespace

RelaxedJson relax_json(std::string_view src) {
    RelaxedJson out;
    out.text.reserve(src.size());
    out.origin.reserve(src.size());
    auto emit = [&](char c, std::size_t at) {
        out.text.push_back(c);
        out.origin.push_back(at);
    };

    bool in_string = false;
    std::size_t string_start = 0;  // output offset just past the opening quote
    for (std::size_t i = 0; i < src.size(); ++i) {
        char c = src[i];
        if (in_string) {
            if (c == '\\' && i + 1 < src.size()) {
                emit(c, i);
                emit(src[i + 1], i + 1);
                ++i;
            } else if (c == '"') {
                in_string = false;
                emit(c, i);
            } else if (c == '\n' || c == '\r') {
                // Fold a typeset line break: drop blanks on both sides, keep one space.
                while (out.text.size() > string_start && is_blank(out.text.back())) {
                    out.text.pop_back();
                    out.origin.pop_back();
                }
                std::size_t j = i;
                while (j < src.size() && is_space(src[j])) ++j;
                emit(' ', i);
                i = j - 1;
            } else if (c == '\t') {
                emit('\\', i);
                emit('t', i);
            } else {
                emit(c, i);
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
            emit(c, i);
            string_start = out.text.size();
            continue;
        }
        if (c == ',') {
            std::size_t j = i + 1;
            while (j < src.size() && is_space(src[j])) ++j;
            if (j < src.size() && (src[j] == '}' || src[j] == ']')) continue;  // trailing comma
        }
        emit(c, i);
    }
    return out;
}

std::pair<std::size_t, std::size_t> RelaxedJson::source_position(std::string_view source,
                                                                 std::size_t output_offset) const {
    std::size_t at = source.size();
    if (output_offset < origin.size()) at = origin[output_offset];
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < at && i < source.size(); ++i) {
        if (source[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

}  // namespace rangekit::definition::detail
