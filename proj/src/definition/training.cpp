#include "rangekit/definition/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <initializer_list>
#include <limits>

#include "rangekit/core/error.hpp"
#include "relaxed_json.hpp"

namespace rangekit::definition {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

class Reader {
public:
    explicit Reader(std::vector<std::string>& warnings) : warnings_(warnings) {}

    void expect_object(const json& value, const std::string& path) const {
        if (!value.is_object()) throw ParseError(path + " must be an object", 0, 0);
    }

    const json& require(const json& obj, const char* key, const std::string& path,
                        ErrorCode code = ErrorCode::MissingField) const {
        auto it = obj.find(key);
        if (it == obj.end()) {
            throw Error(code, path + ": missing required key '" + key + "'");
        }
        return *it;
    }

    std::string string_at(const json& obj, const char* key, const std::string& path,
                          bool required = false) const {
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) throw Error(ErrorCode::MissingField, path + ": missing required key '" + key + "'");
            return {};
        }
        if (!it->is_string()) throw ParseError(path + "." + key + " must be a string", 0, 0);
        return it->get<std::string>();
    }

    int int_at(const json& obj, const char* key, const std::string& path, int fallback) const {
        auto it = obj.find(key);
        if (it == obj.end()) return fallback;
        if (!it->is_number_integer()) throw ParseError(path + "." + key + " must be an integer", 0, 0);
        auto v = it->get<long long>();
        if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
            throw ParseError(path + "." + key + " is out of range", 0, 0);
        }
        return static_cast<int>(v);
    }

    std::vector<std::string> strings_at(const json& obj, const char* key,
                                        const std::string& path) const {
        std::vector<std::string> items;
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return items;
        if (!it->is_array()) throw ParseError(path + "." + key + " must be a list", 0, 0);
        for (const auto& v : *it) {
            if (!v.is_string()) throw ParseError(path + "." + key + " must contain strings", 0, 0);
            items.push_back(v.get<std::string>());
        }
        return items;
    }

    const json* array_at(const json& obj, const char* key, const std::string& path) const {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return nullptr;
        if (!it->is_array()) throw ParseError(path + "." + key + " must be a list", 0, 0);
        return &*it;
    }

    void warn_unknown(const json& obj, std::initializer_list<std::string_view> known,
                      const std::string& path) const {
        for (const auto& [key, _] : obj.items()) {
            if (std::find(known.begin(), known.end(), key) == known.end()) {
                warnings_.push_back(path + ": unknown key '" + key + "' ignored");
            }
        }
    }

    void warn(std::string message) const { warnings_.push_back(std::move(message)); }

private:
    std::vector<std::string>& warnings_;
};

bool is_elision(const json& value) {
    return value.is_object() && value.size() == 1 && value.contains("...");
}

Hint parse_hint(const Reader& r, const json& obj, const std::string& path) {
    r.expect_object(obj, path);
    r.warn_unknown(obj, {"title", "content", "hint_penalty", "order"}, path);
    Hint hint;
    hint.title = r.string_at(obj, "title", path);
    hint.content = r.string_at(obj, "content", path);
    hint.hint_penalty = r.int_at(obj, "hint_penalty", path, 0);
    r.require(obj, "order", path);
    hint.order = r.int_at(obj, "order", path, 0);
    return hint;
}

Phase parse_phase(const Reader& r, const json& obj, const std::string& path) {
    r.expect_object(obj, path);
    std::string discriminator;
    auto phase_type = obj.find("phase_type");
    auto level_type = obj.find("level_type");
    for (auto it : {phase_type, level_type}) {
        if (it == obj.end()) continue;
        if (!it->is_string()) throw ParseError(path + ": phase type must be a string", 0, 0);
        auto value = it->get<std::string>();
        if (!discriminator.empty() && discriminator != value) {
            throw ParseError(path + ": phase_type and level_type disagree", 0, 0);
        }
        discriminator = value;
    }
    if (discriminator.empty()) {
        throw Error(ErrorCode::MissingField, path + ": missing required key 'phase_type'");
    }

    Phase phase;
    phase.title = r.string_at(obj, "title", path);
    r.require(obj, "order", path);
    phase.order = r.int_at(obj, "order", path, 0);
    phase.estimated_duration = r.int_at(obj, "estimated_duration", path, 0);

    if (discriminator == "INFO") {
        r.warn_unknown(obj, {"title", "phase_type", "level_type", "order", "estimated_duration", "content"},
                       path);
        phase.body = InfoPhase{r.string_at(obj, "content", path)};
    } else if (discriminator == "QUESTIONNAIRE") {
        r.warn_unknown(obj, {"title", "phase_type", "level_type", "order", "estimated_duration", "questions"},
                       path);
        QuestionnairePhase q;
        if (const auto* questions = r.array_at(obj, "questions", path)) {
            for (std::size_t i = 0; i < questions->size(); ++i) {
                const auto& item = (*questions)[i];
                auto qpath = path + ".questions[" + std::to_string(i) + "]";
                r.expect_object(item, qpath);
                r.warn_unknown(item, {"prompt", "answer"}, qpath);
                Question question;
                question.prompt = r.string_at(item, "prompt", qpath, true);
                if (item.contains("answer")) question.expected_answer = r.string_at(item, "answer", qpath);
                q.questions.push_back(std::move(question));
            }
        }
        phase.body = std::move(q);
    } else if (discriminator == "TRAINING") {
        r.warn_unknown(obj,
                       {"title", "max_score", "phase_type", "level_type", "order", "estimated_duration",
                        "flag", "content", "solution", "hints", "incorrect_flag_limit"},
                       path);
        TrainingPhase t;
        r.require(obj, "max_score", path, ErrorCode::InvalidPhase);
        t.max_score = r.int_at(obj, "max_score", path, 0);
        r.require(obj, "flag", path, ErrorCode::InvalidPhase);
        t.flag = r.string_at(obj, "flag", path);
        t.content = r.string_at(obj, "content", path);
        t.solution = r.string_at(obj, "solution", path);
        t.incorrect_flag_limit =
            r.int_at(obj, "incorrect_flag_limit", path, kDefaultIncorrectFlagLimit);
        if (const auto* hints = r.array_at(obj, "hints", path)) {
            for (std::size_t i = 0; i < hints->size(); ++i) {
                t.hints.push_back(parse_hint(r, (*hints)[i], path + ".hints[" + std::to_string(i) + "]"));
            }
        }
        phase.body = std::move(t);
    } else {
        throw ParseError(path + ": unknown phase type '" + discriminator + "'", 0, 0);
    }
    return phase;
}

}  // namespace

std::string_view to_string(PhaseKind kind) {
    switch (kind) {
        case PhaseKind::Info: return "INFO";
        case PhaseKind::Questionnaire: return "QUESTIONNAIRE";
        case PhaseKind::Training: return "TRAINING";
    }
    return "UNKNOWN";
}

const Hint* TrainingPhase::find_hint(int order) const {
    auto it = std::find_if(hints.begin(), hints.end(), [&](const Hint& h) { return h.order == order; });
    return it == hints.end() ? nullptr : &*it;
}

std::vector<const Hint*> TrainingPhase::hints_in_display_order() const {
    std::vector<const Hint*> sorted;
    for (const auto& h : hints) sorted.push_back(&h);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Hint* a, const Hint* b) { return a->order < b->order; });
    return sorted;
}

int TrainingPhase::total_penalty() const {
    int sum = 0;
    for (const auto& h : hints) sum += h.hint_penalty;
    return sum;
}

std::vector<const Phase*> TrainingDefinition::phases_in_order() const {
    std::vector<const Phase*> sorted;
    for (const auto& p : phases) sorted.push_back(&p);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Phase* a, const Phase* b) { return a->order < b->order; });
    return sorted;
}

const Phase* TrainingDefinition::find_phase(int order) const {
    auto it = std::find_if(phases.begin(), phases.end(), [&](const Phase& p) { return p.order == order; });
    return it == phases.end() ? nullptr : &*it;
}

Parsed<TrainingDefinition> parse_training(std::string_view document) {
    auto relaxed = detail::relax_json(document);
    json root;
    try {
        root = json::parse(relaxed.text);
    } catch (const json::parse_error& e) {
        std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
        auto [line, column] = relaxed.source_position(document, offset);
        throw ParseError("malformed JSON at line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ": " + e.what(),
                         line, column);
    }

    Parsed<TrainingDefinition> out;
    Reader r(out.warnings);
    r.expect_object(root, "training");
    r.warn_unknown(root, {"title", "description", "prerequisities", "outcomes", "phases"}, "training");

    auto& def = out.value;
    def.title = r.string_at(root, "title", "training", true);
    def.description = r.string_at(root, "description", "training");
    def.prerequisites = r.strings_at(root, "prerequisities", "training");
    def.outcomes = r.strings_at(root, "outcomes", "training");
    if (const auto* phases = r.array_at(root, "phases", "training")) {
        for (std::size_t i = 0; i < phases->size(); ++i) {
            const auto& item = (*phases)[i];
            auto path = "phases[" + std::to_string(i) + "]";
            if (is_elision(item)) {
                r.warn(path + ": elision placeholder skipped");
                continue;
            }
            def.phases.push_back(parse_phase(r, item, path));
        }
    }
    return out;
}

std::string canonicalize(const TrainingDefinition& def) {
    ordered_json root;
    root["title"] = def.title;
    root["description"] = def.description;
    root["prerequisities"] = def.prerequisites;
    root["outcomes"] = def.outcomes;
    root["phases"] = ordered_json::array();
    for (const auto& phase : def.phases) {
        ordered_json p;
        p["title"] = phase.title;
        if (const auto* t = phase.training()) {
            p["max_score"] = t->max_score;
        }
        p["phase_type"] = std::string(to_string(phase.kind()));
        p["order"] = phase.order;
        p["estimated_duration"] = phase.estimated_duration;
        std::visit(
            [&](const auto& body) {
                using T = std::decay_t<decltype(body)>;
                if constexpr (std::is_same_v<T, InfoPhase>) {
                    p["content"] = body.content;
                } else if constexpr (std::is_same_v<T, QuestionnairePhase>) {
                    p["questions"] = ordered_json::array();
                    for (const auto& q : body.questions) {
                        ordered_json item;
                        item["prompt"] = q.prompt;
                        if (q.expected_answer) item["answer"] = *q.expected_answer;
                        p["questions"].push_back(std::move(item));
                    }
                } else {
                    p["flag"] = body.flag;
                    p["content"] = body.content;
                    p["solution"] = body.solution;
                    p["hints"] = ordered_json::array();
                    for (const auto& h : body.hints) {
                        ordered_json hint;
                        hint["title"] = h.title;
                        hint["content"] = h.content;
                        hint["hint_penalty"] = h.hint_penalty;
                        hint["order"] = h.order;
                        p["hints"].push_back(std::move(hint));
                    }
                    p["incorrect_flag_limit"] = body.incorrect_flag_limit;
                }
            },
            phase.body);
        root["phases"].push_back(std::move(p));
    }
    return root.dump(2) + "\n";
}

}  // namespace rangekit::definition
