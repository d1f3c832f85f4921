#pragma once

#include <algorithm>
#include <cctype>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "../error.hpp"
#include "../hash.hpp"

namespace vqaadv::metrics {

enum class JudgeDimension { correctness, detail, context };

inline constexpr JudgeDimension kJudgeDimensions[] = {
    JudgeDimension::correctness, JudgeDimension::detail, JudgeDimension::context};

inline std::string to_string(JudgeDimension d) {
    switch (d) {
    case JudgeDimension::correctness:
        return "correctness";
    case JudgeDimension::detail:
        return "detail";
    case JudgeDimension::context:
        return "context";
    }
    return {};
}

/// Rubric prompt templates, one per dimension. Each template may use the
/// placeholders {question}, {reference} and {prediction}.
struct JudgeRubric {
    std::string correctness;
    std::string detail;
    std::string context;

    const std::string &for_dimension(JudgeDimension d) const {
        switch (d) {
        case JudgeDimension::correctness:
            return correctness;
        case JudgeDimension::detail:
            return detail;
        default:
            return context;
        }
    }

    static JudgeRubric from_json(const nlohmann::json &j) {
        JudgeRubric r{j.at("correctness").get<std::string>(), j.at("detail").get<std::string>(),
                      j.at("context").get<std::string>()};
        for (auto d : kJudgeDimensions)
            if (r.for_dimension(d).find("{prediction}") == std::string::npos)
                throw ConfigError("judge rubric '" + to_string(d) + "' lacks {prediction}");
        return r;
    }

    static JudgeRubric load(const std::string &path) {
        try {
            return from_json(nlohmann::json::parse(read_file(path)));
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError("judge rubric " + path + ": " + e.what());
        }
    }
};

inline std::string replace_all(std::string text, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

inline std::string fill_judge_prompt(const std::string &tmpl, std::string_view question,
                                     std::string_view reference, std::string_view prediction) {
    std::string out = replace_all(tmpl, "{question}", question);
    out = replace_all(out, "{reference}", reference);
    return replace_all(out, "{prediction}", prediction);
}

/// The first integer in the reply that lies in 1..5.
inline std::optional<int> parse_judge_score(std::string_view reply) {
    std::size_t i = 0;
    while (i < reply.size()) {
        if (!std::isdigit(static_cast<unsigned char>(reply[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        long value = 0;
        while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) {
            value = std::min(value * 10 + (reply[j] - '0'), 1000000L);
            ++j;
        }
        // "3.5" style decimals are not integers
        bool decimal = j + 1 < reply.size() && reply[j] == '.' &&
                       std::isdigit(static_cast<unsigned char>(reply[j + 1]));
        if (!decimal && value >= 1 && value <= 5)
            return static_cast<int>(value);
        while (j < reply.size() &&
               (std::isdigit(static_cast<unsigned char>(reply[j])) || reply[j] == '.'))
            ++j;
        i = j;
    }
    return std::nullopt;
}

struct JudgeScores {
    std::optional<int> correctness;
    std::optional<int> detail;
    std::optional<int> context;
    std::vector<std::string> flags;

    std::optional<int> &operator[](JudgeDimension d) {
        return d == JudgeDimension::correctness ? correctness
               : d == JudgeDimension::detail    ? detail
                                                : context;
    }
};

/// Scores one explanation on the three rubric dimensions. `complete` sends a
/// prompt to the judge LLM; a throw or an unparseable reply leaves that
/// dimension absent with a flag.
inline JudgeScores judge_scores(std::string_view question, std::string_view gold_explanation,
                                std::string_view predicted_explanation, const JudgeRubric &rubric,
                                const std::function<std::string(const std::string &)> &complete) {
    JudgeScores scores;
    for (auto d : kJudgeDimensions) {
        std::string prompt = fill_judge_prompt(rubric.for_dimension(d), question,
                                               gold_explanation, predicted_explanation);
        try {
            auto s = parse_judge_score(complete(prompt));
            if (!s)
                scores.flags.push_back(to_string(d) + ": unparseable judge reply");
            scores[d] = s;
        } catch (const std::exception &e) {
            scores.flags.push_back(to_string(d) + ": " + e.what());
        }
    }
    return scores;
}

} // namespace vqaadv::metrics
