#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "backend/services.hpp"
#include "knowledge.hpp"

namespace vqaadv {

/// One victim generation, raw and parsed.
struct VictimOutput {
    std::string input_text;
    std::string raw;
    std::string answer;
    std::string explanation;
    bool missing_because = false;
};

inline nlohmann::json to_json(const VictimOutput &v) {
    nlohmann::json j{{"input_text", v.input_text},
                     {"raw", v.raw},
                     {"answer", v.answer},
                     {"explanation", v.explanation}};
    if (v.missing_because)
        j["flags"] = nlohmann::json::array({"missing-because"});
    return j;
}

inline VictimOutput victim_output_from_json(const nlohmann::json &j) {
    VictimOutput v;
    v.input_text = j.at("input_text").get<std::string>();
    v.raw = j.at("raw").get<std::string>();
    v.answer = j.at("answer").get<std::string>();
    v.explanation = j.at("explanation").get<std::string>();
    v.missing_because = j.contains("flags");
    return v;
}

/// Runs the victim on (image, question) with optional knowledge statements.
inline VictimOutput query_victim(backend::Client &client, const std::string &png,
                                 const std::string &question,
                                 const std::vector<std::string> &knowledge_statements,
                                 int max_tokens = 40) {
    auto input = knowledge::assemble_injected_input(question, knowledge_statements);
    VictimOutput v;
    v.input_text = input.text;
    v.raw = backend::vqa_generate(client, png, input.text, max_tokens);
    auto parsed = knowledge::parse_generation(v.raw);
    v.answer = parsed.answer;
    v.explanation = parsed.explanation;
    v.missing_because = parsed.missing_because;
    return v;
}

/// Victim bound to one image and knowledge policy; maps a question to an output.
using QuestionVictim = std::function<VictimOutput(const std::string &question)>;
/// Victim bound to one question and knowledge policy; maps PNG bytes to an output.
using ImageVictim = std::function<VictimOutput(const std::string &png)>;

} // namespace vqaadv
