#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "../error.hpp"
#include "../tokenize.hpp"

namespace vqaadv::metrics {

/// Lowercase, punctuation stripped, articles removed.
inline std::string normalize_answer(std::string_view answer) {
    std::vector<std::string> kept;
    for (auto &t : tokenize(answer).tokens)
        if (t != "a" && t != "an" && t != "the")
            kept.push_back(std::move(t));
    return join(kept);
}

struct AnswerScore {
    bool correct = false;
    double soft = 0.0;
};

/// With ten or more gold annotations the soft VQA score min(matches / 3, 1)
/// applies and the answer counts as correct at soft >= 0.5; otherwise the
/// answer must match one gold answer exactly after normalization.
inline AnswerScore answer_accuracy(std::string_view predicted,
                                   const std::vector<std::string> &gold_answers) {
    if (gold_answers.empty())
        throw Error("answer accuracy needs gold answers");
    std::string p = normalize_answer(predicted);
    std::size_t matches = 0;
    for (const auto &g : gold_answers)
        if (normalize_answer(g) == p)
            ++matches;
    AnswerScore s;
    if (gold_answers.size() >= 10) {
        s.soft = std::min(static_cast<double>(matches) / 3.0, 1.0);
        s.correct = s.soft >= 0.5;
    } else {
        s.correct = matches > 0;
        s.soft = s.correct ? 1.0 : 0.0;
    }
    return s;
}

} // namespace vqaadv::metrics
