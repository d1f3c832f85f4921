#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "../error.hpp"
#include "../tokenize.hpp"
#include "ngram.hpp"

namespace vqaadv::metrics {

inline constexpr double kRougeBeta = 1.2;

/// ROUGE-L F-measure, max over references.
inline double rouge_l(const Tokens &candidate, std::span<const Tokens> references,
                      double beta = kRougeBeta) {
    if (references.empty())
        throw Error("ROUGE-L needs at least one reference");
    if (candidate.empty())
        return 0.0;
    double best = 0.0;
    for (const auto &ref : references) {
        if (ref.empty())
            continue;
        double lcs = static_cast<double>(lcs_length(candidate, ref));
        if (lcs == 0.0)
            continue;
        double p = lcs / candidate.size();
        double r = lcs / ref.size();
        double b2 = beta * beta;
        best = std::max(best, (1.0 + b2) * p * r / (r + b2 * p));
    }
    return best;
}

inline double rouge_l(std::string_view candidate, const std::vector<std::string> &references) {
    std::vector<Tokens> refs;
    for (const auto &r : references)
        refs.push_back(tokenize(r).tokens);
    return rouge_l(tokenize(candidate).tokens, refs);
}

} // namespace vqaadv::metrics
