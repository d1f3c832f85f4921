#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "../error.hpp"

namespace vqaadv::metrics {

/// Contextual token embeddings of one text, as returned by the token embedder.
struct TokenEmbedding {
    std::vector<std::string> tokens;
    std::vector<std::vector<double>> vectors;
};

struct BertScore {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

inline double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw Error("cosine of vectors with different dimensions");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0)
        return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Mean over `from` rows of the best cosine against any `to` row.
inline double greedy_match(const std::vector<std::vector<double>> &from,
                           const std::vector<std::vector<double>> &to) {
    double sum = 0.0;
    for (const auto &u : from) {
        double best = -1.0;
        for (const auto &v : to)
            best = std::max(best, cosine(u, v));
        sum += best;
    }
    return sum / static_cast<double>(from.size());
}

/// Greedy max-cosine BERTScore without IDF weighting or baseline rescaling.
/// Precision and recall are clamped to [0, 1]; raw cosines can be negative.
inline BertScore bertscore(const TokenEmbedding &candidate, const TokenEmbedding &reference) {
    if (candidate.vectors.empty() || reference.vectors.empty())
        throw Error("BERTScore needs non-empty texts");
    BertScore s;
    s.precision = std::clamp(greedy_match(candidate.vectors, reference.vectors), 0.0, 1.0);
    s.recall = std::clamp(greedy_match(reference.vectors, candidate.vectors), 0.0, 1.0);
    s.f1 = s.precision + s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

/// Multi-reference BERTScore: the reference with the highest F1 wins.
inline BertScore bertscore(const TokenEmbedding &candidate,
                           std::span<const TokenEmbedding> references) {
    if (references.empty())
        throw Error("BERTScore needs at least one reference");
    BertScore best;
    bool first = true;
    for (const auto &ref : references) {
        if (ref.vectors.empty())
            continue;
        BertScore s = bertscore(candidate, ref);
        if (first || s.f1 > best.f1)
            best = s;
        first = false;
    }
    return best;
}

} // namespace vqaadv::metrics
