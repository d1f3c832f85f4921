#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "../error.hpp"
#include "../tokenize.hpp"
#include "ngram.hpp"

namespace vqaadv::metrics {

enum class BleuSmoothing {
    none,   // any zero order precision makes the score 0
    add_one // orders >= 2 use (matches + 1) / (total + 1)
};

struct BleuStats {
    std::vector<int> matches; // clipped n-gram matches, index 0 is unigrams
    std::vector<int> totals;
    std::size_t candidate_length = 0;
    std::size_t reference_length = 0; // closest reference length
};

/// Clipped n-gram statistics of one candidate against a set of references.
/// Reference length is the one closest to the candidate length, shorter on ties.
inline BleuStats bleu_stats(const Tokens &candidate, std::span<const Tokens> references,
                            int max_n) {
    BleuStats st;
    st.candidate_length = candidate.size();
    st.reference_length = references.front().size();
    for (const auto &ref : references) {
        auto d_new = std::llabs(static_cast<long long>(ref.size()) -
                                static_cast<long long>(candidate.size()));
        auto d_old = std::llabs(static_cast<long long>(st.reference_length) -
                                static_cast<long long>(candidate.size()));
        if (d_new < d_old || (d_new == d_old && ref.size() < st.reference_length))
            st.reference_length = ref.size();
    }
    for (int n = 1; n <= max_n; ++n) {
        NgramCounts cand = count_ngrams(candidate, n);
        NgramCounts max_ref;
        for (const auto &ref : references)
            for (const auto &[gram, c] : count_ngrams(ref, n))
                max_ref[gram] = std::max(max_ref[gram], c);
        int matched = 0;
        int total = 0;
        for (const auto &[gram, c] : cand) {
            total += c;
            if (auto it = max_ref.find(gram); it != max_ref.end())
                matched += std::min(c, it->second);
        }
        st.matches.push_back(matched);
        st.totals.push_back(total);
    }
    return st;
}

inline double bleu_from_stats(const BleuStats &st, int n, BleuSmoothing smoothing) {
    if (st.candidate_length == 0)
        return 0.0;
    double log_sum = 0.0;
    for (int k = 0; k < n; ++k) {
        double m = st.matches[k];
        double t = st.totals[k];
        if (smoothing == BleuSmoothing::add_one && k > 0) {
            m += 1.0;
            t += 1.0;
        }
        if (m <= 0.0 || t <= 0.0)
            return 0.0;
        log_sum += std::log(m / t);
    }
    double c = static_cast<double>(st.candidate_length);
    double r = static_cast<double>(st.reference_length);
    double log_bp = c < r ? 1.0 - r / c : 0.0;
    return std::exp(log_bp + log_sum / n);
}

/// Sentence-level BLEU-n with uniform weights over orders 1..n.
inline double bleu_n(const Tokens &candidate, std::span<const Tokens> references, int n,
                     BleuSmoothing smoothing = BleuSmoothing::none) {
    if (n < 1 || n > 4)
        throw Error("BLEU order must be in 1..4");
    if (references.empty())
        throw Error("BLEU needs at least one reference");
    if (candidate.empty())
        return 0.0;
    return bleu_from_stats(bleu_stats(candidate, references, n), n, smoothing);
}

inline double bleu_n(std::string_view candidate, const std::vector<std::string> &references, int n,
                     BleuSmoothing smoothing = BleuSmoothing::none) {
    std::vector<Tokens> refs;
    for (const auto &r : references)
        refs.push_back(tokenize(r).tokens);
    return bleu_n(tokenize(candidate).tokens, refs, n, smoothing);
}

} // namespace vqaadv::metrics
