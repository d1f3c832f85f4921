#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "../error.hpp"
#include "../tokenize.hpp"
#include "ngram.hpp"
#include "porter.hpp"

namespace vqaadv::metrics {

struct MeteorParams {
    double alpha = 0.9;
    double beta = 3.0;
    double gamma = 0.5;
};

struct MeteorAlignment {
    // ref_of[i] is the reference position aligned to candidate token i.
    std::vector<std::optional<std::size_t>> ref_of;
    std::size_t matches = 0;
    std::size_t chunks = 0;
};

namespace detail {

inline std::size_t count_chunks(const std::vector<std::optional<std::size_t>> &ref_of) {
    std::size_t chunks = 0;
    std::optional<std::size_t> prev;
    for (const auto &r : ref_of) {
        if (r && !(prev && *r == *prev + 1))
            ++chunks;
        prev = r;
    }
    return chunks;
}

// Aligns the still-unaligned candidate tokens of one stage. Among alignments
// with the maximum number of matches, the one with the fewest chunks is kept
// (branch and bound, capped; the greedy left-to-right alignment seeds the bound).
inline void align_stage(std::size_t cand_size, std::size_t ref_size,
                        const std::function<bool(std::size_t, std::size_t)> &same,
                        std::vector<std::optional<std::size_t>> &ref_of,
                        std::vector<bool> &ref_used) {
    std::vector<std::vector<std::size_t>> options(cand_size);
    for (std::size_t i = 0; i < cand_size; ++i)
        if (!ref_of[i])
            for (std::size_t j = 0; j < ref_size; ++j)
                if (!ref_used[j] && same(i, j))
                    options[i].push_back(j);

    auto greedy = ref_of;
    auto greedy_used = ref_used;
    for (std::size_t i = 0; i < cand_size; ++i) {
        std::optional<std::size_t> pick;
        if (i > 0 && greedy[i - 1]) {
            std::size_t want = *greedy[i - 1] + 1;
            for (auto j : options[i])
                if (j == want && !greedy_used[j])
                    pick = j;
        }
        for (auto j : options[i])
            if (!pick && !greedy_used[j])
                pick = j;
        if (pick) {
            greedy[i] = pick;
            greedy_used[*pick] = true;
        }
    }
    auto matched = [](const std::vector<std::optional<std::size_t>> &a) {
        return static_cast<std::size_t>(std::count_if(a.begin(), a.end(), [](auto &r) { return r.has_value(); }));
    };
    auto best = greedy;
    auto best_used = greedy_used;
    std::size_t best_matches = matched(greedy);
    std::size_t best_chunks = count_chunks(greedy);

    std::size_t remaining_options = 0;
    for (const auto &o : options)
        remaining_options += o.empty() ? 0 : 1;
    auto cur = ref_of;
    auto used = ref_used;
    std::size_t budget = 200000;
    std::function<void(std::size_t, std::size_t, std::size_t)> search =
        [&](std::size_t i, std::size_t matches, std::size_t open_left) {
            if (budget == 0)
                return;
            --budget;
            if (matches + open_left < best_matches)
                return;
            if (i == cand_size) {
                std::size_t chunks = count_chunks(cur);
                if (matches > best_matches || (matches == best_matches && chunks < best_chunks)) {
                    best = cur;
                    best_used = used;
                    best_matches = matches;
                    best_chunks = chunks;
                }
                return;
            }
            if (options[i].empty()) {
                search(i + 1, matches, open_left);
                return;
            }
            for (auto j : options[i]) {
                if (used[j])
                    continue;
                used[j] = true;
                cur[i] = j;
                search(i + 1, matches + 1, open_left - 1);
                cur[i].reset();
                used[j] = false;
            }
            search(i + 1, matches, open_left - 1);
        };
    search(0, 0, remaining_options);
    ref_of = std::move(best);
    ref_used = std::move(best_used);
}

} // namespace detail

/// Two-stage alignment: exact surface match, then Porter-stem match.
inline MeteorAlignment meteor_align(const Tokens &cand, const Tokens &ref) {
    MeteorAlignment al;
    al.ref_of.assign(cand.size(), std::nullopt);
    std::vector<bool> used(ref.size(), false);
    detail::align_stage(
        cand.size(), ref.size(), [&](std::size_t i, std::size_t j) { return cand[i] == ref[j]; },
        al.ref_of, used);
    std::vector<std::string> cs, rs;
    for (const auto &t : cand)
        cs.push_back(porter_stem(t));
    for (const auto &t : ref)
        rs.push_back(porter_stem(t));
    detail::align_stage(
        cand.size(), ref.size(), [&](std::size_t i, std::size_t j) { return cs[i] == rs[j]; },
        al.ref_of, used);

    for (const auto &r : al.ref_of)
        if (r)
            ++al.matches;
    al.chunks = detail::count_chunks(al.ref_of);
    return al;
}

inline double meteor_single(const Tokens &cand, const Tokens &ref, const MeteorParams &p) {
    if (cand.empty() || ref.empty())
        return 0.0;
    MeteorAlignment al = meteor_align(cand, ref);
    if (al.matches == 0)
        return 0.0;
    double m = static_cast<double>(al.matches);
    double precision = m / cand.size();
    double recall = m / ref.size();
    double fmean = precision * recall / (p.alpha * precision + (1.0 - p.alpha) * recall);
    double penalty = p.gamma * std::pow(static_cast<double>(al.chunks) / m, p.beta);
    return fmean * (1.0 - penalty);
}

/// METEOR with exact and stem stages only (no synonym table), max over references.
inline double meteor(const Tokens &candidate, std::span<const Tokens> references,
                     const MeteorParams &params = {}) {
    if (references.empty())
        throw Error("METEOR needs at least one reference");
    double best = 0.0;
    for (const auto &ref : references)
        best = std::max(best, meteor_single(candidate, ref, params));
    return best;
}

inline double meteor(std::string_view candidate, const std::vector<std::string> &references) {
    std::vector<Tokens> refs;
    for (const auto &r : references)
        refs.push_back(tokenize(r).tokens);
    return meteor(tokenize(candidate).tokens, refs);
}

} // namespace vqaadv::metrics
