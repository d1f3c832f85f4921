#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "backend/services.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "hash.hpp"
#include "metrics/bertscore.hpp"
#include "tokenize.hpp"
#include "victim.hpp"

namespace vqaadv::textattack {

using json = nlohmann::json;
using backend::SubToken;

struct TextAttackConfig {
    int k = 10;
    std::size_t max_targets = 1;
    std::size_t max_combinations = 512;
    double sigma_s = 0.8;
    std::size_t n_keep = 8;
    bool rescore = true; // score combined sequences with mlm/logprob
};

inline void validate(const TextAttackConfig &c) {
    if (c.k < 1)
        throw ConfigError("k must be >= 1");
    if (c.max_targets < 1)
        throw ConfigError("max_targets must be >= 1");
    if (c.max_combinations < 1)
        throw ConfigError("max_combinations must be >= 1");
    if (!(c.sigma_s > 0.0 && c.sigma_s <= 1.0))
        throw ConfigError("sigma_s must be in (0, 1]");
    if (c.n_keep < 1)
        throw ConfigError("n_keep must be >= 1");
}

/// Word list, one entry per line; blank lines and `#` comments ignored.
inline std::set<std::string> load_word_set(const std::string &path) {
    std::set<std::string> out;
    std::string text = read_file(path);
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos)
            nl = text.size();
        std::string line = trim(std::string_view(text).substr(start, nl - start));
        if (!line.empty() && line[0] != '#')
            for (auto &t : tokenize(line).tokens)
                out.insert(t);
        start = nl + 1;
    }
    return out;
}

/// Indices of non-stopword tokens in question order, at most `max_targets`.
inline std::vector<std::size_t> select_target_words(const TokenSeq &question,
                                                    const std::set<std::string> &stopwords,
                                                    std::size_t max_targets = 1) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < question.size() && out.size() < max_targets; ++i)
        if (!stopwords.count(question[i]))
            out.push_back(i);
    return out;
}

struct SubstitutionPlan {
    std::size_t target_word_position = 0;
    std::string original_word;
    std::vector<std::vector<SubToken>> slots; // one per BPE sub-token, descending log-prob
    int k = 1;
};

inline json to_json(const SubstitutionPlan &p) {
    json slots = json::array();
    for (const auto &slot : p.slots) {
        json s = json::array();
        for (const auto &c : slot)
            s.push_back({{"token", c.token}, {"logprob", c.logprob}});
        slots.push_back(s);
    }
    return json{{"target_word_position", p.target_word_position},
                {"original_word", p.original_word},
                {"k", p.k},
                {"slots", slots}};
}

/// Glues sub-tokens into one surface word ("##" and SentencePiece/BPE space
/// markers are dropped).
inline std::string render_word(const std::vector<std::string> &pieces) {
    std::string out;
    for (const auto &piece : pieces) {
        std::string_view p = piece;
        if (p.starts_with("##"))
            p.remove_prefix(2);
        else if (p.starts_with("\xC4\xA0")) // U+0120, byte-level BPE space marker
            p.remove_prefix(2);
        else if (p.starts_with("\xE2\x96\x81")) // U+2581, SentencePiece space marker
            p.remove_prefix(3);
        out += p;
    }
    return out;
}

/// `question` with the token at `position` replaced by `word`; all other bytes kept.
inline std::string substitute(const std::string &question, const TokenSeq &seq,
                              std::size_t position, std::string_view word) {
    const Span &s = seq.spans.at(position);
    return question.substr(0, s.begin) + std::string(word) + question.substr(s.end);
}

namespace detail {

inline void sort_slot(std::vector<SubToken> &slot) {
    std::stable_sort(slot.begin(), slot.end(), [](const SubToken &a, const SubToken &b) {
        if (a.logprob != b.logprob)
            return a.logprob > b.logprob;
        return a.token < b.token;
    });
}

} // namespace detail

/// Masks the word at `position` and asks the MLM for the top-k fill-ins of each
/// sub-token slot. One extra candidate is requested so the original can be dropped.
inline SubstitutionPlan propose_substitutions(const std::string &question, std::size_t position,
                                              int k, backend::Client &mlm) {
    TokenSeq seq = tokenize(question);
    if (position >= seq.size())
        throw Error("target position " + std::to_string(position) + " out of range");
    SubstitutionPlan plan;
    plan.target_word_position = position;
    plan.original_word = seq[position];
    plan.k = k;
    plan.slots = backend::mlm_topk(mlm, question, {static_cast<int>(position)}, k + 1);
    if (plan.slots.empty())
        throw SchemaError("mlm/topk response", "slots", "no slot returned for the masked word");
    for (auto &slot : plan.slots) {
        detail::sort_slot(slot);
        if (plan.slots.size() == 1)
            std::erase_if(slot, [&](const SubToken &c) {
                return normalize_text(render_word({c.token})) == plan.original_word;
            });
        if (slot.size() > static_cast<std::size_t>(k))
            slot.resize(static_cast<std::size_t>(k));
        if (slot.empty())
            throw SchemaError("mlm/topk response", "slots", "empty candidate slot");
    }
    return plan;
}

struct RankedCandidate {
    std::string question_text;
    std::string substitute; // the new surface word
    std::size_t position = 0;
    std::vector<std::string> sub_tokens;
    double perplexity = 1.0;
    std::optional<double> similarity;
    bool accepted = false;
    std::string error; // e.g. "zero-norm-embedding"
};

inline json to_json(const RankedCandidate &c) {
    json j{{"question_text", c.question_text},
           {"substitute", c.substitute},
           {"position", c.position},
           {"sub_tokens", c.sub_tokens},
           {"perplexity", c.perplexity},
           {"similarity", c.similarity ? json(*c.similarity) : json(nullptr)},
           {"accepted", c.accepted}};
    if (!c.error.empty())
        j["error"] = c.error;
    return j;
}

/// exp of the mean negative log-probability. Log-probs are summed in sorted
/// order so equal multisets give bit-identical perplexities.
inline double perplexity(std::vector<double> logprobs) {
    if (logprobs.empty())
        return 1.0;
    std::sort(logprobs.begin(), logprobs.end());
    double sum = 0;
    for (double lp : logprobs)
        sum += lp;
    return std::exp(-sum / static_cast<double>(logprobs.size()));
}

/// Smallest b with b^slots >= max_combinations, i.e. ceil(max_combinations^(1/slots)).
inline std::size_t beam_width(std::size_t max_combinations, std::size_t slots) {
    if (slots == 0)
        return 0;
    std::size_t b = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(max_combinations),
                                                        1.0 / static_cast<double>(slots)))));
    auto reaches = [&](std::size_t base) {
        double p = 1;
        for (std::size_t i = 0; i < slots; ++i)
            p *= static_cast<double>(base);
        return p >= static_cast<double>(max_combinations);
    };
    while (b > 1 && reaches(b - 1))
        --b;
    while (!reaches(b))
        ++b;
    return b;
}

/// Log-probabilities of `targets` filling `positions` of `text`, one per target.
using Rescorer = std::function<std::vector<double>(const std::string &text, const std::vector<int> &positions,
                                                   const std::vector<std::string> &targets)>;

/// Cross product of the plan's slots, ranked by ascending perplexity then by
/// text. Without a rescorer the plan's own log-probs are used.
inline std::vector<RankedCandidate> combine_and_rank(const SubstitutionPlan &plan, const std::string &question,
                                                     std::size_t max_combinations = 512,
                                                     const Rescorer &rescore = nullptr) {
    std::vector<RankedCandidate> out;
    if (plan.slots.empty())
        return out;
    for (const auto &slot : plan.slots)
        if (slot.empty())
            return out;
    std::vector<std::vector<SubToken>> slots = plan.slots;
    std::size_t total = 1;
    for (const auto &s : slots)
        total = total > max_combinations ? total : total * s.size();
    if (total > max_combinations) {
        std::size_t beam = beam_width(max_combinations, slots.size());
        for (auto &s : slots)
            if (s.size() > beam)
                s.resize(beam);
    }

    TokenSeq seq = tokenize(question);
    std::vector<std::size_t> idx(slots.size(), 0);
    std::map<std::string, std::size_t> seen; // text -> index in out
    while (true) {
        std::vector<std::string> pieces;
        std::vector<double> lps;
        for (std::size_t s = 0; s < slots.size(); ++s) {
            pieces.push_back(slots[s][idx[s]].token);
            lps.push_back(slots[s][idx[s]].logprob);
        }
        std::string word = render_word(pieces);
        std::string normalized = normalize_text(word);
        bool keep = !normalized.empty() && normalized != plan.original_word;
        if (keep) {
            RankedCandidate c;
            c.question_text = substitute(question, seq, plan.target_word_position, word);
            c.substitute = word;
            c.position = plan.target_word_position;
            c.sub_tokens = pieces;
            if (rescore) {
                std::vector<int> positions(pieces.size(), static_cast<int>(plan.target_word_position));
                lps = rescore(c.question_text, positions, pieces);
                if (lps.size() != pieces.size())
                    throw SchemaError("mlm/logprob response", "logprobs", "one value per target expected");
            }
            c.perplexity = perplexity(lps);
            // Different sub-token splits can spell the same word; keep the most fluent.
            auto [it, fresh] = seen.emplace(c.question_text, out.size());
            if (fresh)
                out.push_back(std::move(c));
            else if (c.perplexity < out[it->second].perplexity)
                out[it->second] = std::move(c);
        }
        std::size_t s = 0;
        while (s < idx.size() && ++idx[s] == slots[s].size())
            idx[s++] = 0;
        if (s == idx.size())
            break;
    }
    std::sort(out.begin(), out.end(), [](const RankedCandidate &a, const RankedCandidate &b) {
        if (a.perplexity != b.perplexity)
            return a.perplexity < b.perplexity;
        return a.question_text < b.question_text;
    });
    return out;
}

using SentenceEmbedder = std::function<std::vector<std::vector<double>>(const std::vector<std::string> &)>;

inline constexpr std::string_view kZeroNormError = "zero-norm-embedding";

/// Annotates each candidate with γ = cos(U(candidate), U(original)); accepted
/// iff γ >= sigma_s. Rejected candidates stay in the list.
inline std::vector<RankedCandidate> similarity_filter(const std::string &original,
                                                      std::vector<RankedCandidate> candidates,
                                                      double sigma_s, const SentenceEmbedder &embed) {
    if (!(sigma_s > 0.0 && sigma_s <= 1.0))
        throw ConfigError("sigma_s must be in (0, 1]");
    if (candidates.empty())
        return candidates;
    std::vector<std::string> texts{original};
    for (const auto &c : candidates)
        texts.push_back(c.question_text);
    auto vectors = embed(texts);
    if (vectors.size() != texts.size())
        throw SchemaError("embed/sentence response", "vectors", "one vector per text expected");
    auto zero = [](const std::vector<double> &v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
    };
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto &c = candidates[i];
        const auto &u = vectors[0];
        const auto &v = vectors[i + 1];
        c.error.clear();
        if (zero(u) || zero(v)) {
            c.similarity.reset();
            c.accepted = false;
            c.error = kZeroNormError;
            continue;
        }
        double gamma = u == v ? 1.0 : std::clamp(metrics::cosine(u, v), -1.0, 1.0);
        c.similarity = gamma;
        c.accepted = gamma >= sigma_s;
    }
    return candidates;
}

// ---------------------------------------------------------------- plural baseline

inline std::string pluralize(const std::string &noun) {
    static const std::map<std::string, std::string> irregular = {
        {"man", "men"},         {"woman", "women"},     {"child", "children"}, {"person", "people"},
        {"foot", "feet"},       {"tooth", "teeth"},     {"goose", "geese"},    {"mouse", "mice"},
        {"ox", "oxen"},         {"knife", "knives"},    {"wife", "wives"},     {"life", "lives"},
        {"leaf", "leaves"},     {"loaf", "loaves"},     {"wolf", "wolves"},    {"shelf", "shelves"},
        {"half", "halves"},     {"calf", "calves"},     {"scarf", "scarves"},  {"thief", "thieves"},
        {"elf", "elves"},       {"potato", "potatoes"}, {"tomato", "tomatoes"}, {"hero", "heroes"},
        {"echo", "echoes"},     {"volcano", "volcanoes"}, {"cactus", "cacti"}, {"fungus", "fungi"},
        {"cookie", "cookies"},  {"die", "dice"},        {"criterion", "criteria"}, {"phenomenon", "phenomena"},
    };
    if (auto it = irregular.find(noun); it != irregular.end())
        return it->second;
    auto ends = [&](std::string_view suf) { return noun.size() >= suf.size() && std::string_view(noun).ends_with(suf); };
    auto vowel = [](char c) { return std::string_view("aeiou").find(c) != std::string_view::npos; };
    if (ends("s") || ends("x") || ends("z") || ends("ch") || ends("sh"))
        return noun + "es";
    if (noun.size() >= 2 && noun.back() == 'y' && !vowel(noun[noun.size() - 2]))
        return noun.substr(0, noun.size() - 1) + "ies";
    return noun + "s";
}

struct PluralResult {
    std::string text;
    std::optional<std::size_t> position;
    std::string original_word;
    std::string plural_word;
    bool no_noun = false;
};

/// Pluralizes the first token found in the singular-noun lexicon, keeping every
/// other byte of the question.
inline PluralResult plural_baseline(const std::string &question, const std::set<std::string> &nouns) {
    TokenSeq seq = tokenize(question);
    PluralResult r{question, std::nullopt, "", "", true};
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (!nouns.count(seq[i]))
            continue;
        std::string plural = pluralize(seq[i]);
        if (plural == seq[i])
            continue;
        const Span &s = seq.spans[i];
        std::string surface = question.substr(s.begin, s.size());
        if (!surface.empty() && std::isupper(static_cast<unsigned char>(surface[0])))
            plural[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(plural[0])));
        r.text = substitute(question, seq, i, plural);
        r.position = i;
        r.original_word = seq[i];
        r.plural_word = plural;
        r.no_noun = false;
        return r;
    }
    return r;
}

// ---------------------------------------------------------------- full pipeline

enum class Status { attacked, no_target, no_attack_found, no_noun, failed };

inline std::string to_string(Status s) {
    switch (s) {
    case Status::attacked:
        return "attacked";
    case Status::no_target:
        return "no-target";
    case Status::no_attack_found:
        return "no-attack-found";
    case Status::no_noun:
        return "no-noun";
    case Status::failed:
        return "failed";
    }
    return "";
}

struct AdversarialOutput {
    std::string question;
    VictimOutput output;
};

struct TextAttackResult {
    std::string sample_id;
    Status status = Status::failed;
    std::string error;
    std::vector<std::size_t> targets;
    std::vector<SubstitutionPlan> plans;
    std::vector<RankedCandidate> candidates; // ranked, with similarity annotations
    std::size_t n = 0;                       // min(accepted, n_keep)
    VictimOutput original;
    std::optional<AdversarialOutput> best;
    std::vector<AdversarialOutput> kept; // victim outputs of all n kept candidates when requested
};

inline json to_json(const TextAttackResult &r) {
    json cands = json::array();
    for (const auto &c : r.candidates)
        cands.push_back(to_json(c));
    json plans = json::array();
    for (const auto &p : r.plans)
        plans.push_back(to_json(p));
    json j{{"sample_id", r.sample_id},
           {"status", to_string(r.status)},
           {"targets", r.targets},
           {"plans", plans},
           {"candidates", cands},
           {"n", r.n},
           {"original", to_json(r.original)}};
    if (!r.error.empty())
        j["error"] = r.error;
    if (r.best)
        j["adversarial"] = {{"question", r.best->question}, {"output", to_json(r.best->output)}};
    if (!r.kept.empty()) {
        json kept = json::array();
        for (const auto &k : r.kept)
            kept.push_back({{"question", k.question}, {"output", to_json(k.output)}});
        j["kept"] = kept;
    }
    return j;
}

struct TextAttackDeps {
    backend::Client &client;            // mlm/topk, mlm/logprob, embed/sentence
    QuestionVictim victim;              // vqa/generate bound to the sample image
    const std::set<std::string> &stopwords;
};

/// Perturbs the question, keeps the lowest-perplexity candidate that passes
/// the similarity filter and queries the victim on it. Backend failures end
/// up in the result, never as exceptions.
inline TextAttackResult run_text_attack(const Sample &sample, const TextAttackConfig &config,
                                        TextAttackDeps deps, bool eval_all_candidates = false) {
    TextAttackResult r;
    r.sample_id = sample.sample_id;
    try {
        r.original = deps.victim(sample.question);
        TokenSeq seq = tokenize(sample.question);
        r.targets = select_target_words(seq, deps.stopwords, config.max_targets);
        if (r.targets.empty()) {
            r.status = Status::no_target;
            return r;
        }
        Rescorer rescore;
        if (config.rescore)
            rescore = [&](const std::string &text, const std::vector<int> &positions,
                          const std::vector<std::string> &targets) {
                return backend::mlm_logprob(deps.client, text, positions, targets);
            };
        std::vector<RankedCandidate> all;
        for (std::size_t pos : r.targets) {
            r.plans.push_back(propose_substitutions(sample.question, pos, config.k, deps.client));
            auto ranked = combine_and_rank(r.plans.back(), sample.question, config.max_combinations, rescore);
            all.insert(all.end(), ranked.begin(), ranked.end());
        }
        std::stable_sort(all.begin(), all.end(), [](const RankedCandidate &a, const RankedCandidate &b) {
            if (a.perplexity != b.perplexity)
                return a.perplexity < b.perplexity;
            return a.question_text < b.question_text;
        });
        r.candidates = similarity_filter(sample.question, std::move(all), config.sigma_s,
                                         [&](const std::vector<std::string> &texts) {
                                             return backend::embed_sentences(deps.client, texts);
                                         });
        std::vector<const RankedCandidate *> accepted;
        for (const auto &c : r.candidates)
            if (c.accepted)
                accepted.push_back(&c);
        r.n = std::min(accepted.size(), config.n_keep);
        if (r.n == 0) {
            r.status = Status::no_attack_found;
            return r;
        }
        r.best = AdversarialOutput{accepted[0]->question_text, deps.victim(accepted[0]->question_text)};
        if (eval_all_candidates)
            for (std::size_t i = 0; i < r.n; ++i)
                r.kept.push_back(i == 0 ? *r.best
                                        : AdversarialOutput{accepted[i]->question_text,
                                                            deps.victim(accepted[i]->question_text)});
        r.status = Status::attacked;
    } catch (const std::exception &e) {
        r.status = Status::failed;
        r.error = e.what();
    }
    return r;
}

/// Plural baseline against the victim; "no-noun" when nothing was pluralized.
inline TextAttackResult run_plural_attack(const Sample &sample, const std::set<std::string> &nouns,
                                          const QuestionVictim &victim) {
    TextAttackResult r;
    r.sample_id = sample.sample_id;
    try {
        r.original = victim(sample.question);
        PluralResult p = plural_baseline(sample.question, nouns);
        if (p.no_noun) {
            r.status = Status::no_noun;
            return r;
        }
        r.targets = {*p.position};
        RankedCandidate c;
        c.question_text = p.text;
        c.substitute = p.plural_word;
        c.position = *p.position;
        c.accepted = true;
        r.candidates.push_back(c);
        r.n = 1;
        r.best = AdversarialOutput{p.text, victim(p.text)};
        r.status = Status::attacked;
    } catch (const std::exception &e) {
        r.status = Status::failed;
        r.error = e.what();
    }
    return r;
}

} // namespace vqaadv::textattack
