#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "../error.hpp"
#include "../hash.hpp"
#include "../imageattack.hpp"
#include "../textattack.hpp"

namespace vqaadv::harness {

using nlohmann::json;
namespace fs = std::filesystem;

/// Process exit codes of the CLI.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitCorpus = 3, kExitFailureRate = 4 };

/// Unreadable or inconsistent corpus files.
class CorpusError : public Error {
  public:
    using Error::Error;
};

enum class AttackKind { none, text, image, plural };
enum class KnowledgeSource { benign, presented };
enum class CorpusFormat { vqax, aokvqa };

inline std::string to_string(AttackKind k) {
    switch (k) {
    case AttackKind::none:
        return "none";
    case AttackKind::text:
        return "text";
    case AttackKind::image:
        return "image";
    case AttackKind::plural:
        return "plural";
    }
    return "";
}

inline AttackKind parse_attack_kind(std::string_view s) {
    for (auto k : {AttackKind::none, AttackKind::text, AttackKind::image, AttackKind::plural})
        if (to_string(k) == s)
            return k;
    throw ConfigError("attack must be one of none, text, image, plural (got '" + std::string(s) + "')");
}

inline std::string to_string(KnowledgeSource s) { return s == KnowledgeSource::benign ? "benign" : "presented"; }

inline KnowledgeSource parse_knowledge_source(std::string_view s) {
    if (s == "benign")
        return KnowledgeSource::benign;
    if (s == "presented")
        return KnowledgeSource::presented;
    throw ConfigError("knowledge_source must be benign or presented (got '" + std::string(s) + "')");
}

inline std::string to_string(CorpusFormat f) { return f == CorpusFormat::vqax ? "vqax" : "aokvqa"; }

inline CorpusFormat parse_corpus_format(std::string_view s) {
    if (s == "vqax")
        return CorpusFormat::vqax;
    if (s == "aokvqa")
        return CorpusFormat::aokvqa;
    throw ConfigError("corpus.format must be vqax or aokvqa (got '" + std::string(s) + "')");
}

struct CorpusConfig {
    CorpusFormat format = CorpusFormat::vqax;
    std::string questions;    // VQA-X questions/annotations file or A-OKVQA split file
    std::string explanations; // VQA-X explanations keyed by question id; optional
    std::string annotations;  // COCO instances file
    std::string images;       // directory holding the image files
    Split split = Split::val;
    std::size_t limit = 0; // 0 keeps every sample
};

inline std::string default_data_file(const char *name) { return std::string(VQAADV_DATA_DIR) + "/" + name; }

struct RunConfig {
    CorpusConfig corpus;
    AttackKind attack = AttackKind::text;
    bool alleviation = false;
    KnowledgeSource knowledge_source = KnowledgeSource::presented;
    textattack::TextAttackConfig text;
    imageattack::ImageAttackConfig image;

    std::string backend_url;         // empty runs the in-process stub
    std::uint64_t seed = 7;          // stub seed when no URL is given
    std::string stub_fixtures;       // fixture table for the in-process stub
    std::string cache_dir;           // response cache; empty disables it
    std::string knowledge_cache;     // knowledge JSONL; empty keeps it in memory
    int workers = 4;
    int max_tokens = 40;             // victim generation budget
    std::size_t max_knowledge_tokens = 40;
    std::string output_dir = "out";
    double max_failure_rate = 0.1;
    bool eval_all_candidates = false;
    bool judge = true;
    std::string method;              // row label in the CSV tables

    std::string stopwords = default_data_file("stopwords.txt");
    std::string nouns = default_data_file("nouns.txt");
    std::string vocabulary_mapping = default_data_file("coco_vocab_mapping.json");
    std::string knowledge_template = default_data_file("knowledge_prompt.txt");
    std::string judge_rubric = default_data_file("judge_rubric.json");

    std::string method_label() const {
        if (!method.empty())
            return method;
        std::string m = attack == AttackKind::none     ? "Clean"
                         : attack == AttackKind::text  ? "Text attack"
                         : attack == AttackKind::image ? "Image attack"
                                                       : "Plural";
        return alleviation ? m + " + alleviation" : m;
    }
};

inline void validate(const RunConfig &c) {
    if (c.corpus.questions.empty())
        throw ConfigError("corpus.questions is required");
    if (c.attack == AttackKind::image && c.corpus.annotations.empty())
        throw ConfigError("the image attack needs corpus.annotations");
    textattack::validate(c.text);
    imageattack::validate(c.image);
    if (c.workers < 1 || c.workers > 256)
        throw ConfigError("workers must be in 1..256");
    if (c.max_tokens < 1)
        throw ConfigError("max_tokens must be >= 1");
    if (c.max_knowledge_tokens < 1)
        throw ConfigError("max_knowledge_tokens must be >= 1");
    if (!(c.max_failure_rate >= 0.0 && c.max_failure_rate <= 1.0))
        throw ConfigError("max_failure_rate must be in [0, 1]");
    if (c.output_dir.empty())
        throw ConfigError("output_dir is required");
    if (!c.backend_url.empty() && !c.stub_fixtures.empty())
        throw ConfigError("stub_fixtures only applies to the in-process stub");
}

inline json to_json(const RunConfig &c) {
    return json{{"corpus",
                 {{"format", to_string(c.corpus.format)},
                  {"questions", c.corpus.questions},
                  {"explanations", c.corpus.explanations},
                  {"annotations", c.corpus.annotations},
                  {"images", c.corpus.images},
                  {"split", to_string(c.corpus.split)},
                  {"limit", c.corpus.limit}}},
                {"attack", to_string(c.attack)},
                {"alleviation", c.alleviation},
                {"knowledge_source", to_string(c.knowledge_source)},
                {"sigma_s", c.text.sigma_s},
                {"k", c.text.k},
                {"max_targets", c.text.max_targets},
                {"max_combinations", c.text.max_combinations},
                {"n_keep", c.text.n_keep},
                {"rescore", c.text.rescore},
                {"padding", c.image.padding},
                {"min_image_similarity", c.image.min_image_similarity},
                {"backend_url", c.backend_url},
                {"seed", c.seed},
                {"stub_fixtures", c.stub_fixtures},
                {"cache_dir", c.cache_dir},
                {"knowledge_cache", c.knowledge_cache},
                {"workers", c.workers},
                {"max_tokens", c.max_tokens},
                {"max_knowledge_tokens", c.max_knowledge_tokens},
                {"output_dir", c.output_dir},
                {"max_failure_rate", c.max_failure_rate},
                {"eval_all_candidates", c.eval_all_candidates},
                {"judge", c.judge},
                {"method", c.method},
                {"stopwords", c.stopwords},
                {"nouns", c.nouns},
                {"vocabulary_mapping", c.vocabulary_mapping},
                {"knowledge_template", c.knowledge_template},
                {"judge_rubric", c.judge_rubric}};
}

namespace detail {

inline std::string resolve(const std::string &p, const fs::path &base) {
    if (p.empty() || base.empty() || fs::path(p).is_absolute())
        return p;
    return (base / p).lexically_normal().string();
}

template <class T> void take(const json &j, const char *key, T &out) {
    if (j.contains(key))
        out = j.at(key).get<T>();
}

} // namespace detail

/// Reads a config object. Unknown keys are rejected. Relative input paths are
/// resolved against `base` (the config file's directory); output locations
/// stay relative to the working directory.
inline RunConfig config_from_json(const json &j, const fs::path &base = {}) {
    static const std::set<std::string> known = {
        "corpus",      "attack",        "alleviation",     "knowledge_source", "sigma_s",
        "k",           "max_targets",   "max_combinations", "n_keep",          "rescore",
        "padding",     "min_image_similarity", "backend_url", "seed",          "stub_fixtures",
        "cache_dir",   "knowledge_cache", "workers",       "max_tokens",       "max_knowledge_tokens",
        "output_dir",  "max_failure_rate", "eval_all_candidates", "judge",     "method",
        "stopwords",   "nouns",         "vocabulary_mapping", "knowledge_template", "judge_rubric"};
    static const std::set<std::string> known_corpus = {"format", "questions", "explanations", "annotations",
                                                       "images", "split", "limit"};
    if (!j.is_object())
        throw ConfigError("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("unknown config key '" + it.key() + "'");
    RunConfig c;
    try {
        if (j.contains("corpus")) {
            const json &cj = j["corpus"];
            if (!cj.is_object())
                throw ConfigError("corpus must be an object");
            for (auto it = cj.begin(); it != cj.end(); ++it)
                if (!known_corpus.count(it.key()))
                    throw ConfigError("unknown config key 'corpus." + it.key() + "'");
            if (cj.contains("format"))
                c.corpus.format = parse_corpus_format(cj["format"].get<std::string>());
            detail::take(cj, "questions", c.corpus.questions);
            detail::take(cj, "explanations", c.corpus.explanations);
            detail::take(cj, "annotations", c.corpus.annotations);
            detail::take(cj, "images", c.corpus.images);
            if (cj.contains("split"))
                c.corpus.split = parse_split(cj["split"].get<std::string>());
            detail::take(cj, "limit", c.corpus.limit);
        }
        if (j.contains("attack"))
            c.attack = parse_attack_kind(j["attack"].get<std::string>());
        detail::take(j, "alleviation", c.alleviation);
        if (j.contains("knowledge_source"))
            c.knowledge_source = parse_knowledge_source(j["knowledge_source"].get<std::string>());
        detail::take(j, "sigma_s", c.text.sigma_s);
        detail::take(j, "k", c.text.k);
        detail::take(j, "max_targets", c.text.max_targets);
        detail::take(j, "max_combinations", c.text.max_combinations);
        detail::take(j, "n_keep", c.text.n_keep);
        detail::take(j, "rescore", c.text.rescore);
        detail::take(j, "padding", c.image.padding);
        detail::take(j, "min_image_similarity", c.image.min_image_similarity);
        detail::take(j, "backend_url", c.backend_url);
        detail::take(j, "seed", c.seed);
        detail::take(j, "stub_fixtures", c.stub_fixtures);
        detail::take(j, "cache_dir", c.cache_dir);
        detail::take(j, "knowledge_cache", c.knowledge_cache);
        detail::take(j, "workers", c.workers);
        detail::take(j, "max_tokens", c.max_tokens);
        detail::take(j, "max_knowledge_tokens", c.max_knowledge_tokens);
        detail::take(j, "output_dir", c.output_dir);
        detail::take(j, "max_failure_rate", c.max_failure_rate);
        detail::take(j, "eval_all_candidates", c.eval_all_candidates);
        detail::take(j, "judge", c.judge);
        detail::take(j, "method", c.method);
        detail::take(j, "stopwords", c.stopwords);
        detail::take(j, "nouns", c.nouns);
        detail::take(j, "vocabulary_mapping", c.vocabulary_mapping);
        detail::take(j, "knowledge_template", c.knowledge_template);
        detail::take(j, "judge_rubric", c.judge_rubric);
    } catch (const json::exception &e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (std::string *p : {&c.corpus.questions, &c.corpus.explanations, &c.corpus.annotations, &c.corpus.images,
                           &c.stub_fixtures, &c.stopwords,
                           &c.nouns, &c.vocabulary_mapping, &c.knowledge_template, &c.judge_rubric})
        *p = detail::resolve(*p, base);
    return c;
}

inline RunConfig load_config(const std::string &path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error &e) {
        throw ConfigError("config " + path + ": " + e.what());
    } catch (const Error &e) {
        throw ConfigError(e.what());
    }
    return config_from_json(j, fs::path(path).parent_path());
}

/// sha256 of the canonical config JSON, output location excluded.
inline std::string config_hash(const RunConfig &c) {
    json j = to_json(c);
    j.erase("output_dir");
    return sha256_hex(j.dump());
}

} // namespace vqaadv::harness
