#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "hash.hpp"
#include "tokenize.hpp"

namespace vqaadv::knowledge {

using json = nlohmann::json;

inline constexpr std::string_view kPlaceholder = "{q}";
inline constexpr std::string_view kKnowledgePrefix = "based on the fact that"; // <pok>
inline constexpr std::string_view kBos = "<bos>";
inline constexpr std::string_view kAnswerPrefix = "the answer is"; // <poa>
inline constexpr std::string_view kStatementSeparator = "; ";

enum class Source { generated, cached, manual };

inline std::string to_string(Source s) {
    switch (s) {
    case Source::generated:
        return "generated";
    case Source::cached:
        return "cached";
    case Source::manual:
        return "manual";
    }
    return "";
}

inline Source parse_source(std::string_view s) {
    if (s == "generated")
        return Source::generated;
    if (s == "cached")
        return Source::cached;
    if (s == "manual")
        return Source::manual;
    throw Error("unknown knowledge source '" + std::string(s) + "'");
}

struct KnowledgeRecord {
    std::string question;
    std::vector<std::string> statements;
    Source source = Source::generated;
    std::string prompt_hash; // sha256 of the prompt template
    bool empty_completion = false;
};

inline json to_json(const KnowledgeRecord &r) {
    json j{{"question", r.question},
           {"statements", r.statements},
           {"source", to_string(r.source)},
           {"prompt_hash", r.prompt_hash}};
    if (r.empty_completion)
        j["flags"] = json::array({"empty-completion"});
    return j;
}

inline KnowledgeRecord record_from_json(const json &j) {
    KnowledgeRecord r;
    r.question = j.at("question").get<std::string>();
    r.statements = j.at("statements").get<std::vector<std::string>>();
    r.source = parse_source(j.value("source", std::string("generated")));
    r.prompt_hash = j.value("prompt_hash", std::string());
    if (j.contains("flags"))
        for (const auto &f : j["flags"])
            r.empty_completion = r.empty_completion || f == "empty-completion";
    return r;
}

inline std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (std::size_t at = text.find(needle); at != std::string_view::npos;
         at = text.find(needle, at + needle.size()))
        ++n;
    return n;
}

/// Substitutes the question into a template holding exactly one `{q}`.
inline std::string build_knowledge_prompt(std::string_view question, std::string_view tmpl) {
    std::size_t n = count_occurrences(tmpl, kPlaceholder);
    if (n != 1)
        throw ConfigError("knowledge prompt template must contain exactly one " +
                          std::string(kPlaceholder) + " placeholder (found " + std::to_string(n) + ")");
    std::size_t at = tmpl.find(kPlaceholder);
    std::string out(tmpl.substr(0, at));
    out += question;
    out += tmpl.substr(at + kPlaceholder.size());
    return out;
}

/// Cuts a statement after its first `max_tokens` canonical tokens, keeping the original text.
inline std::string truncate_tokens(const std::string &statement, std::size_t max_tokens) {
    TokenSeq seq = tokenize(statement);
    if (max_tokens == 0 || seq.size() <= max_tokens)
        return statement;
    return trim(std::string_view(statement).substr(0, seq.spans[max_tokens - 1].end));
}

/// One statement per line, trimmed, empty lines dropped.
inline std::vector<std::string> split_statements(std::string_view completion,
                                                 std::size_t max_tokens = 0) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= completion.size()) {
        std::size_t nl = completion.find('\n', start);
        if (nl == std::string_view::npos)
            nl = completion.size();
        std::string line = trim(completion.substr(start, nl - start));
        if (!line.empty())
            out.push_back(truncate_tokens(line, max_tokens));
        start = nl + 1;
    }
    return out;
}

/// JSON-lines store of knowledge records keyed by sha256(template hash, question).
/// Lookups share a lock; appends are serialized.
class KnowledgeCache {
  public:
    KnowledgeCache() = default;

    explicit KnowledgeCache(std::filesystem::path file) : file_(std::move(file)) {
        std::ifstream in(file_, std::ios::binary);
        if (!in)
            return;
        std::string line;
        std::size_t offset = 0;
        while (std::getline(in, line)) {
            std::size_t here = offset;
            offset += line.size() + 1;
            if (trim(line).empty())
                continue;
            try {
                json j = json::parse(line);
                entries_[j.at("key").get<std::string>()] = record_from_json(j.at("record"));
            } catch (const json::exception &e) {
                throw ParseError(file_.string(), here, e.what());
            }
        }
    }

    static std::string key(std::string_view prompt_hash, std::string_view question) {
        return sha256_hex(std::string(prompt_hash) + "\n" + std::string(question));
    }

    std::optional<KnowledgeRecord> lookup(const std::string &k) const {
        std::shared_lock lock(mu_);
        auto it = entries_.find(k);
        if (it == entries_.end())
            return std::nullopt;
        return it->second;
    }

    void insert(const std::string &k, const KnowledgeRecord &r) {
        std::unique_lock lock(mu_);
        if (entries_.count(k))
            return;
        entries_[k] = r;
        if (file_.empty())
            return;
        if (file_.has_parent_path())
            std::filesystem::create_directories(file_.parent_path());
        std::ofstream out(file_, std::ios::binary | std::ios::app);
        out << json{{"key", k}, {"record", to_json(r)}}.dump() << '\n';
        if (!out)
            throw Error("cannot append to knowledge cache " + file_.string());
    }

    std::size_t size() const {
        std::shared_lock lock(mu_);
        return entries_.size();
    }

  private:
    std::filesystem::path file_;
    mutable std::shared_mutex mu_;
    std::map<std::string, KnowledgeRecord> entries_;
};

struct GenerationOptions {
    std::size_t max_knowledge_tokens = 40;
};

using CompleteFn = std::function<std::string(const std::string &prompt)>;

/// Asks the LLM for knowledge about `question`. A cache hit makes no call.
/// An empty completion is retried once; if still empty the record is flagged
/// and left out of the cache.
inline KnowledgeRecord generate_knowledge(const std::string &question, std::string_view tmpl,
                                          const CompleteFn &complete, KnowledgeCache *cache,
                                          GenerationOptions opts = {}) {
    std::string prompt_hash = sha256_hex(tmpl);
    std::string k = KnowledgeCache::key(prompt_hash, question);
    if (cache)
        if (auto hit = cache->lookup(k)) {
            hit->source = Source::cached;
            return *hit;
        }
    std::string prompt = build_knowledge_prompt(question, tmpl);
    KnowledgeRecord r{question, {}, Source::generated, prompt_hash, false};
    for (int attempt = 0; attempt < 2 && r.statements.empty(); ++attempt)
        r.statements = split_statements(complete(prompt), opts.max_knowledge_tokens);
    if (r.statements.empty()) {
        r.empty_completion = true;
        return r;
    }
    if (cache)
        cache->insert(k, r);
    return r;
}

enum class SegmentKind { question, knowledge_prefix, knowledge, bos, answer_prefix };

inline std::string to_string(SegmentKind k) {
    switch (k) {
    case SegmentKind::question:
        return "question";
    case SegmentKind::knowledge_prefix:
        return "knowledge_prefix";
    case SegmentKind::knowledge:
        return "knowledge";
    case SegmentKind::bos:
        return "bos";
    case SegmentKind::answer_prefix:
        return "answer_prefix";
    }
    return "";
}

struct Segment {
    SegmentKind kind;
    Span span;
};

/// Victim input text with the byte span of each segment. Spans are contiguous
/// and every segment after the first carries its leading space.
struct InjectedInput {
    std::string text;
    std::vector<Segment> segments;

    std::string_view segment_text(std::size_t i) const {
        return std::string_view(text).substr(segments[i].span.begin, segments[i].span.size());
    }
};

inline json to_json(const InjectedInput &in) {
    json segs = json::array();
    for (const auto &s : in.segments)
        segs.push_back({{"kind", to_string(s.kind)}, {"begin", s.span.begin}, {"end", s.span.end}});
    return json{{"text", in.text}, {"segments", segs}};
}

/// question [+ " based on the fact that " + k1; k2; ...] + " <bos> the answer is".
inline InjectedInput assemble_injected_input(std::string_view question,
                                             const std::vector<std::string> &statements) {
    InjectedInput in;
    auto append = [&](SegmentKind kind, std::string_view piece) {
        std::size_t begin = in.text.size();
        in.text += piece;
        in.segments.push_back({kind, {begin, in.text.size()}});
    };
    append(SegmentKind::question, question);
    if (!statements.empty()) {
        append(SegmentKind::knowledge_prefix, " " + std::string(kKnowledgePrefix));
        std::string joined;
        for (std::size_t i = 0; i < statements.size(); ++i) {
            if (i)
                joined += kStatementSeparator;
            joined += statements[i];
        }
        append(SegmentKind::knowledge, " " + joined);
    }
    append(SegmentKind::bos, " " + std::string(kBos));
    append(SegmentKind::answer_prefix, " " + std::string(kAnswerPrefix));
    return in;
}

inline InjectedInput assemble_injected_input(std::string_view question, const KnowledgeRecord &k) {
    return assemble_injected_input(question, k.statements);
}

struct ParsedGeneration {
    std::string answer;
    std::string explanation;
    bool missing_because = false;
};

inline json to_json(const ParsedGeneration &p) {
    json j{{"answer", p.answer}, {"explanation", p.explanation}};
    if (p.missing_because)
        j["flags"] = json::array({"missing-because"});
    return j;
}

namespace detail {

inline bool word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '\'' || (c & 0x80);
}

// Position of `word` as a standalone word at or after `from`, case-insensitively.
inline std::size_t find_word(std::string_view text, std::string_view word, std::size_t from = 0) {
    for (std::size_t i = from; i + word.size() <= text.size(); ++i) {
        bool same = true;
        for (std::size_t j = 0; j < word.size() && same; ++j)
            same = std::tolower(static_cast<unsigned char>(text[i + j])) ==
                   static_cast<unsigned char>(word[j]);
        if (!same)
            continue;
        bool left = i == 0 || !word_char(text[i - 1]);
        bool right = i + word.size() == text.size() || !word_char(text[i + word.size()]);
        if (left && right)
            return i;
    }
    return std::string_view::npos;
}

inline std::string strip_answer_prefix(std::string s) {
    s = trim(s);
    if (find_word(s, kAnswerPrefix) == 0)
        s = trim(std::string_view(s).substr(kAnswerPrefix.size()));
    return s;
}

} // namespace detail

/// Splits "answer because explanation" at the first standalone "because".
inline ParsedGeneration parse_generation(std::string_view text) {
    ParsedGeneration p;
    std::size_t at = detail::find_word(text, "because");
    if (at == std::string_view::npos) {
        p.answer = detail::strip_answer_prefix(std::string(text));
        p.missing_because = true;
        return p;
    }
    p.answer = detail::strip_answer_prefix(std::string(text.substr(0, at)));
    p.explanation = trim(text.substr(at + 7));
    return p;
}

} // namespace vqaadv::knowledge
