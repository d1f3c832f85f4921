#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "../backend/http.hpp"
#include "../backend/services.hpp"
#include "../backend/stub.hpp"
#include "../corpus.hpp"
#include "../image/codec.hpp"
#include "../imageattack.hpp"
#include "../knowledge.hpp"
#include "../metrics.hpp"
#include "../textattack.hpp"
#include "../victim.hpp"
#include "config.hpp"

namespace vqaadv::harness {

// ---------------------------------------------------------------- corpus

struct Corpus {
    std::vector<Sample> samples;
    std::optional<AnnotationIndex> annotations;
    LoadReport report;
    std::map<std::string, std::string> file_hashes; // input file -> sha256
};

inline Corpus load_corpus(const CorpusConfig &c) {
    Corpus corpus;
    try {
        if (c.format == CorpusFormat::vqax)
            corpus.samples = load_vqax(c.questions, c.explanations, &corpus.report, c.split);
        else
            corpus.samples = load_aokvqa(c.questions, &corpus.report, c.split);
        corpus.file_hashes[c.questions] = sha256_file(c.questions);
        if (!c.explanations.empty())
            corpus.file_hashes[c.explanations] = sha256_file(c.explanations);
        if (!c.annotations.empty()) {
            corpus.annotations = load_coco_annotations(c.annotations);
            corpus.file_hashes[c.annotations] = sha256_file(c.annotations);
            for (const auto &w : corpus.annotations->warnings)
                corpus.report.warnings.push_back(w);
            cross_check_images(corpus.samples, *corpus.annotations, corpus.report);
        }
    } catch (const Error &e) {
        throw CorpusError(e.what());
    }
    if (c.limit > 0 && corpus.samples.size() > c.limit)
        corpus.samples.resize(c.limit);
    return corpus;
}

/// PNG bytes of a sample's image. JPEG files are transcoded.
inline std::string load_sample_image(const CorpusConfig &c, const Sample &s, const ImageEntry *entry) {
    fs::path dir(c.images);
    std::vector<fs::path> tried;
    if (entry && !entry->file_name.empty())
        tried.push_back(dir / entry->file_name);
    for (const char *ext : {".png", ".jpg", ".jpeg"})
        tried.push_back(dir / (s.image_ref + ext));
    for (const auto &p : tried)
        if (fs::is_regular_file(p))
            return image::as_png(read_file(p.string()));
    throw Error("no image file for sample " + s.sample_id + " under " + dir.string());
}

// ---------------------------------------------------------------- resources

/// Data files the configured attack needs, loaded once per run.
struct Resources {
    std::set<std::string> stopwords;
    std::set<std::string> nouns;
    std::optional<imageattack::VocabularyMapping> mapping;
    std::string knowledge_template;
    std::optional<metrics::JudgeRubric> rubric;
    std::map<std::string, std::string> file_hashes; // role -> sha256
};

inline Resources load_resources(const RunConfig &c, bool need_judge = true) {
    Resources r;
    auto hash = [&](const char *role, const std::string &path) {
        try {
            r.file_hashes[role] = sha256_file(path);
        } catch (const Error &e) {
            throw ConfigError(e.what());
        }
    };
    try {
        if (c.attack == AttackKind::text) {
            hash("stopwords", c.stopwords);
            r.stopwords = textattack::load_word_set(c.stopwords);
        }
        if (c.attack == AttackKind::plural) {
            hash("nouns", c.nouns);
            r.nouns = textattack::load_word_set(c.nouns);
        }
        if (c.attack == AttackKind::image) {
            hash("vocabulary_mapping", c.vocabulary_mapping);
            r.mapping = imageattack::VocabularyMapping::load(c.vocabulary_mapping);
        }
        if (c.alleviation) {
            hash("knowledge_template", c.knowledge_template);
            r.knowledge_template = read_file(c.knowledge_template);
            knowledge::build_knowledge_prompt("probe", r.knowledge_template);
        }
        if (c.judge && need_judge) {
            hash("judge_rubric", c.judge_rubric);
            r.rubric = metrics::JudgeRubric::load(c.judge_rubric);
        }
    } catch (const ConfigError &) {
        throw;
    } catch (const Error &e) {
        throw ConfigError(e.what());
    }
    return r;
}

// ---------------------------------------------------------------- backend

/// Transport, cache and client for one run.
struct BackendEnv {
    std::unique_ptr<backend::Transport> transport;
    std::unique_ptr<backend::ResponseCache> cache;
    std::unique_ptr<backend::Client> client;
    std::string description;
};

inline BackendEnv open_backend(const RunConfig &c, backend::ClientOptions options = {}) {
    BackendEnv env;
    if (c.backend_url.empty()) {
        std::vector<backend::Fixture> fixtures;
        if (!c.stub_fixtures.empty())
            fixtures = backend::load_fixtures(c.stub_fixtures);
        env.transport = std::make_unique<backend::StubBackend>(c.seed, std::move(fixtures));
        env.description = "in-process stub, seed " + std::to_string(c.seed);
    } else {
        env.transport = std::make_unique<backend::HttpTransport>(c.backend_url);
        env.description = c.backend_url;
    }
    if (!c.cache_dir.empty())
        env.cache = std::make_unique<backend::ResponseCache>(c.cache_dir);
    options.max_in_flight = std::max<std::ptrdiff_t>(options.max_in_flight, c.workers);
    env.client = std::make_unique<backend::Client>(*env.transport, env.cache.get(), options);
    return env;
}

// ---------------------------------------------------------------- per-sample work

template <class F> void parallel_for(std::size_t n, int workers, F &&body) {
    std::atomic<std::size_t> next{0};
    auto drain = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;)
            body(i);
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers && static_cast<std::size_t>(w) < n; ++w)
        pool.emplace_back(drain);
    drain();
    for (auto &t : pool)
        t.join();
}

inline constexpr const char *kClean = "clean";
inline constexpr const char *kFailed = "failed";

/// Statuses whose adversarial outputs enter the metrics.
inline bool evaluated_status(std::string_view s) { return s == "attacked" || s == kClean; }

inline json presented_json(const std::string &question, const VictimOutput &out) {
    return json{{"question", question}, {"output", to_json(out)}};
}

/// Attacks one sample. The returned record never throws away a failure: the
/// status is "failed" and `error` says why.
class SampleRunner {
  public:
    SampleRunner(const RunConfig &cfg, const Corpus &corpus, const Resources &res, backend::Client &client,
                 knowledge::KnowledgeCache &kcache)
        : cfg_(cfg), corpus_(corpus), res_(res), client_(client), kcache_(kcache) {}

    json operator()(const Sample &s) const {
        json rec{{"sample_id", s.sample_id},
                 {"attack", to_string(cfg_.attack)},
                 {"question", s.question},
                 {"gold", {{"answers", s.gold_answers}, {"explanations", s.gold_explanations}}},
                 {"adversarial", json::array()}};
        std::map<std::string, knowledge::KnowledgeRecord> used;
        try {
            const ImageEntry *entry = corpus_.annotations ? corpus_.annotations->find(s.image_id) : nullptr;
            std::string png = load_sample_image(cfg_.corpus, s, entry);
            auto knowledge_for = [&](const std::string &presented) -> std::vector<std::string> {
                if (!cfg_.alleviation)
                    return {};
                const std::string &q =
                    cfg_.knowledge_source == KnowledgeSource::benign ? s.question : presented;
                auto rec = knowledge::generate_knowledge(
                    q, res_.knowledge_template,
                    [&](const std::string &prompt) { return backend::llm_complete(client_, prompt, 256, 0.0); },
                    &kcache_, {cfg_.max_knowledge_tokens});
                used.emplace(q, rec);
                return rec.statements;
            };
            auto ask = [&](const std::string &image_png, const std::string &question) {
                return query_victim(client_, image_png, question, knowledge_for(question), cfg_.max_tokens);
            };
            switch (cfg_.attack) {
            case AttackKind::none:
                run_none(s, rec, [&](const std::string &q) { return ask(png, q); });
                break;
            case AttackKind::text:
            case AttackKind::plural:
                run_text(s, rec, [&](const std::string &q) { return ask(png, q); });
                break;
            case AttackKind::image:
                run_image(s, rec, entry, png, [&](const std::string &bytes) { return ask(bytes, s.question); });
                break;
            }
        } catch (const std::exception &e) {
            rec["status"] = kFailed;
            rec["error"] = e.what();
        }
        if (cfg_.alleviation) {
            json k = json::array();
            for (const auto &[q, r] : used) {
                json kj = knowledge::to_json(r);
                kj.erase("source"); // cache hits depend on worker interleaving
                k.push_back(kj);
            }
            rec["knowledge"] = k;
        }
        const json &adv = rec["adversarial"];
        if (!adv.empty() && rec.contains("original")) {
            const json &o = rec["original"]["output"];
            const json &a = adv[0]["output"];
            rec["outcome"] = {{"answer_changed", o["answer"] != a["answer"]},
                              {"explanation_changed", o["explanation"] != a["explanation"]}};
        }
        return rec;
    }

  private:
    void run_none(const Sample &s, json &rec, const QuestionVictim &victim) const {
        VictimOutput out = victim(s.question);
        rec["status"] = kClean;
        rec["original"] = presented_json(s.question, out);
        rec["adversarial"].push_back(presented_json(s.question, out));
    }

    void run_text(const Sample &s, json &rec, const QuestionVictim &victim) const {
        textattack::TextAttackResult r =
            cfg_.attack == AttackKind::plural
                ? textattack::run_plural_attack(s, res_.nouns, victim)
                : textattack::run_text_attack(s, cfg_.text, {client_, victim, res_.stopwords},
                                              cfg_.eval_all_candidates);
        json details = textattack::to_json(r);
        for (const char *k : {"sample_id", "status", "error", "original", "adversarial", "kept"})
            details.erase(k);
        rec["status"] = textattack::to_string(r.status);
        if (!r.error.empty())
            rec["error"] = r.error;
        if (r.status != textattack::Status::failed || !r.original.raw.empty())
            rec["original"] = presented_json(s.question, r.original);
        if (!r.kept.empty())
            for (const auto &k : r.kept)
                rec["adversarial"].push_back(presented_json(k.question, k.output));
        else if (r.best)
            rec["adversarial"].push_back(presented_json(r.best->question, r.best->output));
        rec["details"] = details;
    }

    void run_image(const Sample &s, json &rec, const ImageEntry *entry, const std::string &png,
                   const ImageVictim &victim) const {
        std::optional<fs::path> store = fs::path(cfg_.output_dir) / "images";
        imageattack::ImageAttackResult r =
            imageattack::run_image_attack(s, cfg_.image, {client_, victim, entry, *res_.mapping, png, store});
        json details = imageattack::to_json(r);
        for (const char *k : {"sample_id", "status", "error", "original", "adversarial"})
            details.erase(k);
        rec["status"] = imageattack::to_string(r.status);
        if (!r.error.empty())
            rec["error"] = r.error;
        if (!r.original.raw.empty())
            rec["original"] = presented_json(s.question, r.original);
        if (r.adversarial)
            rec["adversarial"].push_back(presented_json(s.question, *r.adversarial));
        rec["details"] = details;
    }

    const RunConfig &cfg_;
    const Corpus &corpus_;
    const Resources &res_;
    backend::Client &client_;
    knowledge::KnowledgeCache &kcache_;
};

/// Attack records for every sample, in sample_id order.
inline std::vector<json> attack_corpus(const RunConfig &cfg, const Corpus &corpus, const Resources &res,
                                       backend::Client &client, knowledge::KnowledgeCache &kcache) {
    std::vector<json> records(corpus.samples.size());
    SampleRunner runner(cfg, corpus, res, client, kcache);
    parallel_for(corpus.samples.size(), cfg.workers,
                 [&](std::size_t i) { records[i] = runner(corpus.samples[i]); });
    return records;
}

// ---------------------------------------------------------------- evaluation

/// Scores one victim output against the gold references.
inline metrics::SampleEvaluation evaluate_output(const std::string &id, const std::string &question,
                                                 const std::vector<std::string> &gold_answers,
                                                 const std::vector<std::string> &gold_explanations,
                                                 const VictimOutput &out, backend::Client &client,
                                                 const metrics::JudgeRubric *rubric) {
    metrics::SampleEvaluation e;
    e.sample_id = id;
    e.predicted_answer = out.answer;
    e.predicted_explanation = out.explanation;
    if (out.missing_because)
        e.flags.push_back("missing-because");
    if (!gold_answers.empty()) {
        auto acc = metrics::answer_accuracy(out.answer, gold_answers);
        e.answer_correct = acc.correct;
        e.answer_soft = acc.soft;
    } else {
        e.flags.push_back("no-gold-answer");
    }
    e.b1 = metrics::bleu_n(out.explanation, gold_explanations, 1);
    e.b2 = metrics::bleu_n(out.explanation, gold_explanations, 2);
    e.b3 = metrics::bleu_n(out.explanation, gold_explanations, 3);
    e.b4 = metrics::bleu_n(out.explanation, gold_explanations, 4);
    e.rl = metrics::rouge_l(out.explanation, gold_explanations);
    e.m = metrics::meteor(out.explanation, gold_explanations);
    if (tokenize(out.explanation).size() == 0) {
        e.bs = 0.0;
        e.flags.push_back("empty-explanation");
    } else {
        try {
            auto cand = backend::embed_tokens(client, out.explanation);
            std::vector<metrics::TokenEmbedding> refs;
            for (const auto &g : gold_explanations)
                refs.push_back(backend::embed_tokens(client, g));
            e.bs = metrics::bertscore(cand, refs).f1;
        } catch (const std::exception &err) {
            e.flags.push_back(std::string("bertscore: ") + err.what());
        }
    }
    if (rubric) {
        auto scores = metrics::judge_scores(
            question, gold_explanations.front(), out.explanation, *rubric,
            [&](const std::string &prompt) { return backend::llm_complete(client, prompt, 16, 0.0); });
        e.correctness = scores.correctness;
        e.detail = scores.detail;
        e.context = scores.context;
        for (auto &f : scores.flags)
            e.flags.push_back("judge " + f);
    }
    return e;
}

/// Adds an `evaluations` array to every record whose status is evaluated.
/// With several adversarial outputs each gets its own entry, id "<sample>#<i>".
inline void evaluate_records(std::vector<json> &records, int workers, backend::Client &client,
                             const metrics::JudgeRubric *rubric) {
    parallel_for(records.size(), workers, [&](std::size_t i) {
        json &rec = records[i];
        if (!evaluated_status(rec.value("status", std::string())))
            return;
        auto answers = rec["gold"]["answers"].get<std::vector<std::string>>();
        auto explanations = rec["gold"]["explanations"].get<std::vector<std::string>>();
        const json &adv = rec["adversarial"];
        json evals = json::array();
        for (std::size_t k = 0; k < adv.size(); ++k) {
            std::string id = rec["sample_id"].get<std::string>();
            if (adv.size() > 1)
                id += "#" + std::to_string(k);
            try {
                auto e = evaluate_output(id, adv[k]["question"].get<std::string>(), answers, explanations,
                                         victim_output_from_json(adv[k]["output"]), client, rubric);
                evals.push_back(e);
            } catch (const std::exception &err) {
                rec["status"] = kFailed;
                rec["error"] = std::string("evaluation: ") + err.what();
                rec.erase("evaluations");
                return;
            }
        }
        rec["evaluations"] = evals;
    });
}

inline std::vector<metrics::SampleEvaluation> collect_evaluations(const std::vector<json> &records) {
    std::vector<metrics::SampleEvaluation> out;
    for (const auto &rec : records)
        if (rec.contains("evaluations"))
            for (const auto &e : rec["evaluations"])
                out.push_back(e.get<metrics::SampleEvaluation>());
    std::sort(out.begin(), out.end(),
              [](const auto &a, const auto &b) { return a.sample_id < b.sample_id; });
    return out;
}

// ---------------------------------------------------------------- reports

inline metrics::MetricReport aggregate_or_empty(const std::vector<metrics::SampleEvaluation> &evals,
                                                metrics::ReportMode mode) {
    if (!evals.empty())
        return metrics::aggregate(evals, mode);
    metrics::MetricReport r;
    r.mode = mode;
    return r;
}

struct Reports {
    metrics::MetricReport filtered;
    metrics::MetricReport unfiltered;
};

/// Filtered and unfiltered reports from the same evaluation set.
inline Reports make_reports(const std::vector<metrics::SampleEvaluation> &evals) {
    return {aggregate_or_empty(evals, metrics::ReportMode::filtered),
            aggregate_or_empty(evals, metrics::ReportMode::unfiltered)};
}

/// Status histogram and image-similarity mean over the attack records.
inline json run_summary(const std::vector<json> &records) {
    std::map<std::string, std::size_t> statuses;
    double sim_sum = 0;
    std::size_t sim_n = 0, low_sim = 0, answer_changed = 0, explanation_changed = 0;
    for (const auto &r : records) {
        ++statuses[r.value("status", std::string(kFailed))];
        if (r.contains("details") && r["details"].contains("image_similarity")) {
            sim_sum += r["details"]["image_similarity"].get<double>();
            ++sim_n;
            if (r["details"].contains("flags"))
                ++low_sim;
        }
        if (r.contains("outcome")) {
            answer_changed += r["outcome"]["answer_changed"].get<bool>();
            explanation_changed += r["outcome"]["explanation_changed"].get<bool>();
        }
    }
    json j{{"samples", records.size()},
           {"statuses", statuses},
           {"answer_changed", answer_changed},
           {"explanation_changed", explanation_changed}};
    if (sim_n > 0) {
        j["image_similarity_mean"] = sim_sum / static_cast<double>(sim_n);
        j["low_image_similarity"] = low_sim;
    }
    return j;
}

inline std::size_t failed_count(const std::vector<json> &records) {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const json &r) {
        return r.value("status", std::string(kFailed)) == kFailed;
    }));
}

// ---------------------------------------------------------------- files

inline void write_text(const fs::path &p, const std::string &content) {
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out)
        throw Error("cannot write " + p.string());
}

inline std::string jsonl(const std::vector<json> &rows) {
    std::string out;
    for (const auto &r : rows)
        out += r.dump() + "\n";
    return out;
}

inline std::vector<json> read_jsonl(const std::string &path) {
    std::vector<json> rows;
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path);
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        std::size_t here = offset;
        offset += line.size() + 1;
        if (trim(line).empty())
            continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::parse_error &e) {
            throw ParseError(path, here + e.byte, e.what());
        }
    }
    return rows;
}

inline std::string report_json(const metrics::MetricReport &r, const std::string &method, const json &summary) {
    json j = metrics::to_json(r);
    j["method"] = method;
    j["summary"] = summary;
    return j.dump(2) + "\n";
}

/// Writes reports and CSV tables. Returns the written paths.
inline std::vector<fs::path> write_reports(const fs::path &dir, const Reports &reports, const std::string &method,
                                           const json &summary, bool judge) {
    std::vector<metrics::ReportRow> filtered{{method, reports.filtered}};
    std::vector<metrics::ReportRow> unfiltered{{method, reports.unfiltered}};
    std::vector<std::pair<fs::path, std::string>> files{
        {dir / "report_filtered.json", report_json(reports.filtered, method, summary)},
        {dir / "report_unfiltered.json", report_json(reports.unfiltered, method, summary)},
        {dir / "table_filtered.csv", metrics::metric_table_csv(filtered, true)},
        {dir / "table_unfiltered.csv", metrics::metric_table_csv(unfiltered, false)}};
    if (judge) {
        files.emplace_back(dir / "judge_filtered.csv", metrics::judge_table_csv(filtered, true));
        files.emplace_back(dir / "judge_unfiltered.csv", metrics::judge_table_csv(unfiltered, false));
    }
    std::vector<fs::path> written;
    for (const auto &[p, content] : files) {
        write_text(p, content);
        written.push_back(p);
    }
    return written;
}

inline std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Every regular file under `dir` except the manifest, relative path -> sha256.
inline json output_hashes(const fs::path &dir) {
    std::vector<fs::path> files;
    for (const auto &entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    json out = json::object();
    for (const auto &p : files)
        out[fs::relative(p, dir).generic_string()] = sha256_file(p.string());
    return out;
}

inline json run_choices(const RunConfig &cfg) {
    return json{{"explanation_references", "all gold explanations (multi-reference)"},
                {"most_frequent_object", "instance count in the image annotations"},
                {"s_qa_answers", "question plus every gold answer"},
                {"s_e_source", "victim explanation on the clean input"},
                {"evaluated_candidates", cfg.eval_all_candidates ? "all kept candidates" : "best candidate only"},
                {"judge_reference", "first gold explanation"},
                {"accuracy_denominator", "all evaluated samples"},
                {"knowledge_source", to_string(cfg.knowledge_source)}};
}

// ---------------------------------------------------------------- run

struct RunResult {
    int exit_code = kExitOk;
    std::size_t samples = 0;
    std::size_t failed = 0;
    Reports reports;
    json manifest;
};

/// Full pipeline: corpus, attack, victim, metrics, reports, manifest.
inline RunResult run(const RunConfig &cfg, backend::Client &client, const std::string &backend_description,
                     std::ostream *log = nullptr) {
    validate(cfg);
    std::string started = utc_timestamp();
    Corpus corpus = load_corpus(cfg.corpus);
    Resources res = load_resources(cfg);
    knowledge::KnowledgeCache kcache =
        cfg.knowledge_cache.empty() ? knowledge::KnowledgeCache() : knowledge::KnowledgeCache(cfg.knowledge_cache);

    fs::path out(cfg.output_dir);
    fs::create_directories(out);
    if (log)
        *log << "vqaadv: " << corpus.samples.size() << " samples, attack " << to_string(cfg.attack)
             << (cfg.alleviation ? " with alleviation" : "") << "\n";

    json health;
    try {
        health = client.health();
    } catch (const std::exception &e) {
        health = json{{"error", e.what()}};
    }

    std::vector<json> records = attack_corpus(cfg, corpus, res, client, kcache);
    evaluate_records(records, cfg.workers, client, res.rubric ? &*res.rubric : nullptr);
    auto evals = collect_evaluations(records);

    RunResult result;
    result.samples = records.size();
    result.failed = failed_count(records);
    result.reports = make_reports(evals);
    json summary = run_summary(records);

    write_text(out / "samples.jsonl", jsonl(records));
    write_text(out / "load_report.json", corpus.report.to_json().dump(2) + "\n");
    write_reports(out, result.reports, cfg.method_label(), summary, cfg.judge);

    double rate = records.empty() ? 0.0 : static_cast<double>(result.failed) / static_cast<double>(records.size());
    if (rate > cfg.max_failure_rate)
        result.exit_code = kExitFailureRate;

    result.manifest = json{{"tool", {{"name", "vqaadv"}, {"version", VQAADV_VERSION}}},
                           {"config", to_json(cfg)},
                           {"config_hash", config_hash(cfg)},
                           {"corpus", {{"files", corpus.file_hashes}, {"samples", corpus.samples.size()}}},
                           {"data_files", res.file_hashes},
                           {"backend", {{"endpoint", backend_description}, {"health", health}}},
                           {"choices", run_choices(cfg)},
                           {"summary", summary},
                           {"failure_rate", rate},
                           {"exit_code", result.exit_code},
                           {"timestamps", {{"started", started}, {"finished", utc_timestamp()}}},
                           {"outputs", output_hashes(out)}};
    write_text(out / "manifest.json", result.manifest.dump(2) + "\n");
    if (log)
        *log << "vqaadv: " << result.failed << " failed, " << evals.size() << " evaluated, outputs in "
             << out.string() << "\n";
    return result;
}

/// Opens the configured backend and runs.
inline RunResult run(const RunConfig &cfg, std::ostream *log = nullptr) {
    validate(cfg);
    BackendEnv env = open_backend(cfg);
    return run(cfg, *env.client, env.description, log);
}

} // namespace vqaadv::harness
