// vqaadv command-line front end.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vqaadv/backend/http.hpp"
#include "vqaadv/backend/stub.hpp"
#include "vqaadv/harness/pipeline.hpp"

using namespace vqaadv;
using namespace vqaadv::harness;

namespace {

/// Flags that override fields of the (file or default) RunConfig.
struct Overrides {
    std::string config;
    std::optional<std::string> format, questions, explanations, annotations, images, split;
    std::optional<std::size_t> limit;
    std::optional<std::string> attack, knowledge_source;
    bool alleviation = false;
    std::optional<double> sigma_s, min_image_similarity, max_failure_rate;
    std::optional<int> k, padding, workers, max_tokens;
    std::optional<std::size_t> max_targets, max_combinations, n_keep;
    bool no_rescore = false, eval_all_candidates = false, no_judge = false;
    std::optional<std::string> backend_url, fixtures, cache_dir, knowledge_cache, output, method;
    std::optional<std::uint64_t> seed;
};

void add_corpus_options(CLI::App *app, Overrides &o) {
    app->add_option("--config", o.config, "JSON run configuration");
    app->add_option("--format", o.format, "corpus layout: vqax or aokvqa");
    app->add_option("--questions", o.questions, "VQA-X questions file or A-OKVQA split file");
    app->add_option("--explanations", o.explanations, "VQA-X explanations file");
    app->add_option("--annotations", o.annotations, "COCO instances file");
    app->add_option("--images", o.images, "image directory");
    app->add_option("--split", o.split, "train or val");
    app->add_option("--limit", o.limit, "keep only the first N samples");
    app->add_option("-o,--output", o.output, "output directory");
}

void add_backend_options(CLI::App *app, Overrides &o) {
    app->add_option("--backend-url", o.backend_url, "protocol server; omit for the in-process stub");
    app->add_option("--seed", o.seed, "stub seed");
    app->add_option("--fixtures", o.fixtures, "fixture table for the in-process stub");
    app->add_option("--cache-dir", o.cache_dir, "response cache directory");
    app->add_option("--workers", o.workers, "concurrent samples");
}

void add_attack_options(CLI::App *app, Overrides &o) {
    app->add_option("--sigma-s", o.sigma_s, "similarity threshold");
    app->add_option("--k", o.k, "MLM candidates per slot");
    app->add_option("--max-targets", o.max_targets, "perturbed words per question");
    app->add_option("--max-combinations", o.max_combinations, "cross-product bound");
    app->add_option("--n-keep", o.n_keep, "accepted candidates kept");
    app->add_flag("--no-rescore", o.no_rescore, "rank by top-k log-probs only");
    app->add_option("--padding", o.padding, "mask padding in pixels");
    app->add_option("--min-image-similarity", o.min_image_similarity, "flag edits below this similarity");
    app->add_flag("--alleviation", o.alleviation, "inject generated knowledge");
    app->add_option("--knowledge-source", o.knowledge_source, "benign or presented");
    app->add_option("--knowledge-cache", o.knowledge_cache, "knowledge JSONL cache");
    app->add_option("--max-tokens", o.max_tokens, "victim generation budget");
    app->add_flag("--eval-all-candidates", o.eval_all_candidates, "evaluate every kept candidate");
}

void add_eval_options(CLI::App *app, Overrides &o) {
    app->add_flag("--no-judge", o.no_judge, "skip LLM-judge scoring");
    app->add_option("--method", o.method, "row label in the CSV tables");
    app->add_option("--max-failure-rate", o.max_failure_rate, "exit 4 above this failed fraction");
}

template <class T, class U> void apply(const std::optional<T> &v, U &field) {
    if (v)
        field = *v;
}

RunConfig build_config(const Overrides &o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (o.format)
        c.corpus.format = parse_corpus_format(*o.format);
    apply(o.questions, c.corpus.questions);
    apply(o.explanations, c.corpus.explanations);
    apply(o.annotations, c.corpus.annotations);
    apply(o.images, c.corpus.images);
    if (o.split)
        c.corpus.split = parse_split(*o.split);
    apply(o.limit, c.corpus.limit);
    if (o.attack)
        c.attack = parse_attack_kind(*o.attack);
    if (o.alleviation)
        c.alleviation = true;
    if (o.knowledge_source)
        c.knowledge_source = parse_knowledge_source(*o.knowledge_source);
    apply(o.sigma_s, c.text.sigma_s);
    apply(o.k, c.text.k);
    apply(o.max_targets, c.text.max_targets);
    apply(o.max_combinations, c.text.max_combinations);
    apply(o.n_keep, c.text.n_keep);
    if (o.no_rescore)
        c.text.rescore = false;
    apply(o.padding, c.image.padding);
    apply(o.min_image_similarity, c.image.min_image_similarity);
    apply(o.backend_url, c.backend_url);
    apply(o.seed, c.seed);
    apply(o.fixtures, c.stub_fixtures);
    apply(o.cache_dir, c.cache_dir);
    apply(o.knowledge_cache, c.knowledge_cache);
    apply(o.workers, c.workers);
    apply(o.max_tokens, c.max_tokens);
    apply(o.output, c.output_dir);
    apply(o.max_failure_rate, c.max_failure_rate);
    if (o.eval_all_candidates)
        c.eval_all_candidates = true;
    if (o.no_judge)
        c.judge = false;
    apply(o.method, c.method);
    return c;
}

int cmd_ingest(const RunConfig &cfg) {
    Corpus corpus = load_corpus(cfg.corpus);
    fs::path out(cfg.output_dir);
    std::vector<json> rows;
    for (const auto &s : corpus.samples)
        rows.push_back(s);
    write_text(out / "corpus.jsonl", jsonl(rows));
    write_text(out / "load_report.json", corpus.report.to_json().dump(2) + "\n");
    std::cerr << "ingest: " << corpus.samples.size() << " samples, " << corpus.report.skipped_ids.size()
              << " skipped, " << corpus.report.warnings.size() << " warnings\n";
    return kExitOk;
}

int cmd_attack(RunConfig cfg, AttackKind kind) {
    cfg.attack = kind;
    validate(cfg);
    Corpus corpus = load_corpus(cfg.corpus);
    Resources res = load_resources(cfg, false);
    BackendEnv env = open_backend(cfg);
    knowledge::KnowledgeCache kcache =
        cfg.knowledge_cache.empty() ? knowledge::KnowledgeCache() : knowledge::KnowledgeCache(cfg.knowledge_cache);
    auto records = attack_corpus(cfg, corpus, res, *env.client, kcache);
    write_text(fs::path(cfg.output_dir) / "attacks.jsonl", jsonl(records));
    json summary = run_summary(records);
    std::cerr << "attack-" << to_string(kind) << ": " << summary.dump() << "\n";
    double rate = records.empty() ? 0.0 : static_cast<double>(failed_count(records)) / records.size();
    return rate > cfg.max_failure_rate ? kExitFailureRate : kExitOk;
}

int cmd_knowledge(RunConfig cfg) {
    cfg.alleviation = true;
    validate(cfg);
    Corpus corpus = load_corpus(cfg.corpus);
    Resources res = load_resources(cfg, false);
    BackendEnv env = open_backend(cfg);
    knowledge::KnowledgeCache kcache =
        cfg.knowledge_cache.empty() ? knowledge::KnowledgeCache() : knowledge::KnowledgeCache(cfg.knowledge_cache);
    std::vector<json> rows(corpus.samples.size());
    std::size_t empty = 0;
    std::mutex mu;
    parallel_for(corpus.samples.size(), cfg.workers, [&](std::size_t i) {
        const Sample &s = corpus.samples[i];
        json row{{"sample_id", s.sample_id}};
        try {
            auto rec = knowledge::generate_knowledge(
                s.question, res.knowledge_template,
                [&](const std::string &p) { return backend::llm_complete(*env.client, p, 256, 0.0); }, &kcache,
                {cfg.max_knowledge_tokens});
            row["knowledge"] = knowledge::to_json(rec);
            if (rec.empty_completion) {
                std::lock_guard lock(mu);
                ++empty;
            }
        } catch (const std::exception &e) {
            row["error"] = e.what();
        }
        rows[i] = row;
    });
    write_text(fs::path(cfg.output_dir) / "knowledge.jsonl", jsonl(rows));
    std::cerr << "knowledge-gen: " << rows.size() << " questions, " << empty << " empty completions\n";
    return kExitOk;
}

int cmd_evaluate(const RunConfig &cfg, const std::string &attacks) {
    RunConfig judge_only = cfg;
    judge_only.attack = AttackKind::none;
    judge_only.alleviation = false;
    Resources res = load_resources(judge_only);
    BackendEnv env = open_backend(cfg);
    std::vector<json> records;
    try {
        records = read_jsonl(attacks);
    } catch (const Error &e) {
        throw CorpusError(e.what());
    }
    evaluate_records(records, cfg.workers, *env.client, res.rubric ? &*res.rubric : nullptr);
    auto evals = collect_evaluations(records);
    fs::path out(cfg.output_dir);
    std::vector<json> rows(evals.begin(), evals.end());
    write_text(out / "evaluations.jsonl", jsonl(rows));
    write_reports(out, make_reports(evals), cfg.method_label(), run_summary(records), cfg.judge);
    std::cerr << "evaluate: " << evals.size() << " evaluations\n";
    return kExitOk;
}

int cmd_report(const RunConfig &cfg, const std::string &evaluations) {
    std::vector<metrics::SampleEvaluation> evals;
    try {
        for (const auto &row : read_jsonl(evaluations))
            evals.push_back(row.get<metrics::SampleEvaluation>());
    } catch (const json::exception &e) {
        throw CorpusError(evaluations + ": " + e.what());
    } catch (const Error &e) {
        throw CorpusError(e.what());
    }
    write_reports(fs::path(cfg.output_dir), make_reports(evals), cfg.method_label(), json::object(), cfg.judge);
    std::cerr << "report: " << evals.size() << " evaluations\n";
    return kExitOk;
}

backend::ProtocolServer *g_server = nullptr;

int cmd_serve(std::uint64_t seed, const std::string &fixtures, const std::string &host, int port, bool echo,
              bool identity) {
    backend::StubBackend stub(seed, fixtures.empty() ? std::vector<backend::Fixture>{} : backend::load_fixtures(fixtures),
                              {echo, identity});
    const char *token = std::getenv(backend::kTokenEnvVar);
    backend::ProtocolServer server(stub, token ? token : "");
    g_server = &server;
    std::signal(SIGINT, [](int) {
        if (g_server)
            g_server->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_server)
            g_server->stop();
    });
    std::cerr << "serve-stub: seed " << seed << " on http://" << host << ":" << port << "\n";
    server.run(host, port);
    return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Adversarial consistency harness for VQA models with natural-language explanations"};
    app.set_version_flag("--version", std::string(VQAADV_VERSION));
    app.require_subcommand(1);
    Overrides o;

    auto *ingest = app.add_subcommand("ingest", "load a corpus and write corpus.jsonl with a load report");
    add_corpus_options(ingest, o);

    auto *attack_text = app.add_subcommand("attack-text", "run the text attack (or the plural baseline)");
    bool plural = false;
    add_corpus_options(attack_text, o);
    add_backend_options(attack_text, o);
    add_attack_options(attack_text, o);
    attack_text->add_flag("--plural", plural, "use the plural baseline instead");

    auto *attack_image = app.add_subcommand("attack-image", "run the object-removal attack");
    add_corpus_options(attack_image, o);
    add_backend_options(attack_image, o);
    add_attack_options(attack_image, o);

    auto *knowledge_gen = app.add_subcommand("knowledge-gen", "generate knowledge statements for every question");
    add_corpus_options(knowledge_gen, o);
    add_backend_options(knowledge_gen, o);
    knowledge_gen->add_option("--knowledge-cache", o.knowledge_cache, "knowledge JSONL cache");

    auto *evaluate = app.add_subcommand("evaluate", "score attack records against gold references");
    std::string attacks_file;
    evaluate->add_option("--attacks", attacks_file, "attacks.jsonl from attack-text or attack-image")->required();
    evaluate->add_option("--config", o.config, "JSON run configuration");
    evaluate->add_option("-o,--output", o.output, "output directory");
    add_backend_options(evaluate, o);
    add_eval_options(evaluate, o);

    auto *report = app.add_subcommand("report", "aggregate evaluations into reports and CSV tables");
    std::string evaluations_file;
    report->add_option("--evaluations", evaluations_file, "evaluations.jsonl")->required();
    report->add_option("--config", o.config, "JSON run configuration");
    report->add_option("-o,--output", o.output, "output directory");
    add_eval_options(report, o);

    auto *run_cmd = app.add_subcommand("run", "attack, query, evaluate and report in one go");
    add_corpus_options(run_cmd, o);
    add_backend_options(run_cmd, o);
    add_attack_options(run_cmd, o);
    add_eval_options(run_cmd, o);
    run_cmd->add_option("--attack", o.attack, "none, text, image or plural");

    auto *serve = app.add_subcommand("serve-stub", "serve the deterministic stub backend over HTTP");
    std::uint64_t serve_seed = 7;
    std::string serve_fixtures, serve_host = "127.0.0.1";
    int serve_port = 8765;
    bool echo = false, identity = false;
    serve->add_option("--seed", serve_seed, "stub seed");
    serve->add_option("--fixtures", serve_fixtures, "fixture table");
    serve->add_option("--host", serve_host, "bind address");
    serve->add_option("--port", serve_port, "port");
    serve->add_flag("--echo-victim", echo, "victim answers with the question text");
    serve->add_flag("--identity-inpaint", identity, "inpainter returns its input");

    CLI11_PARSE(app, argc, argv);

    try {
        if (serve->parsed())
            return cmd_serve(serve_seed, serve_fixtures, serve_host, serve_port, echo, identity);
        RunConfig cfg = build_config(o);
        if (ingest->parsed())
            return cmd_ingest(cfg);
        if (attack_text->parsed())
            return cmd_attack(cfg, plural ? AttackKind::plural : AttackKind::text);
        if (attack_image->parsed())
            return cmd_attack(cfg, AttackKind::image);
        if (knowledge_gen->parsed())
            return cmd_knowledge(cfg);
        if (evaluate->parsed())
            return cmd_evaluate(cfg, attacks_file);
        if (report->parsed())
            return cmd_report(cfg, evaluations_file);
        RunResult r = run(cfg, &std::cerr);
        return r.exit_code;
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CorpusError &e) {
        std::cerr << "corpus error: " << e.what() << "\n";
        return kExitCorpus;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
