#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "vqaadv/harness/pipeline.hpp"

using namespace vqaadv;
using namespace vqaadv::harness;
namespace fs = std::filesystem;

namespace {

const std::string kSynthetic = std::string(VQAADV_DATA_DIR) + "/synthetic";

fs::path temp_dir(const std::string &tag) {
    fs::path p = fs::temp_directory_path() / ("vqaadv-harness-" + tag + "-" + std::to_string(std::random_device{}()));
    fs::create_directories(p);
    return p;
}

RunConfig synthetic_config(AttackKind attack, const fs::path &out) {
    RunConfig c = load_config(kSynthetic + "/run_text.json");
    c.attack = attack;
    c.output_dir = out.string();
    return c;
}

std::vector<json> samples_of(const fs::path &out) { return read_jsonl((out / "samples.jsonl").string()); }

} // namespace

TEST(RunConfig, FileRoundTripAndPathResolution) {
    RunConfig c = load_config(kSynthetic + "/run_text.json");
    EXPECT_EQ(c.attack, AttackKind::text);
    EXPECT_EQ(c.seed, 7u);
    EXPECT_TRUE(fs::path(c.corpus.questions).is_absolute());
    EXPECT_TRUE(fs::exists(c.corpus.questions));
    EXPECT_EQ(c.output_dir, "out/text");
    RunConfig again = config_from_json(to_json(c));
    EXPECT_EQ(to_json(again), to_json(c));
    EXPECT_EQ(config_hash(again), config_hash(c));
}

TEST(RunConfig, DefaultValues) {
    RunConfig c;
    EXPECT_EQ(c.text.sigma_s, 0.8);
    EXPECT_EQ(c.text.max_targets, 1u);
    EXPECT_EQ(c.text.max_combinations, 512u);
    EXPECT_EQ(c.text.n_keep, 8u);
    EXPECT_EQ(c.image.padding, 8);
    EXPECT_EQ(c.image.min_image_similarity, 0.5);
    EXPECT_EQ(c.knowledge_source, KnowledgeSource::presented);
}

TEST(RunConfig, RejectsBadValues) {
    EXPECT_THROW(config_from_json(json{{"bogus", 1}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"attack", "noise"}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"corpus", {{"format", "coco"}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"sigma_s", "high"}}), ConfigError);
    RunConfig c = load_config(kSynthetic + "/run_text.json");
    c.text.sigma_s = 1.5;
    EXPECT_THROW(validate(c), ConfigError);
    c.text.sigma_s = 0.8;
    c.workers = 0;
    EXPECT_THROW(validate(c), ConfigError);
    c.workers = 2;
    c.max_failure_rate = -0.1;
    EXPECT_THROW(validate(c), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/run.json"), ConfigError);
}

TEST(LoadCorpus, SyntheticCorpusHasTwentySamples) {
    RunConfig c = load_config(kSynthetic + "/run_text.json");
    Corpus corpus = load_corpus(c.corpus);
    EXPECT_EQ(corpus.samples.size(), 20u);
    EXPECT_EQ(corpus.report.skipped_ids, std::vector<std::string>{"121"});
    ASSERT_TRUE(corpus.annotations);
    for (const auto &s : corpus.samples)
        EXPECT_NE(corpus.annotations->find(s.image_id), nullptr) << s.sample_id;
}

TEST(LoadCorpus, MissingFileIsCorpusError) {
    CorpusConfig c;
    c.questions = "/nonexistent/questions.json";
    EXPECT_THROW(load_corpus(c), CorpusError);
}

TEST(Run, NoAttackIsIdentity) {
    fs::path out = temp_dir("none");
    RunConfig c = synthetic_config(AttackKind::none, out);
    RunResult r = run(c);
    EXPECT_EQ(r.exit_code, kExitOk);
    auto rows = samples_of(out);
    ASSERT_EQ(rows.size(), 20u);
    for (const auto &row : rows) {
        EXPECT_EQ(row["status"], "clean");
        ASSERT_EQ(row["adversarial"].size(), 1u);
        EXPECT_EQ(row["adversarial"][0], row["original"]);
        EXPECT_FALSE(row["outcome"]["answer_changed"].get<bool>());
    }
    EXPECT_EQ(r.reports.unfiltered.evaluated, 20u);
    fs::remove_all(out);
}

TEST(Run, OutputsOrderedAndHashedInManifest) {
    fs::path out = temp_dir("manifest");
    RunResult r = run(synthetic_config(AttackKind::text, out));
    auto rows = samples_of(out);
    for (std::size_t i = 1; i < rows.size(); ++i)
        EXPECT_LT(rows[i - 1]["sample_id"].get<std::string>(), rows[i]["sample_id"].get<std::string>());
    json manifest = json::parse(read_file((out / "manifest.json").string()));
    for (const char *f : {"samples.jsonl", "load_report.json", "report_filtered.json", "report_unfiltered.json",
                          "table_filtered.csv", "table_unfiltered.csv", "judge_filtered.csv", "judge_unfiltered.csv"}) {
        ASSERT_TRUE(manifest["outputs"].contains(f)) << f;
        EXPECT_EQ(manifest["outputs"][f], sha256_file((out / f).string())) << f;
    }
    EXPECT_EQ(manifest["config_hash"], config_hash(synthetic_config(AttackKind::text, out)));
    EXPECT_TRUE(manifest["data_files"].contains("stopwords"));
    EXPECT_EQ(manifest["backend"]["health"]["protocol_version"], "1");
    EXPECT_EQ(manifest["choices"]["explanation_references"], "all gold explanations (multi-reference)");
    fs::remove_all(out);
}

TEST(Run, FilteredReportUsesExactlyTheCorrectSubset) {
    fs::path out = temp_dir("filtered");
    RunResult r = run(synthetic_config(AttackKind::none, out));
    std::set<std::string> correct;
    for (const auto &row : samples_of(out))
        for (const auto &e : row.value("evaluations", json::array()))
            if (e["answer_correct"].get<bool>())
                correct.insert(e["sample_id"].get<std::string>());
    std::set<std::string> used(r.reports.filtered.evaluated_ids.begin(), r.reports.filtered.evaluated_ids.end());
    EXPECT_EQ(used, correct);
    EXPECT_EQ(r.reports.filtered.evaluated, r.reports.filtered.correct);
    EXPECT_EQ(r.reports.unfiltered.evaluated, r.reports.unfiltered.total);
    fs::remove_all(out);
}

TEST(Run, ImageAttackStoresEditedImages) {
    fs::path out = temp_dir("image");
    RunConfig c = synthetic_config(AttackKind::image, out);
    c.stub_fixtures = std::string(VQAADV_DATA_DIR) + "/fixtures/worked_cases.json";
    RunResult r = run(c);
    EXPECT_EQ(r.failed, 0u);
    json manifest = json::parse(read_file((out / "manifest.json").string()));
    std::size_t attacked = 0;
    for (const auto &row : samples_of(out)) {
        if (row["status"] != "attacked")
            continue;
        ++attacked;
        std::string ref = row["details"]["edited_image_ref"].get<std::string>();
        fs::path img = out / "images" / (ref + ".png");
        ASSERT_TRUE(fs::exists(img));
        EXPECT_EQ(manifest["outputs"]["images/" + ref + ".png"], ref);
        EXPECT_TRUE(row["details"].contains("image_similarity"));
    }
    EXPECT_GE(attacked, 2u);
    fs::remove_all(out);
}

TEST(Run, FailureRateAboveThresholdExitsFour) {
    fs::path out = temp_dir("failrate");
    RunConfig c = synthetic_config(AttackKind::text, out);
    c.corpus.images = (out / "no-images").string();
    RunResult r = run(c);
    EXPECT_EQ(r.failed, 20u);
    EXPECT_EQ(r.exit_code, kExitFailureRate);
    EXPECT_EQ(r.reports.unfiltered.evaluated, 0u);
    EXPECT_FALSE(r.reports.unfiltered.b1);
    c.max_failure_rate = 1.0;
    EXPECT_EQ(run(c).exit_code, kExitOk);
    fs::remove_all(out);
}

TEST(Run, UnreachableBackendFailsSamplesNotTheRun) {
    fs::path out = temp_dir("unreachable");
    RunConfig c = synthetic_config(AttackKind::text, out);
    c.backend_url = "http://127.0.0.1:9";
    c.corpus.limit = 2;
    backend::ClientOptions opts;
    opts.sleep = [](std::chrono::milliseconds) {};
    opts.retry.max_retries = 1;
    BackendEnv env = open_backend(c, opts);
    RunResult r = run(c, *env.client, env.description);
    EXPECT_EQ(r.failed, 2u);
    EXPECT_EQ(r.exit_code, kExitFailureRate);
    for (const auto &row : samples_of(out))
        EXPECT_NE(row["error"].get<std::string>().find("unavailable"), std::string::npos);
    fs::remove_all(out);
}

TEST(Run, ResponseCacheReplayIsByteIdenticalWithoutNetwork) {
    fs::path out1 = temp_dir("cache1"), out2 = temp_dir("cache2"), cache = temp_dir("cache");
    RunConfig c = synthetic_config(AttackKind::text, out1);
    c.cache_dir = cache.string();
    run(c);
    c.output_dir = out2.string();
    BackendEnv env = open_backend(c);
    backend::CountingTransport counting(*env.transport);
    backend::Client client(counting, env.cache.get());
    run(c, client, env.description);
    EXPECT_EQ(counting.total(), 1u); // only /health, never cached
    EXPECT_EQ(read_file((out1 / "samples.jsonl").string()), read_file((out2 / "samples.jsonl").string()));
    EXPECT_EQ(read_file((out1 / "table_filtered.csv").string()), read_file((out2 / "table_filtered.csv").string()));
    for (auto &p : {out1, out2, cache})
        fs::remove_all(p);
}

TEST(Run, EvalAllCandidatesGivesOneEvaluationPerKeptCandidate) {
    fs::path out = temp_dir("allcands");
    RunConfig c = synthetic_config(AttackKind::text, out);
    c.eval_all_candidates = true;
    c.judge = false;
    run(c);
    for (const auto &row : samples_of(out)) {
        if (row["status"] != "attacked")
            continue;
        EXPECT_EQ(row["adversarial"].size(), row["details"]["n"].get<std::size_t>());
        EXPECT_EQ(row["evaluations"].size(), row["adversarial"].size());
    }
    EXPECT_FALSE(fs::exists(out / "judge_filtered.csv"));
    fs::remove_all(out);
}

TEST(Run, BenignKnowledgeUsesTheOriginalQuestion) {
    fs::path out = temp_dir("benign");
    RunConfig c = synthetic_config(AttackKind::text, out);
    c.alleviation = true;
    c.knowledge_source = KnowledgeSource::benign;
    c.judge = false;
    run(c);
    for (const auto &row : samples_of(out)) {
        ASSERT_EQ(row["knowledge"].size(), 1u);
        EXPECT_EQ(row["knowledge"][0]["question"], row["question"]);
    }
    fs::remove_all(out);
}

TEST(Evaluate, ScoresAgainstEveryReference) {
    backend::StubBackend stub(7);
    backend::Client client(stub, nullptr);
    VictimOutput out{"", "yes because the cat is on the mat", "yes", "the cat is on the mat", false};
    auto e = evaluate_output("s", "q?", {"yes"}, {"a dog runs", "the cat is on the mat"}, out, client, nullptr);
    EXPECT_TRUE(e.answer_correct);
    EXPECT_EQ(e.b4, 1.0);
    EXPECT_EQ(e.rl, 1.0);
    ASSERT_TRUE(e.bs);
    EXPECT_NEAR(*e.bs, 1.0, 1e-12);
    EXPECT_FALSE(e.correctness);
}

TEST(Evaluate, EmptyExplanationScoresZero) {
    backend::StubBackend stub(7);
    backend::Client client(stub, nullptr);
    VictimOutput out{"", "yes", "yes", "", true};
    auto e = evaluate_output("s", "q?", {"no"}, {"the cat is on the mat"}, out, client, nullptr);
    EXPECT_FALSE(e.answer_correct);
    EXPECT_EQ(e.b1, 0.0);
    EXPECT_EQ(e.bs, 0.0);
    EXPECT_NE(std::find(e.flags.begin(), e.flags.end(), "missing-because"), e.flags.end());
}
