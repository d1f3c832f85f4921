#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "vqaadv/backend/stub.hpp"
#include "vqaadv/textattack.hpp"

using namespace vqaadv;
using namespace vqaadv::textattack;

namespace {

const std::set<std::string> &stopwords() {
    static const auto s = load_word_set(std::string(VQAADV_DATA_DIR) + "/stopwords.txt");
    return s;
}

const std::set<std::string> &nouns() {
    static const auto s = load_word_set(std::string(VQAADV_DATA_DIR) + "/nouns.txt");
    return s;
}

backend::ClientOptions no_sleep() {
    backend::ClientOptions o;
    o.sleep = [](std::chrono::milliseconds) {};
    return o;
}

SubstitutionPlan single_slot(std::vector<std::pair<std::string, double>> cands, std::string original = "x") {
    SubstitutionPlan p;
    p.target_word_position = 0;
    p.original_word = std::move(original);
    p.slots.emplace_back();
    for (auto &[t, lp] : cands)
        p.slots[0].push_back({t, lp});
    p.k = static_cast<int>(p.slots[0].size());
    return p;
}

std::string png_2x2() {
    return image::encode_png(image::RgbImage{2, 2, std::vector<std::uint8_t>(12, 100)});
}

} // namespace

TEST(SelectTargets, FilterAndCap) {
    TokenSeq q = tokenize("is this room neat");
    std::set<std::string> sw{"is", "this"};
    EXPECT_EQ(select_target_words(q, sw, 5), (std::vector<std::size_t>{2, 3}));
    EXPECT_EQ(select_target_words(q, sw, 1), (std::vector<std::size_t>{2}));
}

TEST(SelectTargets, AllStopwordsGivesEmpty) {
    EXPECT_TRUE(select_target_words(tokenize("is this it"), stopwords(), 3).empty());
}

TEST(SelectTargets, GogglesQuestionIncludesWearing) {
    auto targets = select_target_words(tokenize("Why is the woman wearing goggles"), stopwords(), 10);
    EXPECT_NE(std::find(targets.begin(), targets.end(), 4u), targets.end());
}

TEST(ProposeSubstitutions, OneFixedTokenPerMask) {
    backend::FunctionTransport fixed([](backend::Endpoint, const json &req) -> json {
        json slots = json::array();
        for (std::size_t i = 0; i < req["mask_positions"].size(); ++i)
            slots.push_back(json::array({{{"token", "tidy"}, {"logprob", -0.3}}}));
        return {{"slots", slots}};
    });
    backend::Client client(fixed, nullptr, no_sleep());
    auto plan = propose_substitutions("is this room neat", 3, 1, client);
    ASSERT_EQ(plan.slots.size(), 1u);
    ASSERT_EQ(plan.slots[0].size(), 1u);
    EXPECT_EQ(plan.slots[0][0].token, "tidy");
}

TEST(ProposeSubstitutions, TwoSubTokenWordGivesTwoSlotsOfK) {
    backend::StubBackend stub(7);
    backend::Client client(stub, nullptr, no_sleep());
    auto plan = propose_substitutions("why is the woman wearing goggles", 4, 3, client);
    ASSERT_EQ(plan.slots.size(), 2u);
    EXPECT_EQ(plan.slots[0].size(), 3u);
    EXPECT_EQ(plan.slots[1].size(), 3u);
    EXPECT_EQ(combine_and_rank(plan, "why is the woman wearing goggles").size(), 9u);
}

TEST(ProposeSubstitutions, OriginalExcludedFromItsSlot) {
    backend::FunctionTransport mlm([](backend::Endpoint, const json &) -> json {
        return {{"slots", json::array({json::array({{{"token", "neat"}, {"logprob", -0.1}},
                                                    {{"token", "tidy"}, {"logprob", -0.5}},
                                                    {{"token", "clean"}, {"logprob", -0.7}}})})}};
    });
    backend::Client client(mlm, nullptr, no_sleep());
    auto plan = propose_substitutions("is this room neat", 3, 2, client);
    ASSERT_EQ(plan.slots[0].size(), 2u);
    EXPECT_EQ(plan.slots[0][0].token, "tidy");
    EXPECT_EQ(plan.slots[0][1].token, "clean");
}

TEST(CombineAndRank, ProbabilityOneGivesPerplexityOne) {
    auto ranked = combine_and_rank(single_slot({{"a", 0.0}}), "x y");
    ASSERT_EQ(ranked.size(), 1u);
    EXPECT_NEAR(ranked[0].perplexity, 1.0, 1e-9);
}

TEST(CombineAndRank, UniformHalfGivesPerplexityTwo) {
    SubstitutionPlan p = single_slot({{"a", std::log(0.5)}});
    p.slots.push_back({{"##b", std::log(0.5)}});
    auto ranked = combine_and_rank(p, "x y");
    ASSERT_EQ(ranked.size(), 1u);
    EXPECT_EQ(ranked[0].question_text, "ab y");
    EXPECT_NEAR(ranked[0].perplexity, 2.0, 1e-9);
}

TEST(CombineAndRank, OrderFollowsLogProbs) {
    auto ranked = combine_and_rank(single_slot({{"first", -0.1}, {"second", -2.0}, {"third", -1.0}}), "x");
    ASSERT_EQ(ranked.size(), 3u);
    EXPECT_EQ(ranked[0].question_text, "first");
    EXPECT_EQ(ranked[1].question_text, "third");
    EXPECT_EQ(ranked[2].question_text, "second");
}

TEST(CombineAndRank, TiesBrokenByText) {
    auto ranked = combine_and_rank(single_slot({{"b", -1.0}, {"a", -1.0}}), "x");
    EXPECT_EQ(ranked[0].question_text, "a");
}

TEST(CombineAndRank, EmptyPlanGivesEmptyList) {
    SubstitutionPlan p;
    EXPECT_TRUE(combine_and_rank(p, "x").empty());
}

TEST(CombineAndRank, MatchesExhaustiveOracle) {
    oracle::Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n_slots = 1 + rng.below(3);
        SubstitutionPlan plan;
        plan.target_word_position = 1;
        plan.original_word = "orig";
        std::vector<std::vector<double>> lp(n_slots);
        std::size_t combos = 1;
        for (std::size_t s = 0; s < n_slots; ++s) {
            std::size_t max_here = std::max<std::size_t>(1, 64 / combos);
            std::size_t size = 1 + rng.below(std::min<std::size_t>(max_here, 6));
            combos *= size;
            plan.slots.emplace_back();
            for (std::size_t j = 0; j < size; ++j) {
                // Coarse grid so exact ties occur and exercise the text tie-break.
                double v = -0.25 * static_cast<double>(rng.below(16));
                lp[s].push_back(v);
                std::string tok = (s ? "##" : "") + std::string(1, static_cast<char>('a' + s)) + std::to_string(j);
                plan.slots[s].push_back({tok, v});
            }
        }
        ASSERT_LE(combos, 64u);
        std::string question = "is orig here";
        auto expected = oracle::enumerate_ranked(lp, [&](const std::vector<std::size_t> &idx) {
            std::string word;
            for (std::size_t s = 0; s < idx.size(); ++s)
                word += std::string(1, static_cast<char>('a' + s)) + std::to_string(idx[s]);
            return "is " + word + " here";
        });
        auto got = combine_and_rank(plan, question, 512);
        ASSERT_EQ(got.size(), expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].question_text, expected[i].text) << "trial " << trial << " rank " << i;
            EXPECT_NEAR(got[i].perplexity, expected[i].perplexity, 1e-9 * expected[i].perplexity);
            EXPECT_GE(got[i].perplexity, 1.0);
        }
    }
}

TEST(CombineAndRank, BeamBoundsCrossProduct) {
    EXPECT_EQ(beam_width(512, 1), 512u);
    EXPECT_EQ(beam_width(512, 2), 23u);
    EXPECT_EQ(beam_width(512, 3), 8u);
    EXPECT_EQ(beam_width(512, 9), 2u);
    EXPECT_EQ(beam_width(64, 6), 2u);
    SubstitutionPlan plan;
    plan.original_word = "zz";
    for (int s = 0; s < 3; ++s) {
        plan.slots.emplace_back();
        for (int j = 0; j < 10; ++j)
            plan.slots.back().push_back({(s ? "##" : "") + std::to_string(s) + "t" + std::to_string(j), -0.1 * j});
    }
    EXPECT_EQ(combine_and_rank(plan, "zz", 512).size(), 512u);
}

TEST(CombineAndRank, RescorerReplacesPlanLogProbs) {
    SubstitutionPlan p = single_slot({{"a", -0.1}, {"b", -3.0}});
    auto ranked = combine_and_rank(p, "x", 512,
                                   [](const std::string &text, const std::vector<int> &pos,
                                      const std::vector<std::string> &targets) {
                                       EXPECT_EQ(pos, (std::vector<int>{0}));
                                       EXPECT_EQ(targets.size(), 1u);
                                       return std::vector<double>{text == "a" ? -5.0 : -0.5};
                                   });
    EXPECT_EQ(ranked[0].question_text, "b");
    EXPECT_NEAR(ranked[0].perplexity, std::exp(0.5), 1e-12);
}

TEST(SimilarityFilter, IdenticalAcceptedAtSigmaOne) {
    auto embed = [](const std::vector<std::string> &texts) {
        std::vector<std::vector<double>> out;
        for (const auto &t : texts)
            out.push_back(hashed_unit_vector(3, t, 32));
        return out;
    };
    RankedCandidate c;
    c.question_text = "is this room neat?";
    auto r = similarity_filter("is this room neat?", {c}, 1.0, embed);
    EXPECT_EQ(*r[0].similarity, 1.0);
    EXPECT_TRUE(r[0].accepted);
}

TEST(SimilarityFilter, OrthogonalRejected) {
    auto embed = [](const std::vector<std::string> &texts) {
        std::vector<std::vector<double>> out;
        for (std::size_t i = 0; i < texts.size(); ++i)
            out.push_back(i == 0 ? std::vector<double>{1, 0} : std::vector<double>{0, 1});
        return out;
    };
    RankedCandidate c;
    c.question_text = "b";
    auto r = similarity_filter("a", {c}, 0.8, embed);
    EXPECT_EQ(*r[0].similarity, 0.0);
    EXPECT_FALSE(r[0].accepted);
}

TEST(SimilarityFilter, BoundaryIsInclusive) {
    auto embed = [](const std::vector<std::string> &texts) {
        std::vector<std::vector<double>> out;
        for (std::size_t i = 0; i < texts.size(); ++i)
            out.push_back(i == 0 ? std::vector<double>{5, 0} : std::vector<double>{4, 3});
        return out;
    };
    RankedCandidate c;
    c.question_text = "b";
    auto r = similarity_filter("a", {c}, 0.8, embed);
    EXPECT_EQ(*r[0].similarity, 0.8);
    EXPECT_TRUE(r[0].accepted);
}

TEST(SimilarityFilter, ZeroNormTagged) {
    auto embed = [](const std::vector<std::string> &texts) {
        std::vector<std::vector<double>> out;
        for (std::size_t i = 0; i < texts.size(); ++i)
            out.push_back(i == 0 ? std::vector<double>{1, 0} : std::vector<double>{0, 0});
        return out;
    };
    RankedCandidate c;
    c.question_text = "";
    auto r = similarity_filter("a", {c}, 0.5, embed);
    EXPECT_FALSE(r[0].accepted);
    EXPECT_FALSE(r[0].similarity.has_value());
    EXPECT_EQ(r[0].error, "zero-norm-embedding");
}

TEST(SimilarityFilter, AcceptedSetMonotoneInSigma) {
    std::mt19937_64 rng(11);
    std::vector<RankedCandidate> cands(1000);
    for (std::size_t i = 0; i < cands.size(); ++i)
        cands[i].question_text = "candidate " + std::to_string(i);
    auto embed = [](const std::vector<std::string> &texts) {
        std::vector<std::vector<double>> out;
        auto base = hashed_unit_vector(5, "base", 8);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            auto noise = hashed_unit_vector(5, texts[i], 8);
            std::vector<double> v(8);
            double w = i == 0 ? 0.0 : static_cast<double>(i % 17) / 10.0;
            for (std::size_t d = 0; d < 8; ++d)
                v[d] = base[d] + w * noise[d];
            out.push_back(v);
        }
        return out;
    };
    std::set<std::string> previous;
    bool first = true;
    for (double sigma = 0.05; sigma <= 1.0; sigma += 0.05) {
        auto r = similarity_filter("original", cands, sigma, embed);
        std::set<std::string> accepted;
        for (const auto &c : r) {
            EXPECT_EQ(c.accepted, *c.similarity >= sigma);
            if (c.accepted)
                accepted.insert(c.question_text);
        }
        if (!first)
            EXPECT_TRUE(std::includes(previous.begin(), previous.end(), accepted.begin(), accepted.end()));
        previous = accepted;
        first = false;
    }
}

TEST(Pluralize, RuleTable) {
    // Hand-checked: regular, sibilant, consonant-y, vowel-y, -f/-fe, -o and irregular nouns.
    const std::vector<std::pair<std::string, std::string>> table = {
        {"dog", "dogs"},     {"match", "matches"}, {"bus", "buses"},       {"box", "boxes"},
        {"dish", "dishes"},  {"city", "cities"},   {"toy", "toys"},        {"knife", "knives"},
        {"shelf", "shelves"}, {"potato", "potatoes"}, {"piano", "pianos"}, {"man", "men"},
        {"woman", "women"},  {"child", "children"}, {"person", "people"},  {"mouse", "mice"},
    };
    for (const auto &[s, p] : table)
        EXPECT_EQ(pluralize(s), p) << s;
}

TEST(PluralBaseline, Examples) {
    auto r = plural_baseline("is the dog running", nouns());
    EXPECT_EQ(r.text, "is the dogs running");
    EXPECT_FALSE(r.no_noun);
    EXPECT_EQ(plural_baseline("is this at a match", nouns()).text, "is this at a matches");
    auto none = plural_baseline("why is he here", nouns());
    EXPECT_EQ(none.text, "why is he here");
    EXPECT_TRUE(none.no_noun);
}

TEST(PluralBaseline, KeepsSurroundingText) {
    EXPECT_EQ(plural_baseline("Dog in water?", nouns()).text, "Dogs in water?");
}

TEST(PluralBaseline, ChangesAtMostOnePosition) {
    oracle::Rng rng(9);
    std::vector<std::string> vocab(nouns().begin(), nouns().end());
    for (const auto &w : {"is", "the", "why", "running", "here", "he", "a", "blue"})
        vocab.push_back(w);
    for (int trial = 0; trial < 500; ++trial) {
        std::string q;
        std::size_t len = 1 + rng.below(8);
        for (std::size_t i = 0; i < len; ++i)
            q += (i ? " " : "") + vocab[rng.below(vocab.size())];
        auto before = tokenize(q);
        auto after = tokenize(plural_baseline(q, nouns()).text);
        ASSERT_EQ(before.size(), after.size());
        std::size_t changed = 0;
        for (std::size_t i = 0; i < before.size(); ++i)
            changed += before[i] != after[i];
        EXPECT_LE(changed, 1u) << q;
    }
}

TEST(RunTextAttack, EchoVictimDiffersExactlyWhenQuestionDiffers) {
    backend::StubBackend stub(7, {}, backend::StubOptions{true, false});
    backend::Client client(stub, nullptr, no_sleep());
    std::string png = png_2x2();
    QuestionVictim victim = [&](const std::string &q) { return query_victim(client, png, q, {}); };
    Sample s{"s1", 1, "1", "is this room neat?", {"yes"}, {"it is clean"}, Split::val};
    TextAttackConfig cfg;
    cfg.sigma_s = 0.5;
    auto r = run_text_attack(s, cfg, {client, victim, stopwords()});
    ASSERT_EQ(r.status, Status::attacked) << r.error;
    ASSERT_TRUE(r.best);
    EXPECT_NE(r.best->question, s.question);
    EXPECT_EQ(r.original.explanation, s.question);
    EXPECT_EQ(r.best->output.explanation, r.best->question);
    EXPECT_NE(r.best->output.explanation, r.original.explanation);
    for (std::size_t i = 1; i < r.candidates.size(); ++i)
        EXPECT_LE(r.candidates[i - 1].perplexity, r.candidates[i].perplexity);
}

TEST(RunTextAttack, NothingAcceptedIsNoAttackFound) {
    backend::StubBackend stub(7);
    backend::Client client(stub, nullptr, no_sleep());
    std::string png = png_2x2();
    QuestionVictim victim = [&](const std::string &q) { return query_victim(client, png, q, {}); };
    Sample s{"s1", 1, "1", "is this room neat?", {"yes"}, {"it is clean"}, Split::val};
    TextAttackConfig cfg;
    cfg.sigma_s = 1.0;
    auto r = run_text_attack(s, cfg, {client, victim, stopwords()});
    EXPECT_EQ(r.status, Status::no_attack_found);
    EXPECT_FALSE(r.best);
    EXPECT_FALSE(r.candidates.empty());
}

TEST(RunTextAttack, AllStopwordQuestionHasNoTarget) {
    backend::StubBackend stub(7);
    backend::Client client(stub, nullptr, no_sleep());
    std::string png = png_2x2();
    QuestionVictim victim = [&](const std::string &q) { return query_victim(client, png, q, {}); };
    Sample s{"s1", 1, "1", "is it?", {"yes"}, {"x"}, Split::val};
    EXPECT_EQ(run_text_attack(s, {}, {client, victim, stopwords()}).status, Status::no_target);
}

TEST(RunTextAttack, BackendFailureRecordedNotThrown) {
    backend::FunctionTransport down([](backend::Endpoint e, const json &) -> json {
        if (e == backend::Endpoint::vqa_generate)
            return {{"text", "yes because x"}};
        throw backend::TransportError("down", true);
    });
    backend::Client client(down, nullptr, no_sleep());
    std::string png = png_2x2();
    QuestionVictim victim = [&](const std::string &q) { return query_victim(client, png, q, {}); };
    Sample s{"s1", 1, "1", "is this room neat?", {"yes"}, {"x"}, Split::val};
    auto r = run_text_attack(s, {}, {client, victim, stopwords()});
    EXPECT_EQ(r.status, Status::failed);
    EXPECT_NE(r.error.find("mlm/topk"), std::string::npos);
}

TEST(RunTextAttack, ScriptedGogglesFlip) {
    auto fixtures = backend::parse_fixtures(json::parse(R"([
      {"endpoint": "mlm/topk", "match": {"text": "wearing goggles", "mask_positions": [4]},
       "response": {"slots": [[{"token": "wearing", "logprob": -0.1}, {"token": "using", "logprob": -0.2},
                               {"token": "holding", "logprob": -1.5}]]}},
      {"endpoint": "mlm/topk", "match": {"text": "wearing goggles", "mask_positions": [3]},
       "response": {"slots": [[{"token": "man", "logprob": -2.5}, {"token": "girl", "logprob": -3.0}]]}},
      {"endpoint": "mlm/logprob", "match": {"targets": "\"using\""}, "response": {"logprobs": [-0.2]}},
      {"endpoint": "mlm/logprob", "match": {"targets": "\"holding\""}, "response": {"logprobs": [-1.5]}},
      {"endpoint": "mlm/logprob", "match": {"targets": "\"man\""}, "response": {"logprobs": [-2.5]}},
      {"endpoint": "mlm/logprob", "match": {"targets": "\"girl\""}, "response": {"logprobs": [-3.0]}},
      {"endpoint": "vqa/generate", "match": {"input_text": "wearing goggles"},
       "response": {"text": "to protect eyes because the woman is wearing goggles to protect eyes"}},
      {"endpoint": "vqa/generate", "match": {"input_text": "using goggles"},
       "response": {"text": "to photograph because the woman is using a camera"}}
    ])"));
    backend::StubBackend stub(7, fixtures);
    backend::Client client(stub, nullptr, no_sleep());
    std::string png = png_2x2();
    QuestionVictim victim = [&](const std::string &q) { return query_victim(client, png, q, {}); };
    Sample s{"goggles", 1, "1", "Why is the woman wearing goggles?", {"to protect eyes"}, {"x"}, Split::val};
    TextAttackConfig cfg;
    cfg.max_targets = 2;
    auto r = run_text_attack(s, cfg, {client, victim, stopwords()});
    ASSERT_EQ(r.status, Status::attacked) << r.error;
    EXPECT_EQ(r.candidates[0].question_text, "Why is the woman using goggles?");
    EXPECT_TRUE(r.candidates[0].accepted) << *r.candidates[0].similarity;
    EXPECT_EQ(r.best->question, "Why is the woman using goggles?");
    EXPECT_EQ(r.original.answer, "to protect eyes");
    EXPECT_EQ(r.original.explanation, "the woman is wearing goggles to protect eyes");
    EXPECT_EQ(r.best->output.answer, "to photograph");
    EXPECT_EQ(r.best->output.explanation, "the woman is using a camera");
}

TEST(RunPluralAttack, NoNounIsRecorded) {
    backend::StubBackend stub(7);
    backend::Client client(stub, nullptr, no_sleep());
    std::string png = png_2x2();
    QuestionVictim victim = [&](const std::string &q) { return query_victim(client, png, q, {}); };
    Sample s{"s1", 1, "1", "why is he here", {"x"}, {"x"}, Split::val};
    EXPECT_EQ(run_plural_attack(s, nouns(), victim).status, Status::no_noun);
    s.question = "is the dog running";
    auto r = run_plural_attack(s, nouns(), victim);
    EXPECT_EQ(r.status, Status::attacked);
    EXPECT_EQ(r.best->question, "is the dogs running");
}
