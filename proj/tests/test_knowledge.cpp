#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "vqaadv/backend/services.hpp"
#include "vqaadv/backend/stub.hpp"
#include "vqaadv/knowledge.hpp"

using namespace vqaadv;
using namespace vqaadv::knowledge;
namespace fs = std::filesystem;

namespace {

std::string default_template() { return read_file(std::string(VQAADV_DATA_DIR) + "/knowledge_prompt.txt"); }

fs::path temp_file(const std::string &tag) {
    return fs::temp_directory_path() /
           ("vqaadv-" + tag + "-" + std::to_string(std::random_device{}()) + ".jsonl");
}

} // namespace

TEST(KnowledgePrompt, SubstitutesPlaceholder) {
    EXPECT_EQ(build_knowledge_prompt("Is this room neat?", "K for: {q}"), "K for: Is this room neat?");
}

TEST(KnowledgePrompt, RejectsMissingOrDuplicatePlaceholder) {
    EXPECT_THROW(build_knowledge_prompt("q", "no placeholder"), ConfigError);
    EXPECT_THROW(build_knowledge_prompt("q", "{q} and {q}"), ConfigError);
}

TEST(KnowledgePrompt, ShippedTemplateHasInstructionsAndExamples) {
    std::string t = default_template();
    EXPECT_NE(t.find("Instructions:"), std::string::npos);
    EXPECT_NE(t.find("Examples:"), std::string::npos);
    std::string p = build_knowledge_prompt("Does the dress have sleeves?", t);
    EXPECT_NE(p.find("Question: Does the dress have sleeves?\nKnowledge:"), std::string::npos);
}

TEST(SplitStatements, DropsEmptyLines) {
    EXPECT_EQ(split_statements("a\n\nb"), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(split_statements("  a  \r\n \n"), (std::vector<std::string>{"a"}));
    EXPECT_TRUE(split_statements("").empty());
}

TEST(SplitStatements, TruncatesLongStatements) {
    EXPECT_EQ(split_statements("one two, three four", 3), (std::vector<std::string>{"one two, three"}));
}

TEST(GenerateKnowledge, ScriptedSleevesStatement) {
    const std::string sleeves =
        "Dresses can be sleeveless or have varying sleeve styles, such as short, long, or cap sleeves.";
    int calls = 0;
    auto llm = [&](const std::string &) {
        ++calls;
        return sleeves;
    };
    KnowledgeRecord r = generate_knowledge("Does the dress have sleeves?", default_template(), llm, nullptr);
    ASSERT_EQ(r.statements.size(), 1u);
    EXPECT_EQ(r.statements[0], sleeves);
    EXPECT_EQ(r.source, Source::generated);
    EXPECT_EQ(r.prompt_hash, sha256_hex(default_template()));
    EXPECT_EQ(calls, 1);
}

TEST(GenerateKnowledge, WarmCacheMakesNoCalls) {
    fs::path file = temp_file("kcache");
    int calls = 0;
    auto llm = [&](const std::string &) {
        ++calls;
        return std::string("a\n\nb");
    };
    KnowledgeRecord first;
    {
        KnowledgeCache cache(file);
        first = generate_knowledge("is this room neat?", "K: {q}", llm, &cache);
    }
    EXPECT_EQ(calls, 1);
    KnowledgeCache reopened(file);
    KnowledgeRecord second = generate_knowledge("is this room neat?", "K: {q}", llm, &reopened);
    EXPECT_EQ(calls, 1);
    EXPECT_EQ(second.statements, first.statements);
    EXPECT_EQ(second.source, Source::cached);
    KnowledgeRecord other_template = generate_knowledge("is this room neat?", "L: {q}", llm, &reopened);
    EXPECT_EQ(calls, 2);
    fs::remove(file);
}

TEST(GenerateKnowledge, EmptyCompletionRetriedOnceThenFlagged) {
    int calls = 0;
    auto llm = [&](const std::string &) {
        ++calls;
        return std::string(" \n ");
    };
    KnowledgeCache cache;
    KnowledgeRecord r = generate_knowledge("q?", "{q}", llm, &cache);
    EXPECT_EQ(calls, 2);
    EXPECT_TRUE(r.statements.empty());
    EXPECT_TRUE(r.empty_completion);
    EXPECT_EQ(cache.size(), 0u);
}

TEST(GenerateKnowledge, SecondAttemptCanSucceed) {
    int calls = 0;
    auto llm = [&](const std::string &) { return ++calls == 1 ? std::string() : std::string("fact"); };
    KnowledgeRecord r = generate_knowledge("q?", "{q}", llm, nullptr);
    EXPECT_EQ(r.statements, (std::vector<std::string>{"fact"}));
    EXPECT_FALSE(r.empty_completion);
}

TEST(KnowledgeCache, MalformedLineReportsOffset) {
    fs::path file = temp_file("kbad");
    {
        std::ofstream out(file);
        out << "{\"key\":\"k\",\"record\":{\"question\":\"q\",\"statements\":[\"s\"]}}\n";
        out << "{not json\n";
    }
    try {
        KnowledgeCache cache(file);
        FAIL() << "expected ParseError";
    } catch (const ParseError &e) {
        EXPECT_EQ(e.offset(), 57u);
    }
    fs::remove(file);
}

TEST(InjectedInput, GogglesLayout) {
    InjectedInput in =
        assemble_injected_input("why is the woman using goggles?",
                                std::vector<std::string>{"goggles protect eyes from wind and snow"});
    EXPECT_EQ(in.text,
              "why is the woman using goggles? based on the fact that goggles protect eyes from wind "
              "and snow <bos> the answer is");
    ASSERT_EQ(in.segments.size(), 5u);
    EXPECT_EQ(in.segment_text(0), "why is the woman using goggles?");
    EXPECT_EQ(in.segment_text(1), " based on the fact that");
    EXPECT_EQ(in.segment_text(2), " goggles protect eyes from wind and snow");
    EXPECT_EQ(in.segment_text(3), " <bos>");
    EXPECT_EQ(in.segment_text(4), " the answer is");
}

TEST(InjectedInput, EmptyKnowledgeOmitsPrefix) {
    InjectedInput in = assemble_injected_input("why is the woman using goggles?", std::vector<std::string>{});
    EXPECT_EQ(in.text, "why is the woman using goggles? <bos> the answer is");
    EXPECT_EQ(in.segments.size(), 3u);
}

TEST(InjectedInput, StatementsJoinedWithSemicolon) {
    InjectedInput in = assemble_injected_input("q?", std::vector<std::string>{"a", "b"});
    EXPECT_EQ(in.text, "q? based on the fact that a; b <bos> the answer is");
}

TEST(InjectedInput, SpansTileTextAndEndWithAnswerPrefix) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> statements(rng() % 4);
        for (auto &s : statements)
            s = "fact " + std::to_string(rng() % 1000);
        InjectedInput in = assemble_injected_input("question " + std::to_string(trial), statements);
        std::size_t pos = 0;
        std::string rebuilt;
        for (std::size_t i = 0; i < in.segments.size(); ++i) {
            EXPECT_EQ(in.segments[i].span.begin, pos);
            pos = in.segments[i].span.end;
            rebuilt += in.segment_text(i);
        }
        EXPECT_EQ(rebuilt, in.text);
        EXPECT_TRUE(in.text.ends_with("the answer is"));
    }
}

TEST(ParseGeneration, AnswerBecauseExplanation) {
    auto p = parse_generation("to protect eyes because the woman is wearing goggles to protect eyes");
    EXPECT_EQ(p.answer, "to protect eyes");
    EXPECT_EQ(p.explanation, "the woman is wearing goggles to protect eyes");
    EXPECT_FALSE(p.missing_because);
}

TEST(ParseGeneration, NoBecauseIsFlagged) {
    auto p = parse_generation("yes");
    EXPECT_EQ(p.answer, "yes");
    EXPECT_EQ(p.explanation, "");
    EXPECT_TRUE(p.missing_because);
}

TEST(ParseGeneration, SplitsAtFirstBecause) {
    auto p = parse_generation("a because b because c");
    EXPECT_EQ(p.answer, "a");
    EXPECT_EQ(p.explanation, "b because c");
}

TEST(ParseGeneration, StripsAnswerPrefixAndIgnoresEmbeddedWord) {
    auto p = parse_generation("the answer is yes becauseof x because it is wet");
    EXPECT_EQ(p.answer, "yes becauseof x");
    EXPECT_EQ(p.explanation, "it is wet");
}

TEST(ParseGeneration, EchoVictimRoundTrip) {
    backend::StubBackend stub(7, {}, backend::StubOptions{true, false});
    backend::Client client(stub, nullptr);
    InjectedInput in = assemble_injected_input("is the dog wet?", std::vector<std::string>{"dogs can swim"});
    std::string png = image::encode_png(image::RgbImage{2, 2, std::vector<std::uint8_t>(12, 128)});
    auto p = parse_generation(backend::vqa_generate(client, png, in.text, 32));
    EXPECT_EQ(p.explanation, "is the dog wet?");
    EXPECT_FALSE(p.answer.empty());
}
