#include "reflectrag/corpus.hpp"
#include "reflectrag/errors.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace reflectrag;
using testsupport::TempDir;

TEST(Analyze, EmptyText) {
    EXPECT_TRUE(analyze("").empty());
}

TEST(Analyze, PunctuationAndDigits) {
    EXPECT_EQ(analyze("Aspirin, 81mg dose."), (std::vector<std::string>{"aspirin", "81mg", "dose"}));
}

TEST(Analyze, NonAsciiLettersAreSeparators) {
    EXPECT_EQ(analyze("\xCE\xB2-blocker use"), (std::vector<std::string>{"blocker", "use"}));
}

TEST(Analyze, NoStemmingOrStopwords) {
    EXPECT_EQ(analyze("The patients were treated"),
              (std::vector<std::string>{"the", "patients", "were", "treated"}));
}

TEST(Corpus, EmptyFileGivesEmptyCorpus) {
    TempDir dir;
    std::ofstream(dir / "empty.jsonl").close();
    EXPECT_EQ(ingest_corpus(dir / "empty.jsonl").size(), 0u);
}

TEST(Corpus, PreservesFileOrder) {
    const Corpus c = testsupport::load_corpus_text(
        R"({"id": "p3", "text": "third"}
{"id": "p1", "title": "T", "text": "first"}
{"id": "p2", "text": "second"}
)");
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[0].id, "p3");
    EXPECT_EQ(c[1].id, "p1");
    EXPECT_EQ(c[2].id, "p2");
    EXPECT_EQ(c[1].title, std::optional<std::string>("T"));
    EXPECT_EQ(c.position_of("p2"), std::optional<std::size_t>(2));
    EXPECT_FALSE(c.position_of("zz").has_value());
}

TEST(Corpus, DuplicateIdNamesTheId) {
    try {
        testsupport::load_corpus_text(R"({"id": "p1", "text": "a"}
{"id": "p1", "text": "b"}
)");
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("p1"), std::string::npos);
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Corpus, MalformedLineReportsLineNumber) {
    try {
        testsupport::load_corpus_text("{\"id\": \"p1\", \"text\": \"a\"}\n{not json\n");
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Corpus, EmptyTextRejected) {
    EXPECT_THROW(testsupport::load_corpus_text(R"({"id": "p1", "text": ""})"), InputError);
}

TEST(Corpus, MissingIdRejected) {
    EXPECT_THROW(testsupport::load_corpus_text(R"({"text": "abc"})"), InputError);
}

TEST(Corpus, TokensMatchAnalyzer) {
    const Corpus c = testsupport::make_corpus({{"a", "Beta-Blockers, 50 MG"}});
    EXPECT_EQ(c[0].tokens, analyze("Beta-Blockers, 50 MG"));
}

TEST(Corpus, AtUnknownIdThrows) {
    const Corpus c = testsupport::make_corpus({{"a", "x"}});
    EXPECT_EQ(c.at("a").text, "x");
    EXPECT_THROW(c.at("b"), Error);
}

TEST(Corpus, WriteReadRoundTrip) {
    const Corpus original = reflectrag::ingest_corpus(testsupport::fixture("corpus.jsonl"));
    std::stringstream buffer;
    write_corpus(original, buffer);
    const Corpus again = read_corpus(buffer);
    ASSERT_EQ(again.size(), original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        EXPECT_EQ(again[i].id, original[i].id);
        EXPECT_EQ(again[i].title, original[i].title);
        EXPECT_EQ(again[i].text, original[i].text);
        EXPECT_EQ(again[i].tokens, original[i].tokens);
    }
}
