#include "reflectrag/errors.hpp"
#include "reflectrag/orchestrator.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using namespace reflectrag;
using testsupport::completion;
using testsupport::FnGenerator;
using testsupport::FnVerifier;

namespace {

NliJudgement entail(double c) { return {NliLabel::entailment, c}; }

Question binary_question(const std::string& text = "Does aspirin inhibit platelets?") {
    return {"q", text, TaskKind::binary, {}};
}

} // namespace

TEST(RefineQuery, EmptyUnsupportedLeavesQueryUnchanged) {
    EXPECT_EQ(refine_query("Q?", {}), "Q?");
}

TEST(RefineQuery, AppendsMarkerBlock) {
    const std::vector<std::string> u{"s1"};
    EXPECT_EQ(refine_query("Q?", u), "Q?\nAdditionally find evidence for:\n- s1");
}

TEST(RefineQuery, SecondRefinementReplacesBlockWithUnion) {
    const std::vector<std::string> u0{"s1"};
    const std::vector<std::string> u1{"s1", "s2"};
    const std::string q1 = refine_query("Q?", u0);
    EXPECT_EQ(refine_query(q1, u1), "Q?\nAdditionally find evidence for:\n- s1\n- s2");
}

TEST(RefineQuery, KeepsEarlierStatementsAndDeduplicates) {
    const std::vector<std::string> u0{"a", "b", "a"};
    const std::vector<std::string> u1{"c", "b"};
    EXPECT_EQ(refine_query(refine_query("Q", u0), u1),
              "Q\nAdditionally find evidence for:\n- a\n- b\n- c");
}

TEST(Pipeline, AcceptsAtOnce) {
    auto gen = std::make_shared<FnGenerator>([](const std::string&) {
        return completion("yes", {"Aspirin inhibits platelet aggregation [1]."});
    });
    auto ver = std::make_shared<FnVerifier>([](auto, auto) { return entail(1.0); });
    const Pipeline p = testsupport::make_pipeline(gen, ver);
    const PipelineResult r = p.run(binary_question());
    EXPECT_EQ(r.iterations.size(), 1u);
    EXPECT_TRUE(r.accepted);
    EXPECT_EQ(r.termination, Termination::accepted);
    EXPECT_EQ(r.answer, "yes");
    EXPECT_EQ(r.support_score, 1.0);
    EXPECT_EQ(r.history_size, 0u);
}

TEST(Pipeline, RefineThenAccept) {
    auto gen = std::make_shared<FnGenerator>([](const std::string& user) {
        if (user.find("Previous attempt 1:") != std::string::npos) {
            return completion("yes", {"s1", "s3"});
        }
        return completion("no", {"s1", "s2"});
    });
    auto ver = std::make_shared<FnVerifier>([](auto, std::string_view h) {
        return h == "s2" ? NliJudgement{NliLabel::neutral, 0.3} : entail(0.9);
    });
    const Pipeline p = testsupport::make_pipeline(gen, ver);
    const PipelineResult r = p.run(binary_question("Q?"));

    ASSERT_EQ(r.iterations.size(), 2u);
    const auto& it0 = r.iterations[0];
    EXPECT_EQ(it0.iteration, 0u);
    EXPECT_EQ(it0.query, "Q?");
    EXPECT_EQ(it0.answer, "no");
    EXPECT_EQ(it0.support_score, 0.5);
    EXPECT_EQ(it0.unsupported, (std::vector<std::string>{"s2"}));
    const auto& it1 = r.iterations[1];
    EXPECT_EQ(it1.query, "Q?\nAdditionally find evidence for:\n- s2");
    EXPECT_EQ(it1.support_score, 1.0);
    EXPECT_TRUE(it1.unsupported.empty());
    EXPECT_TRUE(r.accepted);
    EXPECT_EQ(r.answer, "yes");
    EXPECT_EQ(r.statements, (std::vector<std::string>{"s1", "s3"}));
    EXPECT_EQ(r.history_size, 1u);

    const auto seen = gen->received();
    ASSERT_EQ(seen.size(), 2u);
    EXPECT_EQ(seen[0].find("Previous attempt"), std::string::npos);
    EXPECT_NE(seen[1].find("- s2"), std::string::npos);
    EXPECT_NE(seen[1].find("Answer: no"), std::string::npos);
}

TEST(Pipeline, NeverAcceptHitsCap) {
    auto gen = std::make_shared<FnGenerator>([](const std::string&) { return completion("yes", {"s"}); });
    auto ver = std::make_shared<FnVerifier>([](auto, auto) { return entail(0.0); });
    const Pipeline p = testsupport::make_pipeline(gen, ver);
    const PipelineResult r = p.run(binary_question());
    EXPECT_EQ(r.iterations.size(), 3u);
    EXPECT_EQ(r.termination, Termination::cap_reached);
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(r.history_size, 2u);
}

TEST(Pipeline, CapReturnsBestIterationLatestOnTies) {
    int call = 0;
    auto gen = std::make_shared<FnGenerator>([&call](const std::string&) {
        ++call;
        if (call == 1) return completion("yes", {"good", "bad"});   // S = 0.5
        if (call == 2) return completion("no", {"bad"});            // S = 0
        return completion("no", {"good", "bad"});                   // S = 0.5
    });
    auto ver = std::make_shared<FnVerifier>([](auto, std::string_view h) {
        return h == "good" ? entail(0.9) : entail(0.1);
    });
    const Pipeline p = testsupport::make_pipeline(gen, ver);
    const PipelineResult r = p.run(binary_question());
    ASSERT_EQ(r.iterations.size(), 3u);
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(r.support_score, 0.5);
    EXPECT_EQ(r.answer, "no");
}

TEST(Pipeline, ParseFailureCountsAsZeroAndRecovers) {
    int call = 0;
    auto gen = std::make_shared<FnGenerator>([&call](const std::string&) -> std::string {
        return ++call == 1 ? "gibberish" : completion("yes", {"s"});
    });
    auto ver = std::make_shared<FnVerifier>([](auto, auto) { return entail(0.9); });
    const Pipeline p = testsupport::make_pipeline(gen, ver);
    const PipelineResult r = p.run(binary_question());
    ASSERT_EQ(r.iterations.size(), 2u);
    EXPECT_FALSE(r.iterations[0].parse_ok);
    EXPECT_EQ(r.iterations[0].support_score, 0.0);
    EXPECT_TRUE(r.accepted);
}

TEST(Pipeline, AllParseFailures) {
    auto gen = std::make_shared<FnGenerator>([](const std::string&) { return std::string("??"); });
    auto ver = std::make_shared<FnVerifier>([](auto, auto) { return entail(0.9); });
    const PipelineResult r = testsupport::make_pipeline(gen, ver).run(binary_question());
    EXPECT_EQ(r.termination, Termination::parse_failed);
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(r.iterations.size(), 3u);
}

TEST(Pipeline, QueryEqualsRefinementOfAccumulatedUnsupported) {
    int call = 0;
    auto gen = std::make_shared<FnGenerator>([&call](const std::string&) {
        ++call;
        return completion("yes", {"u" + std::to_string(call), "shared"});
    });
    auto ver = std::make_shared<FnVerifier>([](auto, auto) { return entail(0.0); });
    PipelineSettings s;
    s.max_iters = 4;
    const PipelineResult r = testsupport::make_pipeline(gen, ver, s).run(binary_question("Q"));
    ASSERT_EQ(r.iterations.size(), 4u);
    std::string expected = "Q";
    for (const auto& it : r.iterations) {
        EXPECT_EQ(it.query, expected);
        expected = refine_query(expected, it.unsupported);
    }
}

TEST(Pipeline, AcceptedImpliesThresholdMet) {
    for (double c : {0.2, 0.55, 0.9}) {
        auto gen = std::make_shared<FnGenerator>([](const std::string&) { return completion("no", {"a"}); });
        auto ver = std::make_shared<FnVerifier>([c](auto, auto) { return entail(c); });
        const PipelineResult r = testsupport::make_pipeline(gen, ver).run(binary_question());
        EXPECT_LE(r.iterations.size(), 3u);
        if (r.accepted) {
            EXPECT_GE(r.iterations.back().support_score, 0.7);
        }
    }
}

TEST(Pipeline, IdenticalRunsSerialiseIdentically) {
    auto gen = std::make_shared<FnGenerator>([](const std::string& u) {
        return completion(u.size() % 2 ? "yes" : "no", {"x", "y"});
    });
    auto ver = std::make_shared<FnVerifier>([](std::string_view p, auto) {
        return entail(p.size() % 3 == 0 ? 0.9 : 0.2);
    });
    const Pipeline p = testsupport::make_pipeline(gen, ver);
    EXPECT_EQ(to_json(p.run(binary_question())).dump(), to_json(p.run(binary_question())).dump());
}

TEST(Pipeline, RetrieveReturnsFusedContext) {
    auto gen = std::make_shared<FnGenerator>([](const std::string&) { return completion("yes", {}); });
    auto ver = std::make_shared<FnVerifier>([](auto, auto) { return entail(1.0); });
    PipelineSettings s;
    s.fusion.k_out = 3;
    const Pipeline p = testsupport::make_pipeline(gen, ver, s);
    const RankedList ctx = p.retrieve("warfarin INR");
    ASSERT_FALSE(ctx.empty());
    EXPECT_LE(ctx.size(), 3u);
    EXPECT_EQ(ctx[0].passage_id, "d2");
}

TEST(Pipeline, RejectsBadSettingsAndMissingComponents) {
    auto gen = std::make_shared<FnGenerator>([](const std::string&) { return std::string(); });
    auto ver = std::make_shared<FnVerifier>([](auto, auto) { return entail(1.0); });
    PipelineSettings s;
    s.max_iters = 0;
    EXPECT_THROW(testsupport::make_pipeline(gen, ver, s), ConfigError);
    EXPECT_THROW(testsupport::make_pipeline(nullptr, ver), Error);
}

TEST(Pipeline, BackendErrorPropagates) {
    auto gen = std::make_shared<FnGenerator>([](const std::string&) -> std::string {
        throw BackendError("generator down", 503, 3);
    });
    auto ver = std::make_shared<FnVerifier>([](auto, auto) { return entail(1.0); });
    EXPECT_THROW(testsupport::make_pipeline(gen, ver).run(binary_question()), BackendError);
}
