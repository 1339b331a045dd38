// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "reflectrag/cli.hpp"
#include "reflectrag/config.hpp"
#include "reflectrag/corpus.hpp"
#include "reflectrag/dense_index.hpp"
#include "reflectrag/errors.hpp"
#include "reflectrag/evaluation.hpp"
#include "reflectrag/fusion.hpp"
#include "reflectrag/orchestrator.hpp"
#include "reflectrag/reflection.hpp"
#include "reflectrag/sparse_index.hpp"

#include "oracles/oracles.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace reflectrag;

namespace {

// Pinned tolerances and limits.
constexpr double kRrfScoreTol = 1e-12;
constexpr double kBm25ScoreTol = 1e-9;
constexpr double kMetricTol = 1e-12;
constexpr double kRuntimeLimitSeconds = 1.0;
constexpr int kRrfInstances = 200;
constexpr int kBm25Docs = 20;
constexpr int kBm25Queries = 50;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool condition, const std::string& what) {
        if (!condition && pass) {
            pass = false;
            detail = what;
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt_seconds(double s) {
    std::ostringstream o;
    o.precision(3);
    o << std::fixed << s << "s";
    return o.str();
}

RankedList list_of(const std::vector<std::string>& ids) {
    RankedList out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.entries.push_back({ids[i], static_cast<double>(ids.size() - i)});
    }
    return out;
}

Outcome rrf_oracle() {
    Outcome o;
    std::mt19937_64 rng(20240601);
    double elapsed = 0.0;
    for (int trial = 0; trial < kRrfInstances && o.pass; ++trial) {
        std::vector<std::vector<std::string>> raw;
        std::vector<RankedList> lists;
        const int n_lists = static_cast<int>(rng() % 5);  // 0..4
        const int universe = 1 + static_cast<int>(rng() % 50);
        for (int l = 0; l < n_lists; ++l) {
            std::vector<std::string> pool;
            for (int i = 0; i < universe; ++i) pool.push_back("p" + std::to_string(i));
            std::shuffle(pool.begin(), pool.end(), rng);
            pool.resize(rng() % (universe + 1));
            raw.push_back(pool);
            lists.push_back(list_of(pool));
        }
        const std::size_t k_out = rng() % 60;
        const auto start = Clock::now();
        const RankedList got = rrf_fuse(lists, {60.0, k_out});
        elapsed += seconds_since(start);
        const auto expected = oracle::rrf(raw, 60, k_out);
        o.require(got.size() == expected.size(), "size mismatch in instance " + std::to_string(trial));
        for (std::size_t i = 0; o.pass && i < got.size(); ++i) {
            o.require(got[i].passage_id == expected[i].id,
                      "order mismatch in instance " + std::to_string(trial));
            o.require(std::abs(got[i].score - expected[i].score.value()) <= kRrfScoreTol,
                      "score mismatch in instance " + std::to_string(trial));
        }
    }
    o.require(elapsed < kRuntimeLimitSeconds, "runtime " + fmt_seconds(elapsed));
    if (o.pass) o.detail = std::to_string(kRrfInstances) + " instances, " + fmt_seconds(elapsed);
    return o;
}

Outcome bm25_oracle() {
    Outcome o;
    std::mt19937_64 rng(77);
    const std::vector<std::string> vocab{"aspirin", "warfarin", "insulin", "dose",    "risk",
                                         "trial",   "renal",    "heart",   "failure", "therapy",
                                         "patients", "blood",   "pressure", "kidney", "liver"};
    std::vector<std::pair<std::string, std::string>> docs;
    for (int i = 0; i < kBm25Docs; ++i) {
        std::string text;
        const int len = 2 + static_cast<int>(rng() % 14);
        for (int j = 0; j < len; ++j) text += vocab[rng() % vocab.size()] + " ";
        docs.emplace_back("doc" + std::string(i < 10 ? "0" : "") + std::to_string(i), text);
    }
    const Corpus corpus = testsupport::make_corpus(docs);
    const auto start_build = Clock::now();
    const SparseIndex index = SparseIndex::build(corpus);
    double elapsed = seconds_since(start_build);

    std::vector<std::pair<std::string, std::vector<std::string>>> oracle_docs;
    for (const auto& p : corpus.passages()) oracle_docs.emplace_back(p.id, p.tokens);

    for (int q = 0; q < kBm25Queries && o.pass; ++q) {
        std::vector<std::string> query;
        const int qlen = 1 + static_cast<int>(rng() % 5);
        for (int j = 0; j < qlen; ++j) {
            query.push_back(rng() % 8 == 0 ? "unseen" : vocab[rng() % vocab.size()]);
        }
        const auto start = Clock::now();
        const RankedList got = index.search(query, kBm25Docs);
        elapsed += seconds_since(start);
        const auto expected = oracle::bm25(oracle_docs, query);
        o.require(got.size() == expected.size(), "size mismatch on query " + std::to_string(q));
        for (std::size_t i = 0; o.pass && i < got.size(); ++i) {
            o.require(got[i].passage_id == expected[i].id, "ranking mismatch on query " + std::to_string(q));
            o.require(std::abs(got[i].score - expected[i].score) <= kBm25ScoreTol,
                      "score mismatch on query " + std::to_string(q));
        }
    }
    o.require(elapsed < kRuntimeLimitSeconds, "runtime " + fmt_seconds(elapsed));
    if (o.pass) o.detail = std::to_string(kBm25Queries) + " queries, " + fmt_seconds(elapsed);
    return o;
}

Outcome dense_oracle() {
    Outcome o;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double elapsed = 0.0;
    int instances = 0;
    for (int trial = 0; trial < 40 && o.pass; ++trial) {
        const std::size_t rows_n = 1 + rng() % 100;
        const std::size_t dim = 1 + rng() % 16;
        std::vector<std::pair<std::string, std::string>> docs;
        std::vector<EmbeddingRecord> records;
        std::vector<std::string> ids;
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < rows_n; ++i) {
            const std::string id = "v" + std::to_string(1000 + i);
            std::vector<double> v(dim);
            for (auto& x : v) x = u(rng);
            if (rng() % 10 == 0 && !rows.empty()) v = rows.back();  // exact ties
            docs.emplace_back(id, "t");
            records.push_back({id, v});
            ids.push_back(id);
            rows.push_back(v);
        }
        const DenseIndex index = DenseIndex::build(testsupport::make_corpus(docs), records);
        for (int q = 0; q < 5 && o.pass; ++q) {
            std::vector<double> query(dim);
            for (auto& x : query) x = u(rng);
            const std::size_t k = rng() % (rows_n + 3);
            const auto start = Clock::now();
            const RankedList got = index.search(query, k);
            elapsed += seconds_since(start);
            const auto expected = oracle::dense(ids, rows, query, k);
            ++instances;
            o.require(got.size() == expected.size(), "size mismatch");
            for (std::size_t i = 0; o.pass && i < got.size(); ++i) {
                o.require(got[i].passage_id == expected[i].id && got[i].score == expected[i].score,
                          "top-k mismatch at trial " + std::to_string(trial));
            }
        }
    }
    o.require(elapsed < kRuntimeLimitSeconds, "runtime " + fmt_seconds(elapsed));
    if (o.pass) o.detail = std::to_string(instances) + " searches, " + fmt_seconds(elapsed);
    return o;
}

/// Context the pipeline must retrieve for `query`, computed with the oracles.
std::vector<std::string> expected_context(const Corpus& corpus, const EmbeddingProvider& embedder,
                                          const std::string& query) {
    const PipelineSettings defaults;
    std::vector<std::pair<std::string, std::vector<std::string>>> docs;
    for (const auto& p : corpus.passages()) docs.emplace_back(p.id, p.tokens);
    auto sparse = oracle::bm25(docs, analyze(query));
    if (sparse.size() > defaults.retrieval_depth) sparse.resize(defaults.retrieval_depth);

    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> texts;
    for (const auto& p : corpus.passages()) {
        ids.push_back(p.id);
        texts.push_back(p.text);
    }
    rows = embedder.embed(texts);
    const std::vector<std::string> qtext{query};
    const auto dense = oracle::dense(ids, rows, embedder.embed(qtext)[0], defaults.retrieval_depth);

    std::vector<std::vector<std::string>> lists(2);
    for (const auto& s : sparse) lists[0].push_back(s.id);
    for (const auto& d : dense) lists[1].push_back(d.id);
    std::vector<std::string> out;
    for (const auto& f : oracle::rrf(lists, 60, defaults.fusion.k_out)) out.push_back(f.id);
    return out;
}

struct ExpectedVerdict {
    std::string statement;
    NliLabel label;
    double confidence;
    bool supported;
};

struct ExpectedIteration {
    std::string query;
    std::string answer;
    std::vector<std::string> statements;
    double support_score;
    std::vector<std::string> unsupported;
    std::vector<ExpectedVerdict> verdicts;
};

/// Compares every recorded field; verdict best_passage is the first context passage
/// because each fixture's verifier is constant across passages.
void check_trace(Outcome& o, const std::string& name, const PipelineResult& r,
                 const std::vector<ExpectedIteration>& expected, const Corpus& corpus,
                 const EmbeddingProvider& embedder) {
    o.require(r.iterations.size() == expected.size(), name + ": iteration count");
    for (std::size_t i = 0; o.pass && i < expected.size(); ++i) {
        const auto& got = r.iterations[i];
        const auto& want = expected[i];
        const std::string at = name + " iteration " + std::to_string(i) + ": ";
        o.require(got.iteration == i, at + "index");
        o.require(got.query == want.query, at + "query");
        const auto ctx = expected_context(corpus, embedder, want.query);
        o.require(got.context_ids == ctx, at + "context_ids");
        o.require(got.parse_ok, at + "parse_ok");
        o.require(got.answer == want.answer, at + "answer");
        o.require(got.statements == want.statements, at + "statements");
        o.require(got.support_score == want.support_score, at + "support_score");
        o.require(got.unsupported == want.unsupported, at + "unsupported");
        o.require(got.verdicts.size() == want.verdicts.size(), at + "verdict count");
        for (std::size_t v = 0; o.pass && v < want.verdicts.size(); ++v) {
            const auto& gv = got.verdicts[v];
            const auto& wv = want.verdicts[v];
            o.require(gv.statement == wv.statement && gv.label == wv.label &&
                          gv.confidence == wv.confidence && gv.supported == wv.supported &&
                          !gv.error && gv.best_passage == std::optional<std::string>(ctx.front()),
                      at + "verdict " + std::to_string(v));
        }
    }
}

Outcome loop_semantics() {
    using testsupport::completion;
    using testsupport::FnGenerator;
    using testsupport::FnVerifier;
    Outcome o;
    const Corpus corpus = testsupport::make_corpus(testsupport::small_docs());
    const HashingEmbeddingProvider embedder(16);
    const std::string q = "Does aspirin inhibit platelet aggregation?";
    const std::string marker = "\nAdditionally find evidence for:\n";

    {
        auto gen = std::make_shared<FnGenerator>([](const std::string&) {
            return completion("yes", {"Aspirin inhibits platelets [1]."});
        });
        auto ver = std::make_shared<FnVerifier>([](auto, auto) { return NliJudgement{NliLabel::entailment, 1.0}; });
        const PipelineResult r = testsupport::make_pipeline(gen, ver).run({"f1", q, TaskKind::binary, {}});
        check_trace(o, "accept-at-once", r,
                    {{q, "yes", {"Aspirin inhibits platelets [1]."}, 1.0, {},
                      {{"Aspirin inhibits platelets [1].", NliLabel::entailment, 1.0, true}}}},
                    corpus, embedder);
        o.require(r.accepted && r.termination == Termination::accepted && r.answer == "yes" &&
                      r.support_score == 1.0 && r.history_size == 0,
                  "accept-at-once: result fields");
    }
    {
        auto gen = std::make_shared<FnGenerator>([](const std::string& user) {
            return user.find("Previous attempt 1:") == std::string::npos ? completion("no", {"s1", "s2"})
                                                                         : completion("yes", {"s1", "s3"});
        });
        auto ver = std::make_shared<FnVerifier>([](auto, std::string_view h) {
            return h == "s2" ? NliJudgement{NliLabel::neutral, 0.3} : NliJudgement{NliLabel::entailment, 0.9};
        });
        const PipelineResult r = testsupport::make_pipeline(gen, ver).run({"f2", q, TaskKind::binary, {}});
        const std::string q1 = q + marker + "- s2";
        check_trace(o, "refine-then-accept", r,
                    {{q, "no", {"s1", "s2"}, 0.5, {"s2"},
                      {{"s1", NliLabel::entailment, 0.9, true}, {"s2", NliLabel::neutral, 0.3, false}}},
                     {q1, "yes", {"s1", "s3"}, 1.0, {},
                      {{"s1", NliLabel::entailment, 0.9, true}, {"s3", NliLabel::entailment, 0.9, true}}}},
                    corpus, embedder);
        o.require(r.accepted && r.termination == Termination::accepted && r.answer == "yes" &&
                      r.history_size == 1,
                  "refine-then-accept: result fields");
        const auto seen = gen->received();
        o.require(seen.size() == 2 && seen[1].find("- s2") != std::string::npos,
                  "refine-then-accept: history in second prompt");
    }
    {
        int call = 0;
        auto gen = std::make_shared<FnGenerator>([&call](const std::string&) {
            ++call;
            return completion(call == 2 ? "no" : "yes", {"c" + std::to_string(call)});
        });
        auto ver = std::make_shared<FnVerifier>([](auto, auto) { return NliJudgement{NliLabel::entailment, 0.0}; });
        const PipelineResult r = testsupport::make_pipeline(gen, ver).run({"f3", q, TaskKind::binary, {}});
        check_trace(o, "never-accept", r,
                    {{q, "yes", {"c1"}, 0.0, {"c1"}, {{"c1", NliLabel::entailment, 0.0, false}}},
                     {q + marker + "- c1", "no", {"c2"}, 0.0, {"c2"},
                      {{"c2", NliLabel::entailment, 0.0, false}}},
                     {q + marker + "- c1\n- c2", "yes", {"c3"}, 0.0, {"c3"},
                      {{"c3", NliLabel::entailment, 0.0, false}}}},
                    corpus, embedder);
        // All scores tie at 0, so the latest iteration's answer is returned.
        o.require(!r.accepted && r.termination == Termination::cap_reached && r.answer == "yes" &&
                      r.statements == std::vector<std::string>{"c3"} && r.history_size == 2,
                  "never-accept: result fields");
    }
    if (o.pass) o.detail = "3 fixtures";
    return o;
}

Outcome support_arithmetic() {
    Outcome o;
    const testsupport::FnVerifier verifier([](std::string_view, std::string_view h) {
        const double c = h == "s1" ? 0.9 : (h == "s2" ? 0.6 : 0.4);
        return NliJudgement{NliLabel::entailment, c};
    });
    const std::vector<Passage> ctx{{"p1", std::nullopt, "premise", {}}};
    const std::vector<std::string> stmts{"s1", "s2", "s3"};
    const auto report = score_rationale(verify_statements(verifier, stmts, ctx, {0.5, 0.7, 1}), 0.7);
    o.require(std::abs(report.support_score - 2.0 / 3.0) <= kMetricTol, "S != 2/3");
    o.require(report.decision == Decision::refine, "2/3 did not refine");
    o.require(report.unsupported == std::vector<std::string>{"s3"}, "unsupported set");

    std::vector<StatementVerdict> ten;
    for (int i = 0; i < 10; ++i) {
        StatementVerdict v;
        v.statement = "t" + std::to_string(i);
        v.label = NliLabel::entailment;
        v.confidence = i < 7 ? 0.9 : 0.1;
        v.supported = i < 7;
        ten.push_back(v);
    }
    const auto boundary = score_rationale(ten, 0.7);
    o.require(boundary.support_score == 0.7, "S != 0.70 exactly");
    o.require(boundary.decision == Decision::accept, "S = 0.70 did not accept");
    if (o.pass) o.detail = "S=2/3 refine, S=0.70 accept";
    return o;
}

Outcome pubmedqa_filter() {
    Outcome o;
    const auto load = load_pubmedqa(testsupport::fixture("pubmedqa.jsonl"));
    std::vector<std::string> ids;
    for (const auto& item : load.items) {
        ids.push_back(item.id);
        o.require(item.gold == "yes" || item.gold == "no", "non yes/no gold kept");
    }
    o.require(ids == std::vector<std::string>{"q1", "q2", "q3", "q4"}, "kept subset");
    o.require(load.summary.kept == 4 && load.summary.dropped == 2, "load summary");
    if (o.pass) o.detail = "kept 4, dropped 2";
    return o;
}

Outcome metrics() {
    Outcome o;
    const std::vector<Prediction> p{{"yes", "yes"}, {"yes", "no"}, {"no", "no"}, {"no", "no"}};
    const std::vector<std::string> labels{"yes", "no"};
    const Metrics m = compute_metrics(p, labels);
    o.require(std::abs(m.accuracy - 0.75) <= kMetricTol, "accuracy");
    o.require(std::abs(m.f1 - 11.0 / 15.0) <= kMetricTol, "macro F1");
    if (o.pass) o.detail = "accuracy 0.75, macro F1 11/15";
    return o;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
    Outcome o;
    testsupport::TempDir dir;
    std::vector<std::string> outputs;
    for (int run = 0; run < 2; ++run) {
        const std::string report = (dir / ("report" + std::to_string(run) + ".json")).string();
        const std::string trace = (dir / ("trace" + std::to_string(run) + ".jsonl")).string();
        const std::vector<std::string> args{
            "reflectrag", "eval", "--dataset", "pubmedqa", "--input",
            testsupport::fixture("pubmedqa.jsonl").string(), "--mock-backends",
            testsupport::fixture("mock").string(), "--corpus", testsupport::fixture("corpus.jsonl").string(),
            "--embeddings", testsupport::fixture("corpus.emb.jsonl").string(), "--seed", "42", "--report",
            report, "--trace", trace};
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        o.require(code == 0, "eval exit code " + std::to_string(code) + ": " + err.str());
        outputs.push_back(slurp(report));
        outputs.push_back(slurp(trace));
    }
    if (!o.pass) return o;
    o.require(!outputs[0].empty() && !outputs[1].empty(), "empty outputs");
    o.require(outputs[0] == outputs[2], "reports differ");
    o.require(outputs[1] == outputs[3], "traces differ");
    if (o.pass) o.detail = "report and trace byte-identical";
    return o;
}

Outcome defaults_audit() {
    Outcome o;
    const PipelineConfig config;
    const PipelineSettings settings = config.pipeline_settings();
    o.require(config.fusion_k == 60.0 && settings.fusion.k == 60.0 && FusionConfig{}.k == 60.0, "K");
    o.require(config.tau == 0.5 && settings.reflection.tau == 0.5 && ReflectionConfig{}.tau == 0.5, "tau");
    o.require(config.theta == 0.7 && settings.reflection.theta == 0.7 && ReflectionConfig{}.theta == 0.7,
              "theta");
    o.require(config.max_iters == 3 && settings.max_iters == 3 && PipelineSettings{}.max_iters == 3,
              "max_iters");
    if (o.pass) o.detail = "K=60 tau=0.5 theta=0.7 max_iters=3";
    return o;
}

Outcome fail_closed() {
    Outcome o;
    auto gen = std::make_shared<testsupport::FnGenerator>(
        [](const std::string&) { return testsupport::completion("yes", {"a", "b"}); });
    auto ver = std::make_shared<testsupport::FnVerifier>([](auto, auto) -> NliJudgement {
        throw BackendError("verifier unavailable", 503, 3);
    });
    const PipelineResult r =
        testsupport::make_pipeline(gen, ver).run({"fc", "Is this supported?", TaskKind::binary, {}});
    o.require(r.iterations.size() == 3, "iteration count");
    for (const auto& it : r.iterations) {
        o.require(it.support_score == 0.0, "non-zero S");
        for (const auto& v : it.verdicts) {
            o.require(!v.supported && v.error.has_value(), "verdict not fail-closed");
        }
    }
    o.require(!r.accepted && r.termination == Termination::cap_reached, "result not cap_reached");
    if (o.pass) o.detail = "S=0 on 3 iterations, cap_reached";
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"rrf oracle equivalence", rrf_oracle},
        {"bm25 oracle equivalence", bm25_oracle},
        {"dense oracle equivalence", dense_oracle},
        {"loop semantics vs hand traces", loop_semantics},
        {"support score arithmetic", support_arithmetic},
        {"pubmedqa maybe filter", pubmedqa_filter},
        {"metrics fixture", metrics},
        {"end-to-end determinism", determinism},
        {"defaults audit", defaults_audit},
        {"fail-closed verification", fail_closed},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome outcome;
        try {
            outcome = criteria[i].second();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        failures += outcome.pass ? 0 : 1;
        std::cout << (outcome.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first
                  << " (" << outcome.detail << ")\n";
    }
    std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed\n";
    return failures == 0 ? 0 : 1;
}
