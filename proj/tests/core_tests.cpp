#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "agrivqa/config.hpp"
#include "agrivqa/domain.hpp"
#include "agrivqa/errors.hpp"
#include "agrivqa/hash.hpp"
#include "agrivqa/prompts.hpp"
#include "agrivqa/score.hpp"
#include "agrivqa/util.hpp"
#include "test_support.hpp"

using namespace agrivqa;

namespace {

// Independent rounding oracle: integer div/mod instead of the (2n+d)/(2d)
// closed form used by the implementation.
std::int64_t round_half_up_oracle(std::int64_t numerator, std::int64_t denominator) {
    const std::int64_t q = numerator / denominator;
    const std::int64_t r = numerator % denominator;
    return q + (2 * r >= denominator ? 1 : 0);
}

Score tenths(std::int64_t t) { return Score::from_tenths(t); }

}  // namespace

TEST_CASE("score parses judge-style values") {
    CHECK(Score::parse("8")->tenths() == 80);
    CHECK(Score::parse("8.5")->tenths() == 85);
    CHECK(Score::parse(" 7.0 ")->tenths() == 70);
    CHECK(Score::parse("8.55")->tenths() == 86);  // half-up on the hundredth
    CHECK(Score::parse("8.54")->tenths() == 85);
    CHECK(Score::parse("10")->tenths() == 100);
    CHECK(!Score::parse(""));
    CHECK(!Score::parse("abc"));
    CHECK(!Score::parse("8."));
    CHECK(!Score::parse("8.5x"));
}

TEST_CASE("score renders one decimal") {
    CHECK(tenths(80).str() == "8.0");
    CHECK(tenths(85).str() == "8.5");
    CHECK(tenths(100).str() == "10.0");
    CHECK(tenths(0).str() == "0.0");
}

TEST_CASE("mean of {8,9,7,10,6} is exactly 8.0") {
    const Score scores[] = {tenths(80), tenths(90), tenths(70), tenths(100), tenths(60)};
    CHECK(Score::mean_half_up(scores) == tenths(80));
}

TEST_CASE("mean of all tens is exactly 10.0") {
    const Score scores[] = {tenths(100), tenths(100), tenths(100), tenths(100), tenths(100)};
    CHECK(Score::mean_half_up(scores) == tenths(100));
}

TEST_CASE("mean matches exact rational oracle over random vectors") {
    SplitMix64 rng(42);
    for (int iteration = 0; iteration < 5000; ++iteration) {
        const int n = 1 + static_cast<int>(rng.bounded(7));
        std::vector<Score> scores;
        std::int64_t sum = 0;
        for (int i = 0; i < n; ++i) {
            const auto t = static_cast<std::int64_t>(rng.bounded(101));
            scores.push_back(tenths(t));
            sum += t;
        }
        const Score mean = Score::mean_half_up(scores);
        CHECK(mean.tenths() == round_half_up_oracle(sum, n));
    }
}

TEST_CASE("percent formatting is half-up at two decimals") {
    CHECK(format_percent(13, 20) == "65.00");
    CHECK(format_percent(0, 20) == "0.00");
    CHECK(format_percent(20, 20) == "100.00");
    CHECK(format_percent(7, 12) == "58.33");
    CHECK(format_percent(1, 3) == "33.33");
    CHECK(format_percent(2, 3) == "66.67");
    CHECK(format_percent(1, 8) == "12.50");

    SplitMix64 rng(7);
    for (int iteration = 0; iteration < 2000; ++iteration) {
        const auto total = 1 + static_cast<std::int64_t>(rng.bounded(500));
        const auto hits = static_cast<std::int64_t>(rng.bounded(total + 1));
        const auto hundredths = round_half_up_oracle(10000 * hits, total);
        std::string frac = std::to_string(hundredths % 100);
        if (frac.size() < 2) frac = "0" + frac;
        CHECK(format_percent(hits, total) == std::to_string(hundredths / 100) + "." + frac);
    }
}

TEST_CASE("content_hash: canonical empty digest and determinism") {
    CHECK(content_hash("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(content_hash("abc") == content_hash("abc"));
    CHECK(content_hash("abc") !=
          content_hash("abd"));
    CHECK(content_hash("abc").size() == 64);
}

TEST_CASE("content_hash: collision spot-check over a generated corpus") {
    std::set<std::string> digests;
    for (int i = 0; i < 2000; ++i) {
        digests.insert(content_hash("prompt body variant " + std::to_string(i)));
    }
    CHECK(digests.size() == 2000);
}

TEST_CASE("content_hash_parts frames part boundaries") {
    CHECK(content_hash_parts({"ab", "c"}) != content_hash_parts({"a", "bc"}));
    CHECK(content_hash_parts({"ab", "c"}) == content_hash_parts({"ab", "c"}));
}

TEST_CASE("base64 known vectors and round trip") {
    CHECK(base64_encode("") == "");
    CHECK(base64_encode("f") == "Zg==");
    CHECK(base64_encode("fo") == "Zm8=");
    CHECK(base64_encode("foo") == "Zm9v");
    CHECK(base64_encode("foob") == "Zm9vYg==");
    SplitMix64 rng(99);
    for (int iteration = 0; iteration < 300; ++iteration) {
        std::string bytes;
        const auto len = rng.bounded(200);
        for (std::uint64_t i = 0; i < len; ++i) {
            bytes.push_back(static_cast<char>(rng.bounded(256)));
        }
        auto decoded = base64_decode(base64_encode(bytes));
        REQUIRE(decoded.has_value());
        CHECK(*decoded == bytes);
    }
    CHECK(!base64_decode("Zg="));
    CHECK(!base64_decode("====").has_value());
}

TEST_CASE("word tokens and contiguous phrase matching") {
    const auto tokens = word_tokens("This tomato-leaf shows Early Blight symptoms!");
    CHECK(tokens == std::vector<std::string>{"this", "tomato", "leaf", "shows", "early",
                                             "blight", "symptoms"});
    CHECK(contains_phrase(tokens, word_tokens("early blight")));
    CHECK(contains_phrase(tokens, word_tokens("Tomato")));
    CHECK(!contains_phrase(tokens, word_tokens("blight early")));
    CHECK(!contains_phrase(tokens, word_tokens("corn")));
    CHECK(!contains_phrase(word_tokens("the cornered animal"), word_tokens("corn")));
}

TEST_CASE("seeded shuffle is deterministic and a permutation") {
    const auto a = shuffled_indices(10, 1234);
    const auto b = shuffled_indices(10, 1234);
    CHECK(a == b);
    const auto c = shuffled_indices(10, 1235);
    CHECK(a != c);
    std::set<std::size_t> seen(a.begin(), a.end());
    CHECK(seen.size() == 10);
}

namespace {

std::string random_text(SplitMix64& rng) {
    const char* words[] = {"leaf", "lesion", "ring", "spot", "halo", "stem", "blade", "margin"};
    std::string text;
    const auto n = 1 + rng.bounded(6);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (i) text += " ";
        text += words[rng.bounded(8)];
    }
    return text;
}

template <typename T>
void check_round_trip(const T& value) {
    nlohmann::json j = value;
    const T back = j.get<T>();
    CHECK(back == value);
}

}  // namespace

TEST_CASE("domain types survive a JSON round trip") {
    SplitMix64 rng(2024);
    for (int iteration = 0; iteration < 200; ++iteration) {
        ImageRecord record{random_text(rng), content_hash(random_text(rng)), "tomato",
                           "early blight", random_text(rng),
                           (rng.next() & 1) ? TaskKind::DiseaseDiagnosis : TaskKind::KnowledgeQA};
        check_round_trip(record);

        Caption caption;
        caption.text = random_text(rng);
        caption.attempt = static_cast<int>(rng.bounded(4));
        if (rng.next() & 1) caption.judge_score = Score::from_tenths(rng.bounded(101));
        if (caption.attempt > 0) caption.refinement_note = random_text(rng);
        caption.converged = (rng.next() & 1) != 0;
        check_round_trip(caption);

        CaptionJudgment judgment;
        if (rng.next() & 1) judgment.accuracy = Score::from_tenths(rng.bounded(101));
        if (rng.next() & 1) judgment.completeness = Score::from_tenths(rng.bounded(101));
        judgment.overall = Score::from_tenths(rng.bounded(101));
        if (judgment.overall < Score::from_tenths(80)) {
            judgment.refinement_instruction = random_text(rng);
        }
        check_round_trip(judgment);

        AnswerPair pair{random_text(rng), random_text(rng), content_hash("p"),
                        (rng.next() & 1) != 0};
        check_round_trip(pair);

        CandidateScores scores;
        for (int c = 0; c < 5; ++c) {
            scores.criterion_scores.push_back(Score::from_tenths(rng.bounded(101)));
        }
        scores.aggregate = Score::mean_half_up(scores.criterion_scores);
        scores.critique = random_text(rng);
        check_round_trip(scores);

        AnswerJudgment answer_judgment;
        answer_judgment.per_answer = {scores, scores};
        answer_judgment.selected_index = 1 + static_cast<int>(rng.bounded(2));
        answer_judgment.report = random_text(rng);
        answer_judgment.reference_used = (rng.next() & 1) != 0;
        answer_judgment.presentation_order = (rng.next() & 1) ? std::array<int, 2>{1, 2}
                                                              : std::array<int, 2>{2, 1};
        check_round_trip(answer_judgment);

        Exemplar exemplar{content_hash("i"), random_text(rng), random_text(rng),
                          random_text(rng), random_text(rng)};
        check_round_trip(exemplar);

        PromptTemplate tmpl{TaskKind::KnowledgeQA, "t", random_text(rng), random_text(rng),
                            static_cast<int>(rng.bounded(6))};
        check_round_trip(tmpl);
    }
    check_round_trip(diagnosis_rubric());
    check_round_trip(knowledge_rubric());
}

TEST_CASE("built-in rubrics carry exactly five criteria") {
    CHECK(diagnosis_rubric().criteria.size() == 5);
    CHECK(knowledge_rubric().criteria.size() == 5);
    CHECK(diagnosis_rubric().criteria ==
          std::vector<std::string>{"plant accuracy", "disease accuracy", "symptom accuracy",
                                   "format adherence", "completeness"});
    CHECK(knowledge_rubric().criteria ==
          std::vector<std::string>{"accuracy", "completeness", "specificity", "practicality",
                                   "scientific validity"});
    CHECK(diagnosis_rubric().definitions.size() == 5);
    CHECK(knowledge_rubric().definitions.size() == 5);
}

namespace {

nlohmann::json minimal_config_doc(const std::string& script_path) {
    nlohmann::json endpoint{{"kind", "mock"},
                            {"model_name", "mock-model"},
                            {"script_path", script_path}};
    return nlohmann::json{{"caption_threshold", 8.0},
                          {"captioner", endpoint},
                          {"caption_judge", endpoint},
                          {"vqa", endpoint},
                          {"answer_judge", endpoint}};
}

}  // namespace

TEST_CASE("validate_config accepts the default mock setup") {
    testsupport::TempDir tmp("config");
    tmp.write("script.json", R"({"rules":[{"stage":"caption","responses":["x"]}]})");
    PipelineConfig cfg = parse_config(minimal_config_doc("script.json"), tmp.path());
    CHECK(validate_config(cfg).empty());
    CHECK(cfg.caption_threshold == Score::from_tenths(80));
    CHECK(cfg.max_refinements == 3);
    CHECK(cfg.captioner.temperature == doctest::Approx(0.5));
    CHECK(cfg.captioner.max_tokens == 400);
    CHECK(cfg.captioner.top_p == doctest::Approx(0.8));
    CHECK(cfg.captioner.max_retries == 3);
    CHECK(cfg.captioner.timeout_seconds == 30);
    CHECK(cfg.captioner.reasoning_effort == "medium");
    CHECK(cfg.captioner.verbosity == "low");
}

TEST_CASE("validate_config rejects out-of-range fields with field paths") {
    testsupport::TempDir tmp("config");
    tmp.write("script.json", R"({"rules":[{"stage":"caption","responses":["x"]}]})");

    auto doc = minimal_config_doc("script.json");
    doc["caption_threshold"] = 0;
    PipelineConfig cfg = parse_config(doc, tmp.path());
    auto errors = validate_config(cfg);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0] == "caption_threshold out of range (0,10]");

    doc = minimal_config_doc("script.json");
    doc["shot_count"] = 6;
    doc["exemplar_pool_path"] = "script.json";
    cfg = parse_config(doc, tmp.path());
    errors = validate_config(cfg);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0] == "shot_count exceeds 5");

    doc = minimal_config_doc("script.json");
    doc["max_refinements"] = 0;
    doc["concurrency_limit"] = 0;
    cfg = parse_config(doc, tmp.path());
    errors = validate_config(cfg);
    CHECK(errors.size() == 2);  // both violations reported, no partial acceptance
}

TEST_CASE("parse_config rejects unknown fields and remote endpoints need urls") {
    testsupport::TempDir tmp("config");
    auto doc = minimal_config_doc("script.json");
    doc["caption_treshold"] = 1;  // misspelled
    CHECK_THROWS_AS(parse_config(doc, tmp.path()), Error);

    tmp.write("script.json", R"({"rules":[{"stage":"caption","responses":["x"]}]})");
    doc = minimal_config_doc("script.json");
    doc["vqa"] = {{"kind", "remote"}, {"model_name", "m"}};
    PipelineConfig cfg = parse_config(doc, tmp.path());
    const auto errors = validate_config(cfg);
    bool base_url = false, credential = false;
    for (const auto& e : errors) {
        if (e.find("vqa.base_url") != std::string::npos) base_url = true;
        if (e.find("vqa.credential_env") != std::string::npos) credential = true;
    }
    CHECK(base_url);
    CHECK(credential);
}

TEST_CASE("config digest is stable and sensitive") {
    testsupport::TempDir tmp("config");
    tmp.write("script.json", R"({"rules":[{"stage":"caption","responses":["x"]}]})");
    PipelineConfig a = parse_config(minimal_config_doc("script.json"), tmp.path());
    PipelineConfig b = parse_config(minimal_config_doc("script.json"), tmp.path());
    CHECK(a.digest() == b.digest());
    b.shot_count = 3;
    CHECK(a.digest() != b.digest());
}

TEST_CASE("template rendering binds placeholders and rejects unbound ones") {
    CHECK(render_template("Q: {question}!", {{"question", "what"}}) == "Q: what!");
    CHECK(render_template("no placeholders { } {Q}", {}) == "no placeholders { } {Q}");
    CHECK_THROWS_WITH_AS(render_template("x {labels} y", {{"caption", "c"}}),
                         "[TemplateRenderError] unbound placeholder {labels}", Error);
    CHECK(render_template("{a}{b}", {{"a", "1"}, {"b", "2"}}) == "12");
}

TEST_CASE("default templates never mention ground-truth labels") {
    const TemplateSet templates = default_templates();
    for (const PromptTemplate* tmpl :
         {&templates.caption, &templates.caption_refine}) {
        CHECK(tmpl->user_template.find("{labels}") == std::string::npos);
        CHECK(tmpl->user_template.find("crop species or disease") != std::string::npos);
    }
    CHECK(templates.diagnosis.user_template.find("ANSWER 1") != std::string::npos);
    CHECK(templates.diagnosis.user_template.find("ANSWER 2") != std::string::npos);
}
