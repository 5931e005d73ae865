#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>

#include "agrivqa/captioner.hpp"
#include "agrivqa/errors.hpp"
#include "agrivqa/util.hpp"
#include "test_support.hpp"

using namespace agrivqa;

namespace {

ModelEndpoint mock_endpoint(const std::string& name) {
    ModelEndpoint e;
    e.kind = EndpointKind::Mock;
    e.model_name = name;
    e.script_path = "unused";
    return e;
}

ImageRecord fixture_record() {
    ImageRecord record;
    record.id = "img-1";
    record.image_ref = "0123456789abcdef";
    record.crop_label = "tomato";
    record.disease_label = "early blight";
    record.query = "what is wrong?";
    return record;
}

/// Drives the captioner from two scripted queues: caption texts and judge
/// replies, counting generation calls.
struct ScriptedLoop {
    std::vector<std::string> captions;
    std::vector<std::string> judge_replies;
    std::atomic<int> caption_calls{0};
    std::atomic<int> judge_calls{0};
    std::shared_ptr<Gateway> gateway;

    ScriptedLoop() {
        auto backend = std::make_shared<LambdaBackend>([this](const ChatRequest& req) {
            if (req.stage == StageTag::Caption) {
                const int i = caption_calls.fetch_add(1);
                return captions.at(std::min<std::size_t>(i, captions.size() - 1));
            }
            const int i = judge_calls.fetch_add(1);
            return judge_replies.at(std::min<std::size_t>(i, judge_replies.size() - 1));
        });
        gateway = std::make_shared<Gateway>(backend, 1);
    }
};

std::string judge_reply(const std::string& overall, bool with_refine = true) {
    std::string text = "accuracy: " + overall + "\ncompleteness: " + overall +
                       "\nneutrality: " + overall + "\noverall: " + overall;
    if (with_refine) text += "\nREFINE: add lesion distribution and severity.";
    return text;
}

}  // namespace

TEST_CASE("caption judge parsing: breakdown lines give the mean") {
    auto j = parse_caption_judgment("accuracy: 9, completeness: 8, neutrality: 7",
                                    Score::from_tenths(80));
    REQUIRE(j.has_value());
    CHECK(j->overall == Score::from_tenths(80));
    CHECK(*j->accuracy == Score::from_tenths(90));
    CHECK(*j->neutrality == Score::from_tenths(70));
    CHECK(j->refinement_instruction.empty());  // 8.0 >= threshold 8.0
}

TEST_CASE("caption judge parsing: bare overall like 8.5/10") {
    auto j = parse_caption_judgment("Solid description, 8.5/10 overall quality.",
                                    Score::from_tenths(80));
    REQUIRE(j.has_value());
    CHECK(j->overall == Score::from_tenths(85));
    CHECK(!j->accuracy.has_value());
    CHECK(!j->completeness.has_value());
}

TEST_CASE("caption judge parsing: below threshold extracts REFINE instruction") {
    auto j = parse_caption_judgment(
        "accuracy: 6\ncompleteness: 7\nneutrality: 7\nREFINE: describe the lesion margins.",
        Score::from_tenths(80));
    REQUIRE(j.has_value());
    CHECK(j->overall == Score::from_tenths(67));
    CHECK(j->refinement_instruction == "describe the lesion margins.");
}

TEST_CASE("caption judge parsing: below threshold without REFINE keeps the critique") {
    auto j = parse_caption_judgment("overall: 5\nthe description misses the stem damage",
                                    Score::from_tenths(80));
    REQUIRE(j.has_value());
    CHECK(!j->refinement_instruction.empty());
}

TEST_CASE("caption judge parsing: garbage gives nullopt") {
    CHECK(!parse_caption_judgment("no numbers here at all", Score::from_tenths(80)));
    CHECK(!parse_caption_judgment("", Score::from_tenths(80)));
}

TEST_CASE("judge_caption re-prompts once then fails with JudgeParseError") {
    ScriptedLoop loop;
    loop.captions = {"a caption"};
    loop.judge_replies = {"garbage", "more garbage"};
    TemplateSet templates = default_templates();
    Captioner captioner(*loop.gateway, templates, Score::from_tenths(80), 3,
                        mock_endpoint("cap"), mock_endpoint("judge"));
    Caption caption;
    caption.text = "a caption";
    try {
        captioner.judge_caption(caption, fixture_record());
        FAIL("expected JudgeParseError");
    } catch (const Error& e) {
        CHECK(e.code() == "JudgeParseError");
    }
    CHECK(loop.judge_calls.load() == 2);
}

TEST_CASE("generate_caption returns attempt 0 with the scripted text") {
    ScriptedLoop loop;
    loop.captions = {"ovate leaves, concentric necrotic rings, yellow halos"};
    TemplateSet templates = default_templates();
    Captioner captioner(*loop.gateway, templates, Score::from_tenths(80), 3,
                        mock_endpoint("cap"), mock_endpoint("judge"));
    const Caption caption = captioner.generate_caption(fixture_record());
    CHECK(caption.text == "ovate leaves, concentric necrotic rings, yellow halos");
    CHECK(caption.attempt == 0);
    CHECK(!caption.judge_score.has_value());
}

TEST_CASE("build_caption_prompt carries exactly one image and no labels") {
    ScriptedLoop loop;
    TemplateSet templates = default_templates();
    Captioner captioner(*loop.gateway, templates, Score::from_tenths(80), 3,
                        mock_endpoint("cap"), mock_endpoint("judge"));
    const ImageRecord record = fixture_record();
    const ChatRequest request = captioner.build_caption_prompt(record, templates.caption);
    CHECK(request.image_part_count() == 1);
    CHECK(request.stage == StageTag::Caption);
    for (const auto& message : request.messages) {
        for (const auto& part : message.parts) {
            if (const auto* text = std::get_if<TextPart>(&part)) {
                CHECK(text->text.find("tomato") == std::string::npos);
                CHECK(text->text.find("early blight") == std::string::npos);
            }
        }
    }

    PromptTemplate bad = templates.caption;
    bad.user_template += " {labels}";
    CHECK_THROWS_AS(captioner.build_caption_prompt(record, bad), Error);
}

TEST_CASE("boundary: first judgment exactly at the threshold stops refinement") {
    ScriptedLoop loop;
    loop.captions = {"caption zero"};
    loop.judge_replies = {judge_reply("8", false)};
    TemplateSet templates = default_templates();
    Captioner captioner(*loop.gateway, templates, Score::from_tenths(80), 3,
                        mock_endpoint("cap"), mock_endpoint("judge"));
    const CaptionTrace trace = captioner.produce(fixture_record());
    CHECK(trace.entries.size() == 1);
    CHECK(loop.caption_calls.load() == 1);
    CHECK(trace.final_caption().text == "caption zero");
    CHECK(trace.final_caption().converged);
    CHECK(trace.final_score() == Score::from_tenths(80));
}

TEST_CASE("one refinement when scores go 7.0 then 8.5") {
    ScriptedLoop loop;
    loop.captions = {"caption zero", "caption one"};
    loop.judge_replies = {judge_reply("7"), judge_reply("8.5", false)};
    TemplateSet templates = default_templates();
    Captioner captioner(*loop.gateway, templates, Score::from_tenths(80), 3,
                        mock_endpoint("cap"), mock_endpoint("judge"));
    const CaptionTrace trace = captioner.produce(fixture_record());
    REQUIRE(trace.entries.size() == 2);
    CHECK(trace.final_index == 1);
    CHECK(trace.final_caption().text == "caption one");
    CHECK(trace.final_caption().converged);
    CHECK(trace.final_caption().attempt == 1);
    REQUIRE(trace.final_caption().refinement_note.has_value());
    CHECK(*trace.final_caption().refinement_note ==
          "add lesion distribution and severity.");
    CHECK(trace.entries[0].caption.converged == false);
}

TEST_CASE("stubborn 5,5,5,5 run caps at max_refinements and picks the earliest max") {
    ScriptedLoop loop;
    loop.captions = {"c0", "c1", "c2", "c3"};
    loop.judge_replies = {judge_reply("5"), judge_reply("5"), judge_reply("5"),
                          judge_reply("5")};
    TemplateSet templates = default_templates();
    Captioner captioner(*loop.gateway, templates, Score::from_tenths(80), 3,
                        mock_endpoint("cap"), mock_endpoint("judge"));
    const CaptionTrace trace = captioner.produce(fixture_record());
    CHECK(trace.entries.size() == 4);  // max_refinements + 1
    CHECK(loop.caption_calls.load() == 4);
    CHECK(trace.final_index == 0);  // tie on score -> earliest attempt
    CHECK(!trace.final_caption().converged);
}

TEST_CASE("property: arbitrary score sequences never exceed the generation cap "
          "and select the max") {
    SplitMix64 rng(0xfeedface);
    TemplateSet templates = default_templates();
    for (int iteration = 0; iteration < 1200; ++iteration) {
        const int max_refinements = 1 + static_cast<int>(rng.bounded(4));
        ScriptedLoop loop;
        std::vector<int> scores_tenths;
        for (int i = 0; i <= max_refinements + 2; ++i) {
            const int tenths = static_cast<int>(rng.bounded(101));
            scores_tenths.push_back(tenths);
            loop.captions.push_back("caption " + std::to_string(i));
            loop.judge_replies.push_back(judge_reply(Score::from_tenths(tenths).str()));
        }
        Captioner captioner(*loop.gateway, templates, Score::from_tenths(80), max_refinements,
                            mock_endpoint("cap"), mock_endpoint("judge"));
        const CaptionTrace trace = captioner.produce(fixture_record());

        CHECK(loop.caption_calls.load() <= max_refinements + 1);
        CHECK(trace.entries.size() <= static_cast<std::size_t>(max_refinements) + 1);

        Score best = Score::from_tenths(-1);
        for (const auto& entry : trace.entries) {
            if (entry.judgment.overall > best) best = entry.judgment.overall;
        }
        CHECK(trace.final_score() == best);
        // Threshold semantics: converged iff the final score clears tau.
        CHECK(trace.final_caption().converged == (best >= Score::from_tenths(80)));
    }
}

TEST_CASE("lexicon loading: sections, comments, normalization") {
    testsupport::TempDir tmp("lexicon");
    const auto path = tmp.write("lexicon.txt",
                                "# crops first\n"
                                "Tomato\n"
                                "  Corn  \n"
                                "#[diseases]\n"
                                "Early Blight\n"
                                "# trailing comment\n"
                                "rust\n");
    const LeakageLexicon lexicon = load_lexicon(path);
    CHECK(lexicon.crop_terms == std::set<std::string>{"tomato", "corn"});
    CHECK(lexicon.disease_terms == std::set<std::string>{"early blight", "rust"});
    CHECK_THROWS_AS(load_lexicon(tmp.file("missing.txt")), Error);
}

TEST_CASE("leakage_check flags whole-word hits and nothing else") {
    LeakageLexicon lexicon;
    lexicon.crop_terms = {"tomato"};
    lexicon.disease_terms = {"early blight"};

    auto flagged = leakage_check("tomato leaf with early blight lesions", lexicon, "", "");
    CHECK(!flagged.passed);
    CHECK(flagged.flagged_terms == std::vector<std::string>{"tomato", "early blight"});

    CHECK(leakage_check("broad ovate leaf with necrotic rings", lexicon, "", "").passed);
    CHECK(leakage_check("tomatillo-like habit", lexicon, "", "").passed);
    CHECK(!leakage_check("Tomato-like habit", lexicon, "", "").passed);  // hyphen splits words
    CHECK(leakage_check("blighted margins", lexicon, "", "").passed);
    CHECK(!leakage_check("signs of Early  Blight.", lexicon, "", "").passed);

    // The record's own labels count even when absent from the lexicon.
    auto label_hit = leakage_check("the cucumber shows spots", lexicon, "cucumber", "mosaic");
    CHECK(!label_hit.passed);
    CHECK(label_hit.flagged_terms == std::vector<std::string>{"cucumber"});
}

TEST_CASE("flagged caption triggers one guarded regeneration") {
    LeakageLexicon lexicon;
    lexicon.crop_terms = {"tomato"};

    ScriptedLoop loop;
    loop.captions = {"this tomato leaf is spotted", "a broad leaf with dark spots"};
    loop.judge_replies = {judge_reply("9", false)};
    TemplateSet templates = default_templates();
    Captioner captioner(*loop.gateway, templates, Score::from_tenths(80), 3,
                        mock_endpoint("cap"), mock_endpoint("judge"), &lexicon);
    const CaptionTrace trace = captioner.produce(fixture_record());
    CHECK(loop.caption_calls.load() == 2);  // initial + one guard regeneration
    REQUIRE(trace.entries.size() == 1);
    CHECK(trace.entries[0].leakage_regenerated);
    CHECK(trace.entries[0].leakage_flags.empty());  // second text is clean
    CHECK(trace.final_caption().text == "a broad leaf with dark spots");
}

TEST_CASE("still-flagged caption is kept with the flag recorded") {
    LeakageLexicon lexicon;
    lexicon.crop_terms = {"tomato"};

    ScriptedLoop loop;
    loop.captions = {"tomato leaf", "still a tomato leaf"};
    loop.judge_replies = {judge_reply("9", false)};
    TemplateSet templates = default_templates();
    Captioner captioner(*loop.gateway, templates, Score::from_tenths(80), 3,
                        mock_endpoint("cap"), mock_endpoint("judge"), &lexicon);
    const CaptionTrace trace = captioner.produce(fixture_record());
    REQUIRE(trace.entries.size() == 1);
    CHECK(trace.entries[0].leakage_regenerated);
    CHECK(trace.entries[0].leakage_flags == std::vector<std::string>{"tomato"});
    CHECK(trace.final_caption().text == "still a tomato leaf");
}

TEST_CASE("caption trace JSON round trip") {
    CaptionTrace trace;
    CaptionTraceEntry entry;
    entry.caption.text = "c";
    entry.caption.judge_score = Score::from_tenths(85);
    entry.caption.converged = true;
    entry.judgment.overall = Score::from_tenths(85);
    entry.leakage_flags = {"tomato"};
    entry.leakage_regenerated = true;
    trace.entries.push_back(entry);
    trace.final_index = 0;
    nlohmann::json j = trace;
    CHECK(j.get<CaptionTrace>() == trace);
}
