#include "agrivqa/captioner.hpp"

#include <regex>

#include "agrivqa/errors.hpp"
#include "agrivqa/util.hpp"

namespace agrivqa {

LeakageLexicon load_lexicon(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw config_error("MissingLexicon", "lexicon file not found: " + path.string());
    }
    LeakageLexicon lexicon;
    bool diseases = false;
    for (const auto& raw : read_lines(path)) {
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line == "#[crops]") diseases = false;
            if (line == "#[diseases]") diseases = true;
            continue;
        }
        const std::string term = to_lower(line);
        (diseases ? lexicon.disease_terms : lexicon.crop_terms).insert(term);
    }
    return lexicon;
}

LeakageResult leakage_check(const std::string& caption_text, const LeakageLexicon& lexicon,
                            const std::string& crop_label, const std::string& disease_label) {
    const auto text_tokens = word_tokens(caption_text);
    LeakageResult result;
    auto scan = [&](const std::string& term) {
        if (term.empty()) return;
        if (contains_phrase(text_tokens, word_tokens(term))) {
            for (const auto& existing : result.flagged_terms) {
                if (existing == term) return;
            }
            result.flagged_terms.push_back(term);
        }
    };
    for (const auto& term : lexicon.crop_terms) scan(term);
    for (const auto& term : lexicon.disease_terms) scan(term);
    scan(to_lower(trim(crop_label)));
    scan(to_lower(trim(disease_label)));
    result.passed = result.flagged_terms.empty();
    return result;
}

void to_json(nlohmann::json& j, const CaptionTraceEntry& e) {
    j = nlohmann::json{{"caption", e.caption},
                       {"judgment", e.judgment},
                       {"leakage_flags", e.leakage_flags},
                       {"leakage_regenerated", e.leakage_regenerated}};
}
void from_json(const nlohmann::json& j, CaptionTraceEntry& e) {
    j.at("caption").get_to(e.caption);
    j.at("judgment").get_to(e.judgment);
    j.at("leakage_flags").get_to(e.leakage_flags);
    j.at("leakage_regenerated").get_to(e.leakage_regenerated);
}
void to_json(nlohmann::json& j, const CaptionTrace& t) {
    j = nlohmann::json{{"entries", t.entries}, {"final_index", t.final_index}};
}
void from_json(const nlohmann::json& j, CaptionTrace& t) {
    j.at("entries").get_to(t.entries);
    j.at("final_index").get_to(t.final_index);
}

namespace {

std::optional<Score> find_score(const std::string& text, const std::string& label) {
    const std::regex pattern("(?:^|[^a-zA-Z])" + label + R"(\s*[:=]\s*([0-9]+(?:\.[0-9]+)?))",
                             std::regex::icase);
    std::smatch match;
    if (!std::regex_search(text, match, pattern)) return std::nullopt;
    auto parsed = Score::parse(match[1].str());
    if (!parsed) return std::nullopt;
    return parsed->clamp(Score::from_tenths(0), Score::from_tenths(100));
}

std::optional<Score> find_out_of_ten(const std::string& text) {
    const std::regex pattern(R"(([0-9]+(?:\.[0-9]+)?)\s*/\s*10)");
    std::smatch match;
    if (!std::regex_search(text, match, pattern)) return std::nullopt;
    auto parsed = Score::parse(match[1].str());
    if (!parsed) return std::nullopt;
    return parsed->clamp(Score::from_tenths(0), Score::from_tenths(100));
}

std::string extract_refinement(const std::string& text) {
    const std::regex pattern(R"(REFINE\s*:\s*)", std::regex::icase);
    std::smatch match;
    if (std::regex_search(text, match, pattern)) {
        const auto start = static_cast<std::size_t>(match.position(0) + match.length(0));
        const auto end = text.find('\n', start);
        std::string instruction =
            trim(end == std::string::npos ? text.substr(start) : text.substr(start, end - start));
        if (!instruction.empty()) return instruction;
    }
    return trim(text);
}

}  // namespace

std::optional<CaptionJudgment> parse_caption_judgment(const std::string& judge_text,
                                                      Score threshold) {
    CaptionJudgment judgment;
    judgment.accuracy = find_score(judge_text, "accuracy");
    judgment.completeness = find_score(judge_text, "completeness");
    judgment.neutrality = find_score(judge_text, "neutrality");

    std::vector<Score> present;
    if (judgment.accuracy) present.push_back(*judgment.accuracy);
    if (judgment.completeness) present.push_back(*judgment.completeness);
    if (judgment.neutrality) present.push_back(*judgment.neutrality);

    if (present.size() == 3) {
        judgment.overall = Score::mean_half_up(present);
    } else if (auto overall = find_score(judge_text, "overall")) {
        judgment.overall = *overall;
    } else if (auto out_of_ten = find_out_of_ten(judge_text)) {
        judgment.overall = *out_of_ten;
    } else if (!present.empty()) {
        judgment.overall = Score::mean_half_up(present);
    } else {
        return std::nullopt;
    }
    if (judgment.overall < threshold) {
        judgment.refinement_instruction = extract_refinement(judge_text);
        if (judgment.refinement_instruction.empty()) {
            judgment.refinement_instruction = "Improve accuracy, completeness, and neutrality.";
        }
    }
    return judgment;
}

Captioner::Captioner(Gateway& gateway, const TemplateSet& templates, Score threshold,
                     int max_refinements, ModelEndpoint captioner_endpoint,
                     ModelEndpoint judge_endpoint, const LeakageLexicon* lexicon)
    : gateway_(gateway),
      templates_(templates),
      threshold_(threshold),
      max_refinements_(max_refinements),
      captioner_endpoint_(std::move(captioner_endpoint)),
      judge_endpoint_(std::move(judge_endpoint)),
      lexicon_(lexicon) {}

ChatRequest Captioner::build_caption_prompt(const ImageRecord& image,
                                            const PromptTemplate& tmpl) const {
    const std::string body = render_template(tmpl.user_template, {});
    std::vector<ChatMessage> messages;
    messages.push_back(ChatMessage::text("system", tmpl.system_text));
    messages.push_back(
        ChatMessage{"user", {TextPart{body}, ImagePart{image.image_ref}}});
    return make_chat_request(StageTag::Caption, captioner_endpoint_, std::move(messages));
}

Caption Captioner::generate_with_guard(const ImageRecord& image, const ChatRequest& request,
                                       int attempt, std::vector<std::string>& flags_out,
                                       bool& regenerated_out) {
    ChatResponse response = gateway_.complete_chat(request);
    std::string text = response.text;
    flags_out.clear();
    regenerated_out = false;
    if (lexicon_ && !lexicon_->empty()) {
        auto check = leakage_check(text, *lexicon_, image.crop_label, image.disease_label);
        if (!check.passed) {
            // One guarded regeneration with the added exclusion instruction;
            // if still flagged the caption is kept and the flag recorded.
            ChatRequest retry = request;
            retry.messages.push_back(
                ChatMessage::text("user", std::string(kLeakageRegenInstruction)));
            ChatResponse second = gateway_.complete_chat(retry);
            regenerated_out = true;
            auto recheck =
                leakage_check(second.text, *lexicon_, image.crop_label, image.disease_label);
            text = second.text;
            if (!recheck.passed) flags_out = recheck.flagged_terms;
        }
    }
    Caption caption;
    caption.text = std::move(text);
    caption.attempt = attempt;
    return caption;
}

Caption Captioner::generate_caption(const ImageRecord& image) {
    std::vector<std::string> flags;
    bool regenerated = false;
    return generate_with_guard(image, build_caption_prompt(image, templates_.caption), 0, flags,
                               regenerated);
}

CaptionJudgment Captioner::judge_caption(const Caption& caption, const ImageRecord& image) {
    if (caption.text.empty()) {
        throw internal_error("EmptyCaption", "cannot judge an empty caption");
    }
    const auto build = [&](const std::string& extra) {
        std::string body = render_template(templates_.caption_judge.user_template,
                                           {{"caption", caption.text},
                                            {"threshold", threshold_.str()}});
        if (!extra.empty()) body += "\n" + extra;
        std::vector<ChatMessage> messages;
        messages.push_back(ChatMessage::text("system", templates_.caption_judge.system_text));
        messages.push_back(ChatMessage{"user", {TextPart{body}, ImagePart{image.image_ref}}});
        return make_chat_request(StageTag::CaptionJudge, judge_endpoint_, std::move(messages));
    };

    ChatResponse response = gateway_.complete_chat(build(""));
    auto judgment = parse_caption_judgment(response.text, threshold_);
    if (!judgment) {
        ChatResponse retry = gateway_.complete_chat(
            build("Your previous reply was unreadable. Use exactly the line format "
                  "'accuracy: N', 'completeness: N', 'neutrality: N', 'overall: N'."));
        judgment = parse_caption_judgment(retry.text, threshold_);
    }
    if (!judgment) {
        throw endpoint_error("JudgeParseError",
                             "no scores extractable from caption judge response");
    }
    return *judgment;
}

void Captioner::finalize(CaptionTrace& trace) const {
    int best = 0;
    for (int i = 1; i < static_cast<int>(trace.entries.size()); ++i) {
        // Strict > keeps the earliest attempt on ties.
        if (trace.entries[i].judgment.overall > trace.entries[best].judgment.overall) best = i;
    }
    trace.final_index = best;
}

CaptionTrace Captioner::refine_caption(const ImageRecord& image, CaptionTrace trace) {
    if (trace.entries.empty()) {
        throw internal_error("EmptyTrace", "refine_caption needs an initial judged caption");
    }
    while (true) {
        const CaptionTraceEntry& last = trace.entries.back();
        const int attempts = last.caption.attempt;
        if (last.judgment.overall >= threshold_ || attempts >= max_refinements_) break;

        const std::string instruction = last.judgment.refinement_instruction;
        const std::string body =
            render_template(templates_.caption_refine.user_template,
                            {{"prior_caption", last.caption.text},
                             {"refinement_instruction", instruction}});
        std::vector<ChatMessage> messages;
        messages.push_back(ChatMessage::text("system", templates_.caption_refine.system_text));
        messages.push_back(ChatMessage{"user", {TextPart{body}, ImagePart{image.image_ref}}});
        ChatRequest request =
            make_chat_request(StageTag::Caption, captioner_endpoint_, std::move(messages));

        CaptionTraceEntry entry;
        entry.caption = generate_with_guard(image, request, attempts + 1, entry.leakage_flags,
                                            entry.leakage_regenerated);
        entry.caption.refinement_note = instruction;
        entry.judgment = judge_caption(entry.caption, image);
        entry.caption.judge_score = entry.judgment.overall;
        entry.caption.converged = entry.judgment.overall >= threshold_;
        trace.entries.push_back(std::move(entry));
    }
    finalize(trace);
    return trace;
}

void Captioner::produce_into(const ImageRecord& image, CaptionTrace& out) {
    CaptionTraceEntry first;
    first.caption = generate_with_guard(image, build_caption_prompt(image, templates_.caption), 0,
                                        first.leakage_flags, first.leakage_regenerated);
    out.entries.push_back(first);
    finalize(out);

    CaptionTraceEntry& entry = out.entries.back();
    entry.judgment = judge_caption(entry.caption, image);
    entry.caption.judge_score = entry.judgment.overall;
    entry.caption.converged = entry.judgment.overall >= threshold_;

    out = refine_caption(image, std::move(out));
}

CaptionTrace Captioner::produce(const ImageRecord& image) {
    CaptionTrace trace;
    produce_into(image, trace);
    return trace;
}

}  // namespace agrivqa
