#include "agrivqa/judge.hpp"

#include <cctype>
#include <regex>

#include "agrivqa/errors.hpp"
#include "agrivqa/util.hpp"

namespace agrivqa {

namespace {

std::string criteria_block(const Rubric& rubric) {
    std::string block;
    for (std::size_t i = 0; i < rubric.criteria.size(); ++i) {
        block += "- " + rubric.criteria[i] + ": " + rubric.definitions[i] + "\n";
    }
    return block;
}

std::optional<Score> find_labeled_score(const std::string& text, const std::string& label,
                                        const std::string& criterion, int scale_max) {
    // Accepts "A | plant accuracy: 8" and "CANDIDATE A | plant accuracy: 8".
    std::string criterion_pattern;
    for (char c : criterion) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            criterion_pattern.push_back(c);
        } else {
            criterion_pattern += R"([\s/_-]+)";
        }
    }
    const std::regex pattern("(?:^|\\n)\\s*(?:CANDIDATE\\s+)?" + label + R"(\s*\|\s*)" +
                                 criterion_pattern + R"(\s*[:=]\s*([0-9]+(?:\.[0-9]+)?))",
                             std::regex::icase);
    std::smatch match;
    if (!std::regex_search(text, match, pattern)) return std::nullopt;
    auto parsed = Score::parse(match[1].str());
    if (!parsed) return std::nullopt;
    return parsed->clamp(Score::from_tenths(0), Score::from_tenths(10 * scale_max));
}

std::string extract_critique(const std::string& text, const std::string& label) {
    const std::regex start("CRITIQUE\\s+" + label + "\\s*:", std::regex::icase);
    std::smatch match;
    if (!std::regex_search(text, match, start)) return "";
    const auto begin = static_cast<std::size_t>(match.position(0) + match.length(0));
    const std::regex next(R"(CRITIQUE\s+[AB]\s*:)", std::regex::icase);
    std::string rest = text.substr(begin);
    std::smatch stop;
    if (std::regex_search(rest, stop, next)) {
        rest = rest.substr(0, static_cast<std::size_t>(stop.position(0)));
    }
    return trim(rest);
}

}  // namespace

std::optional<CandidateScores> parse_candidate_scores(const std::string& judge_text,
                                                      const std::string& label,
                                                      const Rubric& rubric) {
    CandidateScores scores;
    scores.criterion_scores.reserve(rubric.criteria.size());
    bool any = false;
    for (const auto& criterion : rubric.criteria) {
        auto found = find_labeled_score(judge_text, label, criterion, rubric.scale_max);
        if (found) {
            scores.criterion_scores.push_back(*found);
            any = true;
        } else {
            scores.criterion_scores.push_back(Score::from_tenths(0));
            scores.missing_criteria.push_back(criterion);
        }
    }
    if (!any) return std::nullopt;
    scores.aggregate = Score::mean_half_up(scores.criterion_scores);
    scores.critique = extract_critique(judge_text, label);
    return scores;
}

int select_answer(const std::array<CandidateScores, 2>& per_answer) {
    return per_answer[1].aggregate > per_answer[0].aggregate ? 2 : 1;
}

std::string render_evaluation_report(const AnswerJudgment& judgment, const AnswerPair& pair,
                                     const ReferenceAnswer& reference, const Rubric& rubric) {
    std::string report;
    report += "EVALUATION REPORT (" + task_kind_name(rubric.task) + ")\n";
    report += judgment.reference_used
                  ? "Mode: reference-anchored (scores compare against the dataset reference)\n"
                  : "Mode: reference-free\n";
    if (judgment.degraded_pair || pair.degraded) {
        report += "Note: degraded pair - answer 2 duplicates answer 1 because the "
                  "model never produced the two-answer format.\n";
    }
    for (int idx = 0; idx < 2; ++idx) {
        const CandidateScores& scores = judgment.per_answer[idx];
        report += "\nANSWER " + std::to_string(idx + 1) + "\n";
        for (std::size_t c = 0; c < rubric.criteria.size(); ++c) {
            report += "  " + rubric.criteria[c] + ": " + scores.criterion_scores[c].str() + "\n";
        }
        report += "  aggregate: " + scores.aggregate.str() + "\n";
        for (const auto& missing : scores.missing_criteria) {
            report += "  (criterion not scored by judge, counted 0: " + missing + ")\n";
        }
        if (!scores.critique.empty()) report += "  critique: " + scores.critique + "\n";
    }
    if (judgment.reference_used) {
        report += "\nReference answer considered:\n  " + reference.text + "\n";
    }
    report += "\nSELECTED: ANSWER " + std::to_string(judgment.selected_index) + " (aggregate " +
              judgment.per_answer[judgment.selected_index - 1].aggregate.str() + " vs " +
              judgment.per_answer[judgment.selected_index == 1 ? 1 : 0].aggregate.str() + ")\n";
    return report;
}

AnswerJudge::AnswerJudge(Gateway& gateway, const TemplateSet& templates, ModelEndpoint endpoint)
    : gateway_(gateway), templates_(templates), endpoint_(std::move(endpoint)) {}

ChatRequest AnswerJudge::build_pair_request(const AnswerPair& pair,
                                            const ReferenceAnswer& reference,
                                            const Rubric& rubric, const JudgeContext& context,
                                            const std::array<int, 2>& order,
                                            const std::string& extra) const {
    const std::string& candidate_a = order[0] == 1 ? pair.answer_1 : pair.answer_2;
    const std::string& candidate_b = order[1] == 1 ? pair.answer_1 : pair.answer_2;
    std::string reference_block;
    if (reference.from_dataset) {
        reference_block = "Reference answer:\n" + reference.text + "\n";
    }
    std::string body = render_template(templates_.answer_judge.user_template,
                                       {{"question", context.question},
                                        {"caption", context.caption_text},
                                        {"reference_block", reference_block},
                                        {"candidate_a", candidate_a},
                                        {"candidate_b", candidate_b},
                                        {"criteria_block", criteria_block(rubric)}});
    if (!extra.empty()) body += "\n" + extra;
    std::vector<ChatMessage> messages;
    messages.push_back(ChatMessage::text("system", templates_.answer_judge.system_text));
    messages.push_back(ChatMessage::text("user", std::move(body)));
    return make_chat_request(StageTag::AnswerJudge, endpoint_, std::move(messages));
}

CandidateScores AnswerJudge::score_answer(const std::string& answer,
                                          const ReferenceAnswer& reference, const Rubric& rubric,
                                          const JudgeContext& context) {
    AnswerPair single;
    single.answer_1 = answer;
    single.answer_2 = answer;
    // Single-candidate scoring rides the pair prompt with both slots equal;
    // candidate A's parse is authoritative.
    ChatRequest request = build_pair_request(single, reference, rubric, context, {1, 2}, "");
    ChatResponse response = gateway_.complete_chat(request);
    auto scores = parse_candidate_scores(response.text, "A", rubric);
    if (!scores) {
        ChatRequest retry = build_pair_request(
            single, reference, rubric, context, {1, 2},
            "Your previous reply was unreadable. Use exactly one line per candidate "
            "per criterion in the form 'A | <criterion>: <score>'.");
        ChatResponse second = gateway_.complete_chat(retry);
        scores = parse_candidate_scores(second.text, "A", rubric);
    }
    if (!scores) {
        throw endpoint_error("JudgeParseError", "no scores extractable from answer judge");
    }
    return *scores;
}

AnswerJudgment AnswerJudge::judge_pair(const AnswerPair& pair, const ReferenceAnswer& reference,
                                       const Rubric& rubric, const JudgeContext& context,
                                       std::uint64_t order_seed) {
    SplitMix64 rng(order_seed);
    const bool swap = (rng.next() & 1) != 0;
    const std::array<int, 2> order = swap ? std::array<int, 2>{2, 1} : std::array<int, 2>{1, 2};

    ChatRequest request = build_pair_request(pair, reference, rubric, context, order, "");
    ChatResponse response = gateway_.complete_chat(request);
    auto parse_both = [&](const std::string& text)
        -> std::optional<std::array<CandidateScores, 2>> {
        auto a = parse_candidate_scores(text, "A", rubric);
        auto b = parse_candidate_scores(text, "B", rubric);
        if (!a || !b) return std::nullopt;
        std::array<CandidateScores, 2> by_answer;
        by_answer[order[0] - 1] = std::move(*a);
        by_answer[order[1] - 1] = std::move(*b);
        return by_answer;
    };

    auto both = parse_both(response.text);
    if (!both) {
        ChatRequest retry = build_pair_request(
            pair, reference, rubric, context, order,
            "Your previous reply was unreadable. Use exactly one line per candidate "
            "per criterion in the form 'A | <criterion>: <score>' and "
            "'B | <criterion>: <score>'.");
        ChatResponse second = gateway_.complete_chat(retry);
        both = parse_both(second.text);
    }
    if (!both) {
        throw endpoint_error("JudgeParseError", "no scores extractable from answer judge");
    }

    AnswerJudgment judgment;
    judgment.per_answer = std::move(*both);
    judgment.selected_index = select_answer(judgment.per_answer);
    judgment.reference_used = reference.from_dataset;
    judgment.presentation_order = order;
    judgment.degraded_pair = pair.degraded;
    judgment.report = render_evaluation_report(judgment, pair, reference, rubric);
    return judgment;
}

}  // namespace agrivqa
