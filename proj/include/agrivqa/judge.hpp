#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "agrivqa/domain.hpp"
#include "agrivqa/gateway.hpp"
#include "agrivqa/prompts.hpp"

namespace agrivqa {

struct JudgeContext {
    std::string question;
    std::string caption_text;
};

/// Per-candidate criterion scores parsed from "<label> | <criterion>: <n>"
/// lines. Criteria the judge omitted score 0 and are flagged; nullopt when
/// no criterion line at all was found for the label.
std::optional<CandidateScores> parse_candidate_scores(const std::string& judge_text,
                                                      const std::string& label,
                                                      const Rubric& rubric);

/// Pure argmax over the two aggregates; ties resolve to index 1.
int select_answer(const std::array<CandidateScores, 2>& per_answer);

/// Structured justification document: criterion tables, aggregates,
/// critiques, the selection, and the reference section when one was used.
std::string render_evaluation_report(const AnswerJudgment& judgment, const AnswerPair& pair,
                                     const ReferenceAnswer& reference, const Rubric& rubric);

/// Rubric scoring of candidate answers by a text-only judge endpoint.
class AnswerJudge {
public:
    AnswerJudge(Gateway& gateway, const TemplateSet& templates, ModelEndpoint endpoint);

    /// Scores one answer against the rubric (single-candidate prompt).
    CandidateScores score_answer(const std::string& answer, const ReferenceAnswer& reference,
                                 const Rubric& rubric, const JudgeContext& context);

    /// One side-by-side call scoring both candidates; presentation order is
    /// derived from `order_seed` and recorded in the judgment.
    AnswerJudgment judge_pair(const AnswerPair& pair, const ReferenceAnswer& reference,
                              const Rubric& rubric, const JudgeContext& context,
                              std::uint64_t order_seed);

private:
    ChatRequest build_pair_request(const AnswerPair& pair, const ReferenceAnswer& reference,
                                   const Rubric& rubric, const JudgeContext& context,
                                   const std::array<int, 2>& order,
                                   const std::string& extra) const;

    Gateway& gateway_;
    const TemplateSet& templates_;
    ModelEndpoint endpoint_;
};

}  // namespace agrivqa
