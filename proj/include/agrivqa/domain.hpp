#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agrivqa/score.hpp"

namespace agrivqa {

enum class TaskKind {
    DiseaseDiagnosis,
    KnowledgeQA,
};

std::string task_kind_name(TaskKind task);
TaskKind task_kind_from_name(const std::string& name);

/// One dataset item: the image (by content-addressed reference), ground
/// truth labels, and the query posed to the pipeline.
struct ImageRecord {
    std::string id;
    std::string image_ref;  // content digest resolving to the image bytes
    std::string crop_label;
    std::string disease_label;
    std::string query;
    TaskKind task = TaskKind::DiseaseDiagnosis;

    bool operator==(const ImageRecord&) const = default;
};

/// A generated description. attempt 0 is the initial generation; each
/// refinement bumps the attempt index and records the instruction that
/// produced it.
struct Caption {
    std::string text;
    int attempt = 0;
    std::optional<Score> judge_score;
    std::optional<std::string> refinement_note;
    bool converged = false;

    bool operator==(const Caption&) const = default;
};

/// Outcome of judging one caption: three criterion scores, the overall
/// (arithmetic mean, one decimal), and the rewrite instruction when the
/// overall falls below the threshold.
struct CaptionJudgment {
    std::optional<Score> accuracy;
    std::optional<Score> completeness;
    std::optional<Score> neutrality;
    Score overall;
    std::string refinement_instruction;  // non-empty iff overall < threshold

    bool operator==(const CaptionJudgment&) const = default;
};

struct PromptTemplate {
    TaskKind task = TaskKind::DiseaseDiagnosis;
    std::string name;
    std::string system_text;
    std::string user_template;  // named {placeholder} slots
    int shot_count = 0;

    std::string digest() const;

    bool operator==(const PromptTemplate&) const = default;
};

struct Exemplar {
    std::string image_ref;
    std::string caption_text;
    std::string question;
    std::string answer_1;
    std::string answer_2;

    bool operator==(const Exemplar&) const = default;
};

/// The two complementary answers produced by one VQA call.
struct AnswerPair {
    std::string answer_1;
    std::string answer_2;
    std::string prompt_fingerprint;
    bool degraded = false;  // header split failed twice; answer_2 == answer_1

    bool operator==(const AnswerPair&) const = default;
};

struct Rubric {
    TaskKind task = TaskKind::DiseaseDiagnosis;
    std::vector<std::string> criteria;
    std::vector<std::string> definitions;  // aligned with criteria
    int scale_max = 10;

    bool operator==(const Rubric&) const = default;
};

/// Built-in five-criterion rubrics, one per task.
const Rubric& diagnosis_rubric();
const Rubric& knowledge_rubric();
const Rubric& rubric_for(TaskKind task);

struct ReferenceAnswer {
    std::string text;
    bool from_dataset = false;  // false => reference-free judging

    bool operator==(const ReferenceAnswer&) const = default;
};

/// Scores for one candidate answer: one entry per rubric criterion plus the
/// aggregate mean. Criteria the judge omitted are scored 0 and flagged.
struct CandidateScores {
    std::vector<Score> criterion_scores;
    Score aggregate;
    std::vector<std::string> missing_criteria;
    std::string critique;

    bool operator==(const CandidateScores&) const = default;
};

struct AnswerJudgment {
    std::array<CandidateScores, 2> per_answer;  // [0] = answer_1, [1] = answer_2
    int selected_index = 1;                     // 1 or 2; ties resolve to 1
    std::string report;
    bool reference_used = false;
    std::array<int, 2> presentation_order{1, 2};  // order shown to the judge
    bool degraded_pair = false;

    bool operator==(const AnswerJudgment&) const = default;
};

// JSON round-trip serialization for every domain type.
void to_json(nlohmann::json& j, const Score& s);
void from_json(const nlohmann::json& j, Score& s);
void to_json(nlohmann::json& j, const ImageRecord& r);
void from_json(const nlohmann::json& j, ImageRecord& r);
void to_json(nlohmann::json& j, const Caption& c);
void from_json(const nlohmann::json& j, Caption& c);
void to_json(nlohmann::json& j, const CaptionJudgment& c);
void from_json(const nlohmann::json& j, CaptionJudgment& c);
void to_json(nlohmann::json& j, const PromptTemplate& t);
void from_json(const nlohmann::json& j, PromptTemplate& t);
void to_json(nlohmann::json& j, const Exemplar& e);
void from_json(const nlohmann::json& j, Exemplar& e);
void to_json(nlohmann::json& j, const AnswerPair& p);
void from_json(const nlohmann::json& j, AnswerPair& p);
void to_json(nlohmann::json& j, const Rubric& r);
void from_json(const nlohmann::json& j, Rubric& r);
void to_json(nlohmann::json& j, const ReferenceAnswer& r);
void from_json(const nlohmann::json& j, ReferenceAnswer& r);
void to_json(nlohmann::json& j, const CandidateScores& c);
void from_json(const nlohmann::json& j, CandidateScores& c);
void to_json(nlohmann::json& j, const AnswerJudgment& a);
void from_json(const nlohmann::json& j, AnswerJudgment& a);

}  // namespace agrivqa
