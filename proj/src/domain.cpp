#include "agrivqa/domain.hpp"

#include "agrivqa/errors.hpp"
#include "agrivqa/hash.hpp"

namespace agrivqa {

std::string task_kind_name(TaskKind task) {
    switch (task) {
        case TaskKind::DiseaseDiagnosis: return "disease_diagnosis";
        case TaskKind::KnowledgeQA: return "knowledge_qa";
    }
    return "disease_diagnosis";
}

TaskKind task_kind_from_name(const std::string& name) {
    if (name == "disease_diagnosis") return TaskKind::DiseaseDiagnosis;
    if (name == "knowledge_qa") return TaskKind::KnowledgeQA;
    throw config_error("UnknownTask", "unknown task kind: " + name);
}

std::string PromptTemplate::digest() const {
    return content_hash_parts({task_kind_name(task), name, system_text, user_template,
                               std::to_string(shot_count)});
}

const Rubric& diagnosis_rubric() {
    static const Rubric rubric{
        TaskKind::DiseaseDiagnosis,
        {"plant accuracy", "disease accuracy", "symptom accuracy", "format adherence",
         "completeness"},
        {"correct crop species identification", "correct disease/pest identification",
         "precise symptom description", "both plant and disease information present",
         "comprehensive and professional response"},
        10,
    };
    return rubric;
}

const Rubric& knowledge_rubric() {
    static const Rubric rubric{
        TaskKind::KnowledgeQA,
        {"accuracy", "completeness", "specificity", "practicality", "scientific validity"},
        {"scientifically correct information", "covers all relevant aspects",
         "precise details on rates, timings, methods", "actionable for farmers",
         "evidence-based with proper terminology"},
        10,
    };
    return rubric;
}

const Rubric& rubric_for(TaskKind task) {
    return task == TaskKind::DiseaseDiagnosis ? diagnosis_rubric() : knowledge_rubric();
}

void to_json(nlohmann::json& j, const Score& s) { j = s.tenths(); }
void from_json(const nlohmann::json& j, Score& s) {
    s = Score::from_tenths(j.get<std::int64_t>());
}

namespace {
template <typename T>
void opt_to_json(nlohmann::json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}
template <typename T>
void opt_from_json(const nlohmann::json& j, const char* key, std::optional<T>& v) {
    if (j.contains(key) && !j.at(key).is_null()) {
        v = j.at(key).get<T>();
    } else {
        v.reset();
    }
}
}  // namespace

void to_json(nlohmann::json& j, const ImageRecord& r) {
    j = nlohmann::json{{"id", r.id},
                       {"image_ref", r.image_ref},
                       {"crop_label", r.crop_label},
                       {"disease_label", r.disease_label},
                       {"query", r.query},
                       {"task", task_kind_name(r.task)}};
}
void from_json(const nlohmann::json& j, ImageRecord& r) {
    j.at("id").get_to(r.id);
    j.at("image_ref").get_to(r.image_ref);
    j.at("crop_label").get_to(r.crop_label);
    j.at("disease_label").get_to(r.disease_label);
    j.at("query").get_to(r.query);
    r.task = task_kind_from_name(j.at("task").get<std::string>());
}

void to_json(nlohmann::json& j, const Caption& c) {
    j = nlohmann::json{{"text", c.text}, {"attempt", c.attempt}, {"converged", c.converged}};
    opt_to_json(j, "judge_score", c.judge_score);
    opt_to_json(j, "refinement_note", c.refinement_note);
}
void from_json(const nlohmann::json& j, Caption& c) {
    j.at("text").get_to(c.text);
    j.at("attempt").get_to(c.attempt);
    j.at("converged").get_to(c.converged);
    opt_from_json(j, "judge_score", c.judge_score);
    opt_from_json(j, "refinement_note", c.refinement_note);
}

void to_json(nlohmann::json& j, const CaptionJudgment& c) {
    j = nlohmann::json{{"overall", c.overall},
                       {"refinement_instruction", c.refinement_instruction}};
    opt_to_json(j, "accuracy", c.accuracy);
    opt_to_json(j, "completeness", c.completeness);
    opt_to_json(j, "neutrality", c.neutrality);
}
void from_json(const nlohmann::json& j, CaptionJudgment& c) {
    j.at("overall").get_to(c.overall);
    j.at("refinement_instruction").get_to(c.refinement_instruction);
    opt_from_json(j, "accuracy", c.accuracy);
    opt_from_json(j, "completeness", c.completeness);
    opt_from_json(j, "neutrality", c.neutrality);
}

void to_json(nlohmann::json& j, const PromptTemplate& t) {
    j = nlohmann::json{{"task", task_kind_name(t.task)},
                       {"name", t.name},
                       {"system_text", t.system_text},
                       {"user_template", t.user_template},
                       {"shot_count", t.shot_count}};
}
void from_json(const nlohmann::json& j, PromptTemplate& t) {
    t.task = task_kind_from_name(j.at("task").get<std::string>());
    j.at("name").get_to(t.name);
    j.at("system_text").get_to(t.system_text);
    j.at("user_template").get_to(t.user_template);
    j.at("shot_count").get_to(t.shot_count);
}

void to_json(nlohmann::json& j, const Exemplar& e) {
    j = nlohmann::json{{"image_ref", e.image_ref},
                       {"caption_text", e.caption_text},
                       {"question", e.question},
                       {"answer_1", e.answer_1},
                       {"answer_2", e.answer_2}};
}
void from_json(const nlohmann::json& j, Exemplar& e) {
    j.at("image_ref").get_to(e.image_ref);
    j.at("caption_text").get_to(e.caption_text);
    j.at("question").get_to(e.question);
    j.at("answer_1").get_to(e.answer_1);
    j.at("answer_2").get_to(e.answer_2);
}

void to_json(nlohmann::json& j, const AnswerPair& p) {
    j = nlohmann::json{{"answer_1", p.answer_1},
                       {"answer_2", p.answer_2},
                       {"prompt_fingerprint", p.prompt_fingerprint},
                       {"degraded", p.degraded}};
}
void from_json(const nlohmann::json& j, AnswerPair& p) {
    j.at("answer_1").get_to(p.answer_1);
    j.at("answer_2").get_to(p.answer_2);
    j.at("prompt_fingerprint").get_to(p.prompt_fingerprint);
    j.at("degraded").get_to(p.degraded);
}

void to_json(nlohmann::json& j, const Rubric& r) {
    j = nlohmann::json{{"task", task_kind_name(r.task)},
                       {"criteria", r.criteria},
                       {"definitions", r.definitions},
                       {"scale_max", r.scale_max}};
}
void from_json(const nlohmann::json& j, Rubric& r) {
    r.task = task_kind_from_name(j.at("task").get<std::string>());
    j.at("criteria").get_to(r.criteria);
    j.at("definitions").get_to(r.definitions);
    j.at("scale_max").get_to(r.scale_max);
}

void to_json(nlohmann::json& j, const ReferenceAnswer& r) {
    j = nlohmann::json{{"text", r.text}, {"from_dataset", r.from_dataset}};
}
void from_json(const nlohmann::json& j, ReferenceAnswer& r) {
    j.at("text").get_to(r.text);
    j.at("from_dataset").get_to(r.from_dataset);
}

void to_json(nlohmann::json& j, const CandidateScores& c) {
    j = nlohmann::json{{"criterion_scores", c.criterion_scores},
                       {"aggregate", c.aggregate},
                       {"missing_criteria", c.missing_criteria},
                       {"critique", c.critique}};
}
void from_json(const nlohmann::json& j, CandidateScores& c) {
    j.at("criterion_scores").get_to(c.criterion_scores);
    j.at("aggregate").get_to(c.aggregate);
    j.at("missing_criteria").get_to(c.missing_criteria);
    j.at("critique").get_to(c.critique);
}

void to_json(nlohmann::json& j, const AnswerJudgment& a) {
    j = nlohmann::json{{"answer_1_scores", a.per_answer[0]},
                       {"answer_2_scores", a.per_answer[1]},
                       {"selected_index", a.selected_index},
                       {"report", a.report},
                       {"reference_used", a.reference_used},
                       {"presentation_order", a.presentation_order},
                       {"degraded_pair", a.degraded_pair}};
}
void from_json(const nlohmann::json& j, AnswerJudgment& a) {
    j.at("answer_1_scores").get_to(a.per_answer[0]);
    j.at("answer_2_scores").get_to(a.per_answer[1]);
    j.at("selected_index").get_to(a.selected_index);
    j.at("report").get_to(a.report);
    j.at("reference_used").get_to(a.reference_used);
    j.at("presentation_order").get_to(a.presentation_order);
    j.at("degraded_pair").get_to(a.degraded_pair);
}

}  // namespace agrivqa
