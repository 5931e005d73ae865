#include "agrivqa/prompts.hpp"

#include <cctype>

#include "agrivqa/errors.hpp"
#include "agrivqa/hash.hpp"
#include "agrivqa/util.hpp"

namespace agrivqa {

std::string render_template(const std::string& text,
                            const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '{') {
            out.push_back(text[i++]);
            continue;
        }
        std::size_t j = i + 1;
        while (j < text.size() && (std::islower(static_cast<unsigned char>(text[j])) ||
                                   text[j] == '_')) {
            ++j;
        }
        if (j > i + 1 && j < text.size() && text[j] == '}') {
            const std::string name = text.substr(i + 1, j - i - 1);
            auto it = bindings.find(name);
            if (it == bindings.end()) {
                throw config_error("TemplateRenderError", "unbound placeholder {" + name + "}");
            }
            out += it->second;
            i = j + 1;
        } else {
            out.push_back(text[i++]);
        }
    }
    return out;
}

const char* kLeakageRegenInstruction =
    "Describe without naming the crop or disease; refer to the plant and the "
    "condition only through visible features.";

TemplateSet default_templates() {
    TemplateSet t;

    t.caption = PromptTemplate{
        TaskKind::DiseaseDiagnosis, "caption",
        "You are an expert agricultural field observer. Describe only what is "
        "visible. Never name a crop species or a disease; keep the description "
        "neutral and observational.",
        "Describe this plant image in detail for a diagnostic workflow. Cover, "
        "in order:\n"
        "1. Plant morphology: leaf shape, texture, size, and growth habit.\n"
        "2. Symptom characteristics: lesion patterns, discoloration, necrosis, "
        "and their distribution.\n"
        "3. Severity and developmental stage of any damage.\n"
        "4. Uncertainty: state plainly what cannot be determined from this "
        "image.\n"
        "Do not name any crop species or disease. Describe evidence only.",
        0};

    t.caption_refine = PromptTemplate{
        TaskKind::DiseaseDiagnosis, "caption_refine", t.caption.system_text,
        "A previous description of this image scored below the quality bar.\n"
        "Previous description:\n{prior_caption}\n"
        "Reviewer instructions:\n{refinement_instruction}\n"
        "Rewrite the description following the reviewer instructions. Keep the "
        "four-part structure (morphology, symptoms, severity, uncertainty). Do "
        "not name any crop species or disease.",
        0};

    t.caption_judge = PromptTemplate{
        TaskKind::DiseaseDiagnosis, "caption_judge",
        "You are a strict reviewer of plant-image descriptions.",
        "Score the following image description against the attached image on "
        "three criteria, each 0-10:\n"
        "accuracy: faithful to what the image shows.\n"
        "completeness: morphology, symptoms, severity, and uncertainty all "
        "covered.\n"
        "neutrality: no crop or disease names, no unsupported conclusions.\n"
        "Respond with exactly these lines:\n"
        "accuracy: <0-10>\n"
        "completeness: <0-10>\n"
        "neutrality: <0-10>\n"
        "overall: <0-10>\n"
        "If overall is below {threshold}, add one line starting with "
        "'REFINE:' giving targeted rewrite instructions.\n"
        "Description:\n{caption}",
        0};

    const std::string diagnosis_instructions =
        "Give exactly two answers with these headers.\n"
        "ANSWER 1: Identify the pest or disease. Cover symptoms, severity, and "
        "characteristic features of the plant and disease.\n"
        "ANSWER 2: Identify the crop. Give the specific crop type, variety if "
        "determinable, and distinctive morphological traits.";

    t.diagnosis = PromptTemplate{TaskKind::DiseaseDiagnosis, "diagnosis",
                                 "You are an agricultural diagnosis assistant.",
                                 "{exemplars}Image description:\n{caption}\n"
                                 "Question: {question}\n" +
                                     diagnosis_instructions,
                                 0};

    t.diagnosis_baseline = PromptTemplate{TaskKind::DiseaseDiagnosis, "diagnosis_baseline",
                                          t.diagnosis.system_text,
                                          "Question: {question}\n" + diagnosis_instructions, 0};

    const std::string knowledge_instructions =
        "Give exactly two answers with these headers.\n"
        "ANSWER 1: Treatment, prevention, and control recommendations with "
        "specific methods, rates, and timings.\n"
        "ANSWER 2: Explain the disease: symptoms, etiology, and lifecycle "
        "mechanisms.";

    t.knowledge = PromptTemplate{TaskKind::KnowledgeQA, "knowledge",
                                 "You are an agricultural knowledge assistant.",
                                 "{exemplars}Image description:\n{caption}\n"
                                 "Question: {question}\n" +
                                     knowledge_instructions,
                                 0};

    t.knowledge_baseline = PromptTemplate{TaskKind::KnowledgeQA, "knowledge_baseline",
                                          t.knowledge.system_text,
                                          "Question: {question}\n" + knowledge_instructions, 0};

    t.answer_judge = PromptTemplate{
        TaskKind::DiseaseDiagnosis, "answer_judge",
        "You are a demanding agricultural answer reviewer. Judge content, not "
        "style. Do not favor an answer because it is longer, more verbose, or "
        "presented first.",
        "Question: {question}\n"
        "Image description:\n{caption}\n"
        "{reference_block}"
        "CANDIDATE A:\n{candidate_a}\n"
        "CANDIDATE B:\n{candidate_b}\n"
        "Score each candidate on each criterion, 0-10:\n"
        "{criteria_block}"
        "Respond with one line per candidate per criterion, exactly in the "
        "form:\n"
        "A | <criterion>: <0-10>\n"
        "B | <criterion>: <0-10>\n"
        "Then two short critique blocks starting with 'CRITIQUE A:' and "
        "'CRITIQUE B:' covering strengths, weaknesses, and key differences "
        "from the reference when one is given.",
        0};

    t.qa_judge = PromptTemplate{
        TaskKind::KnowledgeQA, "qa_judge",
        "You are a strict grader of agricultural question answering.",
        "Question: {question}\n"
        "Reference answer:\n{reference}\n"
        "Response to evaluate:\n{response}\n"
        "Score the response on usefulness, relevance, and accuracy, each 1-10. "
        "Respond with exactly these lines:\n"
        "usefulness: <1-10>\n"
        "relevance: <1-10>\n"
        "accuracy: <1-10>",
        0};

    return t;
}

std::string TemplateSet::digest() const {
    return content_hash_parts({caption.digest(), caption_refine.digest(), caption_judge.digest(),
                               diagnosis.digest(), diagnosis_baseline.digest(),
                               knowledge.digest(), knowledge_baseline.digest(),
                               answer_judge.digest(), qa_judge.digest()});
}

namespace {
void apply_override(PromptTemplate& tmpl, const nlohmann::json& doc) {
    if (doc.contains("system")) tmpl.system_text = doc.at("system").get<std::string>();
    if (doc.contains("user")) tmpl.user_template = doc.at("user").get<std::string>();
}
}  // namespace

TemplateSet load_templates(const PipelineConfig& cfg) {
    TemplateSet t = default_templates();
    if (cfg.templates_path.empty()) return t;
    const auto doc = parse_json_file(cfg.resolve(cfg.templates_path), "templates");
    std::map<std::string, PromptTemplate*> by_name{
        {"caption", &t.caption},
        {"caption_refine", &t.caption_refine},
        {"caption_judge", &t.caption_judge},
        {"diagnosis", &t.diagnosis},
        {"diagnosis_baseline", &t.diagnosis_baseline},
        {"knowledge", &t.knowledge},
        {"knowledge_baseline", &t.knowledge_baseline},
        {"answer_judge", &t.answer_judge},
        {"qa_judge", &t.qa_judge}};
    for (const auto& [name, body] : doc.items()) {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw config_error("UnknownTemplate", "unknown template override: " + name);
        }
        apply_override(*it->second, body);
    }
    return t;
}

}  // namespace agrivqa
