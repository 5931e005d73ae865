#include "agrivqa/vqa.hpp"

#include <regex>

#include "agrivqa/errors.hpp"
#include "agrivqa/util.hpp"

namespace agrivqa {

std::vector<Exemplar> load_exemplar_pool(const std::filesystem::path& path, ImageStore& store) {
    std::vector<Exemplar> pool;
    const auto base = std::filesystem::absolute(path).parent_path();
    std::size_t line_no = 0;
    for (const auto& line : read_lines(path)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw config_error("ParseError", "exemplar pool " + path.string() + " line " +
                                                 std::to_string(line_no) + ": " + e.what());
        }
        Exemplar exemplar;
        exemplar.caption_text = j.at("caption").get<std::string>();
        exemplar.question = j.at("question").get<std::string>();
        exemplar.answer_1 = j.at("answer_1").get<std::string>();
        exemplar.answer_2 = j.at("answer_2").get<std::string>();
        exemplar.image_ref = store.add_file(base / j.at("image").get<std::string>());
        if (exemplar.caption_text.empty() || exemplar.question.empty() ||
            exemplar.answer_1.empty() || exemplar.answer_2.empty()) {
            throw config_error("BadExemplar", "exemplar pool " + path.string() + " line " +
                                                  std::to_string(line_no) +
                                                  ": all fields must be non-empty");
        }
        pool.push_back(std::move(exemplar));
    }
    return pool;
}

std::vector<Exemplar> assemble_few_shot(const std::vector<Exemplar>& pool, int k,
                                        std::uint64_t seed) {
    if (k < 0 || k > 5) {
        throw config_error("BadShotCount", "shot count must be in [0,5], got " +
                                               std::to_string(k));
    }
    if (static_cast<int>(pool.size()) < k) {
        throw config_error("InsufficientExemplars",
                           "need " + std::to_string(k) + " exemplars, pool has " +
                               std::to_string(pool.size()));
    }
    const auto order = shuffled_indices(pool.size(), seed);
    std::vector<Exemplar> picked;
    picked.reserve(k);
    for (int i = 0; i < k; ++i) picked.push_back(pool[order[i]]);
    return picked;
}

VqaEngine::VqaEngine(Gateway& gateway, const TemplateSet& templates, ModelEndpoint endpoint,
                     ExemplarMode exemplar_mode)
    : gateway_(gateway),
      templates_(templates),
      endpoint_(std::move(endpoint)),
      exemplar_mode_(exemplar_mode) {}

const PromptTemplate& VqaEngine::template_for(TaskKind task, bool use_caption) const {
    if (task == TaskKind::DiseaseDiagnosis) {
        return use_caption ? templates_.diagnosis : templates_.diagnosis_baseline;
    }
    return use_caption ? templates_.knowledge : templates_.knowledge_baseline;
}

RenderedPrompt VqaEngine::build_task_prompt(const VqaInput& input,
                                            const std::vector<Exemplar>& exemplars,
                                            const PromptTemplate& tmpl,
                                            bool use_caption) const {
    if (tmpl.task != input.task) {
        throw config_error("TaskMismatch", "template is for " + task_kind_name(tmpl.task) +
                                               " but input is " + task_kind_name(input.task));
    }
    if (input.question.empty()) {
        throw config_error("EmptyQuestion", "VQA input needs a non-empty question");
    }

    // Exemplar blocks travel as leading message parts (text interleaved with
    // exemplar images), always ahead of the query block; the template's
    // {exemplars} placeholder therefore renders empty.
    std::vector<MessagePart> user_parts;
    for (std::size_t i = 0; i < exemplars.size(); ++i) {
        const Exemplar& exemplar = exemplars[i];
        if (exemplar.image_ref == input.image.image_ref) {
            throw internal_error("ExemplarOverlap",
                                 "exemplar image equals the query image: " + exemplar.image_ref);
        }
        std::string block = "EXAMPLE " + std::to_string(i + 1) + "\n";
        block += "Description: " + exemplar.caption_text + "\n";
        block += "Question: " + exemplar.question + "\n";
        block += "ANSWER 1: " + exemplar.answer_1 + "\n";
        block += "ANSWER 2: " + exemplar.answer_2 + "\n";
        if (exemplar_mode_ == ExemplarMode::ImagesAndCaptions) {
            user_parts.push_back(ImagePart{exemplar.image_ref});
        }
        user_parts.push_back(TextPart{std::move(block)});
    }
    std::map<std::string, std::string> bindings{{"question", input.question},
                                                {"exemplars", ""}};
    if (use_caption) bindings["caption"] = input.caption.text;
    user_parts.push_back(TextPart{render_template(tmpl.user_template, bindings)});
    user_parts.push_back(ImagePart{input.image.image_ref});

    std::vector<ChatMessage> messages;
    messages.push_back(ChatMessage::text("system", tmpl.system_text));
    messages.push_back(ChatMessage{"user", std::move(user_parts)});

    RenderedPrompt prompt;
    prompt.task = input.task;
    prompt.shot_count_used = static_cast<int>(exemplars.size());
    ChatRequest probe{StageTag::Vqa, endpoint_, messages};
    prompt.fingerprint = probe.fingerprint();
    prompt.messages = std::move(messages);
    return prompt;
}

std::optional<std::pair<std::string, std::string>> split_dual_answer(const std::string& text) {
    static const std::regex header1(R"(ANSWER\s*1\s*[:.])", std::regex::icase);
    static const std::regex header2(R"(ANSWER\s*2\s*[:.])", std::regex::icase);
    std::smatch m1, m2;
    if (!std::regex_search(text, m1, header1)) return std::nullopt;
    if (!std::regex_search(text, m2, header2)) return std::nullopt;
    const auto start1 = static_cast<std::size_t>(m1.position(0) + m1.length(0));
    const auto start2 = static_cast<std::size_t>(m2.position(0) + m2.length(0));
    if (m2.position(0) < m1.position(0)) return std::nullopt;
    std::string first = trim(text.substr(start1, static_cast<std::size_t>(m2.position(0)) - start1));
    std::string second = trim(text.substr(start2));
    if (first.empty() || second.empty()) return std::nullopt;
    return std::make_pair(std::move(first), std::move(second));
}

AnswerPair VqaEngine::generate_dual_answers(const RenderedPrompt& prompt) {
    ChatRequest request = make_chat_request(StageTag::Vqa, endpoint_, prompt.messages);
    ChatResponse response = gateway_.complete_chat(request);

    AnswerPair pair;
    pair.prompt_fingerprint = prompt.fingerprint;
    if (auto split = split_dual_answer(response.text)) {
        pair.answer_1 = split->first;
        pair.answer_2 = split->second;
        return pair;
    }

    // One re-prompt demanding the exact format.
    ChatRequest retry = request;
    retry.messages.push_back(ChatMessage::text("assistant", response.text));
    retry.messages.push_back(ChatMessage::text(
        "user",
        "Reformat your reply into exactly two blocks starting with the headers "
        "'ANSWER 1:' and 'ANSWER 2:'. Keep the content."));
    ChatResponse second = gateway_.complete_chat(retry);
    if (auto split = split_dual_answer(second.text)) {
        pair.answer_1 = split->first;
        pair.answer_2 = split->second;
        return pair;
    }

    // Degraded but total: keep the record with the flag set.
    pair.answer_1 = trim(second.text).empty() ? trim(response.text) : trim(second.text);
    pair.answer_2 = pair.answer_1;
    pair.degraded = true;
    return pair;
}

}  // namespace agrivqa
