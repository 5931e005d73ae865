#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agrivqa/domain.hpp"
#include "agrivqa/gateway.hpp"
#include "agrivqa/prompts.hpp"

namespace agrivqa {

struct VqaInput {
    ImageRecord image;
    Caption caption;  // the refined caption; converged flag travels with it
    std::string question;
    TaskKind task = TaskKind::DiseaseDiagnosis;
};

struct RenderedPrompt {
    std::vector<ChatMessage> messages;
    std::string fingerprint;
    int shot_count_used = 0;
    TaskKind task = TaskKind::DiseaseDiagnosis;
};

/// JSONL exemplar pool; image paths resolve against the pool file's
/// directory and register in the store.
std::vector<Exemplar> load_exemplar_pool(const std::filesystem::path& path, ImageStore& store);

/// Deterministic seeded selection: shuffle the pool with `seed`, take the
/// first k. Throws InsufficientExemplars when the pool is smaller than k.
std::vector<Exemplar> assemble_few_shot(const std::vector<Exemplar>& pool, int k,
                                        std::uint64_t seed);

class VqaEngine {
public:
    VqaEngine(Gateway& gateway, const TemplateSet& templates, ModelEndpoint endpoint,
              ExemplarMode exemplar_mode = ExemplarMode::ImagesAndCaptions);

    /// Renders the task prompt: exemplar blocks in fixed order, caption
    /// verbatim, question, and the query image. `use_caption` false selects
    /// the baseline template (no caption context).
    RenderedPrompt build_task_prompt(const VqaInput& input,
                                     const std::vector<Exemplar>& exemplars,
                                     const PromptTemplate& tmpl, bool use_caption = true) const;

    /// Template lookup by task/strategy.
    const PromptTemplate& template_for(TaskKind task, bool use_caption) const;

    /// One completion split on the mandated ANSWER 1/ANSWER 2 headers, with
    /// one format re-prompt; a still-unsplittable response degrades to
    /// answer_2 = answer_1 with the flag set.
    AnswerPair generate_dual_answers(const RenderedPrompt& prompt);

private:
    Gateway& gateway_;
    const TemplateSet& templates_;
    ModelEndpoint endpoint_;
    ExemplarMode exemplar_mode_;
};

/// Splits "ANSWER 1: ... ANSWER 2: ..." text; nullopt if either side is
/// missing or empty.
std::optional<std::pair<std::string, std::string>> split_dual_answer(const std::string& text);

}  // namespace agrivqa
