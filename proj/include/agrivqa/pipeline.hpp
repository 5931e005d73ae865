#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "agrivqa/ablation.hpp"
#include "agrivqa/captioner.hpp"
#include "agrivqa/config.hpp"
#include "agrivqa/dataset.hpp"
#include "agrivqa/judge.hpp"
#include "agrivqa/keyword_match.hpp"
#include "agrivqa/prompts.hpp"
#include "agrivqa/qa_eval.hpp"
#include "agrivqa/store.hpp"
#include "agrivqa/transcript.hpp"
#include "agrivqa/vqa.hpp"

namespace agrivqa {

struct RunOptions {
    std::filesystem::path dataset_path;       // evaluate; optional ablate override
    std::string strategy_text;                // empty = full stack from config
    int limit = 0;                            // 0 = every item
    std::optional<std::uint64_t> seed;        // overrides config seed
    std::optional<int> shots;                 // overrides config shot_count
    std::filesystem::path out_root = "runs";
    std::string resume_run_id;
    std::filesystem::path mock_override;      // one script for all mock endpoints
};

struct RunResult {
    std::filesystem::path run_dir;
    std::string run_id;
    bool completed = false;
    nlohmann::ordered_json metrics;  // null when not completed
};

/// Shared wiring for one process: templates, image bytes, guard lexicon,
/// synonyms, exemplars, the backend hub, and the gateway.
class Pipeline {
public:
    /// `mock_state_dir` empty = stateless mock cursors (single-shot CLI use).
    Pipeline(PipelineConfig cfg, std::filesystem::path mock_state_dir,
             TranscriptLog* transcript);

    const PipelineConfig& config() const { return cfg_; }
    const TemplateSet& templates() const { return templates_; }
    ImageStore& images() { return images_; }
    const SynonymTable& synonyms() const { return synonyms_; }
    Gateway& gateway() { return *gateway_; }
    const LeakageLexicon* lexicon() const { return lexicon_ ? &*lexicon_ : nullptr; }

    std::vector<Exemplar>& exemplar_pool();  // loads lazily

    /// Content digest over every mock script the config references.
    std::string mock_scripts_digest() const;

    Captioner make_captioner(const ModelEndpoint& captioner_endpoint,
                             const ModelEndpoint& judge_endpoint);
    VqaEngine make_vqa(const ModelEndpoint& endpoint);
    AnswerJudge make_answer_judge(const ModelEndpoint& endpoint);
    QaJudge make_qa_judge(const ModelEndpoint& endpoint);

private:
    PipelineConfig cfg_;
    TemplateSet templates_;
    ImageStore images_;
    std::optional<LeakageLexicon> lexicon_;
    SynonymTable synonyms_;
    std::optional<std::vector<Exemplar>> exemplars_;
    std::shared_ptr<ChatBackend> hub_;
    std::shared_ptr<Gateway> gateway_;
};

/// Applies --mock/--shots/--seed overrides onto the validated config.
PipelineConfig apply_overrides(PipelineConfig cfg, const RunOptions& opt);

/// Full evaluation run (resumable): caption -> VQA -> judge -> metrics.
RunResult run_evaluate(const PipelineConfig& cfg, const RunOptions& opt);

/// Ablation grid run; cells land in metrics plus cells.jsonl and the
/// rendered table.
RunResult run_ablate(const PipelineConfig& cfg, const RunOptions& opt);

/// Re-renders a completed run's summary from its directory (read-only).
std::string render_run_report(const std::filesystem::path& run_dir);

}  // namespace agrivqa
