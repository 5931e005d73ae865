#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "agrivqa/domain.hpp"
#include "agrivqa/gateway.hpp"
#include "agrivqa/prompts.hpp"

namespace agrivqa {

struct LeakageLexicon {
    std::set<std::string> crop_terms;     // normalized: lowercase, trimmed
    std::set<std::string> disease_terms;

    bool empty() const { return crop_terms.empty() && disease_terms.empty(); }
};

/// One term per line; '#' starts a comment. The special comments `#[crops]`
/// and `#[diseases]` switch which set subsequent terms join (crops until the
/// first marker).
LeakageLexicon load_lexicon(const std::filesystem::path& path);

struct LeakageResult {
    bool passed = true;
    std::vector<std::string> flagged_terms;
};

/// Case-insensitive whole-word scan of the caption for lexicon terms and the
/// record's own ground-truth labels. Advisory: flags, never rejects.
LeakageResult leakage_check(const std::string& caption_text, const LeakageLexicon& lexicon,
                            const std::string& crop_label, const std::string& disease_label);

struct CaptionTraceEntry {
    Caption caption;
    CaptionJudgment judgment;
    std::vector<std::string> leakage_flags;  // hits on the kept text
    bool leakage_regenerated = false;

    bool operator==(const CaptionTraceEntry&) const = default;
};

struct CaptionTrace {
    std::vector<CaptionTraceEntry> entries;
    int final_index = 0;

    const Caption& final_caption() const { return entries.at(final_index).caption; }
    Score final_score() const { return entries.at(final_index).judgment.overall; }

    bool operator==(const CaptionTrace&) const = default;
};

void to_json(nlohmann::json& j, const CaptionTraceEntry& e);
void from_json(const nlohmann::json& j, CaptionTraceEntry& e);
void to_json(nlohmann::json& j, const CaptionTrace& t);
void from_json(const nlohmann::json& j, CaptionTrace& t);

/// Parsed caption-judge response. Tolerates "criterion: n" breakdowns, an
/// "overall: n" line, or a bare "n/10"; nullopt when nothing extractable.
std::optional<CaptionJudgment> parse_caption_judgment(const std::string& judge_text,
                                                      Score threshold);

/// Generate -> judge -> refine loop for one image.
class Captioner {
public:
    Captioner(Gateway& gateway, const TemplateSet& templates, Score threshold,
              int max_refinements, ModelEndpoint captioner_endpoint,
              ModelEndpoint judge_endpoint, const LeakageLexicon* lexicon = nullptr);

    ChatRequest build_caption_prompt(const ImageRecord& image,
                                     const PromptTemplate& tmpl) const;

    /// Initial caption (attempt 0, unjudged), leakage guard applied.
    Caption generate_caption(const ImageRecord& image);

    CaptionJudgment judge_caption(const Caption& caption, const ImageRecord& image);

    /// Continues the loop from an already-judged trace until the threshold
    /// or the refinement cap; selects the best-scoring entry.
    CaptionTrace refine_caption(const ImageRecord& image, CaptionTrace trace_so_far);

    /// Full pipeline slice: generate, judge, refine. On error the partial
    /// trace is left in `out`.
    void produce_into(const ImageRecord& image, CaptionTrace& out);
    CaptionTrace produce(const ImageRecord& image);

private:
    Caption generate_with_guard(const ImageRecord& image, const ChatRequest& request,
                                int attempt, std::vector<std::string>& flags_out,
                                bool& regenerated_out);
    void finalize(CaptionTrace& trace) const;

    Gateway& gateway_;
    const TemplateSet& templates_;
    Score threshold_;
    int max_refinements_;
    ModelEndpoint captioner_endpoint_;
    ModelEndpoint judge_endpoint_;
    const LeakageLexicon* lexicon_;
};

}  // namespace agrivqa
