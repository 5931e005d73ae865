#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace agrivqa {

/// One strategy in the ablation lattice: baseline, caption only,
/// caption + k-shot, caption + k-shot + judge.
struct Strategy {
    bool use_caption = false;
    int shots = 0;
    bool use_judge = false;

    std::string tag() const;

    /// Parses "baseline" or '+'-joined tokens of {caption, <k>shot, judge};
    /// shots and judge require caption.
    static Strategy parse(const std::string& text);

    bool operator==(const Strategy&) const = default;
};

/// One (caption source, model, strategy) combination with its metrics.
struct AblationCell {
    std::string caption_source;  // captioner model tag; "none" for baseline
    std::string model;           // VQA model tag
    std::string strategy;
    std::string status = "ok";  // "ok" | "failed"
    std::string error;
    std::optional<std::string> crop_accuracy;     // "63.38"
    std::optional<std::string> disease_accuracy;  // "33.70"
    std::optional<std::string> qa_score;          // "84.5"
};

void to_json(nlohmann::json& j, const AblationCell& c);
void from_json(const nlohmann::json& j, AblationCell& c);

/// Human-readable results table: rows grouped caption source -> model ->
/// strategy, baseline rows repeated inside every group, best row per model
/// block marked with '*'.
std::string render_results_table(const std::vector<AblationCell>& cells);

}  // namespace agrivqa
