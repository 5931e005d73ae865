#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agrivqa/score.hpp"

namespace agrivqa {

enum class EndpointKind { Remote, Mock };

std::string endpoint_kind_name(EndpointKind kind);

struct ModelEndpoint {
    EndpointKind kind = EndpointKind::Mock;
    std::string model_name;
    double temperature = 0.5;
    int max_tokens = 400;
    double top_p = 0.8;
    int max_retries = 3;
    int timeout_seconds = 30;
    std::string reasoning_effort = "medium";  // empty = omit from requests
    std::string verbosity = "low";            // empty = omit from requests
    std::string base_url;                     // remote only
    std::string credential_env;               // remote only
    std::string script_path;                  // mock only

    /// Identity used in cache keys and transcripts.
    std::string name() const { return endpoint_kind_name(kind) + ":" + model_name; }

    /// Digest over the decode parameters only; retries/timeout do not change
    /// response semantics and stay out of cache keys.
    std::string decode_params_digest() const;

    bool operator==(const ModelEndpoint&) const = default;
};

/// Which answer text the harness evaluates. Auto resolves to Selected for
/// judged strategies and BestOfPair otherwise.
enum class EvalTarget { Auto, Selected, BestOfPair, Answer1, Concatenated };

std::string eval_target_name(EvalTarget t);
EvalTarget eval_target_from_name(const std::string& name);

/// What the few-shot exemplar blocks embed.
enum class ExemplarMode { ImagesAndCaptions, CaptionsOnly };

struct AblationSpec {
    std::vector<std::string> strategies;  // e.g. "baseline", "caption+3shot+judge"
    std::string diagnosis_dataset;        // optional paths, resolved against config dir
    std::string knowledge_dataset;
    std::vector<ModelEndpoint> caption_sources;  // empty: the config's captioner
    std::vector<ModelEndpoint> models;           // empty: the config's vqa endpoint

    bool operator==(const AblationSpec&) const = default;
};

struct PipelineConfig {
    Score caption_threshold = Score::from_tenths(80);
    int max_refinements = 3;
    int shot_count = 0;
    ModelEndpoint captioner;
    ModelEndpoint caption_judge;
    ModelEndpoint vqa;
    ModelEndpoint answer_judge;
    std::string leakage_lexicon_path;  // empty disables the guard
    int concurrency_limit = 1;

    // Harness plumbing beyond the four stage endpoints.
    std::string exemplar_pool_path;  // required when shot_count > 0
    std::string synonym_table_path;
    std::string templates_path;  // optional template overrides
    EvalTarget eval_target = EvalTarget::Auto;
    ExemplarMode exemplar_mode = ExemplarMode::ImagesAndCaptions;
    bool reference_free = false;  // judge without dataset references
    std::uint64_t seed = 0;
    AblationSpec ablation;

    /// Directory the config file was loaded from; relative paths inside the
    /// config resolve against it.
    std::filesystem::path base_dir;

    std::string digest() const;

    std::filesystem::path resolve(const std::string& path) const {
        std::filesystem::path p(path);
        return p.is_absolute() ? p : base_dir / p;
    }
};

/// Parses the config document. Throws on malformed JSON or unknown fields.
PipelineConfig parse_config(const nlohmann::json& doc,
                            const std::filesystem::path& base_dir);

PipelineConfig load_config(const std::filesystem::path& path);

/// Returns every violated invariant as "field.path: problem". Empty means
/// the config is valid with defaults filled.
std::vector<std::string> validate_config(const PipelineConfig& cfg);

/// load + validate; throws a config error listing every violation.
PipelineConfig load_validated_config(const std::filesystem::path& path);

nlohmann::json config_snapshot(const PipelineConfig& cfg);

void to_json(nlohmann::json& j, const ModelEndpoint& e);
void from_json(const nlohmann::json& j, ModelEndpoint& e);

}  // namespace agrivqa
