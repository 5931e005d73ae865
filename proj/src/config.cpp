#include "agrivqa/config.hpp"

#include <set>

#include "agrivqa/errors.hpp"
#include "agrivqa/hash.hpp"
#include "agrivqa/util.hpp"

namespace agrivqa {

std::string endpoint_kind_name(EndpointKind kind) {
    return kind == EndpointKind::Remote ? "remote" : "mock";
}

std::string ModelEndpoint::decode_params_digest() const {
    nlohmann::ordered_json j{{"temperature", temperature},
                             {"max_tokens", max_tokens},
                             {"top_p", top_p},
                             {"reasoning_effort", reasoning_effort},
                             {"verbosity", verbosity}};
    return content_hash(j.dump());
}

std::string eval_target_name(EvalTarget t) {
    switch (t) {
        case EvalTarget::Auto: return "auto";
        case EvalTarget::Selected: return "selected";
        case EvalTarget::BestOfPair: return "best_of_pair";
        case EvalTarget::Answer1: return "answer_1";
        case EvalTarget::Concatenated: return "concatenated";
    }
    return "auto";
}

EvalTarget eval_target_from_name(const std::string& name) {
    if (name == "auto") return EvalTarget::Auto;
    if (name == "selected") return EvalTarget::Selected;
    if (name == "best_of_pair") return EvalTarget::BestOfPair;
    if (name == "answer_1") return EvalTarget::Answer1;
    if (name == "concatenated") return EvalTarget::Concatenated;
    throw config_error("UnknownEvalTarget", "unknown eval_target: " + name);
}

void to_json(nlohmann::json& j, const ModelEndpoint& e) {
    j = nlohmann::json{{"kind", endpoint_kind_name(e.kind)},
                       {"model_name", e.model_name},
                       {"temperature", e.temperature},
                       {"max_tokens", e.max_tokens},
                       {"top_p", e.top_p},
                       {"max_retries", e.max_retries},
                       {"timeout_seconds", e.timeout_seconds},
                       {"reasoning_effort", e.reasoning_effort},
                       {"verbosity", e.verbosity},
                       {"base_url", e.base_url},
                       {"credential_env", e.credential_env},
                       {"script_path", e.script_path}};
}

void from_json(const nlohmann::json& j, ModelEndpoint& e) {
    const std::string kind = j.value("kind", "mock");
    if (kind == "remote") {
        e.kind = EndpointKind::Remote;
    } else if (kind == "mock") {
        e.kind = EndpointKind::Mock;
    } else {
        throw config_error("UnknownEndpointKind", "endpoint kind must be remote or mock: " + kind);
    }
    e.model_name = j.value("model_name", e.model_name);
    e.temperature = j.value("temperature", e.temperature);
    e.max_tokens = j.value("max_tokens", e.max_tokens);
    e.top_p = j.value("top_p", e.top_p);
    e.max_retries = j.value("max_retries", e.max_retries);
    e.timeout_seconds = j.value("timeout_seconds", e.timeout_seconds);
    e.reasoning_effort = j.value("reasoning_effort", e.reasoning_effort);
    e.verbosity = j.value("verbosity", e.verbosity);
    e.base_url = j.value("base_url", e.base_url);
    e.credential_env = j.value("credential_env", e.credential_env);
    e.script_path = j.value("script_path", e.script_path);
}

namespace {

const std::set<std::string> kKnownTopLevel = {
    "caption_threshold", "max_refinements", "shot_count",      "captioner",
    "caption_judge",     "vqa",             "answer_judge",    "leakage_lexicon_path",
    "concurrency_limit", "exemplar_pool_path", "synonym_table_path", "templates_path",
    "eval_target",       "exemplar_mode",   "reference_free",  "seed",
    "ablation"};

Score parse_threshold(const nlohmann::json& v) {
    if (v.is_number()) {
        auto s = Score::parse(nlohmann::json(v).dump());
        if (s) return *s;
    } else if (v.is_string()) {
        auto s = Score::parse(v.get<std::string>());
        if (s) return *s;
    }
    throw config_error("BadThreshold", "caption_threshold must be a number like 8.0");
}

}  // namespace

PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) {
        throw config_error("BadConfig", "config document must be an object");
    }
    for (const auto& [key, _] : doc.items()) {
        if (!kKnownTopLevel.contains(key)) {
            throw config_error("UnknownField", "unknown config field: " + key);
        }
    }
    PipelineConfig cfg;
    cfg.base_dir = base_dir;
    if (doc.contains("caption_threshold")) {
        cfg.caption_threshold = parse_threshold(doc.at("caption_threshold"));
    }
    cfg.max_refinements = doc.value("max_refinements", cfg.max_refinements);
    cfg.shot_count = doc.value("shot_count", cfg.shot_count);
    if (doc.contains("captioner")) doc.at("captioner").get_to(cfg.captioner);
    if (doc.contains("caption_judge")) doc.at("caption_judge").get_to(cfg.caption_judge);
    if (doc.contains("vqa")) doc.at("vqa").get_to(cfg.vqa);
    if (doc.contains("answer_judge")) doc.at("answer_judge").get_to(cfg.answer_judge);
    cfg.leakage_lexicon_path = doc.value("leakage_lexicon_path", cfg.leakage_lexicon_path);
    cfg.concurrency_limit = doc.value("concurrency_limit", cfg.concurrency_limit);
    cfg.exemplar_pool_path = doc.value("exemplar_pool_path", cfg.exemplar_pool_path);
    cfg.synonym_table_path = doc.value("synonym_table_path", cfg.synonym_table_path);
    cfg.templates_path = doc.value("templates_path", cfg.templates_path);
    if (doc.contains("eval_target")) {
        cfg.eval_target = eval_target_from_name(doc.at("eval_target").get<std::string>());
    }
    if (doc.contains("exemplar_mode")) {
        const std::string mode = doc.at("exemplar_mode").get<std::string>();
        if (mode == "images_and_captions") {
            cfg.exemplar_mode = ExemplarMode::ImagesAndCaptions;
        } else if (mode == "captions_only") {
            cfg.exemplar_mode = ExemplarMode::CaptionsOnly;
        } else {
            throw config_error("UnknownExemplarMode", "unknown exemplar_mode: " + mode);
        }
    }
    cfg.reference_free = doc.value("reference_free", cfg.reference_free);
    cfg.seed = doc.value("seed", cfg.seed);
    if (doc.contains("ablation")) {
        const auto& ab = doc.at("ablation");
        cfg.ablation.strategies = ab.value("strategies", std::vector<std::string>{});
        cfg.ablation.diagnosis_dataset = ab.value("diagnosis_dataset", std::string{});
        cfg.ablation.knowledge_dataset = ab.value("knowledge_dataset", std::string{});
        if (ab.contains("caption_sources")) {
            for (const auto& e : ab.at("caption_sources")) {
                cfg.ablation.caption_sources.push_back(e.get<ModelEndpoint>());
            }
        }
        if (ab.contains("models")) {
            for (const auto& e : ab.at("models")) {
                cfg.ablation.models.push_back(e.get<ModelEndpoint>());
            }
        }
    }
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    const auto doc = parse_json_file(path, "config");
    return parse_config(doc, std::filesystem::absolute(path).parent_path());
}

namespace {

void validate_endpoint(const std::string& field, const ModelEndpoint& e,
                       const PipelineConfig& cfg, std::vector<std::string>& errors) {
    if (e.kind == EndpointKind::Remote) {
        if (e.base_url.empty()) errors.push_back(field + ".base_url: required for remote endpoints");
        if (e.credential_env.empty())
            errors.push_back(field + ".credential_env: required for remote endpoints");
    } else {
        if (e.script_path.empty()) errors.push_back(field + ".script_path: required for mock endpoints");
    }
    if (e.model_name.empty()) errors.push_back(field + ".model_name: must be non-empty");
    if (e.max_retries < 0) errors.push_back(field + ".max_retries: must be >= 0");
    if (e.timeout_seconds <= 0) errors.push_back(field + ".timeout_seconds: must be > 0");
    if (e.max_tokens <= 0) errors.push_back(field + ".max_tokens: must be > 0");
    if (e.temperature < 0.0 || e.temperature > 2.0)
        errors.push_back(field + ".temperature: out of range [0,2]");
    if (e.top_p <= 0.0 || e.top_p > 1.0) errors.push_back(field + ".top_p: out of range (0,1]");
    if (e.kind == EndpointKind::Mock && !e.script_path.empty() &&
        !std::filesystem::exists(cfg.resolve(e.script_path))) {
        errors.push_back(field + ".script_path: file not found: " + e.script_path);
    }
}

}  // namespace

std::vector<std::string> validate_config(const PipelineConfig& cfg) {
    std::vector<std::string> errors;
    if (cfg.caption_threshold <= Score::from_tenths(0) ||
        cfg.caption_threshold > Score::from_tenths(100)) {
        errors.push_back("caption_threshold out of range (0,10]");
    }
    if (cfg.max_refinements < 1) errors.push_back("max_refinements: must be >= 1");
    if (cfg.shot_count < 0) errors.push_back("shot_count: must be >= 0");
    if (cfg.shot_count > 5) errors.push_back("shot_count exceeds 5");
    if (cfg.concurrency_limit < 1) errors.push_back("concurrency_limit: must be >= 1");
    validate_endpoint("captioner", cfg.captioner, cfg, errors);
    validate_endpoint("caption_judge", cfg.caption_judge, cfg, errors);
    validate_endpoint("vqa", cfg.vqa, cfg, errors);
    validate_endpoint("answer_judge", cfg.answer_judge, cfg, errors);
    if (!cfg.leakage_lexicon_path.empty() &&
        !std::filesystem::exists(cfg.resolve(cfg.leakage_lexicon_path))) {
        errors.push_back("leakage_lexicon_path: file not found: " + cfg.leakage_lexicon_path);
    }
    if (cfg.shot_count > 0 && cfg.exemplar_pool_path.empty()) {
        errors.push_back("exemplar_pool_path: required when shot_count > 0");
    }
    return errors;
}

PipelineConfig load_validated_config(const std::filesystem::path& path) {
    PipelineConfig cfg = load_config(path);
    const auto errors = validate_config(cfg);
    if (!errors.empty()) {
        std::string joined;
        for (const auto& e : errors) {
            if (!joined.empty()) joined += "; ";
            joined += e;
        }
        throw config_error("InvalidConfig", joined);
    }
    return cfg;
}

nlohmann::json config_snapshot(const PipelineConfig& cfg) {
    nlohmann::ordered_json j;
    j["caption_threshold"] = cfg.caption_threshold.str();
    j["max_refinements"] = cfg.max_refinements;
    j["shot_count"] = cfg.shot_count;
    nlohmann::json ep;
    to_json(ep, cfg.captioner);
    j["captioner"] = ep;
    to_json(ep, cfg.caption_judge);
    j["caption_judge"] = ep;
    to_json(ep, cfg.vqa);
    j["vqa"] = ep;
    to_json(ep, cfg.answer_judge);
    j["answer_judge"] = ep;
    j["leakage_lexicon_path"] = cfg.leakage_lexicon_path;
    j["concurrency_limit"] = cfg.concurrency_limit;
    j["exemplar_pool_path"] = cfg.exemplar_pool_path;
    j["synonym_table_path"] = cfg.synonym_table_path;
    j["templates_path"] = cfg.templates_path;
    j["eval_target"] = eval_target_name(cfg.eval_target);
    j["exemplar_mode"] = cfg.exemplar_mode == ExemplarMode::ImagesAndCaptions
                             ? "images_and_captions"
                             : "captions_only";
    j["reference_free"] = cfg.reference_free;
    j["seed"] = cfg.seed;
    nlohmann::json sources = nlohmann::json::array();
    for (const auto& e : cfg.ablation.caption_sources) {
        to_json(ep, e);
        sources.push_back(ep);
    }
    nlohmann::json models = nlohmann::json::array();
    for (const auto& e : cfg.ablation.models) {
        to_json(ep, e);
        models.push_back(ep);
    }
    j["ablation"] = nlohmann::ordered_json{{"strategies", cfg.ablation.strategies},
                                           {"diagnosis_dataset", cfg.ablation.diagnosis_dataset},
                                           {"knowledge_dataset", cfg.ablation.knowledge_dataset},
                                           {"caption_sources", sources},
                                           {"models", models}};
    return j;
}

std::string PipelineConfig::digest() const {
    return content_hash(config_snapshot(*this).dump());
}

}  // namespace agrivqa
