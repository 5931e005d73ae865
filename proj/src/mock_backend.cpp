#include "agrivqa/mock_backend.hpp"

#include <set>

#include <json.hpp>

#include "agrivqa/errors.hpp"
#include "agrivqa/util.hpp"

namespace agrivqa {

MockScript load_mock_script(const std::filesystem::path& path) {
    const auto doc = parse_json_file(path, "mock script");
    MockScript script;
    const std::string policy = doc.value("exhaustion", "repeat_last");
    if (policy == "repeat_last") {
        script.exhaustion = ExhaustionPolicy::RepeatLast;
    } else if (policy == "error") {
        script.exhaustion = ExhaustionPolicy::Error;
    } else {
        throw config_error("BadExhaustionPolicy",
                           "exhaustion must be repeat_last or error: " + policy);
    }
    if (!doc.contains("rules") || !doc.at("rules").is_array()) {
        throw config_error("ParseError", "mock script needs a rules array: " + path.string());
    }
    std::size_t index = 0;
    for (const auto& r : doc.at("rules")) {
        MockRule rule;
        if (!r.contains("stage")) {
            throw config_error("ParseError",
                               "mock rule " + std::to_string(index) + " missing stage");
        }
        rule.stage = r.at("stage").get<std::string>();
        stage_tag_from_name(rule.stage);  // validates the name
        rule.match = r.value("match", "*");
        if (r.contains("responses")) r.at("responses").get_to(rule.responses);
        if (r.contains("fail")) {
            rule.fail_always = r.at("fail").get<std::string>() == "always";
        }
        rule.fail_times = r.value("fail_times", 0);
        if (!rule.fail_always && rule.responses.empty()) {
            throw config_error("ParseError", "mock rule " + std::to_string(index) +
                                                 " has no responses and is not fail=always");
        }
        script.rules.push_back(std::move(rule));
        ++index;
    }
    if (script.exhaustion == ExhaustionPolicy::Error) {
        std::set<std::string> stages, with_default;
        for (const auto& rule : script.rules) {
            stages.insert(rule.stage);
            if (rule.match == "*") with_default.insert(rule.stage);
        }
        for (const auto& stage : stages) {
            if (!with_default.contains(stage)) {
                throw config_error("MissingDefaultRule",
                                   "stage " + stage + " has no wildcard default rule");
            }
        }
    }
    return script;
}

MockBackend::MockBackend(MockScript script, std::filesystem::path state_path)
    : script_(std::move(script)), state_path_(std::move(state_path)) {
    state_.resize(script_.rules.size());
    load_state();
}

void MockBackend::load_state() {
    if (state_path_.empty()) return;
    const auto content = try_read_file(state_path_);
    if (!content) return;
    const auto doc = nlohmann::json::parse(*content);
    const auto& cursors = doc.at("cursors");
    for (std::size_t i = 0; i < state_.size() && i < cursors.size(); ++i) {
        state_[i].failures_delivered = cursors[i][0].get<int>();
        state_[i].responses_delivered = cursors[i][1].get<int>();
    }
}

void MockBackend::save_state_locked() {
    if (state_path_.empty()) return;
    nlohmann::json cursors = nlohmann::json::array();
    for (const auto& s : state_) {
        cursors.push_back({s.failures_delivered, s.responses_delivered});
    }
    write_file_atomic(state_path_, nlohmann::json{{"cursors", cursors}}.dump());
}

std::string MockBackend::complete(const ChatRequest& request) {
    const std::string stage = stage_tag_name(request.stage);
    const std::string fingerprint = request.fingerprint();

    std::lock_guard lock(mutex_);
    bool any_match = false;
    for (std::size_t i = 0; i < script_.rules.size(); ++i) {
        const MockRule& rule = script_.rules[i];
        if (rule.stage != stage) continue;
        if (rule.match != "*" && rule.match != fingerprint) continue;
        any_match = true;
        RuleState& state = state_[i];
        if (rule.fail_always) {
            save_state_locked();
            throw TransportError("scripted failure (stage " + stage + ")");
        }
        if (state.failures_delivered < rule.fail_times) {
            ++state.failures_delivered;
            save_state_locked();
            throw TransportError("scripted transient failure (stage " + stage + ")");
        }
        if (state.responses_delivered < static_cast<int>(rule.responses.size())) {
            const std::string& text = rule.responses[state.responses_delivered];
            ++state.responses_delivered;
            save_state_locked();
            return text;
        }
        // rule spent; fall through to later rules
    }

    if (any_match && script_.exhaustion == ExhaustionPolicy::RepeatLast) {
        // Repeat the most recent delivery among matching rules.
        for (std::size_t i = script_.rules.size(); i-- > 0;) {
            const MockRule& rule = script_.rules[i];
            if (rule.stage != stage) continue;
            if (rule.match != "*" && rule.match != fingerprint) continue;
            if (rule.fail_always) continue;
            if (state_[i].responses_delivered > 0) {
                return rule.responses[state_[i].responses_delivered - 1];
            }
        }
    }
    throw endpoint_error("NoMatchingRule", "no scripted response for stage " + stage +
                                               " (fingerprint " + fingerprint.substr(0, 12) +
                                               "...)");
}

std::pair<int, int> MockBackend::rule_cursor(std::size_t index) const {
    std::lock_guard lock(mutex_);
    return {state_.at(index).failures_delivered, state_.at(index).responses_delivered};
}

}  // namespace agrivqa
