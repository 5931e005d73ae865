#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "agrivqa/gateway.hpp"

namespace agrivqa {

enum class ExhaustionPolicy { RepeatLast, Error };

struct MockRule {
    std::string stage;                 // stage tag name
    std::string match = "*";           // request fingerprint or "*"
    std::vector<std::string> responses;
    int fail_times = 0;                // transient failures before responding
    bool fail_always = false;
};

/// Ordered scripted responses: first matching unconsumed rule wins; a rule
/// is consumed response by response and matching falls through to later
/// rules once it is spent.
struct MockScript {
    ExhaustionPolicy exhaustion = ExhaustionPolicy::RepeatLast;
    std::vector<MockRule> rules;
};

/// Parses and validates a script file. With exhaustion=error every stage
/// that appears in the rules must carry a wildcard default rule
/// (MissingDefaultRule otherwise). Parse failures report the line number.
MockScript load_mock_script(const std::filesystem::path& path);

/// Scripted chat backend. Responses are a pure function of
/// (stage tag, request order within that stage's matching rules).
///
/// When a state path is given, per-rule consumption cursors persist across
/// processes so a resumed run continues exactly where the interrupted run
/// stopped.
class MockBackend final : public ChatBackend {
public:
    explicit MockBackend(MockScript script, std::filesystem::path state_path = {});

    std::string complete(const ChatRequest& request) override;

    /// Consumption cursor for tests: (failures delivered, responses
    /// delivered) for rule `index`.
    std::pair<int, int> rule_cursor(std::size_t index) const;

private:
    struct RuleState {
        int failures_delivered = 0;
        int responses_delivered = 0;
    };

    void load_state();
    void save_state_locked();

    MockScript script_;
    std::filesystem::path state_path_;
    mutable std::mutex mutex_;
    std::vector<RuleState> state_;
};

}  // namespace agrivqa
