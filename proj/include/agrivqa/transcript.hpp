#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "agrivqa/gateway.hpp"

namespace agrivqa {

struct TranscriptEntry {
    std::int64_t seq = 0;
    std::string stage;
    std::string endpoint;
    std::string fingerprint;
    int image_parts = 0;
    int attempt_count = 1;
    nlohmann::json request_messages;
    std::string response_text;
    std::int64_t latency_ms = 0;
};

/// Append-only line-delimited request/response log, one file per run.
/// Judge decisions are audited from this file.
class TranscriptLog {
public:
    explicit TranscriptLog(std::filesystem::path path);

    void append(const ChatRequest& request, const ChatResponse& response);

    const std::filesystem::path& path() const { return path_; }

    /// Number of entries currently on disk (for call-count assertions).
    static std::vector<TranscriptEntry> read_all(const std::filesystem::path& path);

private:
    std::filesystem::path path_;
    std::mutex mutex_;
    std::int64_t next_seq_;
};

}  // namespace agrivqa
