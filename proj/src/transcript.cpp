#include "agrivqa/transcript.hpp"

#include <fstream>

#include "agrivqa/errors.hpp"
#include "agrivqa/util.hpp"

namespace agrivqa {

TranscriptLog::TranscriptLog(std::filesystem::path path) : path_(std::move(path)), next_seq_(1) {
    // Continue numbering when the log already exists (resumed runs append).
    next_seq_ += static_cast<std::int64_t>(read_lines(path_).size());
}

void TranscriptLog::append(const ChatRequest& request, const ChatResponse& response) {
    nlohmann::ordered_json messages = nlohmann::json::array();
    for (const auto& message : request.messages) {
        nlohmann::ordered_json m{{"role", message.role}};
        std::string text;
        std::vector<std::string> images;
        for (const auto& part : message.parts) {
            if (const auto* t = std::get_if<TextPart>(&part)) {
                if (!text.empty()) text += "\n";
                text += t->text;
            } else {
                images.push_back(std::get<ImagePart>(part).image_ref);
            }
        }
        m["text"] = text;
        m["images"] = images;
        messages.push_back(std::move(m));
    }

    std::lock_guard lock(mutex_);
    nlohmann::ordered_json entry{{"seq", next_seq_++},
                                 {"stage", stage_tag_name(request.stage)},
                                 {"endpoint", response.endpoint_name},
                                 {"fingerprint", request.fingerprint()},
                                 {"image_parts", request.image_part_count()},
                                 {"attempt_count", response.attempt_count},
                                 {"request", std::move(messages)},
                                 {"response", response.text},
                                 {"latency_ms", response.latency_ms}};
    append_line(path_, entry.dump());
}

std::vector<TranscriptEntry> TranscriptLog::read_all(const std::filesystem::path& path) {
    std::vector<TranscriptEntry> entries;
    for (const auto& line : read_lines(path)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        TranscriptEntry entry;
        entry.seq = j.at("seq").get<std::int64_t>();
        entry.stage = j.at("stage").get<std::string>();
        entry.endpoint = j.at("endpoint").get<std::string>();
        entry.fingerprint = j.at("fingerprint").get<std::string>();
        entry.image_parts = j.at("image_parts").get<int>();
        entry.attempt_count = j.at("attempt_count").get<int>();
        entry.request_messages = j.at("request");
        entry.response_text = j.at("response").get<std::string>();
        entry.latency_ms = j.at("latency_ms").get<std::int64_t>();
        entries.push_back(std::move(entry));
    }
    return entries;
}

}  // namespace agrivqa
