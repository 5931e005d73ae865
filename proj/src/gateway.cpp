#include "agrivqa/gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "agrivqa/errors.hpp"
#include "agrivqa/hash.hpp"
#include "agrivqa/transcript.hpp"

namespace agrivqa {

std::string stage_tag_name(StageTag tag) {
    switch (tag) {
        case StageTag::Caption: return "caption";
        case StageTag::CaptionJudge: return "caption-judge";
        case StageTag::Vqa: return "vqa";
        case StageTag::AnswerJudge: return "answer-judge";
        case StageTag::QaJudge: return "qa-judge";
    }
    return "caption";
}

StageTag stage_tag_from_name(const std::string& name) {
    if (name == "caption") return StageTag::Caption;
    if (name == "caption-judge") return StageTag::CaptionJudge;
    if (name == "vqa") return StageTag::Vqa;
    if (name == "answer-judge") return StageTag::AnswerJudge;
    if (name == "qa-judge") return StageTag::QaJudge;
    throw config_error("UnknownStage", "unknown stage tag: " + name);
}

bool stage_allows_images(StageTag tag) {
    return tag != StageTag::AnswerJudge && tag != StageTag::QaJudge;
}

int ChatRequest::image_part_count() const {
    int count = 0;
    for (const auto& message : messages) {
        for (const auto& part : message.parts) {
            if (std::holds_alternative<ImagePart>(part)) ++count;
        }
    }
    return count;
}

std::string ChatRequest::fingerprint() const {
    std::vector<std::string> parts;
    parts.push_back(stage_tag_name(stage));
    for (const auto& message : messages) {
        parts.push_back(message.role);
        for (const auto& part : message.parts) {
            if (const auto* text = std::get_if<TextPart>(&part)) {
                parts.push_back("t:" + text->text);
            } else {
                parts.push_back("i:" + std::get<ImagePart>(part).image_ref);
            }
        }
    }
    return content_hash_parts(parts);
}

ChatRequest make_chat_request(StageTag stage, ModelEndpoint endpoint,
                              std::vector<ChatMessage> messages) {
    bool has_user = false;
    int images = 0;
    for (const auto& message : messages) {
        if (message.role == "user") has_user = true;
        for (const auto& part : message.parts) {
            if (std::holds_alternative<ImagePart>(part)) ++images;
        }
    }
    if (!has_user) {
        throw internal_error("BadRequest", "chat request needs at least one user message");
    }
    if (images > 0 && !stage_allows_images(stage)) {
        throw internal_error("ImageNotAllowed", "stage " + stage_tag_name(stage) +
                                                    " must not carry image parts");
    }
    return ChatRequest{stage, std::move(endpoint), std::move(messages)};
}

std::int64_t backoff_delay_ms(int failed_attempts, int timeout_seconds) {
    if (failed_attempts < 1) return 0;
    const std::int64_t cap = static_cast<std::int64_t>(timeout_seconds) * 1000;
    std::int64_t delay = 1000;
    for (int i = 1; i < failed_attempts && delay < cap; ++i) delay *= 2;
    return std::min(delay, cap);
}

void Semaphore::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return count_ > 0; });
    --count_;
}

void Semaphore::release() {
    {
        std::lock_guard lock(mutex_);
        ++count_;
    }
    cv_.notify_one();
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, int concurrency_limit,
                 TranscriptLog* transcript, SleepFn sleep)
    : backend_(std::move(backend)),
      semaphore_(concurrency_limit < 1 ? 1 : concurrency_limit),
      transcript_(transcript),
      sleep_(std::move(sleep)) {}

std::shared_ptr<Gateway> Gateway::for_pipeline(std::shared_ptr<ChatBackend> mock_backend,
                                               const ImageStore* image_store,
                                               int concurrency_limit,
                                               TranscriptLog* transcript) {
    auto remote = std::make_shared<RemoteBackend>(image_store);
    auto routing = std::make_shared<RoutingBackend>(std::move(mock_backend), std::move(remote));
    return std::make_shared<Gateway>(std::move(routing), concurrency_limit, transcript);
}

ChatResponse Gateway::complete_chat(const ChatRequest& request) {
    semaphore_.acquire();
    struct Releaser {
        Semaphore& s;
        ~Releaser() { s.release(); }
    } releaser{semaphore_};

    const auto start = std::chrono::steady_clock::now();
    const int max_attempts = request.endpoint.max_retries + 1;
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        try {
            std::string text = backend_->complete(request);
            if (text.empty()) {
                throw endpoint_error("MalformedResponse",
                                     "empty response text from " + request.endpoint.name());
            }
            const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - start)
                                     .count();
            ChatResponse response{std::move(text), elapsed, attempt, request.endpoint.name()};
            if (transcript_) transcript_->append(request, response);
            return response;
        } catch (const TransportError& e) {
            last_error = e.what();
            if (attempt == max_attempts) break;
            const auto delay = backoff_delay_ms(attempt, request.endpoint.timeout_seconds);
            if (sleep_) {
                sleep_(delay);
            } else if (request.endpoint.kind == EndpointKind::Remote) {
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            }
        }
    }
    throw endpoint_error("RetriesExhausted",
                         request.endpoint.name() + " failed after " +
                             std::to_string(max_attempts) + " attempts: " + last_error);
}

nlohmann::json RemoteBackend::build_body(const ChatRequest& request, const ImageStore* store) {
    const ModelEndpoint& ep = request.endpoint;
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& message : request.messages) {
        nlohmann::json content = nlohmann::json::array();
        for (const auto& part : message.parts) {
            if (const auto* text = std::get_if<TextPart>(&part)) {
                content.push_back({{"type", "text"}, {"text", text->text}});
            } else {
                const auto& ref = std::get<ImagePart>(part).image_ref;
                if (!store) {
                    throw internal_error("NoImageStore", "image part without an image store");
                }
                const ImagePayload payload = encode_image(*store, ref);
                content.push_back(
                    {{"type", "image_url"},
                     {"image_url",
                      {{"url", "data:" + payload.media_type + ";base64," + payload.base64_body}}}});
            }
        }
        messages.push_back({{"role", message.role}, {"content", std::move(content)}});
    }
    nlohmann::json body{{"model", ep.model_name},
                        {"temperature", ep.temperature},
                        {"max_tokens", ep.max_tokens},
                        {"top_p", ep.top_p},
                        {"messages", std::move(messages)}};
    if (!ep.reasoning_effort.empty()) body["reasoning_effort"] = ep.reasoning_effort;
    if (!ep.verbosity.empty()) body["verbosity"] = ep.verbosity;
    return body;
}

std::string RemoteBackend::complete(const ChatRequest& request) {
    const ModelEndpoint& ep = request.endpoint;
    if (ep.base_url.empty()) {
        throw endpoint_error("MissingBaseUrl", "remote endpoint without base_url");
    }
    httplib::Client client(ep.base_url);
    client.set_connection_timeout(ep.timeout_seconds, 0);
    client.set_read_timeout(ep.timeout_seconds, 0);
    httplib::Headers headers;
    if (!ep.credential_env.empty()) {
        const char* credential = std::getenv(ep.credential_env.c_str());
        if (!credential) {
            throw endpoint_error("MissingCredential",
                                 "environment variable not set: " + ep.credential_env);
        }
        headers.emplace("Authorization", std::string("Bearer ") + credential);
    }
    const std::string body = build_body(request, image_store_).dump();
    auto result = client.Post("/chat/completions", headers, body, "application/json");
    if (!result) {
        throw TransportError("transport failure: " + httplib::to_string(result.error()));
    }
    if (result->status == 429 || result->status >= 500) {
        throw TransportError("http status " + std::to_string(result->status));
    }
    if (result->status != 200) {
        throw endpoint_error("HttpError", "http status " + std::to_string(result->status) +
                                              ": " + result->body);
    }
    try {
        const auto doc = nlohmann::json::parse(result->body);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw endpoint_error("MalformedResponse",
                             std::string("unparseable completion body: ") + e.what());
    }
}

std::string RoutingBackend::complete(const ChatRequest& request) {
    if (request.endpoint.kind == EndpointKind::Mock) {
        if (!mock_) throw config_error("NoMockBackend", "mock endpoint without a mock script");
        return mock_->complete(request);
    }
    return remote_->complete(request);
}

}  // namespace agrivqa
