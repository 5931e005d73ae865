#pragma once

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "agrivqa/config.hpp"
#include "agrivqa/image_store.hpp"

namespace agrivqa {

class TranscriptLog;

/// Pipeline stage a request belongs to. Mock rule matching and the
/// image-isolation invariant key off this, not prompt text.
enum class StageTag { Caption, CaptionJudge, Vqa, AnswerJudge, QaJudge };

std::string stage_tag_name(StageTag tag);
StageTag stage_tag_from_name(const std::string& name);

/// Stages whose requests must never carry image parts (judging runs on text
/// alone).
bool stage_allows_images(StageTag tag);

struct TextPart {
    std::string text;
    bool operator==(const TextPart&) const = default;
};
struct ImagePart {
    std::string image_ref;
    bool operator==(const ImagePart&) const = default;
};
using MessagePart = std::variant<TextPart, ImagePart>;

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::vector<MessagePart> parts;

    static ChatMessage text(std::string role, std::string body) {
        return ChatMessage{std::move(role), {TextPart{std::move(body)}}};
    }
};

struct ChatRequest {
    StageTag stage = StageTag::Caption;
    ModelEndpoint endpoint;
    std::vector<ChatMessage> messages;

    int image_part_count() const;
    /// Content hash of the fully rendered prompt (roles, text, image refs).
    std::string fingerprint() const;
};

/// Validating constructor: enforces at least one user message and the
/// per-stage image rule at request-build time.
ChatRequest make_chat_request(StageTag stage, ModelEndpoint endpoint,
                              std::vector<ChatMessage> messages);

struct ChatResponse {
    std::string text;
    std::int64_t latency_ms = 0;
    int attempt_count = 1;
    std::string endpoint_name;
};

/// One backend = one way of answering chat requests (mock script, remote
/// HTTP, or an in-test lambda).
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Single attempt; throws TransportError for retryable failures.
    virtual std::string complete(const ChatRequest& request) = 0;
};

class LambdaBackend final : public ChatBackend {
public:
    using Fn = std::function<std::string(const ChatRequest&)>;
    explicit LambdaBackend(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const ChatRequest& request) override { return fn_(request); }

private:
    Fn fn_;
};

/// Retry backoff: 1s, 2s, 4s, ... doubling, capped at the attempt timeout.
std::int64_t backoff_delay_ms(int failed_attempts, int timeout_seconds);

/// Counting semaphore bounding in-flight requests across all endpoints.
class Semaphore {
public:
    explicit Semaphore(int count) : count_(count) {}
    void acquire();
    void release();

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int count_;
};

/// Provider-agnostic chat client: retries with exponential backoff, bounds
/// concurrency, and appends every request/response pair to the transcript.
class Gateway {
public:
    using SleepFn = std::function<void(std::int64_t /*ms*/)>;

    Gateway(std::shared_ptr<ChatBackend> backend, int concurrency_limit,
            TranscriptLog* transcript = nullptr, SleepFn sleep = nullptr);

    /// Routes by endpoint; mock endpoints resolve through `mock`, remote
    /// endpoints through an HTTP client. `image_store` backs image encoding.
    static std::shared_ptr<Gateway> for_pipeline(std::shared_ptr<ChatBackend> mock_backend,
                                                 const ImageStore* image_store,
                                                 int concurrency_limit,
                                                 TranscriptLog* transcript);

    ChatResponse complete_chat(const ChatRequest& request);

private:
    std::shared_ptr<ChatBackend> backend_;
    Semaphore semaphore_;
    TranscriptLog* transcript_;
    SleepFn sleep_;
};

/// HTTP chat-completion backend (OpenAI-style wire format). Credentials come
/// from the environment variable named in the endpoint.
class RemoteBackend final : public ChatBackend {
public:
    explicit RemoteBackend(const ImageStore* image_store) : image_store_(image_store) {}
    std::string complete(const ChatRequest& request) override;

    /// Request body builder, exposed for tests.
    static nlohmann::json build_body(const ChatRequest& request, const ImageStore* store);

private:
    const ImageStore* image_store_;
};

/// Routes each request to the backend matching its endpoint kind.
class RoutingBackend final : public ChatBackend {
public:
    RoutingBackend(std::shared_ptr<ChatBackend> mock_backend,
                   std::shared_ptr<ChatBackend> remote_backend)
        : mock_(std::move(mock_backend)), remote_(std::move(remote_backend)) {}
    std::string complete(const ChatRequest& request) override;

private:
    std::shared_ptr<ChatBackend> mock_;
    std::shared_ptr<ChatBackend> remote_;
};

}  // namespace agrivqa
