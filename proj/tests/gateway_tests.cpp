#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "agrivqa/errors.hpp"
#include "agrivqa/gateway.hpp"
#include "agrivqa/mock_backend.hpp"
#include "agrivqa/transcript.hpp"
#include "agrivqa/util.hpp"
#include "test_support.hpp"

using namespace agrivqa;

namespace {

ModelEndpoint mock_endpoint(int max_retries = 3) {
    ModelEndpoint e;
    e.kind = EndpointKind::Mock;
    e.model_name = "mock-model";
    e.max_retries = max_retries;
    e.script_path = "unused";
    return e;
}

ChatRequest simple_request(StageTag stage, const ModelEndpoint& endpoint,
                           const std::string& body = "hello") {
    return make_chat_request(stage, endpoint, {ChatMessage::text("user", body)});
}

MockScript script_from_json(const std::string& json_text, testsupport::TempDir& tmp) {
    const auto path = tmp.write("script.json", json_text);
    return load_mock_script(path);
}

}  // namespace

TEST_CASE("request construction enforces the judge image ban") {
    const auto endpoint = mock_endpoint();
    CHECK_THROWS_AS(make_chat_request(StageTag::AnswerJudge, endpoint,
                                      {ChatMessage{"user", {ImagePart{"ref"}}}}),
                    Error);
    CHECK_THROWS_AS(make_chat_request(StageTag::QaJudge, endpoint,
                                      {ChatMessage{"user", {TextPart{"x"}, ImagePart{"r"}}}}),
                    Error);
    CHECK_NOTHROW(make_chat_request(StageTag::Caption, endpoint,
                                    {ChatMessage{"user", {TextPart{"x"}, ImagePart{"r"}}}}));
    CHECK_THROWS_AS(make_chat_request(StageTag::Caption, endpoint,
                                      {ChatMessage::text("system", "no user message")}),
                    Error);
}

TEST_CASE("fingerprints are deterministic and content-sensitive") {
    const auto endpoint = mock_endpoint();
    const auto a = simple_request(StageTag::Vqa, endpoint, "prompt one");
    const auto b = simple_request(StageTag::Vqa, endpoint, "prompt one");
    const auto c = simple_request(StageTag::Vqa, endpoint, "prompt two");
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint() != c.fingerprint());
    const auto d = simple_request(StageTag::Caption, endpoint, "prompt one");
    CHECK(a.fingerprint() != d.fingerprint());  // stage is part of the identity
}

TEST_CASE("backoff schedule doubles from 1s and caps at the timeout") {
    CHECK(backoff_delay_ms(1, 30) == 1000);
    CHECK(backoff_delay_ms(2, 30) == 2000);
    CHECK(backoff_delay_ms(3, 30) == 4000);
    CHECK(backoff_delay_ms(4, 30) == 8000);
    CHECK(backoff_delay_ms(3, 2) == 2000);  // capped
    CHECK(backoff_delay_ms(10, 30) == 30000);
}

TEST_CASE("mock: scripted response served with attempt_count 1") {
    testsupport::TempDir tmp("mock");
    auto script = script_from_json(
        R"({"rules":[{"stage":"caption","match":"*","responses":["ovate leaves"]}]})", tmp);
    auto backend = std::make_shared<MockBackend>(script);
    Gateway gateway(backend, 1);
    const auto response = gateway.complete_chat(simple_request(StageTag::Caption, mock_endpoint()));
    CHECK(response.text == "ovate leaves");
    CHECK(response.attempt_count == 1);
}

TEST_CASE("mock: fail twice then succeed lands on attempt 3") {
    testsupport::TempDir tmp("mock");
    auto script = script_from_json(
        R"({"rules":[{"stage":"vqa","match":"*","fail_times":2,"responses":["ok"]}]})", tmp);
    auto backend = std::make_shared<MockBackend>(script);
    Gateway gateway(backend, 1);
    const auto response = gateway.complete_chat(simple_request(StageTag::Vqa, mock_endpoint(3)));
    CHECK(response.text == "ok");
    CHECK(response.attempt_count == 3);
}

TEST_CASE("mock: always failing rule exhausts retries after 4 attempts") {
    testsupport::TempDir tmp("mock");
    auto script = script_from_json(
        R"({"rules":[{"stage":"vqa","match":"*","fail":"always"}]})", tmp);
    auto backend = std::make_shared<MockBackend>(script);
    Gateway gateway(backend, 1);
    try {
        gateway.complete_chat(simple_request(StageTag::Vqa, mock_endpoint(3)));
        FAIL("expected RetriesExhausted");
    } catch (const Error& e) {
        CHECK(e.code() == "RetriesExhausted");
        CHECK(std::string(e.what()).find("4 attempts") != std::string::npos);
        CHECK(e.exit_code() == 4);
    }
}

TEST_CASE("mock: empty scripted response is a MalformedResponse") {
    testsupport::TempDir tmp("mock");
    auto script = script_from_json(
        R"({"rules":[{"stage":"caption","match":"*","responses":[""]}]})", tmp);
    auto backend = std::make_shared<MockBackend>(script);
    Gateway gateway(backend, 1);
    try {
        gateway.complete_chat(simple_request(StageTag::Caption, mock_endpoint()));
        FAIL("expected MalformedResponse");
    } catch (const Error& e) {
        CHECK(e.code() == "MalformedResponse");
    }
}

TEST_CASE("mock: sequential responses then repeat_last on exhaustion") {
    testsupport::TempDir tmp("mock");
    auto script = script_from_json(
        R"({"exhaustion":"repeat_last",
            "rules":[{"stage":"caption","match":"*","responses":["first","second"]}]})",
        tmp);
    auto backend = std::make_shared<MockBackend>(script);
    Gateway gateway(backend, 1);
    const auto request = simple_request(StageTag::Caption, mock_endpoint());
    CHECK(gateway.complete_chat(request).text == "first");
    CHECK(gateway.complete_chat(request).text == "second");
    CHECK(gateway.complete_chat(request).text == "second");
    CHECK(gateway.complete_chat(request).text == "second");
}

TEST_CASE("mock: exhaustion policy error raises once the script is spent") {
    testsupport::TempDir tmp("mock");
    auto script = script_from_json(
        R"({"exhaustion":"error",
            "rules":[{"stage":"caption","match":"*","responses":["only"]}]})",
        tmp);
    auto backend = std::make_shared<MockBackend>(script);
    Gateway gateway(backend, 1);
    const auto request = simple_request(StageTag::Caption, mock_endpoint(0));
    CHECK(gateway.complete_chat(request).text == "only");
    CHECK_THROWS_AS(gateway.complete_chat(request), Error);
}

TEST_CASE("mock: fingerprint rules take precedence in declaration order") {
    testsupport::TempDir tmp("mock");
    const auto request = simple_request(StageTag::Vqa, mock_endpoint(), "specific prompt");
    const std::string fp = request.fingerprint();
    auto script = script_from_json(
        R"({"rules":[
            {"stage":"vqa","match":")" + fp + R"(","responses":["pinned"]},
            {"stage":"vqa","match":"*","responses":["default"]}]})",
        tmp);
    auto backend = std::make_shared<MockBackend>(script);
    Gateway gateway(backend, 1);
    CHECK(gateway.complete_chat(request).text == "pinned");
    const auto other = simple_request(StageTag::Vqa, mock_endpoint(), "another prompt");
    CHECK(gateway.complete_chat(other).text == "default");
    // pinned rule spent, the wildcard now covers the first prompt too
    CHECK(gateway.complete_chat(request).text == "default");
}

TEST_CASE("load_mock_script: missing default with policy=error is rejected") {
    testsupport::TempDir tmp("mock");
    CHECK_NOTHROW(script_from_json(
        R"({"exhaustion":"error","rules":[
            {"stage":"caption","match":"*","responses":["x"]},
            {"stage":"vqa","match":"*","responses":["y"]}]})",
        tmp));
    try {
        script_from_json(
            R"({"exhaustion":"error","rules":[
                {"stage":"caption","match":"abc123","responses":["x"]}]})",
            tmp);
        FAIL("expected MissingDefaultRule");
    } catch (const Error& e) {
        CHECK(e.code() == "MissingDefaultRule");
    }
}

TEST_CASE("load_mock_script: parse errors carry the line number") {
    testsupport::TempDir tmp("mock");
    const auto path = tmp.write("bad.json", "{\n  \"rules\": [\n    {broken\n  ]\n}\n");
    try {
        load_mock_script(path);
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == "ParseError");
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("mock: 500-rule generated scripts resolve first-match-wins") {
    testsupport::TempDir tmp("mock");
    SplitMix64 rng(31337);
    for (int round = 0; round < 20; ++round) {
        nlohmann::json rules = nlohmann::json::array();
        const char* stages[] = {"caption", "caption-judge", "vqa", "answer-judge", "qa-judge"};
        int first_vqa_index = -1;
        for (int i = 0; i < 500; ++i) {
            const auto stage = stages[rng.bounded(5)];
            if (first_vqa_index < 0 && std::string(stage) == "vqa") first_vqa_index = i;
            rules.push_back({{"stage", stage},
                             {"match", "*"},
                             {"responses", {"r" + std::to_string(i)}}});
        }
        if (first_vqa_index < 0) continue;
        const auto path = tmp.write("big.json", nlohmann::json{{"rules", rules}}.dump());
        MockScript script = load_mock_script(path);
        CHECK(script.rules.size() == 500);
        MockBackend backend(script);
        const auto request = simple_request(StageTag::Vqa, mock_endpoint());
        CHECK(backend.complete(request) == "r" + std::to_string(first_vqa_index));
    }
}

TEST_CASE("mock transcripts are a pure function of stage and request order") {
    testsupport::TempDir tmp("mock");
    const std::string script_json =
        R"({"rules":[
            {"stage":"caption","match":"*","responses":["c1","c2","c3"]},
            {"stage":"vqa","match":"*","responses":["v1","v2","v3"]}]})";
    auto run_sequence = [&](int salt) {
        auto script = script_from_json(script_json, tmp);
        MockBackend backend(script);
        std::vector<std::string> transcript;
        // Identical (stage, order) sequence; differing prompt text must not
        // change what gets served under wildcard matching.
        for (int i = 0; i < 3; ++i) {
            transcript.push_back(backend.complete(simple_request(
                StageTag::Caption, mock_endpoint(), "p" + std::to_string(salt * 10 + i))));
            transcript.push_back(backend.complete(simple_request(
                StageTag::Vqa, mock_endpoint(), "q" + std::to_string(salt * 10 + i))));
        }
        return transcript;
    };
    CHECK(run_sequence(1) == run_sequence(2));
}

TEST_CASE("mock cursor state persists across backend instances") {
    testsupport::TempDir tmp("mock");
    auto script = script_from_json(
        R"({"rules":[{"stage":"caption","match":"*","responses":["one","two","three"]}]})", tmp);
    const auto state = tmp.file("state.json");
    {
        MockBackend backend(script, state);
        CHECK(backend.complete(simple_request(StageTag::Caption, mock_endpoint())) == "one");
        CHECK(backend.complete(simple_request(StageTag::Caption, mock_endpoint())) == "two");
    }
    {
        MockBackend resumed(script, state);
        CHECK(resumed.complete(simple_request(StageTag::Caption, mock_endpoint())) == "three");
    }
}

TEST_CASE("encode_image round-trips bytes and flags unknown refs") {
    ImageStore store;
    const std::string bytes = testsupport::tiny_png(3);
    const auto ref = store.add_bytes(bytes);
    const auto payload = encode_image(store, ref);
    CHECK(payload.media_type == "image/png");
    CHECK(base64_decode(payload.base64_body) == bytes);
    const auto again = encode_image(store, ref);
    CHECK(again.base64_body == payload.base64_body);

    try {
        encode_image(store, "deadbeef");
        FAIL("expected UnresolvableImage");
    } catch (const Error& e) {
        CHECK(e.code() == "UnresolvableImage");
    }
}

TEST_CASE("transcript records stage, images, attempts, and fingerprints") {
    testsupport::TempDir tmp("transcript");
    TranscriptLog log(tmp.file("transcript.jsonl"));
    auto backend = std::make_shared<LambdaBackend>(
        [](const ChatRequest&) { return std::string("reply"); });
    Gateway gateway(backend, 2, &log);

    ImageStore store;
    const auto ref = store.add_bytes(testsupport::tiny_png(1));
    const auto with_image = make_chat_request(
        StageTag::Caption, mock_endpoint(),
        {ChatMessage{"user", {TextPart{"describe"}, ImagePart{ref}}}});
    gateway.complete_chat(with_image);
    gateway.complete_chat(simple_request(StageTag::AnswerJudge, mock_endpoint(), "judge this"));

    const auto entries = TranscriptLog::read_all(tmp.file("transcript.jsonl"));
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].seq == 1);
    CHECK(entries[0].stage == "caption");
    CHECK(entries[0].image_parts == 1);
    CHECK(entries[0].response_text == "reply");
    CHECK(entries[1].stage == "answer-judge");
    CHECK(entries[1].image_parts == 0);
    CHECK(entries[1].fingerprint.size() == 64);
}

TEST_CASE("gateway bounds in-flight requests by the concurrency limit") {
    std::atomic<int> in_flight{0};
    std::atomic<int> max_seen{0};
    auto backend = std::make_shared<LambdaBackend>([&](const ChatRequest&) {
        const int current = ++in_flight;
        int expected = max_seen.load();
        while (current > expected && !max_seen.compare_exchange_weak(expected, current)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --in_flight;
        return std::string("ok");
    });
    Gateway gateway(backend, 3);
    std::vector<std::thread> threads;
    for (int i = 0; i < 12; ++i) {
        threads.emplace_back([&] {
            gateway.complete_chat(simple_request(StageTag::Vqa, mock_endpoint()));
        });
    }
    for (auto& t : threads) t.join();
    CHECK(max_seen.load() <= 3);
    CHECK(max_seen.load() >= 1);
}

TEST_CASE("remote backend speaks the chat-completion wire format") {
    ImageStore store;
    const auto ref = store.add_bytes(testsupport::tiny_png(7));

    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = ++hits;
        const auto body = nlohmann::json::parse(req.body);
        CHECK(body.at("model") == "remote-model");
        CHECK(body.at("temperature") == doctest::Approx(0.5));
        CHECK(body.at("messages").size() == 1);
        if (n == 1) {  // transient failure first: the gateway must retry
            res.status = 503;
            res.set_content("busy", "text/plain");
            return;
        }
        CHECK(req.get_header_value("Authorization") == "Bearer sekrit");
        nlohmann::json reply{
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "remote says hi"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("AGRIVQA_TEST_KEY", "sekrit", 1);
    ModelEndpoint endpoint;
    endpoint.kind = EndpointKind::Remote;
    endpoint.model_name = "remote-model";
    endpoint.base_url = "http://127.0.0.1:" + std::to_string(port);
    endpoint.credential_env = "AGRIVQA_TEST_KEY";
    endpoint.max_retries = 2;
    endpoint.timeout_seconds = 5;

    auto remote = std::make_shared<RemoteBackend>(&store);
    Gateway gateway(remote, 1, nullptr, [](std::int64_t) {});  // no real sleeping in tests
    const auto request = make_chat_request(
        StageTag::Vqa, endpoint,
        {ChatMessage{"user", {TextPart{"question"}, ImagePart{ref}}}});
    const auto response = gateway.complete_chat(request);
    CHECK(response.text == "remote says hi");
    CHECK(response.attempt_count == 2);

    server.stop();
    server_thread.join();
}

TEST_CASE("remote request bodies embed images as data urls") {
    ImageStore store;
    const auto ref = store.add_bytes(testsupport::tiny_png(9));
    ModelEndpoint endpoint;
    endpoint.kind = EndpointKind::Remote;
    endpoint.model_name = "m";
    endpoint.reasoning_effort = "medium";
    endpoint.verbosity = "low";
    const auto request = make_chat_request(
        StageTag::Caption, endpoint,
        {ChatMessage{"user", {TextPart{"look"}, ImagePart{ref}}}});
    const auto body = RemoteBackend::build_body(request, &store);
    CHECK(body.at("reasoning_effort") == "medium");
    CHECK(body.at("verbosity") == "low");
    const auto& content = body.at("messages").at(0).at("content");
    REQUIRE(content.size() == 2);
    CHECK(content.at(0).at("type") == "text");
    CHECK(content.at(1).at("type") == "image_url");
    const std::string url = content.at(1).at("image_url").at("url").get<std::string>();
    CHECK(url.rfind("data:image/png;base64,", 0) == 0);
}
