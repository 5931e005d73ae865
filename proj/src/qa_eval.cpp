#include "agrivqa/qa_eval.hpp"

#include <regex>

#include "agrivqa/errors.hpp"

namespace agrivqa {

namespace {
std::optional<Score> find_dimension(const std::string& text, const std::string& name) {
    const std::regex pattern("(?:^|[^a-zA-Z])" + name + R"(\s*[:=]?\s*([0-9]+(?:\.[0-9]+)?))",
                             std::regex::icase);
    std::smatch match;
    if (!std::regex_search(text, match, pattern)) return std::nullopt;
    return Score::parse(match[1].str());
}
}  // namespace

std::optional<QaDimensions> parse_qa_dimensions(const std::string& judge_text) {
    auto usefulness = find_dimension(judge_text, "usefulness");
    auto relevance = find_dimension(judge_text, "relevance");
    auto accuracy = find_dimension(judge_text, "accuracy");
    if (!usefulness || !relevance || !accuracy) return std::nullopt;
    return QaDimensions{*usefulness, *relevance, *accuracy};
}

Score qa_raw_score(const QaDimensions& dims) {
    const Score values[] = {dims.usefulness, dims.relevance, dims.accuracy};
    return Score::mean_half_up(values).clamp(Score::from_tenths(10), Score::from_tenths(100));
}

std::int64_t qa_normalized(Score raw) { return raw.tenths(); }

QaResult aggregate_qa(std::vector<QaItemResult> items) {
    if (items.empty()) {
        throw dataset_error("EmptyDataset", "no QA items to aggregate");
    }
    std::int64_t sum = 0;
    for (const auto& item : items) sum += item.normalized;
    QaResult result;
    // Mean of integer normalized scores, half-up at one decimal.
    result.mean_normalized = Score::from_tenths(
        round_half_up(10 * sum, static_cast<std::int64_t>(items.size())));
    result.per_item = std::move(items);
    return result;
}

QaJudge::QaJudge(Gateway& gateway, const TemplateSet& templates, ModelEndpoint endpoint)
    : gateway_(gateway), templates_(templates), endpoint_(std::move(endpoint)) {}

Score QaJudge::judge_qa_response(const std::string& response, const ReferenceAnswer& reference,
                                 const std::string& question, QaDimensions* dims_out) {
    if (!reference.from_dataset) {
        throw dataset_error("MissingReference",
                            "QA evaluation is reference-anchored and needs a reference answer");
    }
    const auto build = [&](const std::string& extra) {
        std::string body = render_template(templates_.qa_judge.user_template,
                                           {{"question", question},
                                            {"reference", reference.text},
                                            {"response", response}});
        if (!extra.empty()) body += "\n" + extra;
        std::vector<ChatMessage> messages;
        messages.push_back(ChatMessage::text("system", templates_.qa_judge.system_text));
        messages.push_back(ChatMessage::text("user", std::move(body)));
        return make_chat_request(StageTag::QaJudge, endpoint_, std::move(messages));
    };

    ChatResponse first = gateway_.complete_chat(build(""));
    auto dims = parse_qa_dimensions(first.text);
    if (!dims) {
        ChatResponse second = gateway_.complete_chat(
            build("Your previous reply was unreadable. Use exactly the lines "
                  "'usefulness: N', 'relevance: N', 'accuracy: N'."));
        dims = parse_qa_dimensions(second.text);
    }
    if (!dims) {
        throw endpoint_error("JudgeParseError", "no scores extractable from QA judge");
    }
    if (dims_out) *dims_out = *dims;
    return qa_raw_score(*dims);
}

}  // namespace agrivqa
