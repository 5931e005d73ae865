#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agrivqa/domain.hpp"
#include "agrivqa/gateway.hpp"
#include "agrivqa/prompts.hpp"

namespace agrivqa {

struct QaDimensions {
    Score usefulness;
    Score relevance;
    Score accuracy;
};

/// Parses "usefulness: 7 / relevance: 6 / accuracy: 6.5" style judge text.
std::optional<QaDimensions> parse_qa_dimensions(const std::string& judge_text);

/// raw = mean of the three dimensions, clamped to [1,10], one decimal.
Score qa_raw_score(const QaDimensions& dims);

/// normalized = raw * 10 exactly (tenths become whole points).
std::int64_t qa_normalized(Score raw);

struct QaItemResult {
    std::string id;
    QaDimensions dimensions;
    Score raw;                  // [1,10]
    std::int64_t normalized = 0;  // [10,100]
};

struct QaResult {
    std::vector<QaItemResult> per_item;
    Score mean_normalized;  // rendered at one decimal, in [10,100]
};

QaResult aggregate_qa(std::vector<QaItemResult> items);

/// Text-only judge call scoring one response on the three dimensions.
class QaJudge {
public:
    QaJudge(Gateway& gateway, const TemplateSet& templates, ModelEndpoint endpoint);

    Score judge_qa_response(const std::string& response, const ReferenceAnswer& reference,
                            const std::string& question, QaDimensions* dims_out = nullptr);

private:
    Gateway& gateway_;
    const TemplateSet& templates_;
    ModelEndpoint endpoint_;
};

}  // namespace agrivqa
