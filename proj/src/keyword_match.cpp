#include "agrivqa/keyword_match.hpp"

#include <json.hpp>

#include "agrivqa/errors.hpp"
#include "agrivqa/score.hpp"
#include "agrivqa/util.hpp"

namespace agrivqa {

SynonymTable SynonymTable::load(const std::filesystem::path& path) {
    SynonymTable table;
    const auto doc = parse_json_file(path, "synonym table");
    for (const auto& [label, synonyms] : doc.items()) {
        for (const auto& synonym : synonyms) {
            table.add(label, synonym.get<std::string>());
        }
    }
    return table;
}

void SynonymTable::add(const std::string& label, const std::string& synonym) {
    synonyms_[to_lower(trim(label))].push_back(to_lower(trim(synonym)));
}

const std::vector<std::string>& SynonymTable::synonyms_for(const std::string& label) const {
    static const std::vector<std::string> empty;
    auto it = synonyms_.find(to_lower(trim(label)));
    return it == synonyms_.end() ? empty : it->second;
}

KeywordMatch match_keywords(const std::string& response, const std::string& crop_label,
                            const std::string& disease_label, const SynonymTable& synonyms) {
    const auto response_tokens = word_tokens(response);
    KeywordMatch result;

    auto check_label = [&](const std::string& label) -> std::vector<std::string> {
        std::vector<std::string> hits;
        const std::string canonical = to_lower(trim(label));
        if (canonical.empty()) return hits;
        if (contains_phrase(response_tokens, word_tokens(canonical))) {
            hits.push_back(canonical);
        }
        for (const auto& synonym : synonyms.synonyms_for(canonical)) {
            if (contains_phrase(response_tokens, word_tokens(synonym))) {
                hits.push_back(synonym);
            }
        }
        return hits;
    };

    for (const auto& term : check_label(crop_label)) {
        result.crop_hit = true;
        result.matched_terms.push_back(term);
    }
    for (const auto& term : check_label(disease_label)) {
        result.disease_hit = true;
        result.matched_terms.push_back(term);
    }
    return result;
}

ClassificationResult classification_accuracy(std::vector<ItemClassification> items) {
    if (items.empty()) {
        throw dataset_error("EmptyDataset", "no items to aggregate");
    }
    ClassificationResult result;
    for (const auto& item : items) {
        if (item.crop_hit) ++result.crop_hits;
        if (item.disease_hit) ++result.disease_hits;
    }
    const auto total = static_cast<std::int64_t>(items.size());
    result.crop_accuracy = format_percent(result.crop_hits, total);
    result.disease_accuracy = format_percent(result.disease_hits, total);
    result.per_item = std::move(items);
    return result;
}

}  // namespace agrivqa
