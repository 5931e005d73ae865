#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace agrivqa {

/// User-extensible synonym table: canonical label -> alternative phrases
/// (scientific names and the like). Lookup is by lowercased label.
class SynonymTable {
public:
    SynonymTable() = default;
    static SynonymTable load(const std::filesystem::path& path);

    void add(const std::string& label, const std::string& synonym);
    const std::vector<std::string>& synonyms_for(const std::string& label) const;

private:
    std::map<std::string, std::vector<std::string>> synonyms_;
};

struct KeywordMatch {
    bool crop_hit = false;
    bool disease_hit = false;
    std::vector<std::string> matched_terms;
};

/// Case-insensitive whole-word matching of each label (or a registered
/// synonym) against the response; multi-word labels must appear as a
/// contiguous word sequence. Pure function of its inputs.
KeywordMatch match_keywords(const std::string& response, const std::string& crop_label,
                            const std::string& disease_label, const SynonymTable& synonyms);

struct ItemClassification {
    std::string id;
    bool crop_hit = false;
    bool disease_hit = false;
    std::vector<std::string> matched_terms;
};

struct ClassificationResult {
    std::vector<ItemClassification> per_item;
    std::int64_t crop_hits = 0;
    std::int64_t disease_hits = 0;
    std::string crop_accuracy;     // "65.00"-style percentage
    std::string disease_accuracy;
};

/// Aggregates per-item matches: accuracy = 100*hits/items, half-up at two
/// decimals. Errors on an empty item list.
ClassificationResult classification_accuracy(std::vector<ItemClassification> items);

}  // namespace agrivqa
