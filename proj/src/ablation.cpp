#include "agrivqa/ablation.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "agrivqa/errors.hpp"

namespace agrivqa {

std::string Strategy::tag() const {
    if (!use_caption && shots == 0 && !use_judge) return "baseline";
    std::string tag = use_caption ? "caption" : "";
    if (shots > 0) tag += "+" + std::to_string(shots) + "shot";
    if (use_judge) tag += "+judge";
    return tag;
}

Strategy Strategy::parse(const std::string& text) {
    if (text == "baseline") return Strategy{};
    Strategy strategy;
    std::stringstream stream(text);
    std::string token;
    while (std::getline(stream, token, '+')) {
        if (token == "caption") {
            strategy.use_caption = true;
        } else if (token == "judge") {
            strategy.use_judge = true;
        } else if (token.size() > 4 && token.substr(token.size() - 4) == "shot") {
            const std::string digits = token.substr(0, token.size() - 4);
            if (digits.empty() ||
                !std::all_of(digits.begin(), digits.end(),
                             [](unsigned char c) { return std::isdigit(c); })) {
                throw config_error("BadStrategy", "bad shot token in strategy: " + text);
            }
            strategy.shots = std::stoi(digits);
            if (strategy.shots < 0 || strategy.shots > 5) {
                throw config_error("BadStrategy", "shot count exceeds 5 in strategy: " + text);
            }
        } else {
            throw config_error("BadStrategy", "unknown strategy token '" + token + "' in " + text);
        }
    }
    if (!strategy.use_caption) {
        throw config_error("BadStrategy",
                           "strategy must be 'baseline' or start from 'caption': " + text);
    }
    return strategy;
}

void to_json(nlohmann::json& j, const AblationCell& c) {
    j = nlohmann::json{{"caption_source", c.caption_source},
                       {"model", c.model},
                       {"strategy", c.strategy},
                       {"status", c.status},
                       {"error", c.error}};
    j["crop_accuracy"] = c.crop_accuracy ? nlohmann::json(*c.crop_accuracy) : nullptr;
    j["disease_accuracy"] = c.disease_accuracy ? nlohmann::json(*c.disease_accuracy) : nullptr;
    j["qa_score"] = c.qa_score ? nlohmann::json(*c.qa_score) : nullptr;
}

void from_json(const nlohmann::json& j, AblationCell& c) {
    j.at("caption_source").get_to(c.caption_source);
    j.at("model").get_to(c.model);
    j.at("strategy").get_to(c.strategy);
    j.at("status").get_to(c.status);
    j.at("error").get_to(c.error);
    auto opt = [&](const char* key) -> std::optional<std::string> {
        if (j.contains(key) && !j.at(key).is_null()) return j.at(key).get<std::string>();
        return std::nullopt;
    };
    c.crop_accuracy = opt("crop_accuracy");
    c.disease_accuracy = opt("disease_accuracy");
    c.qa_score = opt("qa_score");
}

namespace {

// Comparable magnitude for best-row marking: percentages in hundredths plus
// the QA score scaled to hundredths. Failed cells rank below everything.
long long cell_rank(const AblationCell& cell) {
    if (cell.status != "ok") return -1;
    auto parse_hundredths = [](const std::string& text) -> long long {
        long long whole = 0, frac = 0, frac_digits = 0;
        std::size_t i = 0;
        for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
            whole = whole * 10 + (text[i] - '0');
        }
        if (i < text.size() && text[i] == '.') {
            for (++i; i < text.size() && frac_digits < 2; ++i, ++frac_digits) {
                frac = frac * 10 + (text[i] - '0');
            }
        }
        while (frac_digits < 2) {
            frac *= 10;
            ++frac_digits;
        }
        return whole * 100 + frac;
    };
    long long rank = 0;
    if (cell.crop_accuracy) rank += parse_hundredths(*cell.crop_accuracy);
    if (cell.disease_accuracy) rank += parse_hundredths(*cell.disease_accuracy);
    if (cell.qa_score) rank += parse_hundredths(*cell.qa_score);
    return rank;
}

std::string pad(const std::string& text, std::size_t width) {
    return text.size() >= width ? text : text + std::string(width - text.size(), ' ');
}

}  // namespace

std::string render_results_table(const std::vector<AblationCell>& cells) {
    if (cells.empty()) {
        throw internal_error("NoCells", "results table needs at least one cell");
    }

    std::vector<std::string> sources;
    std::vector<std::string> models;
    for (const auto& cell : cells) {
        if (cell.caption_source != "none" &&
            std::find(sources.begin(), sources.end(), cell.caption_source) == sources.end()) {
            sources.push_back(cell.caption_source);
        }
        if (std::find(models.begin(), models.end(), cell.model) == models.end()) {
            models.push_back(cell.model);
        }
    }
    // A grid of baselines only still renders as one unnamed group.
    if (sources.empty()) sources.push_back("none");

    std::size_t model_w = 5, strategy_w = 8;
    for (const auto& cell : cells) {
        model_w = std::max(model_w, cell.model.size());
        strategy_w = std::max(strategy_w, cell.strategy.size());
    }

    auto metric = [](const std::optional<std::string>& value) {
        return value ? *value : std::string("-");
    };

    std::ostringstream out;
    const std::string header = "  " + pad("Model", model_w) + " | " + pad("Strategy", strategy_w) +
                               " | " + pad("Crop", 7) + " | " + pad("Disease", 7) + " | QA";
    for (const auto& source : sources) {
        out << "== Caption source: " << source << " ==\n";
        out << header << "\n";
        for (const auto& model : models) {
            // Row block for one model: baseline first, then this source's
            // strategy rows in input order.
            std::vector<const AblationCell*> rows;
            for (const auto& cell : cells) {
                if (cell.model == model && cell.caption_source == "none") rows.push_back(&cell);
            }
            for (const auto& cell : cells) {
                if (cell.model == model && cell.caption_source == source) rows.push_back(&cell);
            }
            if (rows.empty()) continue;
            const AblationCell* best = nullptr;
            for (const auto* row : rows) {
                if (cell_rank(*row) < 0) continue;
                if (!best || cell_rank(*row) > cell_rank(*best)) best = row;
            }
            for (const auto* row : rows) {
                out << (row == best ? "* " : "  ");
                out << pad(row->model, model_w) << " | " << pad(row->strategy, strategy_w)
                    << " | ";
                if (row->status != "ok") {
                    out << "failed (" << row->error << ")";
                } else {
                    out << pad(metric(row->crop_accuracy), 7) << " | "
                        << pad(metric(row->disease_accuracy), 7) << " | "
                        << metric(row->qa_score);
                }
                out << "\n";
            }
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace agrivqa
