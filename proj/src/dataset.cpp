#include "agrivqa/dataset.hpp"

#include <set>

#include <json.hpp>

#include "agrivqa/errors.hpp"
#include "agrivqa/hash.hpp"
#include "agrivqa/util.hpp"

namespace agrivqa {

const ReferenceAnswer& DatasetManifest::reference_for(const std::string& id) const {
    static const ReferenceAnswer absent{};
    auto it = reference_answers.find(id);
    return it == reference_answers.end() ? absent : it->second;
}

DatasetManifest load_dataset(const std::filesystem::path& path, ImageStore& store) {
    const std::string content = read_file(path);
    const auto base = std::filesystem::absolute(path).parent_path();

    DatasetManifest manifest;
    manifest.digest = content_hash(content);

    std::set<std::string> seen_ids;
    bool header_seen = false;
    std::size_t record_index = 0;
    std::size_t line_no = 0;
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw dataset_error("SchemaError", "manifest " + path.string() + " line " +
                                                   std::to_string(line_no) + ": " + e.what());
        }
        const std::string type = j.value("type", "");
        if (type == "manifest") {
            manifest.split_name = j.value("split", "");
            manifest.task = task_kind_from_name(j.value("task", "disease_diagnosis"));
            header_seen = true;
            continue;
        }
        if (type != "record") {
            throw dataset_error("SchemaError", "manifest line " + std::to_string(line_no) +
                                                   ": unknown type '" + type + "'");
        }
        if (!header_seen) {
            throw dataset_error("SchemaError",
                                "manifest must start with a {\"type\":\"manifest\"} header");
        }
        auto fail = [&](const std::string& what) -> void {
            throw dataset_error("SchemaError",
                                "record " + std::to_string(record_index) + ": " + what);
        };
        ImageRecord record;
        record.task = manifest.task;
        record.id = j.value("id", "");
        if (record.id.empty()) fail("missing id");
        if (!seen_ids.insert(record.id).second) fail("duplicate id " + record.id);
        record.crop_label = j.value("crop", "");
        record.disease_label = j.value("disease", "");
        record.query = j.value("question", "");
        if (record.query.empty()) fail("missing question");
        if (manifest.task == TaskKind::DiseaseDiagnosis) {
            if (record.crop_label.empty()) fail("missing crop label in diagnosis split");
            if (record.disease_label.empty()) fail("missing disease_label in diagnosis split");
        }
        const std::string image_path = j.value("image", "");
        if (image_path.empty()) fail("missing image path");
        record.image_ref = store.add_file(base / image_path);

        if (j.contains("reference") && !j.at("reference").get<std::string>().empty()) {
            manifest.reference_answers[record.id] =
                ReferenceAnswer{j.at("reference").get<std::string>(), true};
        } else if (manifest.task == TaskKind::KnowledgeQA) {
            fail("missing reference answer in knowledge_qa split");
        }
        manifest.records.push_back(std::move(record));
        ++record_index;
    }
    if (!header_seen) {
        throw dataset_error("SchemaError", "manifest has no header line: " + path.string());
    }
    return manifest;
}

}  // namespace agrivqa
