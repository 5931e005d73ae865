#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "agrivqa/domain.hpp"
#include "agrivqa/image_store.hpp"

namespace agrivqa {

struct DatasetManifest {
    std::vector<ImageRecord> records;
    std::string split_name;
    TaskKind task = TaskKind::DiseaseDiagnosis;
    std::map<std::string, ReferenceAnswer> reference_answers;  // by record id
    std::string digest;  // content digest of the manifest file

    const ReferenceAnswer& reference_for(const std::string& id) const;
};

/// Line-delimited manifest: a {"type":"manifest"} header line followed by
/// one {"type":"record"} line per item. Image paths resolve against the
/// manifest's directory and are registered in the store. Schema violations
/// report the record index.
DatasetManifest load_dataset(const std::filesystem::path& path, ImageStore& store);

}  // namespace agrivqa
