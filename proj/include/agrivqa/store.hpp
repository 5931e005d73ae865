#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace agrivqa {

/// Composite cache key: stage tag plus the digests of everything that can
/// change the stage's output.
std::string cache_key(const std::string& stage_tag, const std::vector<std::string>& parts);

/// Write-once, append-only JSONL cache. A second put with the same key and
/// a different value is a CacheConflict; identical re-puts are idempotent.
class CacheFile {
public:
    explicit CacheFile(std::filesystem::path path);

    std::optional<nlohmann::json> get(const std::string& key) const;
    void put(const std::string& key, const nlohmann::json& value);

    nlohmann::json get_or_compute(const std::string& key,
                                  const std::function<nlohmann::json()>& compute);

    std::size_t size() const;

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::map<std::string, std::string> values_;  // key -> dumped value
};

struct RunManifest {
    std::string run_id;
    std::string created_at;
    std::string completed_at;
    std::string command;  // evaluate | ablate
    std::string status = "running";
    nlohmann::ordered_json config_snapshot;
    std::string config_digest;
    std::string dataset_digest;
    std::string templates_digest;
    std::string lexicon_digest;
    std::string mock_digest;
    std::uint64_t seed = 0;
    std::string strategy;
    int total_items = 0;
    int completed_items = 0;
    nlohmann::ordered_json metrics_summary;

    bool complete() const { return status == "complete"; }
};

nlohmann::ordered_json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

/// One run directory: manifest, transcript, per-stage caches, per-item
/// records, metrics. Immutable once the manifest says complete.
class RunStore {
public:
    /// Creates <root>/<fresh run id>/ and an initial manifest.
    static std::unique_ptr<RunStore> create(const std::filesystem::path& root,
                                            RunManifest manifest);

    /// Opens an existing run for resume; throws ManifestCorrupt when the
    /// manifest is unreadable.
    static std::unique_ptr<RunStore> open(const std::filesystem::path& root,
                                          const std::string& run_id);

    const std::filesystem::path& dir() const { return dir_; }
    const RunManifest& manifest() const { return manifest_; }

    std::filesystem::path transcript_path() const { return dir_ / "transcript.jsonl"; }
    std::filesystem::path mock_state_path() const { return dir_ / "mock_state.json"; }
    std::filesystem::path metrics_path() const { return dir_ / "metrics.json"; }
    std::filesystem::path items_path() const { return dir_ / "items.jsonl"; }
    std::filesystem::path table_path() const { return dir_ / "results_table.txt"; }
    std::filesystem::path cells_path() const { return dir_ / "cells.jsonl"; }
    std::filesystem::path reports_dir() const { return dir_ / "reports"; }

    CacheFile& cache(const std::string& name);

    /// Per-item result records, append-only; key = cell tag + item id.
    bool has_item(const std::string& cell, const std::string& id) const;
    void put_item(const std::string& cell, const std::string& id, const nlohmann::json& value);
    std::vector<nlohmann::json> items_for_cell(const std::string& cell) const;

    void checkpoint(const std::function<void(RunManifest&)>& update);
    void finish(const nlohmann::ordered_json& metrics_summary);

private:
    explicit RunStore(std::filesystem::path dir, RunManifest manifest);
    void write_manifest();
    void load_items();

    std::filesystem::path dir_;
    RunManifest manifest_;
    std::map<std::string, std::unique_ptr<CacheFile>> caches_;
    std::map<std::string, nlohmann::json> items_;  // "cell\nid" -> record
    mutable std::mutex mutex_;
};

std::string fresh_run_id();

}  // namespace agrivqa
