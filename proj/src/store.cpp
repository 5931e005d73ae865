#include "agrivqa/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <random>

#include "agrivqa/errors.hpp"
#include "agrivqa/hash.hpp"
#include "agrivqa/util.hpp"

namespace agrivqa {

std::string cache_key(const std::string& stage_tag, const std::vector<std::string>& parts) {
    return stage_tag + ":" + content_hash_parts(parts);
}

namespace {

// Append one line under an advisory file lock; readers are lock-free.
void locked_append(const std::filesystem::path& path, const std::string& line) {
    std::filesystem::create_directories(path.parent_path());
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw internal_error("WriteFailed", "cannot open " + path.string());
    ::flock(fd, LOCK_EX);
    const std::string buffer = line + "\n";
    const ssize_t written = ::write(fd, buffer.data(), buffer.size());
    ::flock(fd, LOCK_UN);
    ::close(fd);
    if (written != static_cast<ssize_t>(buffer.size())) {
        throw internal_error("WriteFailed", "short write to " + path.string());
    }
}

}  // namespace

CacheFile::CacheFile(std::filesystem::path path) : path_(std::move(path)) {
    for (const auto& line : read_lines(path_)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        values_[j.at("key").get<std::string>()] = j.at("value").dump();
    }
}

std::optional<nlohmann::json> CacheFile::get(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return nlohmann::json::parse(it->second);
}

void CacheFile::put(const std::string& key, const nlohmann::json& value) {
    const std::string dumped = value.dump();
    std::lock_guard lock(mutex_);
    auto it = values_.find(key);
    if (it != values_.end()) {
        if (it->second != dumped) {
            throw internal_error("CacheConflict",
                                 "cache key re-put with a different value: " + key);
        }
        return;  // idempotent re-put
    }
    locked_append(path_, nlohmann::json{{"key", key}, {"value", value}}.dump());
    values_.emplace(key, dumped);
}

nlohmann::json CacheFile::get_or_compute(const std::string& key,
                                         const std::function<nlohmann::json()>& compute) {
    if (auto hit = get(key)) return *hit;
    nlohmann::json value = compute();
    put(key, value);
    return value;
}

std::size_t CacheFile::size() const {
    std::lock_guard lock(mutex_);
    return values_.size();
}

nlohmann::ordered_json manifest_to_json(const RunManifest& m) {
    return nlohmann::ordered_json{{"run_id", m.run_id},
                                  {"created_at", m.created_at},
                                  {"completed_at", m.completed_at},
                                  {"command", m.command},
                                  {"status", m.status},
                                  {"config", m.config_snapshot},
                                  {"config_digest", m.config_digest},
                                  {"dataset_digest", m.dataset_digest},
                                  {"templates_digest", m.templates_digest},
                                  {"lexicon_digest", m.lexicon_digest},
                                  {"mock_digest", m.mock_digest},
                                  {"seed", m.seed},
                                  {"strategy", m.strategy},
                                  {"total_items", m.total_items},
                                  {"completed_items", m.completed_items},
                                  {"metrics_summary", m.metrics_summary}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.created_at = j.at("created_at").get<std::string>();
    m.completed_at = j.at("completed_at").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.status = j.at("status").get<std::string>();
    m.config_snapshot = j.at("config");
    m.config_digest = j.at("config_digest").get<std::string>();
    m.dataset_digest = j.at("dataset_digest").get<std::string>();
    m.templates_digest = j.at("templates_digest").get<std::string>();
    m.lexicon_digest = j.at("lexicon_digest").get<std::string>();
    m.mock_digest = j.at("mock_digest").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.strategy = j.at("strategy").get<std::string>();
    m.total_items = j.at("total_items").get<int>();
    m.completed_items = j.at("completed_items").get<int>();
    m.metrics_summary = j.at("metrics_summary");
    return m;
}

std::string fresh_run_id() {
    static const char* hex = "0123456789abcdef";
    std::random_device rd;
    std::string suffix;
    for (int i = 0; i < 6; ++i) suffix.push_back(hex[rd() % 16]);
    return utc_timestamp_compact() + "-" + suffix;
}

RunStore::RunStore(std::filesystem::path dir, RunManifest manifest)
    : dir_(std::move(dir)), manifest_(std::move(manifest)) {}

std::unique_ptr<RunStore> RunStore::create(const std::filesystem::path& root,
                                           RunManifest manifest) {
    if (manifest.run_id.empty()) manifest.run_id = fresh_run_id();
    std::filesystem::path dir = root / manifest.run_id;
    while (std::filesystem::exists(dir)) {
        manifest.run_id = fresh_run_id();
        dir = root / manifest.run_id;
    }
    std::filesystem::create_directories(dir);
    std::unique_ptr<RunStore> store(new RunStore(dir, std::move(manifest)));
    store->write_manifest();
    return store;
}

std::unique_ptr<RunStore> RunStore::open(const std::filesystem::path& root,
                                         const std::string& run_id) {
    const auto dir = root / run_id;
    const auto manifest_path = dir / "manifest.json";
    auto content = try_read_file(manifest_path);
    if (!content) {
        throw internal_error("ManifestCorrupt", "no manifest at " + manifest_path.string());
    }
    RunManifest manifest;
    try {
        manifest = manifest_from_json(nlohmann::json::parse(*content));
    } catch (const nlohmann::json::exception& e) {
        throw internal_error("ManifestCorrupt",
                             "unreadable manifest " + manifest_path.string() + ": " + e.what());
    }
    std::unique_ptr<RunStore> store(new RunStore(dir, std::move(manifest)));
    store->load_items();
    return store;
}

void RunStore::write_manifest() {
    write_file_atomic(dir_ / "manifest.json", manifest_to_json(manifest_).dump(2) + "\n");
}

void RunStore::load_items() {
    for (const auto& line : read_lines(items_path())) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        const std::string key =
            j.at("cell").get<std::string>() + "\n" + j.at("id").get<std::string>();
        items_[key] = std::move(j);
    }
}

CacheFile& RunStore::cache(const std::string& name) {
    std::lock_guard lock(mutex_);
    auto it = caches_.find(name);
    if (it == caches_.end()) {
        it = caches_
                 .emplace(name, std::make_unique<CacheFile>(dir_ / (name + "_cache.jsonl")))
                 .first;
    }
    return *it->second;
}

bool RunStore::has_item(const std::string& cell, const std::string& id) const {
    std::lock_guard lock(mutex_);
    return items_.contains(cell + "\n" + id);
}

void RunStore::put_item(const std::string& cell, const std::string& id,
                        const nlohmann::json& value) {
    std::lock_guard lock(mutex_);
    const std::string key = cell + "\n" + id;
    if (items_.contains(key)) return;
    locked_append(items_path(), value.dump());
    items_[key] = value;
}

std::vector<nlohmann::json> RunStore::items_for_cell(const std::string& cell) const {
    std::lock_guard lock(mutex_);
    std::vector<nlohmann::json> out;
    for (const auto& [key, value] : items_) {
        if (key.substr(0, key.find('\n')) == cell) out.push_back(value);
    }
    return out;
}

void RunStore::checkpoint(const std::function<void(RunManifest&)>& update) {
    std::lock_guard lock(mutex_);
    update(manifest_);
    write_manifest();
}

void RunStore::finish(const nlohmann::ordered_json& metrics_summary) {
    std::lock_guard lock(mutex_);
    manifest_.metrics_summary = metrics_summary;
    manifest_.status = "complete";
    manifest_.completed_at = utc_timestamp_compact();
    write_manifest();
}

}  // namespace agrivqa
