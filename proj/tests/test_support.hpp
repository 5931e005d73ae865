#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testsupport {

inline std::filesystem::path fixtures_dir() { return std::filesystem::path(FIXTURES_DIR); }

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("agrivqa-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

    std::filesystem::path write(const std::string& name, const std::string& content) const {
        const auto p = path_ / name;
        std::filesystem::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary);
        out << content;
        return p;
    }

private:
    std::filesystem::path path_;
};

/// Smallest valid PNG (1x1), with a tweakable byte so tests can mint
/// distinct images. Not a decodable-pixel-accurate PNG; the pipeline treats
/// images as opaque bytes and only sniffs the magic.
inline std::string tiny_png(unsigned char variant = 0) {
    std::string bytes = "\x89PNG\r\n\x1a\n";
    bytes += "payload:";
    bytes += static_cast<char>('a' + (variant % 26));
    bytes += static_cast<char>('0' + (variant % 10));
    return bytes;
}

}  // namespace testsupport
