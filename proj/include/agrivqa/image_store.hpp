#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>

namespace agrivqa {

/// Content-addressed image bytes. References are SHA-256 digests of the
/// bytes, so cache keys survive dataset relocation.
class ImageStore {
public:
    /// Registers bytes and returns the content digest.
    std::string add_bytes(std::string bytes);

    /// Reads a file, registers it, returns the digest. Throws MissingImage.
    std::string add_file(const std::filesystem::path& path);

    /// Throws UnresolvableImage for unknown refs.
    const std::string& resolve(const std::string& image_ref) const;

    bool contains(const std::string& image_ref) const;

    /// "image/png", "image/jpeg", or "application/octet-stream" from magic
    /// bytes.
    static std::string media_type(const std::string& bytes);

    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> bytes_by_ref_;
};

struct ImagePayload {
    std::string media_type;
    std::string base64_body;
};

/// Wire representation demanded by the remote protocol; byte-stable for
/// identical inputs.
ImagePayload encode_image(const ImageStore& store, const std::string& image_ref);

}  // namespace agrivqa
