#include "agrivqa/image_store.hpp"

#include "agrivqa/errors.hpp"
#include "agrivqa/hash.hpp"
#include "agrivqa/util.hpp"

namespace agrivqa {

std::string ImageStore::add_bytes(std::string bytes) {
    if (bytes.empty()) {
        throw dataset_error("EmptyImage", "image bytes must be non-empty");
    }
    std::string ref = content_hash(bytes);
    std::lock_guard lock(mutex_);
    bytes_by_ref_.try_emplace(ref, std::move(bytes));
    return ref;
}

std::string ImageStore::add_file(const std::filesystem::path& path) {
    auto bytes = try_read_file(path);
    if (!bytes) {
        throw dataset_error("MissingImage", "image not found: " + path.string());
    }
    return add_bytes(std::move(*bytes));
}

const std::string& ImageStore::resolve(const std::string& image_ref) const {
    std::lock_guard lock(mutex_);
    auto it = bytes_by_ref_.find(image_ref);
    if (it == bytes_by_ref_.end()) {
        throw dataset_error("UnresolvableImage", "unknown image ref: " + image_ref);
    }
    return it->second;
}

bool ImageStore::contains(const std::string& image_ref) const {
    std::lock_guard lock(mutex_);
    return bytes_by_ref_.contains(image_ref);
}

std::string ImageStore::media_type(const std::string& bytes) {
    static const std::string png_magic = "\x89PNG\r\n\x1a\n";
    if (bytes.size() >= 8 && bytes.compare(0, 8, png_magic) == 0) return "image/png";
    if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xff &&
        static_cast<unsigned char>(bytes[1]) == 0xd8 &&
        static_cast<unsigned char>(bytes[2]) == 0xff) {
        return "image/jpeg";
    }
    return "application/octet-stream";
}

std::size_t ImageStore::size() const {
    std::lock_guard lock(mutex_);
    return bytes_by_ref_.size();
}

ImagePayload encode_image(const ImageStore& store, const std::string& image_ref) {
    const std::string& bytes = store.resolve(image_ref);
    return ImagePayload{ImageStore::media_type(bytes), base64_encode(bytes)};
}

}  // namespace agrivqa
