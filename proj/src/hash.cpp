#include "agrivqa/hash.hpp"

#include <openssl/evp.h>

#include <memory>

#include "agrivqa/errors.hpp"

namespace agrivqa {

std::string content_hash(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                                EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &digest_len) != 1) {
        throw internal_error("HashFailed", "sha256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(digest_len * 2);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string content_hash_parts(const std::vector<std::string>& parts) {
    std::string framed;
    for (const auto& part : parts) {
        framed += std::to_string(part.size());
        framed.push_back(':');
        framed += part;
    }
    return content_hash(framed);
}

}  // namespace agrivqa
