#pragma once

#include <stdexcept>
#include <string>

namespace agrivqa {

// Exit-code buckets used by the CLI: 0 success, 2 config, 3 dataset,
// 4 endpoint failure, 5 internal.
enum class ErrorKind {
    Config,
    Dataset,
    Endpoint,
    Internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error("[" + code + "] " + message),
          kind_(kind),
          code_(std::move(code)) {}

    ErrorKind kind() const { return kind_; }
    const std::string& code() const { return code_; }

    int exit_code() const {
        switch (kind_) {
            case ErrorKind::Config: return 2;
            case ErrorKind::Dataset: return 3;
            case ErrorKind::Endpoint: return 4;
            case ErrorKind::Internal: return 5;
        }
        return 5;
    }

private:
    ErrorKind kind_;
    std::string code_;
};

inline Error config_error(const std::string& code, const std::string& msg) {
    return Error(ErrorKind::Config, code, msg);
}
inline Error dataset_error(const std::string& code, const std::string& msg) {
    return Error(ErrorKind::Dataset, code, msg);
}
inline Error endpoint_error(const std::string& code, const std::string& msg) {
    return Error(ErrorKind::Endpoint, code, msg);
}
inline Error internal_error(const std::string& code, const std::string& msg) {
    return Error(ErrorKind::Internal, code, msg);
}

// Transient transport failure inside one chat attempt; the gateway retries
// these up to max_retries before surfacing RetriesExhausted.
class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& message)
        : std::runtime_error(message) {}
};

}  // namespace agrivqa
