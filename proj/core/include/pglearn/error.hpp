#pragma once

#include <stdexcept>
#include <string>

namespace pglearn {

// Every failure raised by the library carries a short machine-readable code
// ("non_finite_feature", "degenerate_validation_set", ...) next to the
// human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string &message)
        : std::runtime_error(message), code_(std::move(code)) {}

    [[nodiscard]] const std::string &code() const noexcept { return code_; }

private:
    std::string code_;
};

}  // namespace pglearn
