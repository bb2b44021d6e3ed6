#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace specstat {

// All toolkit errors carry a short machine-readable code (e.g. "MalformedHeader",
// "DegenerateSample") next to the human-readable message. The CLI maps codes to
// exit status: numerical-failure codes exit 3, everything else exits 2.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

    bool is_numerical() const noexcept {
        return code_ == "NonConvergence" || code_ == "Divergence";
    }

private:
    std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& message) {
    throw Error(std::move(code), message);
}

inline void require(bool cond, const char* code, const std::string& message) {
    if (!cond)
        throw Error(code, message);
}

} // namespace specstat
