#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twotsd {

enum class Errc {
    invalid_field,
    self_collaboration,
    out_of_range,
    stale_update,
    duplicate_record,
    unsorted_input,
    heterogeneous_input,
    malformed,
    unknown_kind,
    version_mismatch,
    timeout,
    auth,
    rate_limit,
    schema_violation,
    transport,
    config,
    io,
};

std::string_view to_string(Errc code) noexcept;

// Every failure raised by the library carries one of the codes above so
// callers (and the wire protocol) can tell them apart without parsing text.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace twotsd
