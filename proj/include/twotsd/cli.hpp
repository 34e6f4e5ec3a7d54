#pragma once

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

namespace twotsd {

inline constexpr const char* tool_version = "0.1.0";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int runtime = 1;
inline constexpr int usage = 2;
} // namespace exit_code

// args excludes the program name. Output goes to out; diagnostics to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Set by the signal handler in the executable; serve returns when it flips.
std::atomic<bool>& stop_requested();

} // namespace twotsd
