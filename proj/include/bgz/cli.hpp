#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace bgz {

inline constexpr const char* kVersion = "1.0.0";

// Exit codes: 0 success, 1 validation error (bad input, flags or config),
// 2 runtime failure (backend, I/O).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::function<const char*(const char*)>& getenv = nullptr);

}  // namespace bgz
