#pragma once

#include <iostream>
#include <string>

#include <fmt/format.h>

namespace mbti {

/// Warnings go to stderr with a "warning: " prefix; set_quiet silences them.
void set_quiet(bool quiet);
bool is_quiet();
void warn_line(const std::string& message);

template <class... Args>
void warn(fmt::format_string<Args...> f, Args&&... args) {
    warn_line(fmt::format(f, std::forward<Args>(args)...));
}

} // namespace mbti
