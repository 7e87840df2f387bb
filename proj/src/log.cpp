#include "mbti/log.hpp"

#include <atomic>
#include <mutex>

namespace mbti {

namespace {
std::atomic<bool> g_quiet{false};
std::mutex g_mutex;
} // namespace

void set_quiet(bool quiet) { g_quiet = quiet; }
bool is_quiet() { return g_quiet; }

void warn_line(const std::string& message) {
    if (g_quiet) return;
    std::lock_guard<std::mutex> lock(g_mutex);
    std::cerr << "warning: " << message << '\n';
}

} // namespace mbti
