#include "hlta/common.hpp"

#include <iostream>
#include <mutex>

namespace hlta {

namespace {
std::atomic<int> g_log_level{0};
std::atomic<unsigned> g_threads{0};
std::mutex g_log_mutex;
}  // namespace

void set_log_level(int level) { g_log_level = level; }
int log_level() { return g_log_level; }

void log_line(const std::string& line) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << "[hlta] " << line << '\n';
}

void set_num_threads(unsigned n) { g_threads = n; }

unsigned num_threads() {
  unsigned n = g_threads;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

}  // namespace hlta
