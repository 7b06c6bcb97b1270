#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hlta {

/// Malformed or insufficient input data (unreadable files, empty corpora,
/// variables missing from a dataset).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A structural invariant of a model or hierarchy does not hold.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Rng = std::mt19937_64;

// Logging goes to stderr. Level 0 is silent, 1 prints progress lines.
void set_log_level(int level);
int log_level();
void log_line(const std::string& line);

template <typename... Args>
void log_info(const Args&... args) {
  if (log_level() < 1) return;
  std::ostringstream out;
  (out << ... << args);
  log_line(out.str());
}

void set_num_threads(unsigned n);  // 0 = hardware concurrency
unsigned num_threads();

/// Runs fn(chunk, begin, end) for fixed-size chunks of [0, n). Chunk
/// boundaries depend only on n and chunk_size, so per-chunk partial results
/// reduced in chunk order are identical for any thread count.
template <typename Fn>
void for_each_chunk(std::size_t n, std::size_t chunk_size, Fn&& fn) {
  if (n == 0) return;
  const std::size_t chunks = (n + chunk_size - 1) / chunk_size;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(num_threads(), chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c)
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t c = next++; c < chunks; c = next++)
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
}

}  // namespace hlta
