#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

namespace lac::detail {

extern std::atomic<std::int64_t> g_live_scalars;
extern std::atomic<std::int64_t> g_peak_scalars;

struct Buffer {
  explicit Buffer(std::size_t n) : v(n, 0.0) {
    const auto live = g_live_scalars.fetch_add(static_cast<std::int64_t>(n)) +
                      static_cast<std::int64_t>(n);
    std::int64_t peak = g_peak_scalars.load();
    while (live > peak && !g_peak_scalars.compare_exchange_weak(peak, live)) {
    }
  }
  ~Buffer() { g_live_scalars.fetch_sub(static_cast<std::int64_t>(v.size())); }
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;

  std::vector<double> v;
};

}  // namespace lac::detail
