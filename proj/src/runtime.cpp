#include "galerk/types.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace galerk {

namespace {

int default_threads() {
  if (const char* env = std::getenv("GALERKIN_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

std::atomic<int> g_threads{0};

}  // namespace

int thread_count() {
  int n = g_threads.load(std::memory_order_relaxed);
  if (n <= 0) {
    n = default_threads();
    g_threads.store(n, std::memory_order_relaxed);
  }
  return n;
}

void set_thread_count(int n) {
  if (n > 0) g_threads.store(n, std::memory_order_relaxed);
}

}  // namespace galerk
