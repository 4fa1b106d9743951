#include <atomic>
#include <cstdlib>
#include <string_view>

#include "ensnet/kernels/kernels.hpp"

namespace ensnet::kernels {

#if defined(ENSNET_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(ENSNET_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& select_default() {
  if (const char* forced = std::getenv("ENSNET_KERNELS"); forced != nullptr && std::string_view(forced) == "scalar") {
    return scalar_table();
  }
  if (const KernelTable* fast = avx2_table()) return *fast;
  return scalar_table();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&select_default()};
  return slot;
}

}  // namespace

const KernelTable* avx2_table() {
#if defined(ENSNET_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_kernels() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

const KernelTable& set_active(const KernelTable& table) {
  return *active_slot().exchange(&table, std::memory_order_acq_rel);
}

}  // namespace ensnet::kernels
