#include "snekhorn/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace snekhorn::kernels {

#if defined(SNEKHORN_HAVE_AVX2)
const Table& avx2_table();
#endif

const Table* avx2() {
#if defined(SNEKHORN_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &avx2_table() : nullptr;
#else
    return nullptr;
#endif
}

namespace {

const Table* choose() {
    const char* env = std::getenv("SNEKHORN_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return &scalar();
    if (const Table* t = avx2()) return t;
    return &scalar();
}

std::atomic<const Table*>& current() {
    static std::atomic<const Table*> table{choose()};
    return table;
}

} // namespace

const Table& active() { return *current().load(std::memory_order_relaxed); }

const Table& set_active(const Table& table) {
    return *current().exchange(&table, std::memory_order_relaxed);
}

} // namespace snekhorn::kernels
