// kernels_dispatch.cpp
// Runtime ISA selection. Resolution order: MASKBEAM_ISA environment
// variable, then CPU feature detection, then scalar fallback.

#include "maskbeam/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace maskbeam::kernels {

#ifndef MASKBEAM_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

struct Active {
    const KernelTable* table;
    Isa isa;
};

Active resolve_default() {
    if (const char* env = std::getenv("MASKBEAM_ISA")) {
        if (std::strcmp(env, "scalar") == 0) return {&scalar_table(), Isa::scalar};
        if (std::strcmp(env, "avx2") == 0) {
            if (const KernelTable* t = avx2_table(); t && cpu_has_avx2()) return {t, Isa::avx2};
            throw DataError("MASKBEAM_ISA=avx2 requested but AVX2 is unavailable");
        }
        throw DataError(std::string("unknown MASKBEAM_ISA value: ") + env);
    }
    if (const KernelTable* t = avx2_table(); t && cpu_has_avx2()) return {t, Isa::avx2};
    return {&scalar_table(), Isa::scalar};
}

std::atomic<const KernelTable*> g_table{nullptr};
std::atomic<Isa> g_isa{Isa::scalar};

void ensure_resolved() {
    if (g_table.load(std::memory_order_acquire) == nullptr) {
        Active a = resolve_default();
        g_isa.store(a.isa, std::memory_order_relaxed);
        g_table.store(a.table, std::memory_order_release);
    }
}

}  // namespace

const KernelTable& active() {
    ensure_resolved();
    return *g_table.load(std::memory_order_acquire);
}

Isa active_isa() {
    ensure_resolved();
    return g_isa.load(std::memory_order_relaxed);
}

const char* isa_name(Isa isa) {
    switch (isa) {
        case Isa::avx2: return "avx2";
        case Isa::scalar: break;
    }
    return "scalar";
}

void force_isa(Isa isa) {
    if (isa == Isa::avx2) {
        const KernelTable* t = avx2_table();
        if (!t || !cpu_has_avx2()) throw DataError("AVX2 kernels unavailable on this machine");
        g_isa.store(Isa::avx2, std::memory_order_relaxed);
        g_table.store(t, std::memory_order_release);
        return;
    }
    g_isa.store(Isa::scalar, std::memory_order_relaxed);
    g_table.store(&scalar_table(), std::memory_order_release);
}

}  // namespace maskbeam::kernels
