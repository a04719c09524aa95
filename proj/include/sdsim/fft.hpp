#pragma once

/// FFTW backend. Plans are created with FFTW_ESTIMATE (deterministic plan
/// choice) and cached per thread; FFTW's planner is not thread-safe, so plan
/// creation and destruction are serialized behind one mutex.

#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "field.hpp"

namespace sdsim::detail {

inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwWorkspace {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
    fftw_complex* buf = nullptr;
    std::size_t count = 0;

    FftwWorkspace(int dim, int n) {
        count = 1;
        int dims[4];
        for (int a = 0; a < dim; ++a) {
            dims[a] = n;
            count *= static_cast<std::size_t>(n);
        }
        std::lock_guard<std::mutex> lock(planner_mutex());
        buf = fftw_alloc_complex(count);
        forward = fftw_plan_dft(dim, dims, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        backward = fftw_plan_dft(dim, dims, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    FftwWorkspace(const FftwWorkspace&) = delete;
    FftwWorkspace& operator=(const FftwWorkspace&) = delete;
    ~FftwWorkspace() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
        if (buf) fftw_free(buf);
    }
};

inline FftwWorkspace& workspace_for(const SpatialGrid& g) {
    thread_local std::map<std::pair<int, int>, std::unique_ptr<FftwWorkspace>> cache;
    auto key = std::make_pair(g.dim, g.n);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, std::make_unique<FftwWorkspace>(g.dim, g.n)).first;
    return *it->second;
}

// Unnormalized DFT of the sample vector, in place semantics on a copy.
inline std::vector<cplx> raw_dft(const SpatialGrid& g, const std::vector<cplx>& in, int sign) {
    FftwWorkspace& ws = workspace_for(g);
    std::memcpy(static_cast<void*>(ws.buf), in.data(), ws.count * sizeof(cplx));
    fftw_execute(sign == FFTW_FORWARD ? ws.forward : ws.backward);
    std::vector<cplx> out(ws.count);
    std::memcpy(static_cast<void*>(out.data()), ws.buf, ws.count * sizeof(cplx));
    return out;
}

using lcplx = std::complex<long double>;

// Long double mirror, used by the repeated-step propagator where double
// transform roundoff would accumulate a systematic norm drift.
struct FftwlWorkspace {
    fftwl_plan forward = nullptr;
    fftwl_plan backward = nullptr;
    fftwl_complex* buf = nullptr;
    std::size_t count = 0;

    FftwlWorkspace(int dim, int n) {
        count = 1;
        int dims[4];
        for (int a = 0; a < dim; ++a) {
            dims[a] = n;
            count *= static_cast<std::size_t>(n);
        }
        std::lock_guard<std::mutex> lock(planner_mutex());
        buf = fftwl_alloc_complex(count);
        forward = fftwl_plan_dft(dim, dims, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        backward = fftwl_plan_dft(dim, dims, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    FftwlWorkspace(const FftwlWorkspace&) = delete;
    FftwlWorkspace& operator=(const FftwlWorkspace&) = delete;
    ~FftwlWorkspace() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        if (forward) fftwl_destroy_plan(forward);
        if (backward) fftwl_destroy_plan(backward);
        if (buf) fftwl_free(buf);
    }
};

inline FftwlWorkspace& workspace_l_for(const SpatialGrid& g) {
    thread_local std::map<std::pair<int, int>, std::unique_ptr<FftwlWorkspace>> cache;
    auto key = std::make_pair(g.dim, g.n);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, std::make_unique<FftwlWorkspace>(g.dim, g.n)).first;
    return *it->second;
}

inline std::vector<lcplx> raw_dftl(const SpatialGrid& g, const std::vector<lcplx>& in, int sign) {
    FftwlWorkspace& ws = workspace_l_for(g);
    std::memcpy(static_cast<void*>(ws.buf), in.data(), ws.count * sizeof(lcplx));
    fftwl_execute(sign == FFTW_FORWARD ? ws.forward : ws.backward);
    std::vector<lcplx> out(ws.count);
    std::memcpy(static_cast<void*>(out.data()), ws.buf, ws.count * sizeof(lcplx));
    return out;
}

} // namespace sdsim::detail
