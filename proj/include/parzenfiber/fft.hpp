#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace parzenfiber {

using cplx = std::complex<double>;

// 64-byte aligned storage so FFTW's SIMD plans apply to every buffer.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using cvec = std::vector<cplx, AlignedAllocator<cplx>>;

namespace detail {

class Plan {
public:
    Plan(std::size_t n, int sign)
    {
        cvec scratch(n);
        auto* data = reinterpret_cast<fftw_complex*>(scratch.data());
        plan_ = fftw_plan_dft_1d(static_cast<int>(n), data, data, sign, FFTW_ESTIMATE);
        if (plan_ == nullptr) throw std::runtime_error("fftw: plan creation failed");
    }
    ~Plan() { fftw_destroy_plan(plan_); }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;

    // fftw_execute_dft is thread-safe; only planning needs the lock.
    void execute(std::span<cplx> data) const
    {
        auto* p = reinterpret_cast<fftw_complex*>(data.data());
        if (fftw_alignment_of(reinterpret_cast<double*>(p)) != 0) {
            cvec copy(data.begin(), data.end());
            auto* q = reinterpret_cast<fftw_complex*>(copy.data());
            fftw_execute_dft(plan_, q, q);
            std::copy(copy.begin(), copy.end(), data.begin());
            return;
        }
        fftw_execute_dft(plan_, p, p);
    }

private:
    fftw_plan plan_;
};

inline const Plan& plan_for(std::size_t n, int sign)
{
    static std::mutex mutex;
    static std::map<std::pair<std::size_t, int>, std::unique_ptr<Plan>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[{n, sign}];
    if (!slot) slot = std::make_unique<Plan>(n, sign);
    return *slot;
}

} // namespace detail

/// In-place unnormalized forward DFT, X[k] = sum x[n] exp(-j 2 pi k n / N).
inline void fft_forward(std::span<cplx> data)
{
    if (data.empty()) return;
    detail::plan_for(data.size(), FFTW_FORWARD).execute(data);
}

/// In-place inverse DFT including the 1/N factor.
inline void fft_inverse(std::span<cplx> data)
{
    if (data.empty()) return;
    detail::plan_for(data.size(), FFTW_BACKWARD).execute(data);
    const double scale = 1.0 / static_cast<double>(data.size());
    for (auto& v : data) v *= scale;
}

/// Angular frequency of DFT bin k for an n-point block at sample_rate.
inline double bin_omega(std::size_t k, std::size_t n, double sample_rate)
{
    const auto signed_k = static_cast<double>(k < (n + 1) / 2 ? static_cast<long long>(k)
                                                              : static_cast<long long>(k) -
                                                                    static_cast<long long>(n));
    return 2.0 * std::numbers::pi * signed_k * sample_rate / static_cast<double>(n);
}

/// Circular convolution of a block with a centered odd-length FIR, via DFT.
/// Tap index taps.size()/2 is time zero, so the filter adds no delay.
inline cvec circular_filter(std::span<const cplx> block, std::span<const double> taps)
{
    const std::size_t n = block.size();
    cvec out(block.begin(), block.end());
    if (n == 0) return out;
    cvec kernel(n, cplx{});
    const auto center = static_cast<long long>(taps.size() / 2);
    const auto ln = static_cast<long long>(n);
    for (std::size_t i = 0; i < taps.size(); ++i) {
        long long idx = (static_cast<long long>(i) - center) % ln;
        if (idx < 0) idx += ln;
        kernel[static_cast<std::size_t>(idx)] += taps[i];
    }
    fft_forward(out);
    fft_forward(kernel);
    for (std::size_t k = 0; k < n; ++k) out[k] *= kernel[k];
    fft_inverse(out);
    return out;
}

} // namespace parzenfiber
