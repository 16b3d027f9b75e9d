#include "rawburst/register/phase_correlation.hpp"

#include "rawburst/util/errors.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

namespace rawburst {

namespace {

// FFTW's planner is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwBuffer {
    explicit FftwBuffer(std::size_t n) : ptr(fftw_alloc_complex(n)) {
        if (!ptr) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(ptr); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
    fftw_complex* ptr;
};

class Plan {
public:
    Plan(int h, int w, fftw_complex* in, fftw_complex* out, int sign) {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan_ = fftw_plan_dft_2d(h, w, in, out, sign, FFTW_ESTIMATE);
        if (!plan_) throw NumericalError("phase_correlate: FFT planning failed");
    }
    ~Plan() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
    void run() const { fftw_execute(plan_); }

private:
    fftw_plan plan_;
};

std::vector<double> hann(int n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
    return w;
}

// Mean-removed, windowed copy packed into a complex buffer; returns the signal energy.
double prepare(const Image& img, const std::vector<double>& wy, const std::vector<double>& wx, fftw_complex* out) {
    const double mean = mean_value(img);
    double energy = 0.0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const double v = (img(y, x) - mean) * wy[y] * wx[x];
            const std::size_t i = static_cast<std::size_t>(y) * img.width() + x;
            out[i][0] = v;
            out[i][1] = 0.0;
            energy += v * v;
        }
    return energy;
}

int wrap(int i, int n) { return ((i % n) + n) % n; }

} // namespace

Image fill_masked(const Image& values, const Image& mask) {
    require(values.same_shape(mask), "fill_masked: shape mismatch");
    double sum = 0.0, count = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (mask.values()[i] > 0.0) {
            sum += values.values()[i];
            count += 1.0;
        }
    const double fill = count > 0.0 ? sum / count : 0.0;
    Image out = values;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (mask.values()[i] <= 0.0) out.values()[i] = fill;
    return out;
}

Shift phase_correlate(const Image& ref, const Image& mov) {
    require(ref.same_shape(mov), "phase_correlate: inputs must have equal sizes");
    require(ref.channels() == 1, "phase_correlate: expects single-channel inputs");
    require(all_finite(ref) && all_finite(mov), "phase_correlate: inputs must be finite");
    const int h = ref.height(), w = ref.width();
    require(h >= 3 && w >= 3, "phase_correlate: inputs must be at least 3x3");
    const std::size_t n = static_cast<std::size_t>(h) * w;

    FftwBuffer a(n), b(n), spectrum(n);
    const std::vector<double> wy = hann(h), wx = hann(w);
    const double ea = prepare(ref, wy, wx, a.ptr);
    const double eb = prepare(mov, wy, wx, b.ptr);
    if (!(ea > 1e-20) || !(eb > 1e-20)) throw NoSignalError("phase_correlate: input has no signal");

    {
        Plan fa(h, w, a.ptr, a.ptr, FFTW_FORWARD);
        Plan fb(h, w, b.ptr, b.ptr, FFTW_FORWARD);
        fa.run();
        fb.run();
    }
    double peak_mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::complex<double> fa(a.ptr[i][0], a.ptr[i][1]), fb(b.ptr[i][0], b.ptr[i][1]);
        peak_mag = std::max(peak_mag, std::abs(fa) * std::abs(fb));
    }
    const double eps = 1e-12 * peak_mag;
    for (std::size_t i = 0; i < n; ++i) {
        const std::complex<double> fa(a.ptr[i][0], a.ptr[i][1]), fb(b.ptr[i][0], b.ptr[i][1]);
        const std::complex<double> cross = fb * std::conj(fa);
        const double mag = std::abs(cross);
        const std::complex<double> r = mag > eps ? cross / mag : std::complex<double>(0.0, 0.0);
        spectrum.ptr[i][0] = r.real();
        spectrum.ptr[i][1] = r.imag();
    }
    {
        Plan inv(h, w, spectrum.ptr, spectrum.ptr, FFTW_BACKWARD);
        inv.run();
    }

    auto corr = [&](int y, int x) { return spectrum.ptr[static_cast<std::size_t>(wrap(y, h)) * w + wrap(x, w)][0]; };
    int py = 0, px = 0;
    double best = corr(0, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (corr(y, x) > best) {
                best = corr(y, x);
                py = y;
                px = x;
            }

    // Parabola through the peak and its two neighbours, separately along each axis. A 2-D
    // least-squares quadratic over the 3x3 block is biased when the peak splits over four bins.
    auto vertex = [](double before, double centre, double after) {
        const double curvature = before - 2.0 * centre + after;
        return curvature < 0.0 ? 0.5 * (before - after) / curvature : 0.0;
    };
    const double ox = vertex(corr(py, px - 1), best, corr(py, px + 1));
    const double oy = vertex(corr(py - 1, px), best, corr(py + 1, px));

    Shift s;
    s.dy = (py >= (h + 1) / 2 ? py - h : py) + oy;
    s.dx = (px >= (w + 1) / 2 ? px - w : px) + ox;
    return s;
}

} // namespace rawburst
