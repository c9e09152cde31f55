#pragma once

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "fdtd/exec.hpp"

namespace oracle {

/// Angular frequency of the strongest spectral line in `samples` taken every
/// `dt`. Hann window, then a parabola through the log-magnitudes of the peak
/// bin and its neighbours.
inline double peak_omega(const std::vector<double>& samples, double dt) {
    const int n = static_cast<int>(samples.size());
    std::vector<double> in(n);
    for (int t = 0; t < n; ++t)
        in[t] = samples[t] * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * t / (n - 1)));
    std::unique_ptr<fftw_complex, void (*)(void*)> out(fftw_alloc_complex(n / 2 + 1), fftw_free);
    fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), out.get(), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    std::vector<double> mag(n / 2 + 1);
    for (int b = 0; b <= n / 2; ++b) mag[b] = std::hypot(out.get()[b][0], out.get()[b][1]);
    int best = 1;
    for (int b = 2; b < n / 2; ++b)
        if (mag[b] > mag[best]) best = b;
    const double a = std::log(mag[best - 1]), m = std::log(mag[best]), c = std::log(mag[best + 1]);
    const double shift = 0.5 * (a - c) / (a - 2 * m + c);
    return 2.0 * std::numbers::pi * (best + shift) / (n * dt);
}

/// Ez at the cavity centre sampled after every step, f64, given pipeline.
inline std::vector<double> centre_probe(const fdtd::SimParams& p, std::string_view pipeline, int steps, int m, int n,
                                        int q) {
    using namespace fdtd;
    auto f = make_fields<double>(p, InitialCondition::cavity_mode(m, n, q));
    const auto kernel = exec::lower_pipeline(p, pipeline);
    std::vector<double> out;
    out.reserve(steps);
    const Index ci = p.nx / 2, cj = p.ny / 2, ck = p.nz / 2;
    for (int s = 0; s < steps; ++s) {
        exec::run(kernel, f, 1, {.check_interval = 0});
        out.push_back(probe(f, Component::ez, ci, cj, ck));
    }
    return out;
}

} // namespace oracle
