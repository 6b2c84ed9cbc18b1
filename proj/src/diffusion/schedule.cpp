#include "ltree/diffusion/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace ltree::diff {

ScheduleFamily schedule_family_from_string(const std::string& s) {
    if (s == "cosine") return ScheduleFamily::Cosine;
    if (s == "linear") return ScheduleFamily::Linear;
    throw std::invalid_argument("unknown schedule family: " + s);
}

std::string to_string(ScheduleFamily f) {
    return f == ScheduleFamily::Cosine ? "cosine" : "linear";
}

NoiseSchedule NoiseSchedule::make(ScheduleFamily family, int timesteps) {
    if (timesteps < 1) throw std::invalid_argument("schedule: timesteps must be >= 1");
    NoiseSchedule s;
    s.family = family;
    s.timesteps = timesteps;
    s.alpha_bar.assign(size_t(timesteps) + 1, 1.0);

    if (family == ScheduleFamily::Cosine) {
        // Squared-cosine ramp with offset 0.008; betas clipped at 0.999.
        const double offs = 0.008;
        auto f = [&](double t) {
            const double a = (t / double(timesteps) + offs) / (1.0 + offs) * M_PI / 2.0;
            return std::cos(a) * std::cos(a);
        };
        const double f0 = f(0.0);
        double prev_raw = 1.0;
        for (int t = 1; t <= timesteps; ++t) {
            const double raw = f(double(t)) / f0;
            double beta = 1.0 - raw / prev_raw;
            beta = std::min(beta, 0.999);
            s.alpha_bar[size_t(t)] = s.alpha_bar[size_t(t) - 1] * (1.0 - beta);
            prev_raw = raw;
        }
    } else {
        const double beta_start = 1e-4, beta_end = 0.02;
        for (int t = 1; t <= timesteps; ++t) {
            const double beta =
                timesteps == 1
                    ? beta_start
                    : beta_start + (beta_end - beta_start) * double(t - 1) / double(timesteps - 1);
            s.alpha_bar[size_t(t)] = s.alpha_bar[size_t(t) - 1] * (1.0 - beta);
        }
    }
    for (int t = 1; t <= timesteps; ++t)
        if (!(s.alpha_bar[size_t(t)] < s.alpha_bar[size_t(t) - 1]))
            throw std::logic_error("schedule: alpha_bar not strictly decreasing");
    if (!(s.alpha_bar.back() > 0.0 && s.alpha_bar.back() < 1.0))
        throw std::logic_error("schedule: bad endpoint");
    return s;
}

void NoiseSchedule::check_t(int t) const {
    if (t < 1 || t > timesteps)
        throw std::invalid_argument("timestep out of range [1, T]: " + std::to_string(t));
}

nn::Tensor<float> q_sample(const NoiseSchedule& sched, const nn::Tensor<float>& z0, int t,
                           const nn::Tensor<float>& noise) {
    if (t == 0) return z0;
    sched.check_t(t);
    z0.check_same(noise, "q_sample");
    const float a = float(std::sqrt(sched.ab(t)));
    const float b = float(std::sqrt(1.0 - sched.ab(t)));
    nn::Tensor<float> out = nn::Tensor<float>::zeros_like(z0);
    for (size_t i = 0; i < z0.data.size(); ++i) out.data[i] = a * z0.data[i] + b * noise.data[i];
    return out;
}

nn::Tensor<float> gaussian_like(const nn::Tensor<float>& ref, Rng& rng) {
    nn::Tensor<float> out = nn::Tensor<float>::zeros_like(ref);
    for (auto& v : out.data) v = rng.normal_f();
    return out;
}

}  // namespace ltree::diff
