#include "ltree/diffusion/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace ltree::diff {

SamplerKind sampler_from_string(const std::string& s) {
    if (s == "ddpm") return SamplerKind::Ddpm;
    if (s == "ddim") return SamplerKind::Ddim;
    throw std::invalid_argument("unknown sampler: " + s);
}

std::string to_string(SamplerKind k) { return k == SamplerKind::Ddpm ? "ddpm" : "ddim"; }

std::vector<int> make_timesteps(int timesteps, int steps) {
    if (steps < 1 || steps > timesteps)
        throw std::invalid_argument("sampler steps must be in [1, T]");
    std::vector<int> ts;
    for (int i = steps; i >= 1; --i) {
        const int t = int(std::llround(double(timesteps) * i / double(steps)));
        if (ts.empty() || ts.back() != t) ts.push_back(t);
    }
    return ts;  // descending, last > 0; the step loop appends the final 0 target
}

nn::Tensor<float> step_from_eps(const NoiseSchedule& sched, const nn::Tensor<float>& z_t,
                                const nn::Tensor<float>& eps, int t, int t_prev, SamplerKind kind,
                                Rng& rng) {
    sched.check_t(t);
    if (t_prev < 0 || t_prev >= t) throw std::invalid_argument("step: need 0 <= t_prev < t");
    z_t.check_same(eps, "step_from_eps");
    const double ab_t = sched.ab(t);
    const double ab_p = sched.ab(t_prev);
    nn::Tensor<float> out = nn::Tensor<float>::zeros_like(z_t);

    if (kind == SamplerKind::Ddim) {
        // z0_hat = (z_t - sqrt(1-ab_t) eps) / sqrt(ab_t)
        // z_prev = sqrt(ab_p) z0_hat + sqrt(1-ab_p) eps
        const float c0 = float(std::sqrt(ab_p / ab_t));
        const float c1 = float(std::sqrt(1.0 - ab_p) - std::sqrt(ab_p / ab_t) * std::sqrt(1.0 - ab_t));
        for (size_t i = 0; i < out.data.size(); ++i)
            out.data[i] = c0 * z_t.data[i] + c1 * eps.data[i];
        return out;
    }

    // DDPM posterior step generalized to a (t, t_prev) pair.
    const double alpha = ab_t / ab_p;
    const double beta = 1.0 - alpha;
    const float m0 = float(1.0 / std::sqrt(alpha));
    const float m1 = float(beta / std::sqrt(1.0 - ab_t) / std::sqrt(alpha));
    const double var = (1.0 - ab_p) / (1.0 - ab_t) * beta;
    const float sigma = t_prev == 0 ? 0.f : float(std::sqrt(var));
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = m0 * z_t.data[i] - m1 * eps.data[i];
    if (sigma > 0.f)
        for (auto& v : out.data) v += sigma * rng.normal_f();
    return out;
}

nn::Tensor<float> denoise_step(const Denoiser& denoiser, const NoiseSchedule& sched,
                               const nn::Tensor<float>& z_t, int t,
                               const nn::Tensor<float>* cond, SamplerKind kind, Rng& rng) {
    auto eps = denoiser.predict_eps(z_t, std::vector<int>(size_t(z_t.dim(0)), t), cond);
    return step_from_eps(sched, z_t, eps, t, t - 1, kind, rng);
}

nn::Tensor<float> sample_patch(const Denoiser& denoiser, const NoiseSchedule& sched,
                               const std::vector<int>& shape, const nn::Tensor<float>* cond,
                               const SamplerConfig& sampler, Rng& rng) {
    if (shape.size() != 5 || shape[1] != denoiser.z_channels())
        throw std::invalid_argument("sample_patch: shape inconsistent with denoiser");
    nn::Tensor<float> z(shape);
    for (auto& v : z.data) v = rng.normal_f();

    const auto ts = make_timesteps(sched.timesteps, sampler.steps);
    for (size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
        auto eps = denoiser.predict_eps(z, std::vector<int>(size_t(shape[0]), t), cond);
        z = step_from_eps(sched, z, eps, t, t_prev, sampler.kind, rng);
    }
    for (float v : z.data)
        if (!std::isfinite(v)) throw std::runtime_error("sample_patch: non-finite output");
    return z;
}

}  // namespace ltree::diff
