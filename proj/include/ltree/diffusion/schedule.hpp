#pragma once

#include <string>
#include <vector>

#include "ltree/core/rng.hpp"
#include "ltree/nn/tensor.hpp"

namespace ltree::diff {

enum class ScheduleFamily { Cosine, Linear };

ScheduleFamily schedule_family_from_string(const std::string& s);
std::string to_string(ScheduleFamily f);

// Forward-process coefficients shared by training and sampling.
// alpha_bar has T+1 entries indexed t = 0..T with alpha_bar[0] == 1 exactly,
// strictly decreasing, and alpha_bar[T] in (0, 1).
struct NoiseSchedule {
    ScheduleFamily family = ScheduleFamily::Cosine;
    int timesteps = 1000;
    std::vector<double> alpha_bar;

    static NoiseSchedule make(ScheduleFamily family, int timesteps);

    double ab(int t) const { return alpha_bar[size_t(t)]; }
    void check_t(int t) const;
};

// z_t = sqrt(ab_t) z0 + sqrt(1 - ab_t) noise. t == 0 returns z0 unchanged
// (bitwise), which makes the final inpainting substitution literal equality.
nn::Tensor<float> q_sample(const NoiseSchedule& sched, const nn::Tensor<float>& z0, int t,
                           const nn::Tensor<float>& noise);

nn::Tensor<float> gaussian_like(const nn::Tensor<float>& ref, Rng& rng);

}  // namespace ltree::diff
