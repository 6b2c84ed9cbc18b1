#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ltree/diffusion/sampler.hpp"
#include "ltree/diffusion/train.hpp"

using namespace ltree;
using diff::NoiseSchedule;
using diff::ScheduleFamily;
using nn::Tensor;

namespace {

// Emits a fixed tensor regardless of input.
class FixedDenoiser final : public diff::Denoiser {
public:
    FixedDenoiser(Tensor<float> eps, bool conditional = false)
        : eps_(std::move(eps)), conditional_(conditional) {}

    Tensor<float> predict_eps(const Tensor<float>& z_t, const std::vector<int>&,
                              const Tensor<float>* cond) const override {
        if (conditional_ != (cond != nullptr)) throw std::invalid_argument("condition mismatch");
        Tensor<float> out({z_t.dim(0), eps_.dim(1), z_t.dim(2), z_t.dim(3), z_t.dim(4)});
        const int64_t stride = eps_.numel();
        for (int b = 0; b < z_t.dim(0); ++b)
            std::copy(eps_.data.begin(), eps_.data.end(), out.ptr() + b * stride);
        return out;
    }
    int z_channels() const override { return eps_.dim(1); }
    bool conditional() const override { return conditional_; }

private:
    Tensor<float> eps_;
    bool conditional_;
};

// eps = a * z + b, elementwise; mirrors a scalar recurrence exactly.
class LinearDenoiser final : public diff::Denoiser {
public:
    LinearDenoiser(int channels, float a, float b) : channels_(channels), a_(a), b_(b) {}
    Tensor<float> predict_eps(const Tensor<float>& z_t, const std::vector<int>&,
                              const Tensor<float>*) const override {
        Tensor<float> out = z_t;
        for (auto& v : out.data) v = a_ * v + b_;
        return out;
    }
    int z_channels() const override { return channels_; }
    bool conditional() const override { return false; }

private:
    int channels_;
    float a_, b_;
};

}  // namespace

TEST_CASE("schedule: invariants and closed-form endpoints") {
    for (auto family : {ScheduleFamily::Cosine, ScheduleFamily::Linear}) {
        auto s = NoiseSchedule::make(family, 1000);
        CHECK(s.ab(0) == 1.0);
        for (int t = 1; t <= 1000; ++t) CHECK(s.ab(t) < s.ab(t - 1));
        CHECK(s.ab(1000) > 0.0);
        CHECK(s.ab(1000) < 1.0);
    }
    // Cosine matches its closed form wherever betas are below the clip.
    auto s = NoiseSchedule::make(ScheduleFamily::Cosine, 1000);
    const double offs = 0.008;
    auto f = [&](double t) {
        const double a = (t / 1000.0 + offs) / (1.0 + offs) * M_PI / 2.0;
        return std::cos(a) * std::cos(a);
    };
    for (int t : {1, 10, 100, 500, 900}) {
        const double expect = f(t) / f(0);
        CHECK(s.ab(t) == doctest::Approx(expect).epsilon(1e-6));
    }
    // Endpoint collapses to (numerically) zero, matching cos^2(pi/2) = 0.
    CHECK(s.ab(1000) < 1e-6);

    // Linear matches the cumulative product of its betas.
    auto lin = NoiseSchedule::make(ScheduleFamily::Linear, 100);
    double prod = 1.0;
    for (int t = 1; t <= 100; ++t) {
        const double beta = 1e-4 + (0.02 - 1e-4) * double(t - 1) / 99.0;
        prod *= 1.0 - beta;
        CHECK(lin.ab(t) == doctest::Approx(prod).epsilon(1e-12));
    }
}

TEST_CASE("q_sample: endpoints, zero noise, hand-computed case") {
    auto s = NoiseSchedule::make(ScheduleFamily::Cosine, 10);
    Tensor<float> z0({1, 1, 2, 2, 2});
    Rng rng(1);
    for (auto& v : z0.data) v = rng.normal_f();

    // t = 0 is the identity, bitwise.
    Tensor<float> zero = Tensor<float>::zeros_like(z0);
    auto same = diff::q_sample(s, z0, 0, zero);
    CHECK(same.data == z0.data);

    // Zero noise scales by sqrt(ab_t) exactly.
    auto scaled = diff::q_sample(s, z0, 5, zero);
    const float a = float(std::sqrt(s.ab(5)));
    for (size_t i = 0; i < z0.data.size(); ++i) CHECK(scaled.data[i] == a * z0.data[i]);

    // Hand-computed affine combination on one element.
    Tensor<float> noise = Tensor<float>::zeros_like(z0);
    noise.data[3] = 2.f;
    z0.fill(0.5f);
    auto zt = diff::q_sample(s, z0, 5, noise);
    const float b = float(std::sqrt(1.0 - s.ab(5)));
    CHECK(zt.data[3] == a * 0.5f + b * 2.f);
    CHECK(zt.data[0] == a * 0.5f);

    CHECK_THROWS(diff::q_sample(s, z0, 11, noise));
    CHECK_THROWS(diff::q_sample(s, z0, -1, noise));
}

TEST_CASE("q_sample: second-moment statistics match the schedule") {
    auto s = NoiseSchedule::make(ScheduleFamily::Cosine, 100);
    Rng rng(7);
    Tensor<float> z0({1, 1, 4, 4, 4});
    for (auto& v : z0.data) v = rng.normal_f();
    double z0_sq = 0;
    for (float v : z0.data) z0_sq += double(v) * v;

    const int t = 40;
    const int draws = 1000;
    const int64_t numel = z0.numel();
    double mean_sq = 0;
    for (int d = 0; d < draws; ++d) {
        auto noise = diff::gaussian_like(z0, rng);
        auto zt = diff::q_sample(s, z0, t, noise);
        double sq = 0;
        for (float v : zt.data) sq += double(v) * v;
        mean_sq += sq;
    }
    mean_sq /= draws;
    const double expect = s.ab(t) * z0_sq + (1.0 - s.ab(t)) * double(numel);
    // 3-sigma band for the mean of `draws` chi-square-ish sums.
    const double sigma = (1.0 - s.ab(t)) * std::sqrt(2.0 * double(numel)) / std::sqrt(double(draws));
    CHECK(std::abs(mean_sq - expect) < 3.0 * sigma + 1e-6);
}

TEST_CASE("make_timesteps: descending ladder from T") {
    auto ts = diff::make_timesteps(1000, 50);
    CHECK(ts.front() == 1000);
    CHECK(ts.back() > 0);
    for (size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
    CHECK(ts.size() == 50);
    auto all = diff::make_timesteps(10, 10);
    CHECK(all == std::vector<int>({10, 9, 8, 7, 6, 5, 4, 3, 2, 1}));
    CHECK_THROWS(diff::make_timesteps(10, 11));
}

TEST_CASE("ddim step: exact algebraic inversion with the true noise") {
    auto s = NoiseSchedule::make(ScheduleFamily::Cosine, 100);
    Rng rng(3);
    Tensor<float> z0({1, 2, 2, 2, 2});
    for (auto& v : z0.data) v = rng.normal_f();
    Tensor<float> eps = diff::gaussian_like(z0, rng);

    // If the denoiser outputs exactly the noise used by q_sample, each DDIM
    // step lands on q_sample(z0, t_prev) with the same eps.
    FixedDenoiser denoiser{eps};
    for (int t : {100, 60, 17, 1}) {
        auto z_t = diff::q_sample(s, z0, t, eps);
        const int t_prev = t / 2;
        auto stepped = diff::step_from_eps(s, z_t, eps, t, t_prev, diff::SamplerKind::Ddim, rng);
        auto expect = diff::q_sample(s, z0, t_prev, eps);
        // Float rounding of z_t is amplified by sqrt(ab_prev / ab_t); scale
        // the tolerance accordingly (exact in exact arithmetic).
        const double amp = std::sqrt(s.ab(t_prev) / s.ab(t));
        const double tol = 1e-6 * std::max(1.0, amp);
        for (size_t i = 0; i < stepped.data.size(); ++i)
            CHECK(std::abs(double(stepped.data[i]) - double(expect.data[i])) <
                  tol * std::max(1.0, std::abs(double(expect.data[i]))));
    }
}

TEST_CASE("ddpm step: final step adds no noise and needs no rng") {
    auto s = NoiseSchedule::make(ScheduleFamily::Cosine, 50);
    Rng rng_a(1), rng_b(999);  // different streams
    Tensor<float> z1({1, 1, 2, 2, 2}, 0.7f);
    Tensor<float> eps({1, 1, 2, 2, 2}, 0.1f);
    auto a = diff::step_from_eps(s, z1, eps, 1, 0, diff::SamplerKind::Ddpm, rng_a);
    auto b = diff::step_from_eps(s, z1, eps, 1, 0, diff::SamplerKind::Ddpm, rng_b);
    CHECK(a.data == b.data);  // no stochastic term at t_prev = 0

    // Noise enters at interior steps.
    Rng rng_c(1), rng_d(999);
    auto c = diff::step_from_eps(s, z1, eps, 10, 9, diff::SamplerKind::Ddpm, rng_c);
    auto d = diff::step_from_eps(s, z1, eps, 10, 9, diff::SamplerKind::Ddpm, rng_d);
    CHECK(c.data != d.data);
}

TEST_CASE("8-step ddim trajectory matches a scalar re-implementation") {
    auto s = NoiseSchedule::make(ScheduleFamily::Cosine, 64);
    const float a = 0.3f, b = -0.05f;
    LinearDenoiser denoiser(1, a, b);
    Rng rng(5);
    auto z = diff::sample_patch(denoiser, s, {1, 1, 2, 2, 2}, nullptr,
                                {diff::SamplerKind::Ddim, 8}, rng);

    // Scalar oracle: replay the same draws through the closed-form update.
    Rng rng2(5);
    std::vector<double> zs(8);
    for (auto& v : zs) v = double(float(rng2.normal()));
    auto ts = diff::make_timesteps(64, 8);
    for (size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
        const double c0 = std::sqrt(s.ab(t_prev) / s.ab(t));
        const double c1 =
            std::sqrt(1.0 - s.ab(t_prev)) - std::sqrt(s.ab(t_prev) / s.ab(t)) * std::sqrt(1.0 - s.ab(t));
        for (auto& v : zs) {
            const double eps = double(a) * v + double(b);
            v = double(float(c0)) * v + double(float(c1)) * eps;
        }
    }
    for (size_t i = 0; i < 8; ++i)
        CHECK(z.data[i] == doctest::Approx(float(zs[i])).epsilon(1e-5));
}

TEST_CASE("sample_patch: deterministic per seed, ddpm and ddim") {
    auto s = NoiseSchedule::make(ScheduleFamily::Cosine, 32);
    LinearDenoiser denoiser(2, 0.2f, 0.0f);
    for (auto kind : {diff::SamplerKind::Ddim, diff::SamplerKind::Ddpm}) {
        Rng ra(9), rb(9), rc(10);
        auto za = diff::sample_patch(denoiser, s, {1, 2, 4, 4, 4}, nullptr, {kind, 8}, ra);
        auto zb = diff::sample_patch(denoiser, s, {1, 2, 4, 4, 4}, nullptr, {kind, 8}, rb);
        auto zc = diff::sample_patch(denoiser, s, {1, 2, 4, 4, 4}, nullptr, {kind, 8}, rc);
        CHECK(za.data == zb.data);
        CHECK(za.data != zc.data);
    }
}

TEST_CASE("denoiser wrapper: condition handling and checkpoint roundtrip") {
    diff::DenoiserConfig cfg;
    cfg.level = 2;
    cfg.z_channels = 2;
    cfg.conditional = true;
    cfg.unet.base_width = 4;
    cfg.unet.channel_mults = {1, 2};
    cfg.unet.groups = 2;
    cfg.unet.sin_dim = 8;
    cfg.unet.temb_dim = 16;
    cfg.timesteps = 50;
    cfg.z_mean = {0.1f, -0.2f};
    cfg.z_std = {1.5f, 0.7f};
    cfg.cond_mean = 0.05f;
    cfg.cond_std = 0.02f;
    diff::UNetDenoiser denoiser(cfg);
    Rng rng(12);
    denoiser.init(rng);

    Tensor<float> z({2, 2, 8, 8, 8});
    for (auto& v : z.data) v = rng.normal_f();
    Tensor<float> cond({2, 1, 8, 8, 8}, 0.05f);
    CHECK_THROWS(denoiser.predict_eps(z, {5, 7}, nullptr));  // missing condition
    auto eps = denoiser.predict_eps(z, {5, 7}, &cond);
    CHECK(eps.shape == z.shape);

    Tensor<float> bad({2, 1, 4, 8, 8});
    CHECK_THROWS(denoiser.predict_eps(z, {5, 7}, &bad));

    const auto tmp = std::filesystem::temp_directory_path() / "denoiser_test.dck";
    diff::save_denoiser(tmp.string(), denoiser, 123, 0.5);
    auto back = diff::load_denoiser(tmp.string());
    CHECK(back->config().z_channels == 2);
    CHECK(back->config().cond_std == 0.02f);
    auto eps2 = back->predict_eps(z, {5, 7}, &cond);
    CHECK(eps2.data == eps.data);
    std::filesystem::remove(tmp);

    // Unconditional wrapper rejects a condition.
    diff::DenoiserConfig ucfg = cfg;
    ucfg.conditional = false;
    ucfg.z_channels = 3;
    ucfg.z_mean.clear();
    ucfg.z_std.clear();
    diff::UNetDenoiser udenoiser(ucfg);
    udenoiser.init(rng);
    Tensor<float> z3({1, 3, 8, 8, 8});
    CHECK_THROWS(udenoiser.predict_eps(z3, {5}, &cond));
}

TEST_CASE("untrained denoiser: eps-MSE sits at 1.0 over many batches") {
    // Zero-init output head => prediction is exactly zero, so the loss is the
    // mean square of unit Gaussian noise.
    Rng rng(31);
    double total = 0;
    int64_t count = 0;
    for (int batch = 0; batch < 64; ++batch) {
        Tensor<float> eps({1, 2, 4, 4, 4});
        for (auto& v : eps.data) v = rng.normal_f();
        for (float v : eps.data) total += double(v) * v;
        count += eps.numel();
    }
    const double mse = total / double(count);
    CHECK(mse == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("paper defaults recorded in the training config") {
    diff::DiffusionTrainConfig cfg;
    CHECK(cfg.batch_size == 8);
    CHECK(cfg.lr == 1e-4);
    CHECK(cfg.timesteps == 1000);
    tree::CodecTrainConfig cc;
    CHECK(cc.batch_size == 4);
    CHECK(cc.lr == 1e-4);
    CHECK(cc.latent_channels == 4);
    CHECK(cc.levels == 3);
}
