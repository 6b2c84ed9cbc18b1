#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ltree/nn/adam.hpp"
#include "ltree/nn/unet3d.hpp"
#include "ltree/tree/codec_nets.hpp"

using namespace ltree;
using nn::Tensor;

namespace {

template <typename T>
Tensor<T> random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data) v = T(rng.normal() * scale);
    return t;
}

// Direct 7-loop convolution as the oracle for the im2col/GEMM path.
template <typename T>
Tensor<T> conv3d_reference(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int k,
                           int s, int p) {
    const int N = x.dim(0), Ci = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
    const int Co = w.dim(0);
    auto od = [&](int d) { return (d + 2 * p - k) / s + 1; };
    Tensor<T> out({N, Co, od(D), od(H), od(W)});
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co)
            for (int z = 0; z < out.dim(2); ++z)
                for (int y = 0; y < out.dim(3); ++y)
                    for (int xx = 0; xx < out.dim(4); ++xx) {
                        double acc = double(b.data[size_t(co)]);
                        for (int ci = 0; ci < Ci; ++ci)
                            for (int kd = 0; kd < k; ++kd)
                                for (int kh = 0; kh < k; ++kh)
                                    for (int kw = 0; kw < k; ++kw) {
                                        const int id = z * s - p + kd;
                                        const int ih = y * s - p + kh;
                                        const int iw = xx * s - p + kw;
                                        if (id < 0 || id >= D || ih < 0 || ih >= H || iw < 0 ||
                                            iw >= W)
                                            continue;
                                        acc += double(
                                                   w.data[size_t(
                                                       (((int64_t(co) * Ci + ci) * k + kd) * k +
                                                        kh) * k + kw)]) *
                                               double(x.data[size_t(
                                                   (((int64_t(n) * Ci + ci) * D + id) * H + ih) *
                                                       W + iw)]);
                                    }
                        out.data[size_t(((((int64_t(n) * Co + co) * out.dim(2) + z) * out.dim(3)) +
                                         y) * out.dim(4) + xx)] = T(acc);
                    }
    return out;
}

// Central-difference gradient check over a sampled subset of parameters.
// loss_fn must be deterministic.
template <typename LossFn>
void grad_check(nn::ParamRefs<double>& params, LossFn&& loss_fn, double h = 1e-5,
                double tol = 1e-3, int samples_per_param = 4) {
    // Analytic gradients.
    for (auto* p : params) p->zero_grad();
    loss_fn(true);
    Rng pick(99);
    int checked = 0;
    for (auto* p : params) {
        const int64_t n = p->value.numel();
        for (int s = 0; s < samples_per_param; ++s) {
            const int64_t i = int64_t(pick.uniform_int(0, n - 1));
            const double orig = p->value.data[size_t(i)];
            p->value.data[size_t(i)] = orig + h;
            const double lp = loss_fn(false);
            p->value.data[size_t(i)] = orig - h;
            const double lm = loss_fn(false);
            p->value.data[size_t(i)] = orig;
            const double fd = (lp - lm) / (2 * h);
            const double an = p->grad.data[size_t(i)];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            INFO("param ", p->name, " idx ", i, " fd=", fd, " an=", an);
            CHECK(std::abs(fd - an) / denom < tol);
            ++checked;
        }
    }
    CHECK(checked > 0);
}

}  // namespace

TEST_CASE("conv3d matches the direct-loop oracle (stride 1 and 2)") {
    Rng rng(3);
    for (int stride : {1, 2}) {
        nn::Conv3d<double> conv("c", 3, 5, 3, stride);
        conv.init_he(rng);
        auto x = random_tensor<double>({2, 3, 6, 6, 6}, rng);
        auto out = conv.forward(x);

        nn::ParamRefs<double> refs;
        conv.collect(refs);
        auto ref = conv3d_reference(x, refs[0]->value, refs[1]->value, 3, stride, 1);
        REQUIRE(out.shape == ref.shape);
        for (size_t i = 0; i < out.data.size(); ++i)
            CHECK(out.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv3d 1x1 matches oracle") {
    Rng rng(4);
    nn::Conv3d<double> conv("c", 4, 2, 1, 1, 0);
    conv.init_he(rng);
    auto x = random_tensor<double>({1, 4, 3, 3, 3}, rng);
    auto out = conv.forward(x);
    nn::ParamRefs<double> refs;
    conv.collect(refs);
    auto ref = conv3d_reference(x, refs[0]->value, refs[1]->value, 1, 1, 0);
    for (size_t i = 0; i < out.data.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
}

TEST_CASE("conv3d gradient check (input + params)") {
    Rng rng(5);
    nn::Conv3d<double> conv("c", 2, 3, 3, 1);
    conv.init_he(rng);
    auto x = random_tensor<double>({1, 2, 4, 4, 4}, rng);
    // loss = sum(out^2)/2; dL/dout = out
    nn::ParamRefs<double> params;
    conv.collect(params);
    auto loss_fn = [&](bool with_grad) {
        auto out = conv.forward(x);
        double loss = 0;
        for (double v : out.data) loss += v * v / 2;
        if (with_grad) conv.backward(out);
        return loss;
    };
    grad_check(params, loss_fn);

    // Input gradient via finite differences on one coordinate.
    auto out = conv.forward(x);
    auto gx = conv.backward(out);
    const double h = 1e-6;
    Rng pick(7);
    for (int s = 0; s < 5; ++s) {
        const int64_t i = int64_t(pick.uniform_int(0, x.numel() - 1));
        auto xp = x;
        xp.data[size_t(i)] += h;
        auto op = conv.forward(xp);
        double lp = 0;
        for (double v : op.data) lp += v * v / 2;
        auto xm = x;
        xm.data[size_t(i)] -= h;
        auto om = conv.forward(xm);
        double lm = 0;
        for (double v : om.data) lm += v * v / 2;
        const double fd = (lp - lm) / (2 * h);
        CHECK(std::abs(fd - gx.data[size_t(i)]) / std::max(1.0, std::abs(fd)) < 1e-4);
    }
}

TEST_CASE("groupnorm: normalizes groups and grad-checks") {
    Rng rng(6);
    nn::GroupNorm<double> gn("g", 4, 2);
    auto x = random_tensor<double>({2, 4, 3, 3, 3}, rng, 2.0);
    auto out = gn.forward(x);
    // Mean ~0, var ~1 per (n, group) with affine at identity.
    const int64_t spatial = 27;
    for (int n = 0; n < 2; ++n)
        for (int g = 0; g < 2; ++g) {
            double sum = 0, sq = 0;
            for (int c = g * 2; c < (g + 1) * 2; ++c)
                for (int64_t i = 0; i < spatial; ++i) {
                    const double v = out.data[size_t(((int64_t(n) * 4 + c) * spatial) + i)];
                    sum += v;
                    sq += v * v;
                }
            CHECK(std::abs(sum / (2 * spatial)) < 1e-10);
            CHECK(sq / (2 * spatial) == doctest::Approx(1.0).epsilon(1e-3));
        }

    nn::ParamRefs<double> params;
    gn.collect(params);
    // Randomize affine so grads are informative.
    for (auto* p : params)
        for (auto& v : p->value.data) v += rng.normal() * 0.1;
    auto loss_fn = [&](bool with_grad) {
        auto o = gn.forward(x);
        double loss = 0;
        for (size_t i = 0; i < o.data.size(); ++i) loss += std::sin(double(i) * 0.1) * o.data[i];
        if (with_grad) {
            Tensor<double> g0 = Tensor<double>::zeros_like(o);
            for (size_t i = 0; i < g0.data.size(); ++i) g0.data[i] = std::sin(double(i) * 0.1);
            gn.backward(g0);
        }
        return loss;
    };
    grad_check(params, loss_fn);

    // Input gradient.
    auto o = gn.forward(x);
    Tensor<double> g0 = Tensor<double>::zeros_like(o);
    for (size_t i = 0; i < g0.data.size(); ++i) g0.data[i] = std::sin(double(i) * 0.1);
    auto gx = gn.backward(g0);
    Rng pick(8);
    const double h = 1e-6;
    for (int s = 0; s < 6; ++s) {
        const int64_t i = int64_t(pick.uniform_int(0, x.numel() - 1));
        auto eval = [&](double delta) {
            auto xx = x;
            xx.data[size_t(i)] += delta;
            auto oo = gn.infer(xx);
            double loss = 0;
            for (size_t j = 0; j < oo.data.size(); ++j)
                loss += std::sin(double(j) * 0.1) * oo.data[j];
            return loss;
        };
        const double fd = (eval(h) - eval(-h)) / (2 * h);
        CHECK(std::abs(fd - gx.data[size_t(i)]) / std::max({std::abs(fd), 1e-6}) < 1e-3);
    }
}

TEST_CASE("silu, linear, upsample backward vs finite differences") {
    Rng rng(9);
    // SiLU
    {
        nn::SiLU<double> act;
        auto x = random_tensor<double>({1, 2, 2, 2, 2}, rng);
        auto out = act.forward(x);
        auto gx = act.backward(out);  // dL/dx with L = sum(out^2)/2
        const double h = 1e-6;
        for (int64_t i = 0; i < x.numel(); ++i) {
            auto xp = x;
            xp.data[size_t(i)] += h;
            auto xm = x;
            xm.data[size_t(i)] -= h;
            double lp = 0, lm = 0;
            for (double v : act.infer(xp).data) lp += v * v / 2;
            for (double v : act.infer(xm).data) lm += v * v / 2;
            CHECK(std::abs((lp - lm) / (2 * h) - gx.data[size_t(i)]) < 1e-6);
        }
    }
    // Linear
    {
        nn::Linear<double> lin("l", 6, 4);
        lin.init_he(rng);
        auto x = random_tensor<double>({3, 6}, rng);
        nn::ParamRefs<double> params;
        lin.collect(params);
        auto loss_fn = [&](bool with_grad) {
            auto o = lin.forward(x);
            double loss = 0;
            for (double v : o.data) loss += v * v / 2;
            if (with_grad) lin.backward(o);
            return loss;
        };
        grad_check(params, loss_fn);
    }
    // Upsample: backward sums children
    {
        nn::UpsampleNearest<double> up(2);
        auto x = random_tensor<double>({1, 1, 2, 2, 2}, rng);
        auto out = up.forward(x);
        CHECK(out.dim(2) == 4);
        Tensor<double> gout(out.shape, 1.0);
        auto gx = up.backward(gout);
        for (double v : gx.data) CHECK(v == doctest::Approx(8.0));
    }
}

TEST_CASE("unet: shape contract across spatial sizes") {
    nn::UNet3dConfig cfg;
    cfg.in_channels = 3;
    cfg.out_channels = 2;
    cfg.base_width = 4;
    cfg.channel_mults = {1, 2, 2};
    cfg.groups = 2;
    cfg.sin_dim = 8;
    cfg.temb_dim = 16;
    nn::UNet3d<float> net(cfg);
    Rng rng(10);
    net.init(rng);
    for (int d : {8, 16, 32})
        for (int hh : {8, 16, 32})
            for (int w : {8, 16, 32}) {
                Tensor<float> x({1, 3, d, hh, w});
                for (auto& v : x.data) v = rng.normal_f();
                auto out = net.infer(x, {500});
                CHECK(out.shape == std::vector<int>({1, 2, d, hh, w}));
            }
    CHECK_THROWS(net.infer(Tensor<float>({1, 3, 6, 8, 8}), {1}));
}

TEST_CASE("unet: untrained output is exactly zero (zero-init head)") {
    nn::UNet3dConfig cfg;
    cfg.in_channels = 2;
    cfg.out_channels = 2;
    cfg.base_width = 4;
    cfg.channel_mults = {1, 2};
    cfg.groups = 2;
    nn::UNet3d<float> net(cfg);
    Rng rng(11);
    net.init(rng);
    Tensor<float> x({2, 2, 8, 8, 8});
    for (auto& v : x.data) v = rng.normal_f();
    auto out = net.infer(x, {1, 999});
    for (float v : out.data) CHECK(v == 0.f);
}

TEST_CASE("unet: forward equals infer and batch chunking is consistent") {
    nn::UNet3dConfig cfg;
    cfg.in_channels = 2;
    cfg.out_channels = 2;
    cfg.base_width = 4;
    cfg.channel_mults = {1, 2};
    cfg.groups = 2;
    nn::UNet3d<float> net(cfg);
    Rng rng(12);
    net.init(rng);
    // Give the head nonzero weights so the outputs are informative.
    nn::ParamRefs<float> params;
    net.collect(params);
    for (auto* p : params)
        if (p->value.numel() > 0 && p->name.rfind("out.conv", 0) == 0)
            for (auto& v : p->value.data) v = rng.normal_f() * 0.05f;

    Tensor<float> batch({3, 2, 8, 8, 8});
    for (auto& v : batch.data) v = rng.normal_f();
    auto full = net.forward(batch, {5, 250, 900});
    auto also = net.infer(batch, {5, 250, 900});
    REQUIRE(full.shape == also.shape);
    for (size_t i = 0; i < full.data.size(); ++i) CHECK(full.data[i] == also.data[i]);

    // Per-sample inference matches the batched result bitwise.
    const int64_t stride = batch.numel() / 3;
    const std::vector<int> ts = {5, 250, 900};
    for (int b = 0; b < 3; ++b) {
        Tensor<float> one({1, 2, 8, 8, 8});
        std::copy(batch.ptr() + b * stride, batch.ptr() + (b + 1) * stride, one.ptr());
        auto out = net.infer(one, {ts[size_t(b)]});
        for (int64_t i = 0; i < stride; ++i)
            CHECK(out.data[size_t(i)] == full.data[size_t(b * stride + i)]);
    }
}

TEST_CASE("unet gradient check (epsilon-MSE loss, double precision)") {
    nn::UNet3dConfig cfg;
    cfg.in_channels = 2;
    cfg.out_channels = 1;
    cfg.base_width = 2;
    cfg.channel_mults = {1, 2};
    cfg.groups = 1;
    cfg.sin_dim = 4;
    cfg.temb_dim = 8;
    nn::UNet3d<double> net(cfg);
    Rng rng(13);
    net.init(rng);
    nn::ParamRefs<double> params;
    net.collect(params);
    // Zero-init head would silence most gradients; randomize it.
    for (auto* p : params)
        if (p->name.rfind("out.conv", 0) == 0)
            for (auto& v : p->value.data) v = rng.normal() * 0.1;

    auto x = random_tensor<double>({1, 2, 4, 4, 4}, rng);
    auto target = random_tensor<double>({1, 1, 4, 4, 4}, rng);
    auto loss_fn = [&](bool with_grad) {
        auto out = net.forward(x, {321});
        double loss = 0;
        for (size_t i = 0; i < out.data.size(); ++i) {
            const double d = out.data[i] - target.data[i];
            loss += d * d;
        }
        loss /= double(out.numel());
        if (with_grad) {
            Tensor<double> g = Tensor<double>::zeros_like(out);
            for (size_t i = 0; i < out.data.size(); ++i)
                g.data[i] = 2.0 * (out.data[i] - target.data[i]) / double(out.numel());
            net.backward(g);
        }
        return loss;
    };
    grad_check(params, loss_fn, 1e-5, 1e-3, 2);
}

TEST_CASE("codec nets: shape contracts and halo sanity") {
    Rng rng(14);
    for (int f : {2, 4}) {
        tree::EncoderNet<float> enc("e", 1, 4, 8, f, 0);
        tree::DecoderNet<float> dec("d", 5, 1, 8, f, 0);
        enc.init(rng);
        dec.init(rng);
        Tensor<float> x({1, 1, 8, 8, 8});
        for (auto& v : x.data) v = rng.normal_f();
        auto lat = enc.infer(x);
        CHECK(lat.shape == std::vector<int>({1, 4, 8 / f, 8 / f, 8 / f}));
        Tensor<float> dec_in({1, 5, 8 / f, 8 / f, 8 / f});
        for (auto& v : dec_in.data) v = rng.normal_f();
        auto out = dec.infer(dec_in);
        CHECK(out.shape == std::vector<int>({1, 1, 8, 8, 8}));
        CHECK(enc.input_halo() % f == 0);
        CHECK(enc.input_halo() > 0);
        CHECK(dec.input_halo() > 0);
    }
}

TEST_CASE("adam: converges on a quadratic and round-trips state") {
    nn::Param<float> p;
    p.name = "w";
    p.value = Tensor<float>({4}, 5.f);
    p.grad = Tensor<float>({4});
    nn::Adam<float> opt({&p}, 0.1);
    for (int i = 0; i < 300; ++i) {
        opt.zero_grad();
        for (int j = 0; j < 4; ++j) p.grad.data[size_t(j)] = 2.f * p.value.data[size_t(j)];
        opt.step();
    }
    for (float v : p.value.data) CHECK(std::abs(v) < 1e-2f);

    io::ByteWriter w;
    opt.save_state(w);
    nn::Adam<float> opt2({&p}, 0.1);
    io::ByteReader r(w.buf);
    opt2.load_state(r);
    CHECK(opt2.step_count() == opt.step_count());
}
