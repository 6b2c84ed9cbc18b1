#include "ltree/diffusion/denoiser.hpp"

#include <json.hpp>

#include "ltree/core/binio.hpp"
#include "ltree/core/threads.hpp"
#include "ltree/nn/serialize.hpp"

namespace ltree::diff {

using nlohmann::json;

UNetDenoiser::UNetDenoiser(DenoiserConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.unet.in_channels = cfg_.z_channels + (cfg_.conditional ? 1 : 0);
    cfg_.unet.out_channels = cfg_.z_channels;
    if (int(cfg_.z_mean.size()) != cfg_.z_channels) cfg_.z_mean.assign(size_t(cfg_.z_channels), 0.f);
    if (int(cfg_.z_std.size()) != cfg_.z_channels) cfg_.z_std.assign(size_t(cfg_.z_channels), 1.f);
    net_ = nn::UNet3d<float>(cfg_.unet);
}

nn::Tensor<float> UNetDenoiser::predict_eps(const nn::Tensor<float>& z_t,
                                            const std::vector<int>& t,
                                            const nn::Tensor<float>* cond) const {
    if (cfg_.conditional != (cond != nullptr))
        throw std::invalid_argument(cfg_.conditional ? "denoiser: missing condition"
                                                     : "denoiser: unexpected condition");
    if (z_t.dim(1) != cfg_.z_channels) throw std::invalid_argument("denoiser: z channel mismatch");
    if (int(t.size()) != z_t.dim(0)) throw std::invalid_argument("denoiser: t batch mismatch");

    nn::Tensor<float> input;
    if (cond) {
        for (int i : {0, 2, 3, 4})
            if (cond->shape[size_t(i)] != z_t.shape[size_t(i)])
                throw std::invalid_argument("denoiser: condition shape mismatch");
        nn::Tensor<float> c = *cond;
        const float inv = 1.f / cfg_.cond_std;
        for (auto& v : c.data) v = (v - cfg_.cond_mean) * inv;
        input = nn::concat_channels(z_t, c);
    } else {
        input = z_t;
    }

    // Split the batch across workers; each sub-batch runs the single-threaded
    // forward, and per-sample results are identical regardless of chunking.
    const int B = input.dim(0);
    if (B == 1) return net_.infer(input, t);
    nn::Tensor<float> out({B, cfg_.z_channels, z_t.dim(2), z_t.dim(3), z_t.dim(4)});
    const int64_t in_stride = input.numel() / B;
    const int64_t out_stride = out.numel() / B;
    parallel_for(B, [&](int64_t b0, int64_t b1) {
        for (int64_t b = b0; b < b1; ++b) {
            nn::Tensor<float> one({1, input.dim(1), input.dim(2), input.dim(3), input.dim(4)});
            std::copy(input.ptr() + b * in_stride, input.ptr() + (b + 1) * in_stride, one.ptr());
            auto eps = net_.infer(one, {t[size_t(b)]});
            std::copy(eps.ptr(), eps.ptr() + out_stride, out.ptr() + b * out_stride);
        }
    });
    return out;
}

void UNetDenoiser::standardize_z(nn::Tensor<float>& z) const {
    const int C = z.dim(1);
    const int64_t spatial = z.numel() / (z.dim(0) * int64_t(C));
    for (int n = 0; n < z.dim(0); ++n)
        for (int c = 0; c < C; ++c) {
            const float m = cfg_.z_mean[size_t(c)], inv = 1.f / cfg_.z_std[size_t(c)];
            float* p = z.ptr() + (int64_t(n) * C + c) * spatial;
            for (int64_t i = 0; i < spatial; ++i) p[i] = (p[i] - m) * inv;
        }
}

void UNetDenoiser::destandardize_z(nn::Tensor<float>& z) const {
    const int C = z.dim(1);
    const int64_t spatial = z.numel() / (z.dim(0) * int64_t(C));
    for (int n = 0; n < z.dim(0); ++n)
        for (int c = 0; c < C; ++c) {
            const float m = cfg_.z_mean[size_t(c)], s = cfg_.z_std[size_t(c)];
            float* p = z.ptr() + (int64_t(n) * C + c) * spatial;
            for (int64_t i = 0; i < spatial; ++i) p[i] = p[i] * s + m;
        }
}

void save_denoiser(const std::string& path, UNetDenoiser& denoiser, int64_t trained_steps,
                   double final_ema) {
    const DenoiserConfig& cfg = denoiser.config();
    json header;
    header["kind"] = "denoiser";
    header["level"] = cfg.level;
    header["z_channels"] = cfg.z_channels;
    header["conditional"] = cfg.conditional;
    header["base_width"] = cfg.unet.base_width;
    header["channel_mults"] = cfg.unet.channel_mults;
    header["groups"] = cfg.unet.groups;
    header["sin_dim"] = cfg.unet.sin_dim;
    header["temb_dim"] = cfg.unet.temb_dim;
    header["family"] = to_string(cfg.family);
    header["timesteps"] = cfg.timesteps;
    header["tau"] = cfg.tau;
    header["z_mean"] = cfg.z_mean;
    header["z_std"] = cfg.z_std;
    header["cond_mean"] = cfg.cond_mean;
    header["cond_std"] = cfg.cond_std;
    header["trained_steps"] = trained_steps;
    header["final_ema"] = final_ema;

    io::ByteWriter w;
    w.u32(0x4b44544c);  // "LTDK"
    w.u32(1);
    w.str(header.dump());
    nn::ParamRefs<float> refs;
    denoiser.net().collect(refs);
    nn::write_params(w, refs);
    io::write_file_atomic(path, std::move(w.buf));
}

std::unique_ptr<UNetDenoiser> load_denoiser(const std::string& path) {
    const std::string bytes = io::read_file(path);
    io::ByteReader r(bytes);
    if (r.u32() != 0x4b44544c) throw std::runtime_error("not a denoiser checkpoint: " + path);
    if (r.u32() != 1) throw std::runtime_error("denoiser checkpoint version unsupported");
    json header = json::parse(r.str());
    if (header.at("kind") != "denoiser")
        throw std::runtime_error("checkpoint kind mismatch (expected denoiser)");
    DenoiserConfig cfg;
    cfg.level = header.at("level");
    cfg.z_channels = header.at("z_channels");
    cfg.conditional = header.at("conditional");
    cfg.unet.base_width = header.at("base_width");
    cfg.unet.channel_mults = header.at("channel_mults").get<std::vector<int>>();
    cfg.unet.groups = header.at("groups");
    cfg.unet.sin_dim = header.at("sin_dim");
    cfg.unet.temb_dim = header.at("temb_dim");
    cfg.family = schedule_family_from_string(header.at("family"));
    cfg.timesteps = header.at("timesteps");
    cfg.tau = header.at("tau");
    cfg.z_mean = header.at("z_mean").get<std::vector<float>>();
    cfg.z_std = header.at("z_std").get<std::vector<float>>();
    cfg.cond_mean = header.at("cond_mean");
    cfg.cond_std = header.at("cond_std");
    auto denoiser = std::make_unique<UNetDenoiser>(cfg);
    nn::ParamRefs<float> refs;
    denoiser->net().collect(refs);
    nn::read_params(r, refs);
    return denoiser;
}

}  // namespace ltree::diff
