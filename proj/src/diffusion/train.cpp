#include "ltree/diffusion/train.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ltree/geometry/augment.hpp"
#include "ltree/nn/adam.hpp"
#include "ltree/nn/serialize.hpp"

namespace ltree::diff {

using nlohmann::json;

PatchDraw draw_latent_patch(const std::vector<tree::LevelCodec>& codecs,
                            const std::vector<tree::ScenePyramid>& pyramids, int level,
                            int patch_size, bool augment, Rng& rng) {
    const int n_levels = int(codecs.size()) + 1;
    if (level < 1 || level >= n_levels) throw std::invalid_argument("draw: bad level");
    int cum = 1;
    for (int j = level; j <= n_levels - 1; ++j) cum *= codecs[size_t(j - 1)].config.factor;

    const auto& pyr = pyramids[size_t(rng.uniform_int(0, int64_t(pyramids.size()) - 1))];
    const Grid3f& root = pyr.levels.back();
    const int edge = patch_size * cum;
    if (root.nx < edge || root.ny < edge || root.nz < edge)
        throw std::runtime_error("diffusion training: scene smaller than root crop " +
                                 std::to_string(edge));
    const int x0 = int(rng.uniform_int(0, root.nx - edge));
    const int y0 = int(rng.uniform_int(0, root.ny - edge));
    const int z0 = int(rng.uniform_int(0, root.nz - edge));
    Grid3f crop(edge, edge, edge);
    for (int z = 0; z < edge; ++z)
        for (int y = 0; y < edge; ++y)
            std::copy(&root.data[root.idx(x0, y0 + y, z0 + z)],
                      &root.data[root.idx(x0, y0 + y, z0 + z)] + edge,
                      &crop.data[crop.idx(0, y, z)]);
    if (augment) {
        geo::Augmentation aug;
        aug.flip_x = rng.uniform() < 0.5;
        aug.flip_y = rng.uniform() < 0.5;
        aug.rot_quarter_turns = int(rng.uniform_int(0, 3));
        crop = geo::augment(crop, aug);
    }

    // Encode down to the requested level.
    TUDFGrid cur;
    cur.values = std::move(crop);
    cur.voxel_size = 1.f;
    cur.truncation = pyr.tau;
    LatentGrid latent;
    for (int j = n_levels - 1; j >= level; --j) {
        auto [pooled, lat] = tree::encode_level(codecs[size_t(j - 1)], cur);
        cur = std::move(pooled);
        latent = std::move(lat);
    }

    const auto& stats = codecs[size_t(level - 1)].stats;
    const int C = latent.channels;
    const int p = latent.nx;
    PatchDraw draw;
    if (level == 1) {
        // Joint [geometry, latent] with per-part standardization.
        draw.z0 = nn::Tensor<float>({1, 1 + C, p, p, p});
        const int64_t voxels = int64_t(p) * p * p;
        const float ginv = 1.f / stats.geom_std;
        for (int64_t i = 0; i < voxels; ++i)
            draw.z0.data[size_t(i)] = (cur.values.data[size_t(i)] - stats.geom_mean) * ginv;
        for (int c = 0; c < C; ++c) {
            const float m = stats.mean[size_t(c)], inv = 1.f / stats.std[size_t(c)];
            for (int64_t i = 0; i < voxels; ++i)
                draw.z0.data[size_t((1 + c) * voxels + i)] =
                    (latent.data[size_t(c * voxels + i)] - m) * inv;
        }
    } else {
        draw.z0 = nn::Tensor<float>({1, C, p, p, p});
        const int64_t voxels = int64_t(p) * p * p;
        for (int c = 0; c < C; ++c) {
            const float m = stats.mean[size_t(c)], inv = 1.f / stats.std[size_t(c)];
            for (int64_t i = 0; i < voxels; ++i)
                draw.z0.data[size_t(c * voxels + i)] =
                    (latent.data[size_t(c * voxels + i)] - m) * inv;
        }
        draw.cond = nn::Tensor<float>({1, 1, p, p, p});
        std::copy(cur.values.data.begin(), cur.values.data.end(), draw.cond.data.begin());
    }
    return draw;
}

DenoiserConfig make_denoiser_config(const std::vector<tree::LevelCodec>& codecs,
                                    const DiffusionTrainConfig& cfg) {
    const auto& codec = codecs.at(size_t(cfg.level - 1));
    const auto& stats = codec.stats;
    DenoiserConfig dc;
    dc.level = cfg.level;
    dc.conditional = cfg.level > 1;
    dc.z_channels = codec.config.latent_channels + (dc.conditional ? 0 : 1);
    dc.family = cfg.family;
    dc.timesteps = cfg.timesteps;
    dc.tau = codec.config.tau;
    dc.unet.base_width = cfg.base_width;
    dc.unet.channel_mults = cfg.channel_mults;
    dc.unet.groups = cfg.groups;
    dc.unet.sin_dim = cfg.sin_dim;
    dc.unet.temb_dim = cfg.temb_dim;
    if (dc.conditional) {
        dc.z_mean = stats.mean;
        dc.z_std = stats.std;
        dc.cond_mean = stats.geom_mean;
        dc.cond_std = stats.geom_std;
    } else {
        dc.z_mean.assign(1, stats.geom_mean);
        dc.z_std.assign(1, stats.geom_std);
        dc.z_mean.insert(dc.z_mean.end(), stats.mean.begin(), stats.mean.end());
        dc.z_std.insert(dc.z_std.end(), stats.std.begin(), stats.std.end());
        // The geometry channel uses its own stats; cond stats are unused.
    }
    return dc;
}

DiffusionTrainResult train_denoiser(const std::vector<tree::LevelCodec>& codecs,
                                    const std::vector<TUDFGrid>& scenes,
                                    const DiffusionTrainConfig& cfg) {
    if (scenes.empty()) throw std::invalid_argument("train_denoiser: empty dataset");
    tree::validate_codec_stack(codecs);
    std::vector<int> factors;
    for (const auto& c : codecs) factors.push_back(c.config.factor);
    std::vector<tree::ScenePyramid> pyramids;
    for (const auto& s : scenes) pyramids.push_back(tree::build_pyramid(s, factors));

    DiffusionTrainResult result;
    auto denoiser = std::make_unique<UNetDenoiser>(make_denoiser_config(codecs, cfg));
    Rng init_rng = Rng::derive(cfg.seed, {0xd1ff, uint64_t(cfg.level)});
    denoiser->init(init_rng);

    nn::ParamRefs<float> params;
    denoiser->net().collect(params);
    nn::Adam<float> adam(params, cfg.lr);

    const NoiseSchedule sched = NoiseSchedule::make(cfg.family, cfg.timesteps);
    Rng data_rng = Rng::derive(cfg.seed, {0xda7a2, uint64_t(cfg.level)});
    int64_t start_step = 0;
    double ema = -1.0;

    const std::string spath =
        cfg.state_dir.empty()
            ? ""
            : cfg.state_dir + "/denoiser_level" + std::to_string(cfg.level) + ".state";
    std::string state_bytes;
    if (!spath.empty() && std::filesystem::exists(spath)) {
        state_bytes = io::read_file(spath);
        io::ByteReader r(state_bytes);
        if (r.u32() != 0x54534c54) throw std::runtime_error("bad training state file: " + spath);
        start_step = int64_t(r.u64());
        ema = r.f64();
        std::vector<uint64_t> rs(6);
        for (auto& v : rs) v = r.u64();
        data_rng.load_state(rs);
        nn::read_params(r, params);
        adam.load_state(r);
    }
    auto flush_state = [&](int64_t step) {
        if (spath.empty()) return;
        io::ByteWriter w;
        w.u32(0x54534c54);
        w.u64(uint64_t(step));
        w.f64(ema);
        for (uint64_t v : data_rng.save_state()) w.u64(v);
        nn::write_params(w, params);
        adam.save_state(w);
        io::write_file_atomic(spath, std::move(w.buf));
    };

    std::ofstream log;
    if (!cfg.log_path.empty()) log.open(cfg.log_path, std::ios::app);

    const bool conditional = cfg.level > 1;
    const int zc = denoiser->z_channels();
    const int p = cfg.patch_size;

    for (int64_t step = start_step + 1; step <= cfg.steps; ++step) {
        const auto t0 = std::chrono::steady_clock::now();

        nn::Tensor<float> z0({cfg.batch_size, zc, p, p, p});
        nn::Tensor<float> cond;
        if (conditional) cond = nn::Tensor<float>({cfg.batch_size, 1, p, p, p});
        std::vector<int> ts(size_t(cfg.batch_size));
        const int64_t zstride = z0.numel() / cfg.batch_size;
        for (int b = 0; b < cfg.batch_size; ++b) {
            PatchDraw draw =
                draw_latent_patch(codecs, pyramids, cfg.level, p, cfg.augment_data, data_rng);
            std::copy(draw.z0.data.begin(), draw.z0.data.end(), z0.ptr() + b * zstride);
            if (conditional)
                std::copy(draw.cond.data.begin(), draw.cond.data.end(),
                          cond.ptr() + int64_t(b) * p * p * p);
            ts[size_t(b)] = int(data_rng.uniform_int(1, cfg.timesteps));
        }

        nn::Tensor<float> noise = gaussian_like(z0, data_rng);
        nn::Tensor<float> z_t = nn::Tensor<float>::zeros_like(z0);
        for (int b = 0; b < cfg.batch_size; ++b) {
            const double ab = sched.ab(ts[size_t(b)]);
            const float a = float(std::sqrt(ab)), s = float(std::sqrt(1.0 - ab));
            for (int64_t i = b * zstride; i < (b + 1) * zstride; ++i)
                z_t.data[size_t(i)] = a * z0.data[size_t(i)] + s * noise.data[size_t(i)];
        }

        nn::Tensor<float> input = z_t;
        if (conditional) {
            nn::Tensor<float> c = cond;
            const float m = denoiser->config().cond_mean;
            const float inv = 1.f / denoiser->config().cond_std;
            for (auto& v : c.data) v = (v - m) * inv;
            input = nn::concat_channels(z_t, c);
        }

        auto pred = denoiser->net().forward(input, ts);
        const int64_t numel = pred.numel();
        double loss = 0.0;
        for (int64_t i = 0; i < numel; ++i) {
            const double d = double(pred.data[size_t(i)]) - double(noise.data[size_t(i)]);
            loss += d * d;
        }
        loss /= double(numel);
        if (!std::isfinite(loss))
            throw std::runtime_error("diffusion training diverged (non-finite loss) at level " +
                                     std::to_string(cfg.level) + " step " + std::to_string(step));

        nn::Tensor<float> grad = nn::Tensor<float>::zeros_like(pred);
        const float scale = 2.f / float(numel);
        for (int64_t i = 0; i < numel; ++i)
            grad.data[size_t(i)] = scale * (pred.data[size_t(i)] - noise.data[size_t(i)]);

        adam.zero_grad();
        denoiser->net().backward(grad);
        adam.step();

        ema = ema < 0 ? loss : 0.99 * ema + 0.01 * loss;
        result.loss_curve.push_back(loss);
        result.ema_curve.push_back(ema);
        if (log) {
            const double ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
            log << json({{"kind", "diffusion"},
                         {"level", cfg.level},
                         {"step", step},
                         {"loss", loss},
                         {"ema", ema},
                         {"lr", adam.lr()},
                         {"ms", ms}})
                       .dump()
                << "\n";
        }
        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) flush_state(step);
    }
    flush_state(cfg.steps);

    result.final_ema = ema;
    result.denoiser = std::move(denoiser);
    return result;
}

}  // namespace ltree::diff
