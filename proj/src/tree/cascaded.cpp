#include "ltree/tree/cascaded.hpp"

#include <cmath>

#include "ltree/core/threads.hpp"
#include "ltree/geometry/augment.hpp"
#include "ltree/nn/adam.hpp"

namespace ltree::tree {

CascadedTrainResult train_cascaded_codec(int level, const std::vector<ScenePyramid>& train,
                                         const CodecTrainConfig& cfg) {
    cfg.validate();
    const int f = cfg.factors[size_t(level - 1)];

    LevelCodecConfig ccfg;
    ccfg.level = level;
    ccfg.factor = f;
    ccfg.latent_channels = cfg.latent_channels;
    ccfg.width = cfg.width;
    ccfg.groups = cfg.groups;
    ccfg.tau = cfg.tau;
    CascadedCodec codec(ccfg);

    Rng init_rng = Rng::derive(cfg.seed, {0xca5cade, uint64_t(level)});
    codec.init(init_rng);

    nn::ParamRefs<float> params;
    codec.encoder.collect(params);
    codec.decoder.collect(params);
    nn::Adam<float> adam(params, cfg.lr);

    Rng data_rng = Rng::derive(cfg.seed, {0xda7a, uint64_t(level)});
    const int P = cfg.patch_size;
    nn::Tensor<float> x({cfg.batch_size, 1, P, P, P});

    CascadedTrainResult result;
    for (int64_t step = 1; step <= cfg.steps; ++step) {
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& pyr = train[size_t(data_rng.uniform_int(0, int64_t(train.size()) - 1))];
            const Grid3f& g = pyr.level(level + 1);
            const int x0 = int(data_rng.uniform_int(0, g.nx - P));
            const int y0 = int(data_rng.uniform_int(0, g.ny - P));
            const int z0 = int(data_rng.uniform_int(0, g.nz - P));
            Grid3f crop(P, P, P);
            for (int z = 0; z < P; ++z)
                for (int y = 0; y < P; ++y)
                    std::copy(&g.data[g.idx(x0, y0 + y, z0 + z)],
                              &g.data[g.idx(x0, y0 + y, z0 + z)] + P,
                              &crop.data[crop.idx(0, y, z)]);
            if (cfg.augment_data) {
                geo::Augmentation aug;
                aug.flip_x = data_rng.uniform() < 0.5;
                aug.flip_y = data_rng.uniform() < 0.5;
                aug.rot_quarter_turns = int(data_rng.uniform_int(0, 3));
                crop = geo::augment(crop, aug);
            }
            std::copy(crop.data.begin(), crop.data.end(), x.ptr() + int64_t(b) * P * P * P);
        }

        auto latent = codec.encoder.forward(x);
        auto recon = codec.decoder.forward(latent);

        const int64_t numel = recon.numel();
        double loss = 0.0;
        for (int64_t i = 0; i < numel; ++i) {
            const double d = double(recon.data[size_t(i)]) - double(x.data[size_t(i)]);
            loss += d * d;
        }
        loss /= double(numel);
        if (!std::isfinite(loss))
            throw std::runtime_error("cascaded training diverged at step " + std::to_string(step));

        nn::Tensor<float> grad = nn::Tensor<float>::zeros_like(recon);
        const float scale = 2.f / float(numel);
        for (int64_t i = 0; i < numel; ++i)
            grad.data[size_t(i)] = scale * (recon.data[size_t(i)] - x.data[size_t(i)]);

        adam.zero_grad();
        auto glat = codec.decoder.backward(grad);
        codec.encoder.backward(glat);
        adam.step();

        result.loss_curve.push_back(loss);
        result.ema_curve.push_back(result.ema_curve.empty()
                                       ? loss
                                       : 0.99 * result.ema_curve.back() + 0.01 * loss);
    }
    result.codec = std::move(codec);
    return result;
}

double cascaded_recon_error(const CascadedCodec& codec,
                            const std::vector<ScenePyramid>& pyramids) {
    // Tiled whole-scene encode/decode, mirroring level_recon_error.
    const int f = codec.config.factor;
    const int halo_e = codec.encoder.input_halo();
    const int halo_d = codec.decoder.input_halo();
    double total = 0.0;
    int64_t count = 0;
    for (const auto& pyr : pyramids) {
        const Grid3f& gt = pyr.level(codec.config.level + 1);
        // Encode whole grid in tiles.
        const int C = codec.config.latent_channels + 1;
        LatentGrid latent(C, gt.nx / f, gt.ny / f, gt.nz / f, codec.config.level);
        const int core = std::max(f, std::max({gt.nx, gt.ny, gt.nz}) / f * f);
        for (int z0 = 0; z0 < gt.nz; z0 += core)
            for (int y0 = 0; y0 < gt.ny; y0 += core)
                for (int x0 = 0; x0 < gt.nx; x0 += core) {
                    int lo[3] = {x0, y0, z0};
                    int hi[3] = {std::min(gt.nx, x0 + core), std::min(gt.ny, y0 + core),
                                 std::min(gt.nz, z0 + core)};
                    int elo[3], ehi[3];
                    const int dims[3] = {gt.nx, gt.ny, gt.nz};
                    for (int a = 0; a < 3; ++a) {
                        elo[a] = std::max(0, lo[a] - halo_e) / f * f;
                        ehi[a] = (std::min(dims[a], hi[a] + halo_e) + f - 1) / f * f;
                    }
                    const int ed[3] = {ehi[0] - elo[0], ehi[1] - elo[1], ehi[2] - elo[2]};
                    nn::Tensor<float> in({1, 1, ed[2], ed[1], ed[0]});
                    for (int z = 0; z < ed[2]; ++z)
                        for (int y = 0; y < ed[1]; ++y)
                            std::copy(&gt.data[gt.idx(elo[0], elo[1] + y, elo[2] + z)],
                                      &gt.data[gt.idx(elo[0], elo[1] + y, elo[2] + z)] + ed[0],
                                      in.ptr() + (int64_t(z) * ed[1] + y) * ed[0]);
                    auto out = codec.encoder.infer(in);
                    const int od[3] = {ed[0] / f, ed[1] / f, ed[2] / f};
                    for (int c = 0; c < C; ++c)
                        for (int z = lo[2] / f; z < hi[2] / f; ++z)
                            for (int y = lo[1] / f; y < hi[1] / f; ++y) {
                                const float* src =
                                    out.ptr() +
                                    ((int64_t(c) * od[2] + (z - elo[2] / f)) * od[1] +
                                     (y - elo[1] / f)) * od[0] +
                                    (lo[0] - elo[0]) / f;
                                std::copy(src, src + (hi[0] - lo[0]) / f,
                                          &latent.data[latent.idx(c, lo[0] / f, y, z)]);
                            }
                }
        // Decode whole latent in tiles.
        Grid3f recon(gt.nx, gt.ny, gt.nz);
        const int core_c = std::max({latent.nx, latent.ny, latent.nz});
        const int cd[3] = {latent.nx, latent.ny, latent.nz};
        for (int z0 = 0; z0 < cd[2]; z0 += core_c)
            for (int y0 = 0; y0 < cd[1]; y0 += core_c)
                for (int x0 = 0; x0 < cd[0]; x0 += core_c) {
                    int lo[3] = {x0, y0, z0};
                    int hi[3] = {std::min(cd[0], x0 + core_c), std::min(cd[1], y0 + core_c),
                                 std::min(cd[2], z0 + core_c)};
                    int elo[3], ehi[3];
                    for (int a = 0; a < 3; ++a) {
                        elo[a] = std::max(0, lo[a] - halo_d);
                        ehi[a] = std::min(cd[a], hi[a] + halo_d);
                    }
                    const int ed[3] = {ehi[0] - elo[0], ehi[1] - elo[1], ehi[2] - elo[2]};
                    nn::Tensor<float> in({1, C, ed[2], ed[1], ed[0]});
                    const int64_t plane = int64_t(ed[0]) * ed[1] * ed[2];
                    for (int c = 0; c < C; ++c)
                        for (int z = 0; z < ed[2]; ++z)
                            for (int y = 0; y < ed[1]; ++y)
                                std::copy(
                                    &latent.data[latent.idx(c, elo[0], elo[1] + y, elo[2] + z)],
                                    &latent.data[latent.idx(c, elo[0], elo[1] + y, elo[2] + z)] +
                                        ed[0],
                                    in.ptr() + c * plane + (int64_t(z) * ed[1] + y) * ed[0]);
                    auto out = codec.decoder.infer(in);
                    const int fd[3] = {ed[0] * f, ed[1] * f, ed[2] * f};
                    for (int z = lo[2] * f; z < hi[2] * f; ++z)
                        for (int y = lo[1] * f; y < hi[1] * f; ++y) {
                            const float* src = out.ptr() +
                                               ((int64_t(z - elo[2] * f)) * fd[1] +
                                                (y - elo[1] * f)) * fd[0] +
                                               (lo[0] - elo[0]) * f;
                            float* dst = &recon.data[recon.idx(lo[0] * f, y, z)];
                            for (int xx = 0; xx < (hi[0] - lo[0]) * f; ++xx)
                                dst[xx] = std::clamp(src[xx], 0.f, pyr.tau);
                        }
                }
        for (size_t i = 0; i < gt.data.size(); ++i) {
            const double d = double(recon.data[i]) - double(gt.data[i]);
            total += d * d;
        }
        count += int64_t(gt.data.size());
    }
    return count == 0 ? 0.0 : total / double(count);
}

}  // namespace ltree::tree
