#include "ltree/tree/train.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ltree/core/binio.hpp"
#include "ltree/geometry/augment.hpp"
#include "ltree/nn/adam.hpp"
#include "ltree/nn/serialize.hpp"

namespace ltree::tree {

using nlohmann::json;

void CodecTrainConfig::validate() const {
    if (int(factors.size()) != levels - 1)
        throw std::invalid_argument("codec config: need levels-1 factors");
    if (levels < 2) throw std::invalid_argument("codec config: need at least 2 levels");
    for (int f : factors) {
        if (patch_size % f != 0)
            throw std::invalid_argument("codec config: patch_size must be divisible by every factor");
        if (patch_size / f < 2)
            throw std::invalid_argument("codec config: patch_size too small for factor");
    }
    if (batch_size < 1 || steps < 1) throw std::invalid_argument("codec config: bad budget");
}

ScenePyramid build_pyramid(const TUDFGrid& scene, const std::vector<int>& factors) {
    int cumulative = 1;
    for (int f : factors) cumulative *= f;
    TUDFGrid padded = pad_to_multiple(scene, cumulative);

    ScenePyramid pyr;
    pyr.tau = scene.truncation;
    pyr.levels.resize(factors.size() + 1);
    pyr.levels.back() = padded.values;
    for (int i = int(factors.size()) - 1; i >= 0; --i)
        pyr.levels[size_t(i)] = avg_pool_grid(pyr.levels[size_t(i) + 1], factors[size_t(i)]);
    return pyr;
}

namespace {

struct CropSampler {
    const std::vector<ScenePyramid>* pyramids;
    int level;  // grids sampled from this level
    int patch;
    bool augment;

    Grid3f draw(Rng& rng) const {
        const auto& pyr = (*pyramids)[size_t(rng.uniform_int(0, int64_t(pyramids->size()) - 1))];
        const Grid3f& g = pyr.level(level);
        if (g.nx < patch || g.ny < patch || g.nz < patch)
            throw std::runtime_error("codec training: scene smaller than patch at level " +
                                     std::to_string(level));
        const int x0 = int(rng.uniform_int(0, g.nx - patch));
        const int y0 = int(rng.uniform_int(0, g.ny - patch));
        const int z0 = int(rng.uniform_int(0, g.nz - patch));
        Grid3f crop(patch, patch, patch);
        for (int z = 0; z < patch; ++z)
            for (int y = 0; y < patch; ++y)
                std::copy(&g.data[g.idx(x0, y0 + y, z0 + z)],
                          &g.data[g.idx(x0, y0 + y, z0 + z)] + patch,
                          &crop.data[crop.idx(0, y, z)]);
        if (!augment) return crop;
        geo::Augmentation aug;
        aug.flip_x = rng.uniform() < 0.5;
        aug.flip_y = rng.uniform() < 0.5;
        aug.rot_quarter_turns = int(rng.uniform_int(0, 3));
        return geo::augment(crop, aug);
    }
};

void fill_batch(nn::Tensor<float>& x, nn::Tensor<float>& pooled, const CropSampler& sampler,
                int factor, Rng& rng) {
    const int B = x.dim(0);
    const int64_t numel = x.numel() / B;
    const int64_t pnumel = pooled.numel() / B;
    for (int b = 0; b < B; ++b) {
        Grid3f crop = sampler.draw(rng);
        std::copy(crop.data.begin(), crop.data.end(), x.ptr() + b * numel);
        Grid3f p = avg_pool_grid(crop, factor);
        std::copy(p.data.begin(), p.data.end(), pooled.ptr() + b * pnumel);
    }
}

std::string state_path(const std::string& dir, int level) {
    return dir + "/codec_level" + std::to_string(level) + ".state";
}

}  // namespace

CodecTrainResult train_level_codec(int level, const std::vector<ScenePyramid>& train,
                                   const std::vector<ScenePyramid>& test,
                                   const CodecTrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw std::invalid_argument("codec training: empty dataset");
    const int f = cfg.factors[size_t(level - 1)];

    LevelCodecConfig ccfg;
    ccfg.level = level;
    ccfg.factor = f;
    ccfg.latent_channels = cfg.latent_channels;
    ccfg.width = cfg.width;
    ccfg.groups = cfg.groups;
    ccfg.tau = cfg.tau;
    LevelCodec codec(ccfg);

    Rng init_rng = Rng::derive(cfg.seed, {0x10dec, uint64_t(level)});
    codec.init(init_rng);

    nn::ParamRefs<float> params;
    codec.encoder.collect(params);
    codec.decoder.collect(params);
    nn::Adam<float> adam(params, cfg.lr);

    Rng data_rng = Rng::derive(cfg.seed, {0xda7a, uint64_t(level)});
    int64_t start_step = 0;
    double ema = -1.0;

    // Resume from a previous interrupted run when state exists.
    const std::string spath = cfg.state_dir.empty() ? "" : state_path(cfg.state_dir, level);
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

    std::ofstream log;
    if (!cfg.log_path.empty()) log.open(cfg.log_path, std::ios::app);

    CropSampler sampler{&train, level + 1, cfg.patch_size, cfg.augment_data};
    const int P = cfg.patch_size, p = P / f;
    nn::Tensor<float> x({cfg.batch_size, 1, P, P, P});
    nn::Tensor<float> pooled({cfg.batch_size, 1, p, p, p});

    CodecTrainResult result;
    auto flush_state = [&](int64_t step) {
        if (spath.empty()) return;
        io::ByteWriter w;
        w.u32(0x54534c54);  // "TLST"
        w.u64(uint64_t(step));
        w.f64(ema);
        for (uint64_t v : data_rng.save_state()) w.u64(v);
        nn::write_params(w, params);
        adam.save_state(w);
        io::write_file_atomic(spath, std::move(w.buf));
    };

    for (int64_t step = start_step + 1; step <= cfg.steps; ++step) {
        const auto t0 = std::chrono::steady_clock::now();
        fill_batch(x, pooled, sampler, f, data_rng);

        auto latent = codec.encoder.forward(x);
        auto dec_in = nn::concat_channels(pooled, latent);
        auto recon = codec.decoder.forward(dec_in);

        const int64_t numel = recon.numel();
        double loss = 0.0;
        for (int64_t i = 0; i < numel; ++i) {
            const double d = double(recon.data[size_t(i)]) - double(x.data[size_t(i)]);
            loss += d * d;
        }
        loss /= double(numel);
        if (!std::isfinite(loss))
            throw std::runtime_error("codec training diverged (non-finite loss) at level " +
                                     std::to_string(level) + " step " + std::to_string(step));

        nn::Tensor<float> grad = nn::Tensor<float>::zeros_like(recon);
        const float scale = 2.f / float(numel);
        for (int64_t i = 0; i < numel; ++i)
            grad.data[size_t(i)] = scale * (recon.data[size_t(i)] - x.data[size_t(i)]);

        adam.zero_grad();
        auto gin = codec.decoder.backward(grad);
        auto [g_geo, g_lat] = nn::split_channels(gin, 1);
        (void)g_geo;  // the pooled branch is data, not a parameter path
        codec.encoder.backward(g_lat);
        adam.step();

        ema = ema < 0 ? loss : 0.99 * ema + 0.01 * loss;
        result.loss_curve.push_back(loss);
        result.ema_curve.push_back(ema);

        if (log) {
            const double ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
            log << json({{"kind", "codec"},
                         {"level", level},
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
    codec.trained_steps = cfg.steps;
    codec.plateau_loss = ema;

    // Standardization statistics over fresh (unaugmented) crops.
    {
        CropSampler stat_sampler{&train, level + 1, cfg.patch_size, false};
        Rng stats_rng = Rng::derive(cfg.seed, {0x57a7, uint64_t(level)});
        const int C = cfg.latent_channels;
        std::vector<double> sum(size_t(C), 0), sq(size_t(C), 0);
        double gsum = 0, gsq = 0;
        int64_t count = 0, gcount = 0;
        for (int s = 0; s < cfg.stats_patches; ++s) {
            Grid3f crop = stat_sampler.draw(stats_rng);
            nn::Tensor<float> xin({1, 1, P, P, P});
            std::copy(crop.data.begin(), crop.data.end(), xin.data.begin());
            auto lat = codec.encoder.infer(xin);
            const int64_t voxels = lat.numel() / C;
            for (int c = 0; c < C; ++c)
                for (int64_t i = 0; i < voxels; ++i) {
                    const double v = double(lat.data[size_t(c * voxels + i)]);
                    sum[size_t(c)] += v;
                    sq[size_t(c)] += v * v;
                }
            count += voxels;
            Grid3f pg = avg_pool_grid(crop, f);
            for (float v : pg.data) {
                gsum += v;
                gsq += double(v) * v;
            }
            gcount += int64_t(pg.data.size());
        }
        for (int c = 0; c < C; ++c) {
            const double mean = sum[size_t(c)] / double(count);
            const double var = std::max(0.0, sq[size_t(c)] / double(count) - mean * mean);
            codec.stats.mean[size_t(c)] = float(mean);
            codec.stats.std[size_t(c)] = float(std::max(std::sqrt(var), 1e-6));
        }
        const double gmean = gsum / double(gcount);
        const double gvar = std::max(0.0, gsq / double(gcount) - gmean * gmean);
        codec.stats.geom_mean = float(gmean);
        codec.stats.geom_std = float(std::max(std::sqrt(gvar), 1e-6));
    }

    codec.test_recon_err = level_recon_error(codec, test.empty() ? train : test);
    result.codec = std::move(codec);
    return result;
}

std::vector<LevelCodec> train_codecs(const std::vector<TUDFGrid>& train_scenes,
                                     const std::vector<TUDFGrid>& test_scenes,
                                     const CodecTrainConfig& cfg) {
    cfg.validate();
    if (train_scenes.empty()) throw std::invalid_argument("train_codecs: empty dataset");
    std::vector<ScenePyramid> train, test;
    for (const auto& s : train_scenes) train.push_back(build_pyramid(s, cfg.factors));
    for (const auto& s : test_scenes) test.push_back(build_pyramid(s, cfg.factors));

    std::vector<LevelCodec> codecs;
    for (int level = 1; level <= cfg.levels - 1; ++level)
        codecs.push_back(train_level_codec(level, train, test, cfg).codec);
    return codecs;
}

double level_recon_error(const LevelCodec& codec, const std::vector<ScenePyramid>& pyramids) {
    double total = 0.0;
    int64_t count = 0;
    for (const auto& pyr : pyramids) {
        const Grid3f& gt = pyr.level(codec.config.level + 1);
        TUDFGrid fine;
        fine.values = gt;
        fine.voxel_size = 1.f;  // resolution bookkeeping is irrelevant for the error
        fine.origin = {};
        fine.truncation = pyr.tau;
        // Whole-grid tiles: the halo overhead of small tiles dominates at
        // evaluation sizes.
        const int tile_f = std::max({gt.nx, gt.ny, gt.nz});
        auto [pooled, latent] = encode_scene(codec, fine, tile_f);
        TUDFGrid recon = decode_scene(codec, pooled, latent, tile_f / codec.config.factor);
        for (size_t i = 0; i < gt.data.size(); ++i) {
            const double d = double(recon.values.data[i]) - double(gt.data[i]);
            total += d * d;
        }
        count += int64_t(gt.data.size());
    }
    return count == 0 ? 0.0 : total / double(count);
}

}  // namespace ltree::tree
