#include "ltree/synth/synthesis.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>

#include "ltree/core/threads.hpp"

namespace ltree::synth {

using nlohmann::json;

namespace {

nn::Tensor<float> crop_canvas(const nn::Tensor<float>& z, const PatchPlacement& pl) {
    const int C = z.dim(1);
    nn::Tensor<float> out({1, C, pl.dz, pl.dy, pl.dx});
    const int ey = z.dim(3), ex = z.dim(4);
    for (int c = 0; c < C; ++c)
        for (int zz = 0; zz < pl.dz; ++zz)
            for (int yy = 0; yy < pl.dy; ++yy) {
                const float* src = z.ptr() +
                                   ((int64_t(c) * z.dim(2) + (pl.z0 + zz)) * ey + (pl.y0 + yy)) * ex +
                                   pl.x0;
                std::copy(src, src + pl.dx,
                          out.ptr() + ((int64_t(c) * pl.dz + zz) * pl.dy + yy) * pl.dx);
            }
    return out;
}

void write_canvas(nn::Tensor<float>& z, const PatchPlacement& pl, const nn::Tensor<float>& v) {
    const int C = z.dim(1);
    const int ey = z.dim(3), ex = z.dim(4);
    for (int c = 0; c < C; ++c)
        for (int zz = 0; zz < pl.dz; ++zz)
            for (int yy = 0; yy < pl.dy; ++yy) {
                const float* src = v.ptr() + ((int64_t(c) * pl.dz + zz) * pl.dy + yy) * pl.dx;
                float* dst = z.ptr() +
                             ((int64_t(c) * z.dim(2) + (pl.z0 + zz)) * ey + (pl.y0 + yy)) * ex +
                             pl.x0;
                std::copy(src, src + pl.dx, dst);
            }
}

// out = mask ? known : unknown, with the spatial mask broadcast per channel.
nn::Tensor<float> select_masked(const std::vector<uint8_t>& mask, const nn::Tensor<float>& known,
                                const nn::Tensor<float>& unknown) {
    nn::Tensor<float> out = unknown;
    const int C = out.dim(1);
    const int64_t spatial = out.numel() / C;
    for (int c = 0; c < C; ++c)
        for (int64_t i = 0; i < spatial; ++i)
            if (mask[size_t(i)]) out.data[size_t(c * spatial + i)] = known.data[size_t(c * spatial + i)];
    return out;
}

struct Journal {
    std::ofstream out;
    explicit Journal(const std::string& path) {
        if (!path.empty()) out.open(path, std::ios::app);
    }
    void write(const json& rec) {
        if (out) out << rec.dump() << "\n";
    }
};

}  // namespace

nn::Tensor<float> inpaint_patch(const diff::Denoiser& denoiser, const diff::NoiseSchedule& sched,
                                const PatchPlacement& placement, const SceneCanvas& canvas,
                                const nn::Tensor<float>* cond, const diff::SamplerConfig& sampler,
                                Rng& rng, Rng& rng_known) {
    // Known voxels must already be on the canvas.
    for (int zz = 0; zz < placement.dz; ++zz)
        for (int yy = 0; yy < placement.dy; ++yy)
            for (int xx = 0; xx < placement.dx; ++xx) {
                const size_t mi = size_t((int64_t(zz) * placement.dy + yy) * placement.dx + xx);
                if (placement.known_mask[mi] &&
                    canvas.coverage.at(placement.x0 + xx, placement.y0 + yy, placement.z0 + zz) ==
                        0.f)
                    throw std::invalid_argument(
                        "inpaint_patch: known mask references voxels not yet on canvas");
            }

    const auto known_crop = crop_canvas(canvas.z, placement);
    nn::Tensor<float> z({1, denoiser.z_channels(), placement.dz, placement.dy, placement.dx});
    for (auto& v : z.data) v = rng.normal_f();

    const auto ts = diff::make_timesteps(sched.timesteps, sampler.steps);
    for (size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
        auto eps = denoiser.predict_eps(z, {t}, cond);
        auto unknown = diff::step_from_eps(sched, z, eps, t, t_prev, sampler.kind, rng);
        auto known = t_prev == 0
                         ? known_crop
                         : diff::q_sample(sched, known_crop, t_prev,
                                          diff::gaussian_like(known_crop, rng_known));
        z = select_masked(placement.known_mask, known, unknown);
    }
    return z;
}

nn::Tensor<float> aggregate_patches(const int extent[3], int channels,
                                    const std::vector<const PatchPlacement*>& placements,
                                    const std::vector<nn::Tensor<float>>& values) {
    if (placements.size() != values.size())
        throw std::invalid_argument("aggregate: placement/value count mismatch");
    // Fixed accumulation order keyed by placement offset, so the result does
    // not depend on the enumeration order of the inputs.
    std::vector<size_t> order(placements.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const auto* pa = placements[a];
        const auto* pb = placements[b];
        const auto ka = std::tuple(pa->z0, pa->y0, pa->x0, pa->dz, pa->dy, pa->dx);
        const auto kb = std::tuple(pb->z0, pb->y0, pb->x0, pb->dz, pb->dy, pb->dx);
        if (ka != kb) return ka < kb;
        // Coincident placements: order by content so the accumulation order
        // stays a function of the inputs, not their enumeration.
        return std::lexicographical_compare(values[a].data.begin(), values[a].data.end(),
                                            values[b].data.begin(), values[b].data.end());
    });

    nn::Tensor<float> sum({1, channels, extent[2], extent[1], extent[0]});
    std::vector<float> count(size_t(extent[0]) * extent[1] * extent[2], 0.f);
    const int ex = extent[0], ey = extent[1];
    for (size_t oi : order) {
        const PatchPlacement& pl = *placements[oi];
        const nn::Tensor<float>& v = values[oi];
        for (int c = 0; c < channels; ++c)
            for (int zz = 0; zz < pl.dz; ++zz)
                for (int yy = 0; yy < pl.dy; ++yy) {
                    const float* src = v.ptr() + ((int64_t(c) * pl.dz + zz) * pl.dy + yy) * pl.dx;
                    float* dst = sum.ptr() +
                                 ((int64_t(c) * extent[2] + (pl.z0 + zz)) * ey + (pl.y0 + yy)) * ex +
                                 pl.x0;
                    for (int xx = 0; xx < pl.dx; ++xx) dst[xx] += src[xx];
                }
        for (int zz = 0; zz < pl.dz; ++zz)
            for (int yy = 0; yy < pl.dy; ++yy) {
                float* dst = &count[size_t((int64_t(pl.z0 + zz) * ey + (pl.y0 + yy)) * ex + pl.x0)];
                for (int xx = 0; xx < pl.dx; ++xx) dst[xx] += 1.f;
            }
    }
    const int64_t spatial = int64_t(ex) * ey * extent[2];
    for (int64_t i = 0; i < spatial; ++i)
        if (count[size_t(i)] == 0.f)
            throw std::logic_error("aggregate: voxel with no contributing patch");
    for (int c = 0; c < channels; ++c)
        for (int64_t i = 0; i < spatial; ++i) sum.data[size_t(c * spatial + i)] /= count[size_t(i)];
    return sum;
}

Rng coarse_patch_rng(uint64_t seed, int placement) {
    return Rng::derive(seed, {0xc0a25e, 1, uint64_t(placement)});
}
Rng coarse_known_rng(uint64_t seed, int placement) {
    return Rng::derive(seed, {0xc0a25e ^ 0xffff, 1, uint64_t(placement)});
}
Rng refine_init_rng(uint64_t seed, int level) {
    return Rng::derive(seed, {0x2ef1, uint64_t(level), 0});
}
Rng refine_step_rng(uint64_t seed, int level, int placement, int t) {
    return Rng::derive(seed, {0x2ef1, uint64_t(level), 1 + uint64_t(placement), uint64_t(t)});
}
Rng refine_known_rng(uint64_t seed, int level, int t) {
    return Rng::derive(seed, {0x2ef1 ^ 0xffff, uint64_t(level), uint64_t(t)});
}

std::pair<TUDFGrid, LatentGrid> generate_coarse(const diff::UNetDenoiser& denoiser,
                                                const int extent[3], const SynthConfig& cfg,
                                                uint64_t seed, float voxel_size, const Vec3& origin,
                                                const Grid3f* seed_coverage,
                                                const SceneCanvas* seed_canvas) {
    if (denoiser.conditional())
        throw std::invalid_argument("generate_coarse: level-1 denoiser must be unconditional");
    const int C = denoiser.z_channels();  // 1 + latent channels
    const int p = cfg.patch_sizes.empty() ? extent[2] : cfg.patch_sizes[0];
    const int patch[3] = {p, p, extent[2]};
    const diff::NoiseSchedule sched =
        diff::NoiseSchedule::make(denoiser.config().family, denoiser.config().timesteps);

    PatchSchedule plan = plan_patches(extent, patch, cfg.overlap_fraction, seed_coverage);

    SceneCanvas canvas(C, extent);
    if (seed_canvas) {
        canvas.z = seed_canvas->z;
        canvas.coverage = seed_canvas->coverage;
    }
    Journal journal(cfg.journal_path);

    for (size_t j = 0; j < plan.placements.size(); ++j) {
        const PatchPlacement& pl = plan.placements[j];
        const bool all_known = std::all_of(pl.known_mask.begin(), pl.known_mask.end(),
                                           [](uint8_t m) { return m != 0; });
        const auto t0 = std::chrono::steady_clock::now();
        if (!all_known) {
            Rng rng = coarse_patch_rng(seed, int(j));
            Rng rng_known = coarse_known_rng(seed, int(j));
            auto values = inpaint_patch(denoiser, sched, pl, canvas, nullptr, cfg.sampler, rng,
                                        rng_known);
            write_canvas(canvas.z, pl, values);
        }
        for (int zz = 0; zz < pl.dz; ++zz)
            for (int yy = 0; yy < pl.dy; ++yy)
                for (int xx = 0; xx < pl.dx; ++xx)
                    canvas.coverage.at(pl.x0 + xx, pl.y0 + yy, pl.z0 + zz) = 1.f;
        journal.write({{"stage", "coarse"},
                       {"placement", j},
                       {"wave", pl.wave},
                       {"skipped", all_known},
                       {"t_hi", sched.timesteps},
                       {"t_lo", 0},
                       {"ms", std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count()}});
    }

    // Destandardize and split the joint channels.
    const auto& dc = denoiser.config();
    TUDFGrid L1;
    L1.values = Grid3f(extent[0], extent[1], extent[2]);
    L1.voxel_size = voxel_size;
    L1.origin = origin;
    L1.truncation = dc.tau;
    const int64_t spatial = int64_t(extent[0]) * extent[1] * extent[2];
    for (int64_t i = 0; i < spatial; ++i) {
        const float v = canvas.z.data[size_t(i)] * dc.z_std[0] + dc.z_mean[0];
        L1.values.data[size_t(i)] = std::clamp(v, 0.f, dc.tau);
    }
    LatentGrid H1(C - 1, extent[0], extent[1], extent[2], 1);
    for (int c = 1; c < C; ++c)
        for (int64_t i = 0; i < spatial; ++i)
            H1.data[size_t((c - 1) * spatial + i)] =
                canvas.z.data[size_t(c * spatial + i)] * dc.z_std[size_t(c)] + dc.z_mean[size_t(c)];
    return {std::move(L1), std::move(H1)};
}

namespace {

struct RefineKnown {
    const Grid3f* mask = nullptr;          // level-extent voxel mask, nonzero = known
    const nn::Tensor<float>* z0 = nullptr; // [1, C, ez, ey, ex] standardized known values
    const Grid3f* geometry = nullptr;      // raw level-i TUDF on the known region (origin-anchored)
};

std::pair<TUDFGrid, LatentGrid> refine_level_impl(const diff::UNetDenoiser& denoiser,
                                                  const tree::LevelCodec& codec,
                                                  const TUDFGrid& L_prev, const LatentGrid& H_prev,
                                                  const SynthConfig& cfg, uint64_t seed,
                                                  const RefineKnown* known) {
    if (!denoiser.conditional())
        throw std::invalid_argument("refine_level: needs a conditional denoiser");
    const int level = denoiser.config().level;
    TUDFGrid L_i = tree::decode_scene(codec, L_prev, H_prev);
    if (known && known->mask && known->geometry) {
        // Pin the known geometry before conditioning: the decoder's receptive
        // field would otherwise bleed generated content into the known side.
        const Grid3f& geo = *known->geometry;
        for (int z = 0; z < geo.nz; ++z)
            for (int y = 0; y < geo.ny; ++y)
                for (int x = 0; x < geo.nx; ++x)
                    if (known->mask->at(x, y, z) != 0.f)
                        L_i.values.at(x, y, z) = geo.at(x, y, z);
    }

    const int extent[3] = {L_i.values.nx, L_i.values.ny, L_i.values.nz};
    const int p = int(cfg.patch_sizes.size()) >= level ? cfg.patch_sizes[size_t(level - 1)]
                                                       : extent[2];
    const int patch[3] = {p, p, extent[2]};
    const diff::NoiseSchedule sched =
        diff::NoiseSchedule::make(denoiser.config().family, denoiser.config().timesteps);
    const int C = denoiser.z_channels();
    const auto& dc = denoiser.config();
    Journal journal(cfg.journal_path);

    nn::Tensor<float> z_s;
    if (cfg.sequential_refine) {
        // Ablation path: autoregressive masked inpainting, one patch at a time.
        Grid3f cov0(extent[0], extent[1], extent[2], 0.f);
        if (known && known->mask) cov0 = *known->mask;
        PatchSchedule plan = plan_patches(extent, patch, cfg.overlap_fraction,
                                          known ? known->mask : nullptr);
        SceneCanvas canvas(C, extent);
        canvas.coverage = cov0;
        if (known && known->z0) canvas.z = *known->z0;
        for (size_t j = 0; j < plan.placements.size(); ++j) {
            const PatchPlacement& pl = plan.placements[j];
            const bool all_known = std::all_of(pl.known_mask.begin(), pl.known_mask.end(),
                                               [](uint8_t m) { return m != 0; });
            const auto t0 = std::chrono::steady_clock::now();
            if (!all_known) {
                // Condition crop, raw geometry units.
                nn::Tensor<float> cond({1, 1, pl.dz, pl.dy, pl.dx});
                for (int zz = 0; zz < pl.dz; ++zz)
                    for (int yy = 0; yy < pl.dy; ++yy)
                        std::copy(&L_i.values.data[L_i.values.idx(pl.x0, pl.y0 + yy, pl.z0 + zz)],
                                  &L_i.values.data[L_i.values.idx(pl.x0, pl.y0 + yy, pl.z0 + zz)] +
                                      pl.dx,
                                  cond.ptr() + (int64_t(zz) * pl.dy + yy) * pl.dx);
                Rng rng = refine_step_rng(seed, level, int(j), -1);
                Rng rng_known = refine_known_rng(seed, level, int(j));
                auto values =
                    inpaint_patch(denoiser, sched, pl, canvas, &cond, cfg.sampler, rng, rng_known);
                write_canvas(canvas.z, pl, values);
            }
            for (int zz = 0; zz < pl.dz; ++zz)
                for (int yy = 0; yy < pl.dy; ++yy)
                    for (int xx = 0; xx < pl.dx; ++xx)
                        canvas.coverage.at(pl.x0 + xx, pl.y0 + yy, pl.z0 + zz) = 1.f;
            journal.write({{"stage", "refine-sequential"},
                           {"level", level},
                           {"placement", j},
                           {"wave", pl.wave},
                           {"skipped", all_known},
                           {"ms", std::chrono::duration<double, std::milli>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count()}});
        }
        z_s = canvas.z;
    } else {
        // Lockstep fusion: every timestep denoises all patches (batched
        // across workers) and averages overlaps.
        PatchSchedule plan = plan_patches(extent, patch, cfg.overlap_fraction, nullptr);
        const size_t n = plan.placements.size();
        Rng init_rng = refine_init_rng(seed, level);
        z_s = nn::Tensor<float>({1, C, extent[2], extent[1], extent[0]});
        for (auto& v : z_s.data) v = init_rng.normal_f();

        std::vector<const PatchPlacement*> refs(n);
        std::vector<nn::Tensor<float>> conds(n);
        for (size_t j = 0; j < n; ++j) {
            refs[j] = &plan.placements[j];
            const PatchPlacement& pl = plan.placements[j];
            conds[j] = nn::Tensor<float>({1, 1, pl.dz, pl.dy, pl.dx});
            for (int zz = 0; zz < pl.dz; ++zz)
                for (int yy = 0; yy < pl.dy; ++yy)
                    std::copy(&L_i.values.data[L_i.values.idx(pl.x0, pl.y0 + yy, pl.z0 + zz)],
                              &L_i.values.data[L_i.values.idx(pl.x0, pl.y0 + yy, pl.z0 + zz)] + pl.dx,
                              conds[j].ptr() + (int64_t(zz) * pl.dy + yy) * pl.dx);
        }
        const auto ts = diff::make_timesteps(sched.timesteps, cfg.sampler.steps);
        for (size_t i = 0; i < ts.size(); ++i) {
            const int t = ts[i];
            const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
            const auto t0 = std::chrono::steady_clock::now();

            // Per-timestep, every patch is independent: crop, predict, and
            // step run per patch across workers, then one aggregation joins
            // them. Results are per-patch deterministic regardless of the
            // worker split.
            std::vector<nn::Tensor<float>> stepped(n);
            parallel_for(int64_t(n), [&](int64_t j0, int64_t j1) {
                for (int64_t j = j0; j < j1; ++j) {
                    auto zj = crop_canvas(z_s, plan.placements[size_t(j)]);
                    auto ej = denoiser.predict_eps(zj, {t}, &conds[size_t(j)]);
                    Rng rng = refine_step_rng(seed, level, int(j), t);
                    stepped[size_t(j)] =
                        diff::step_from_eps(sched, zj, ej, t, t_prev, cfg.sampler.kind, rng);
                }
            });
            z_s = aggregate_patches(extent, C, refs, stepped);

            if (known && known->mask && known->z0) {
                // Pin the known region each step (same substitution as the
                // coarse inpainting loop).
                Rng rng_known = refine_known_rng(seed, level, t);
                auto noised = t_prev == 0 ? *known->z0
                                          : diff::q_sample(sched, *known->z0, t_prev,
                                                           diff::gaussian_like(*known->z0, rng_known));
                const int64_t spatial = int64_t(extent[0]) * extent[1] * extent[2];
                for (int c = 0; c < C; ++c)
                    for (int64_t vi = 0; vi < spatial; ++vi)
                        if (known->mask->data[size_t(vi)] != 0.f)
                            z_s.data[size_t(c * spatial + vi)] = noised.data[size_t(c * spatial + vi)];
            }
            journal.write({{"stage", "refine-parallel"},
                           {"level", level},
                           {"patches", n},
                           {"t", t},
                           {"t_prev", t_prev},
                           {"ms", std::chrono::duration<double, std::milli>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count()}});
        }
    }

    // H_i = destandardized z_0.
    LatentGrid H(C, extent[0], extent[1], extent[2], level);
    const int64_t spatial = int64_t(extent[0]) * extent[1] * extent[2];
    for (int c = 0; c < C; ++c)
        for (int64_t i = 0; i < spatial; ++i)
            H.data[size_t(c * spatial + i)] =
                z_s.data[size_t(c * spatial + i)] * dc.z_std[size_t(c)] + dc.z_mean[size_t(c)];
    return {std::move(L_i), std::move(H)};
}

}  // namespace

std::pair<TUDFGrid, LatentGrid> refine_level(const diff::UNetDenoiser& denoiser,
                                             const tree::LevelCodec& codec, const TUDFGrid& L_prev,
                                             const LatentGrid& H_prev, const SynthConfig& cfg,
                                             uint64_t seed) {
    return refine_level_impl(denoiser, codec, L_prev, H_prev, cfg, seed, nullptr);
}

TUDFGrid generate_scene(const SceneModels& models, const int extent_level1[3],
                        const SynthConfig& cfg, uint64_t seed, float root_voxel_size,
                        const Vec3& origin) {
    tree::validate_codec_stack(models.codecs);
    const int n_levels = models.levels();
    if (int(models.denoisers.size()) != n_levels - 1)
        throw std::invalid_argument("generate_scene: need one denoiser per level 1..N-1");

    int cum = 1;
    for (const auto& c : models.codecs) cum *= c.config.factor;
    const float voxel1 = root_voxel_size * float(cum);

    auto [L, H] = generate_coarse(*models.denoisers[0], extent_level1, cfg, seed, voxel1, origin);
    for (int i = 2; i <= n_levels - 1; ++i) {
        auto [Li, Hi] = refine_level(*models.denoisers[size_t(i - 1)],
                                     models.codecs[size_t(i - 2)], L, H, cfg, seed);
        L = std::move(Li);
        H = std::move(Hi);
    }
    return tree::decode_scene(models.codecs.back(), L, H);
}

TUDFGrid complete_scene(const SceneModels& models, const CompletionInput& input,
                        const SynthConfig& cfg, uint64_t seed) {
    tree::validate_codec_stack(models.codecs);
    const int n_levels = models.levels();
    int cum = 1;
    for (const auto& c : models.codecs) cum *= c.config.factor;

    const Grid3f& mask = input.known_mask;
    const Grid3f& part = input.partial.values;
    if (!mask.same_dims(part))
        throw std::invalid_argument("complete_scene: mask dims must match the partial grid");
    if (part.nx % cum || part.ny % cum || part.nz % cum)
        throw std::invalid_argument(
            "complete_scene: partial grid dims must be multiples of the cumulative factor " +
            std::to_string(cum));
    bool any_known = false;
    for (float v : mask.data) any_known = any_known || v != 0.f;
    if (!any_known) throw std::invalid_argument("complete_scene: known mask is empty");

    // The mask must be constant over each cum^3 block so it is representable
    // at level 1.
    Grid3f mask1(part.nx / cum, part.ny / cum, part.nz / cum, 0.f);
    for (int z = 0; z < mask1.nz; ++z)
        for (int y = 0; y < mask1.ny; ++y)
            for (int x = 0; x < mask1.nx; ++x) {
                bool all = true, any = false;
                for (int dz = 0; dz < cum; ++dz)
                    for (int dy = 0; dy < cum; ++dy)
                        for (int dx = 0; dx < cum; ++dx) {
                            const bool k =
                                mask.at(x * cum + dx, y * cum + dy, z * cum + dz) != 0.f;
                            all = all && k;
                            any = any || k;
                        }
                if (any != all)
                    throw std::invalid_argument(
                        "complete_scene: known mask must be constant over each " +
                        std::to_string(cum) + "^3 block (patch lattice alignment)");
                mask1.at(x, y, z) = all ? 1.f : 0.f;
            }

    // Encode the known content; unknown voxels are treated as empty space.
    TUDFGrid masked = input.partial;
    for (size_t i = 0; i < masked.values.data.size(); ++i)
        if (mask.data[i] == 0.f) masked.values.data[i] = masked.truncation;
    tree::LatentTree tree = tree::build_tree(models.codecs, masked);

    const int ext1[3] = {input.target_extent_level1[0], input.target_extent_level1[1],
                         input.target_extent_level1[2]};
    if (ext1[0] < mask1.nx || ext1[1] < mask1.ny || ext1[2] != mask1.nz)
        throw std::invalid_argument(
            "complete_scene: target extent must contain the partial extent (same z)");

    const bool fully_known =
        ext1[0] == mask1.nx && ext1[1] == mask1.ny &&
        std::all_of(mask1.data.begin(), mask1.data.end(), [](float v) { return v != 0.f; });
    if (fully_known) return tree::reconstruct(models.codecs, tree);

    // Seed the coarse canvas with the encoded (standardized) known region.
    const auto& dn1 = *models.denoisers[0];
    const auto& dc1 = dn1.config();
    const int C1 = dn1.z_channels();
    SceneCanvas canvas(C1, ext1);
    Grid3f coverage(ext1[0], ext1[1], ext1[2], 0.f);
    const int64_t spatial1 = int64_t(ext1[0]) * ext1[1] * ext1[2];
    (void)spatial1;
    for (int z = 0; z < mask1.nz; ++z)
        for (int y = 0; y < mask1.ny; ++y)
            for (int x = 0; x < mask1.nx; ++x) {
                if (mask1.at(x, y, z) == 0.f) continue;
                coverage.at(x, y, z) = 1.f;
                const float g = tree.L[0].values.at(x, y, z);
                canvas.z.data[size_t((int64_t(0) * ext1[2] + z) * ext1[1] * ext1[0] +
                                     int64_t(y) * ext1[0] + x)] =
                    (g - dc1.z_mean[0]) / dc1.z_std[0];
                for (int c = 1; c < C1; ++c) {
                    const float h = tree.H[0].at(c - 1, x, y, z);
                    canvas.z.data[size_t((int64_t(c) * ext1[2] + z) * ext1[1] * ext1[0] +
                                         int64_t(y) * ext1[0] + x)] =
                        (h - dc1.z_mean[size_t(c)]) / dc1.z_std[size_t(c)];
                }
            }
    canvas.coverage = coverage;

    const float voxel1 = input.partial.voxel_size * float(cum);
    auto [L, H] = generate_coarse(dn1, ext1, cfg, seed, voxel1, input.partial.origin, &coverage,
                                  &canvas);

    // Refinement: pin the encoded latents on the known region each step so
    // the completed scene preserves the input within codec error.
    Grid3f mask_i = mask1;
    for (int i = 2; i <= n_levels - 1; ++i) {
        const auto& dn = *models.denoisers[size_t(i - 1)];
        const auto& codec = models.codecs[size_t(i - 2)];
        const int f = codec.config.factor;

        // Upsample the known mask to level i and embed in the target extent.
        const int exti[3] = {L.values.nx * f, L.values.ny * f, L.values.nz * f};
        Grid3f maski(exti[0], exti[1], exti[2], 0.f);
        for (int z = 0; z < mask_i.nz * f; ++z)
            for (int y = 0; y < mask_i.ny * f; ++y)
                for (int x = 0; x < mask_i.nx * f; ++x)
                    maski.at(x, y, z) = mask_i.at(x / f, y / f, z / f);

        const auto& dci = dn.config();
        const int Ci = dn.z_channels();
        nn::Tensor<float> knownz({1, Ci, exti[2], exti[1], exti[0]});
        const LatentGrid& Henc = tree.H[size_t(i - 1)];
        for (int c = 0; c < Ci; ++c)
            for (int z = 0; z < Henc.nz; ++z)
                for (int y = 0; y < Henc.ny; ++y)
                    for (int x = 0; x < Henc.nx; ++x)
                        knownz.data[size_t(((int64_t(c) * exti[2] + z) * exti[1] + y) * exti[0] +
                                           x)] =
                            (Henc.at(c, x, y, z) - dci.z_mean[size_t(c)]) / dci.z_std[size_t(c)];

        RefineKnown known;
        known.mask = &maski;
        known.z0 = &knownz;
        known.geometry = &tree.L[size_t(i - 1)].values;
        auto [Li, Hi] = refine_level_impl(dn, codec, L, H, cfg, seed, &known);
        L = std::move(Li);
        H = std::move(Hi);
        mask_i = std::move(maski);
    }
    TUDFGrid out = tree::decode_scene(models.codecs.back(), L, H);
    // Final known-region substitution in field space: the reverse process pins
    // latents, but the last decode still mixes generated neighbors within its
    // receptive field, so the reconstructed known content is written back.
    TUDFGrid known_recon = tree::reconstruct(models.codecs, tree);
    for (int z = 0; z < mask.nz; ++z)
        for (int y = 0; y < mask.ny; ++y)
            for (int x = 0; x < mask.nx; ++x)
                if (mask.at(x, y, z) != 0.f) out.values.at(x, y, z) = known_recon.values.at(x, y, z);
    return out;
}

}  // namespace ltree::synth
