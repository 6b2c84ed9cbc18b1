#include "ltree/tree/codec.hpp"

#include <json.hpp>

#include "ltree/core/binio.hpp"
#include "ltree/core/threads.hpp"
#include "ltree/nn/serialize.hpp"

namespace ltree::tree {

using nlohmann::json;

Grid3f avg_pool_grid(const Grid3f& g, int f) {
    if (g.nx % f || g.ny % f || g.nz % f)
        throw std::invalid_argument("avg_pool: dims not divisible by factor");
    Grid3f out(g.nx / f, g.ny / f, g.nz / f);
    const double inv = 1.0 / (double(f) * f * f);
    for (int oz = 0; oz < out.nz; ++oz)
        for (int oy = 0; oy < out.ny; ++oy)
            for (int ox = 0; ox < out.nx; ++ox) {
                double acc = 0.0;
                for (int dz = 0; dz < f; ++dz)
                    for (int dy = 0; dy < f; ++dy)
                        for (int dx = 0; dx < f; ++dx)
                            acc += double(g.at(ox * f + dx, oy * f + dy, oz * f + dz));
                out.at(ox, oy, oz) = float(acc * inv);
            }
    return out;
}

TUDFGrid avg_pool_tudf(const TUDFGrid& g, int f) {
    TUDFGrid out;
    out.values = avg_pool_grid(g.values, f);
    out.voxel_size = g.voxel_size * float(f);
    out.origin = g.origin;
    out.truncation = g.truncation;
    return out;
}

nn::Tensor<float> grid_to_tensor(const Grid3f& g) {
    nn::Tensor<float> t({1, 1, g.nz, g.ny, g.nx});
    std::copy(g.data.begin(), g.data.end(), t.data.begin());
    return t;
}

nn::Tensor<float> latent_to_tensor(const LatentGrid& g) {
    nn::Tensor<float> t({1, g.channels, g.nz, g.ny, g.nx});
    std::copy(g.data.begin(), g.data.end(), t.data.begin());
    return t;
}

Grid3f tensor_to_grid(const nn::Tensor<float>& t) {
    Grid3f g(t.dim(4), t.dim(3), t.dim(2));
    std::copy(t.data.begin(), t.data.end(), g.data.begin());
    return g;
}

LatentGrid tensor_to_latent(const nn::Tensor<float>& t, int level) {
    LatentGrid g(t.dim(1), t.dim(4), t.dim(3), t.dim(2), level);
    std::copy(t.data.begin(), t.data.end(), g.data.begin());
    return g;
}

std::pair<TUDFGrid, LatentGrid> encode_level(const LevelCodec& codec, const TUDFGrid& patch) {
    const int f = codec.config.factor;
    if (patch.values.nx % f || patch.values.ny % f || patch.values.nz % f)
        throw std::invalid_argument("encode_level: patch dims not divisible by factor");
    TUDFGrid pooled = avg_pool_tudf(patch, f);
    auto lat_t = codec.encoder.infer(grid_to_tensor(patch.values));
    LatentGrid latent = tensor_to_latent(lat_t, codec.config.level);
    return {std::move(pooled), std::move(latent)};
}

TUDFGrid decode_level(const LevelCodec& codec, const TUDFGrid& coarse, const LatentGrid& latent) {
    if (latent.nx != coarse.values.nx || latent.ny != coarse.values.ny ||
        latent.nz != coarse.values.nz)
        throw std::invalid_argument("decode_level: coarse/latent dims mismatch");
    if (latent.channels != codec.config.latent_channels)
        throw std::invalid_argument("decode_level: latent channel mismatch");
    auto input = nn::concat_channels(grid_to_tensor(coarse.values), latent_to_tensor(latent));
    auto out = codec.decoder.infer(input);
    TUDFGrid fine;
    fine.values = tensor_to_grid(out);
    const float tau = codec.config.tau;
    for (float& v : fine.values.data) v = std::clamp(v, 0.f, tau);
    fine.voxel_size = coarse.voxel_size / float(codec.config.factor);
    fine.origin = coarse.origin;
    fine.truncation = coarse.truncation;
    return fine;
}

namespace {

struct TileRange {
    int lo[3];   // core lower corner
    int hi[3];   // core upper corner (exclusive)
    int elo[3];  // extended lower corner
    int ehi[3];
};

std::vector<TileRange> make_tiles(int nx, int ny, int nz, int core, int halo, int align) {
    const int dims[3] = {nx, ny, nz};
    std::vector<int> starts[3];
    for (int a = 0; a < 3; ++a)
        for (int s = 0; s < dims[a]; s += core) starts[a].push_back(s);
    std::vector<TileRange> tiles;
    for (int sz : starts[2])
        for (int sy : starts[1])
            for (int sx : starts[0]) {
                TileRange t;
                const int s3[3] = {sx, sy, sz};
                for (int a = 0; a < 3; ++a) {
                    t.lo[a] = s3[a];
                    t.hi[a] = std::min(dims[a], s3[a] + core);
                    t.elo[a] = std::max(0, t.lo[a] - halo);
                    t.ehi[a] = std::min(dims[a], t.hi[a] + halo);
                    if (align > 1) {
                        t.elo[a] = (t.elo[a] / align) * align;
                        t.ehi[a] = ((t.ehi[a] + align - 1) / align) * align;
                    }
                }
                tiles.push_back(t);
            }
    return tiles;
}

}  // namespace

std::pair<TUDFGrid, LatentGrid> encode_scene(const LevelCodec& codec, const TUDFGrid& scene,
                                             int tile) {
    const int f = codec.config.factor;
    const Grid3f& g = scene.values;
    if (g.nx % f || g.ny % f || g.nz % f)
        throw std::invalid_argument("encode_scene: scene dims not divisible by factor");

    TUDFGrid pooled = avg_pool_tudf(scene, f);

    const int core = std::max(f, (tile / f) * f);
    const int halo = codec.encoder.input_halo();  // multiple of f
    auto tiles = make_tiles(g.nx, g.ny, g.nz, core, halo, f);

    LatentGrid latent(codec.config.latent_channels, g.nx / f, g.ny / f, g.nz / f,
                      codec.config.level);
    parallel_for(int64_t(tiles.size()), [&](int64_t t0, int64_t t1) {
        for (int64_t ti = t0; ti < t1; ++ti) {
            const TileRange& t = tiles[size_t(ti)];
            const int ed[3] = {t.ehi[0] - t.elo[0], t.ehi[1] - t.elo[1], t.ehi[2] - t.elo[2]};
            nn::Tensor<float> in({1, 1, ed[2], ed[1], ed[0]});
            for (int z = 0; z < ed[2]; ++z)
                for (int y = 0; y < ed[1]; ++y) {
                    const float* src = &g.data[g.idx(t.elo[0], t.elo[1] + y, t.elo[2] + z)];
                    std::copy(src, src + ed[0],
                              in.ptr() + (int64_t(z) * ed[1] + y) * ed[0]);
                }
            auto out = codec.encoder.infer(in);  // [1, C, ed2/f, ed1/f, ed0/f]
            const int od[3] = {ed[0] / f, ed[1] / f, ed[2] / f};
            for (int c = 0; c < latent.channels; ++c)
                for (int z = t.lo[2] / f; z < t.hi[2] / f; ++z)
                    for (int y = t.lo[1] / f; y < t.hi[1] / f; ++y) {
                        const int lz = z - t.elo[2] / f, ly = y - t.elo[1] / f;
                        const float* src = out.ptr() +
                                           ((int64_t(c) * od[2] + lz) * od[1] + ly) * od[0] +
                                           (t.lo[0] - t.elo[0]) / f;
                        float* dst = &latent.data[latent.idx(c, t.lo[0] / f, y, z)];
                        std::copy(src, src + (t.hi[0] - t.lo[0]) / f, dst);
                    }
        }
    });
    return {std::move(pooled), std::move(latent)};
}

TUDFGrid decode_scene(const LevelCodec& codec, const TUDFGrid& coarse, const LatentGrid& latent,
                      int tile) {
    if (latent.nx != coarse.values.nx || latent.ny != coarse.values.ny ||
        latent.nz != coarse.values.nz)
        throw std::invalid_argument("decode_scene: coarse/latent dims mismatch");
    const int f = codec.config.factor;
    const Grid3f& cg = coarse.values;
    const int halo = codec.decoder.input_halo();
    const int core = std::max(1, tile);
    auto tiles = make_tiles(cg.nx, cg.ny, cg.nz, core, halo, 1);

    TUDFGrid fine;
    fine.values = Grid3f(cg.nx * f, cg.ny * f, cg.nz * f);
    fine.voxel_size = coarse.voxel_size / float(f);
    fine.origin = coarse.origin;
    fine.truncation = coarse.truncation;
    const float tau = codec.config.tau;
    const int C = codec.config.latent_channels;

    parallel_for(int64_t(tiles.size()), [&](int64_t t0, int64_t t1) {
        for (int64_t ti = t0; ti < t1; ++ti) {
            const TileRange& t = tiles[size_t(ti)];
            const int ed[3] = {t.ehi[0] - t.elo[0], t.ehi[1] - t.elo[1], t.ehi[2] - t.elo[2]};
            nn::Tensor<float> in({1, 1 + C, ed[2], ed[1], ed[0]});
            for (int z = 0; z < ed[2]; ++z)
                for (int y = 0; y < ed[1]; ++y) {
                    const float* src = &cg.data[cg.idx(t.elo[0], t.elo[1] + y, t.elo[2] + z)];
                    std::copy(src, src + ed[0], in.ptr() + (int64_t(z) * ed[1] + y) * ed[0]);
                }
            const int64_t plane = int64_t(ed[0]) * ed[1] * ed[2];
            for (int c = 0; c < C; ++c)
                for (int z = 0; z < ed[2]; ++z)
                    for (int y = 0; y < ed[1]; ++y) {
                        const float* src =
                            &latent.data[latent.idx(c, t.elo[0], t.elo[1] + y, t.elo[2] + z)];
                        std::copy(src, src + ed[0],
                                  in.ptr() + (1 + c) * plane + (int64_t(z) * ed[1] + y) * ed[0]);
                    }
            auto out = codec.decoder.infer(in);  // [1, 1, ed2*f, ed1*f, ed0*f]
            const int fd[3] = {ed[0] * f, ed[1] * f, ed[2] * f};
            for (int z = t.lo[2] * f; z < t.hi[2] * f; ++z)
                for (int y = t.lo[1] * f; y < t.hi[1] * f; ++y) {
                    const int lz = z - t.elo[2] * f, ly = y - t.elo[1] * f;
                    const float* src = out.ptr() + (int64_t(lz) * fd[1] + ly) * fd[0] +
                                       (t.lo[0] - t.elo[0]) * f;
                    float* dst = &fine.values.data[fine.values.idx(t.lo[0] * f, y, z)];
                    for (int x = 0; x < (t.hi[0] - t.lo[0]) * f; ++x)
                        dst[x] = std::clamp(src[x], 0.f, tau);
                }
        }
    });
    return fine;
}

void save_codec(const std::string& path, LevelCodec& codec) {
    json header;
    header["kind"] = "level_codec";
    header["level"] = codec.config.level;
    header["factor"] = codec.config.factor;
    header["latent_channels"] = codec.config.latent_channels;
    header["width"] = codec.config.width;
    header["groups"] = codec.config.groups;
    header["tau"] = codec.config.tau;
    header["latent_mean"] = codec.stats.mean;
    header["latent_std"] = codec.stats.std;
    header["geom_mean"] = codec.stats.geom_mean;
    header["geom_std"] = codec.stats.geom_std;
    header["plateau_loss"] = codec.plateau_loss;
    header["test_recon_err"] = codec.test_recon_err;
    header["trained_steps"] = codec.trained_steps;

    io::ByteWriter w;
    w.u32(0x4b43544c);  // "LTCK"
    w.u32(1);
    w.str(header.dump());
    nn::ParamRefs<float> refs;
    codec.encoder.collect(refs);
    codec.decoder.collect(refs);
    nn::write_params(w, refs);
    io::write_file_atomic(path, std::move(w.buf));
}

LevelCodec load_codec(const std::string& path) {
    const std::string bytes = io::read_file(path);
    io::ByteReader r(bytes);
    if (r.u32() != 0x4b43544c) throw std::runtime_error("not a codec checkpoint: " + path);
    if (r.u32() != 1) throw std::runtime_error("codec checkpoint version unsupported");
    json header = json::parse(r.str());
    if (header.at("kind") != "level_codec")
        throw std::runtime_error("checkpoint kind mismatch (expected level_codec)");
    LevelCodecConfig cfg;
    cfg.level = header.at("level");
    cfg.factor = header.at("factor");
    cfg.latent_channels = header.at("latent_channels");
    cfg.width = header.at("width");
    cfg.groups = header.at("groups");
    cfg.tau = header.at("tau");
    LevelCodec codec(cfg);
    codec.stats.mean = header.at("latent_mean").get<std::vector<float>>();
    codec.stats.std = header.at("latent_std").get<std::vector<float>>();
    codec.stats.geom_mean = header.at("geom_mean");
    codec.stats.geom_std = header.at("geom_std");
    codec.plateau_loss = header.at("plateau_loss");
    codec.test_recon_err = header.at("test_recon_err");
    codec.trained_steps = header.at("trained_steps");
    nn::ParamRefs<float> refs;
    codec.encoder.collect(refs);
    codec.decoder.collect(refs);
    nn::read_params(r, refs);
    return codec;
}

}  // namespace ltree::tree
