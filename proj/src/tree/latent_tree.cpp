#include "ltree/tree/latent_tree.hpp"

#include "ltree/core/binio.hpp"

namespace ltree::tree {

void validate_codec_stack(const std::vector<LevelCodec>& codecs) {
    if (codecs.empty()) throw std::invalid_argument("codec stack is empty");
    for (size_t k = 0; k < codecs.size(); ++k) {
        if (codecs[k].config.level != int(k) + 1)
            throw std::invalid_argument("codec stack: expected contiguous levels 1..N-1");
        if (codecs[k].config.tau != codecs[0].config.tau)
            throw std::invalid_argument("codec stack: tau mismatch across levels");
        if (codecs[k].config.latent_channels != codecs[0].config.latent_channels)
            throw std::invalid_argument("codec stack: latent channel mismatch across levels");
    }
}

TUDFGrid pad_to_multiple(const TUDFGrid& scene, int multiple) {
    const Grid3f& g = scene.values;
    auto round_up = [&](int v) { return ((v + multiple - 1) / multiple) * multiple; };
    const int nx = round_up(g.nx), ny = round_up(g.ny), nz = round_up(g.nz);
    if (nx == g.nx && ny == g.ny && nz == g.nz) return scene;
    TUDFGrid out = scene;
    out.values = Grid3f(nx, ny, nz, scene.truncation);
    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            std::copy(&g.data[g.idx(0, y, z)], &g.data[g.idx(0, y, z)] + g.nx,
                      &out.values.data[out.values.idx(0, y, z)]);
    return out;
}

LatentTree build_tree(const std::vector<LevelCodec>& codecs, const TUDFGrid& scene) {
    validate_codec_stack(codecs);
    const int n_levels = int(codecs.size()) + 1;

    LatentTree tree;
    tree.levels = n_levels;
    for (const auto& c : codecs) tree.factors.push_back(c.config.factor);
    tree.latent_channels = codecs[0].config.latent_channels;
    tree.tau = codecs[0].config.tau;
    tree.root_voxel_size = scene.voxel_size;
    tree.origin = scene.origin;
    tree.orig_dims[0] = scene.values.nx;
    tree.orig_dims[1] = scene.values.ny;
    tree.orig_dims[2] = scene.values.nz;

    TUDFGrid cur = pad_to_multiple(scene, tree.cumulative_factor());
    tree.root_dims[0] = cur.values.nx;
    tree.root_dims[1] = cur.values.ny;
    tree.root_dims[2] = cur.values.nz;

    tree.L.resize(codecs.size());
    tree.H.resize(codecs.size());
    for (int i = n_levels - 1; i >= 1; --i) {
        auto [pooled, latent] = encode_scene(codecs[size_t(i - 1)], cur);
        tree.L[size_t(i - 1)] = pooled;
        tree.H[size_t(i - 1)] = std::move(latent);
        cur = std::move(pooled);
    }
    return tree;
}

TUDFGrid reconstruct(const std::vector<LevelCodec>& codecs, const LatentTree& tree) {
    validate_codec_stack(codecs);
    if (int(codecs.size()) + 1 != tree.levels)
        throw std::invalid_argument("reconstruct: codec stack does not match tree level count");
    if (tree.L.empty() || tree.H.size() != tree.L.size())
        throw std::invalid_argument("reconstruct: incomplete tree");
    TUDFGrid cur = tree.L[0];
    for (int i = 1; i <= tree.levels - 1; ++i)
        cur = decode_scene(codecs[size_t(i - 1)], cur, tree.H[size_t(i - 1)]);
    // Crop away the divisibility padding.
    if (cur.values.nx != tree.orig_dims[0] || cur.values.ny != tree.orig_dims[1] ||
        cur.values.nz != tree.orig_dims[2]) {
        Grid3f cropped(tree.orig_dims[0], tree.orig_dims[1], tree.orig_dims[2]);
        for (int z = 0; z < cropped.nz; ++z)
            for (int y = 0; y < cropped.ny; ++y)
                std::copy(&cur.values.data[cur.values.idx(0, y, z)],
                          &cur.values.data[cur.values.idx(0, y, z)] + cropped.nx,
                          &cropped.data[cropped.idx(0, y, z)]);
        cur.values = std::move(cropped);
    }
    return cur;
}

namespace {
constexpr uint32_t kTreeMagic = 0x3352544c;  // "LTR3"
}

void save_tree(const std::string& path, const LatentTree& tree) {
    io::ByteWriter w;
    w.u32(kTreeMagic);
    w.u32(1);
    w.u32(uint32_t(tree.levels));
    for (int f : tree.factors) w.u32(uint32_t(f));
    w.u32(uint32_t(tree.latent_channels));
    w.f32(tree.tau);
    w.f32(tree.root_voxel_size);
    w.f32(float(tree.origin.x));
    w.f32(float(tree.origin.y));
    w.f32(float(tree.origin.z));
    for (int d : tree.root_dims) w.u32(uint32_t(d));
    for (int d : tree.orig_dims) w.u32(uint32_t(d));
    for (size_t k = 0; k < tree.L.size(); ++k) {
        const Grid3f& g = tree.L[k].values;
        w.u32(uint32_t(g.nx));
        w.u32(uint32_t(g.ny));
        w.u32(uint32_t(g.nz));
        w.f32(tree.L[k].voxel_size);
        w.f32_array(g.data.data(), g.data.size());
        const LatentGrid& h = tree.H[k];
        w.f32_array(h.data.data(), h.data.size());
    }
    io::write_file_atomic(path, std::move(w.buf));
}

LatentTree load_tree(const std::string& path) {
    const std::string bytes = io::read_file(path);
    io::ByteReader r(bytes);
    if (r.u32() != kTreeMagic) throw std::runtime_error("not a .lt3 file: " + path);
    if (r.u32() != 1) throw std::runtime_error(".lt3 version unsupported");
    LatentTree tree;
    tree.levels = int(r.u32());
    tree.factors.resize(size_t(tree.levels - 1));
    for (auto& f : tree.factors) f = int(r.u32());
    tree.latent_channels = int(r.u32());
    tree.tau = r.f32();
    tree.root_voxel_size = r.f32();
    tree.origin.x = r.f32();
    tree.origin.y = r.f32();
    tree.origin.z = r.f32();
    for (int& d : tree.root_dims) d = int(r.u32());
    for (int& d : tree.orig_dims) d = int(r.u32());
    tree.L.resize(size_t(tree.levels - 1));
    tree.H.resize(size_t(tree.levels - 1));
    for (size_t k = 0; k < tree.L.size(); ++k) {
        const int nx = int(r.u32()), ny = int(r.u32()), nz = int(r.u32());
        TUDFGrid& g = tree.L[k];
        g.values = Grid3f(nx, ny, nz);
        g.voxel_size = r.f32();
        g.origin = tree.origin;
        g.truncation = tree.tau;
        r.f32_array(g.values.data.data(), g.values.data.size());
        tree.H[k] = LatentGrid(tree.latent_channels, nx, ny, nz, int(k) + 1);
        r.f32_array(tree.H[k].data.data(), tree.H[k].data.size());
    }
    if (!r.done()) throw std::runtime_error(".lt3 has trailing bytes");
    return tree;
}

}  // namespace ltree::tree
