// Single entry-point CLI for the full pipeline: procedural data, TUDF
// voxelization, codec and diffusion training, scene generation/completion,
// and point-cloud evaluation.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "ltree/config/config.hpp"
#include "ltree/config/manifest.hpp"
#include "ltree/core/binio.hpp"
#include "ltree/core/tudf_io.hpp"
#include "ltree/diffusion/train.hpp"
#include "ltree/geometry/extract.hpp"
#include "ltree/geometry/mesh_io.hpp"
#include "ltree/geometry/procgen.hpp"
#include "ltree/geometry/voxelize.hpp"
#include "ltree/metrics/set_metrics.hpp"
#include "ltree/synth/synthesis.hpp"
#include "ltree/tree/train.hpp"

namespace fs = std::filesystem;
using namespace ltree;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    }
};

void write_manifest_for(const std::string& artifact, cfg::Manifest m) {
    m.add_output(artifact);
    m.write(artifact + ".manifest.json");
}

std::vector<TUDFGrid> load_tudf_dir(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".tudf") paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());
    std::vector<TUDFGrid> grids;
    for (const auto& p : paths) grids.push_back(io::load_tudf(p));
    return grids;
}

std::vector<tree::LevelCodec> load_codec_stack(const std::string& dir) {
    std::vector<tree::LevelCodec> codecs;
    for (int level = 1;; ++level) {
        const std::string path = dir + "/codec_level" + std::to_string(level) + ".lck";
        if (!fs::exists(path)) break;
        codecs.push_back(tree::load_codec(path));
    }
    if (codecs.empty())
        throw std::runtime_error("no codec checkpoints in " + dir +
                                 " (run `train-codecs` first)");
    return codecs;
}

synth::SceneModels load_models(const std::string& dir) {
    synth::SceneModels models;
    models.codecs = load_codec_stack(dir);
    for (int level = 1; level <= int(models.codecs.size()); ++level) {
        const std::string path = dir + "/denoiser_level" + std::to_string(level) + ".dck";
        if (!fs::exists(path))
            throw std::runtime_error("missing " + path + " (run `train-diffusion --level " +
                                     std::to_string(level) + "` first)");
        models.denoisers.push_back(diff::load_denoiser(path));
    }
    return models;
}

synth::SynthConfig synth_config(const cfg::RunConfig& rc, const std::string& sampler_kind,
                                int sampler_steps, double overlap, const std::string& journal) {
    synth::SynthConfig sc;
    sc.sampler.kind = diff::sampler_from_string(sampler_kind.empty() ? rc.sampler.kind : sampler_kind);
    sc.sampler.steps = sampler_steps > 0 ? sampler_steps : rc.sampler.steps;
    sc.overlap_fraction = overlap > 0 ? overlap : rc.overlap_fraction;
    sc.patch_sizes = rc.diffusion.patch_sizes;
    sc.journal_path = journal;
    return sc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent-tree scene generation pipeline"};
    app.require_subcommand(1);

    std::string config_path;

    // ---- make-scenes ----------------------------------------------------
    auto* cmd_scenes = app.add_subcommand("make-scenes", "generate procedural room meshes");
    uint64_t ms_seed = 0;
    int ms_count = 1;
    std::string ms_out_dir;
    cmd_scenes->add_option("--seed", ms_seed, "base random seed (scene k uses seed+k)");
    cmd_scenes->add_option("--count", ms_count, "number of scenes")->required();
    cmd_scenes->add_option("--out-dir", ms_out_dir, "output directory for .obj meshes")->required();

    // ---- voxelize --------------------------------------------------------
    auto* cmd_vox = app.add_subcommand("voxelize", "mesh -> truncated unsigned distance grid");
    std::string vx_in, vx_out;
    double vx_voxel = 0.022, vx_trunc = 0.1, vx_pad = 0.0;
    cmd_vox->add_option("--in", vx_in, "input mesh (.obj/.ply)")->required();
    cmd_vox->add_option("--voxel-size", vx_voxel, "voxel edge in meters (default 0.022)");
    cmd_vox->add_option("--truncation", vx_trunc, "distance clip in meters (default 0.1)");
    cmd_vox->add_option("--pad", vx_pad, "extra bounds padding in meters");
    cmd_vox->add_option("--out", vx_out, "output .tudf grid")->required();

    // ---- extract-mesh ----------------------------------------------------
    auto* cmd_ext = app.add_subcommand("extract-mesh", "contour a TUDF grid to a mesh");
    std::string ex_in, ex_out;
    double ex_iso = 0.0;
    cmd_ext->add_option("--in", ex_in, "input .tudf grid")->required();
    cmd_ext->add_option("--iso", ex_iso, "iso level in meters (default: one voxel)");
    cmd_ext->add_option("--out", ex_out, "output mesh (.obj/.ply)")->required();

    // ---- train-codecs ----------------------------------------------------
    auto* cmd_tc = app.add_subcommand("train-codecs", "train the per-level factorization codecs");
    std::string tc_data, tc_out;
    bool tc_resume = false;
    cmd_tc->add_option("--config", config_path, "run config (.yaml)")->required();
    cmd_tc->add_option("--data-dir", tc_data, "directory of .tudf training scenes");
    cmd_tc->add_option("--out", tc_out, "checkpoint directory")->required();
    cmd_tc->add_flag("--resume", tc_resume, "resume from interrupted state in --out");

    // ---- encode ------------------------------------------------------------
    auto* cmd_enc = app.add_subcommand("encode", "scene grid -> latent tree");
    std::string en_scene, en_codecs, en_out;
    cmd_enc->add_option("--scene", en_scene, "input .tudf")->required();
    cmd_enc->add_option("--codecs", en_codecs, "codec checkpoint directory")->required();
    cmd_enc->add_option("--out", en_out, "output .lt3 tree")->required();

    // ---- decode ------------------------------------------------------------
    auto* cmd_dec = app.add_subcommand("decode", "latent tree -> scene grid");
    std::string de_tree, de_codecs, de_out;
    cmd_dec->add_option("--tree", de_tree, "input .lt3 tree")->required();
    cmd_dec->add_option("--codecs", de_codecs, "codec checkpoint directory")->required();
    cmd_dec->add_option("--out", de_out, "output .tudf")->required();

    // ---- train-diffusion ---------------------------------------------------
    auto* cmd_td = app.add_subcommand("train-diffusion", "train one level's denoiser");
    int td_level = 1;
    std::string td_codecs, td_out, td_data;
    bool td_resume = false;
    cmd_td->add_option("--level", td_level, "tree level (1 = coarsest, unconditional)")->required();
    cmd_td->add_option("--codecs", td_codecs, "codec checkpoint directory")->required();
    cmd_td->add_option("--config", config_path, "run config (.yaml)")->required();
    cmd_td->add_option("--data-dir", td_data, "directory of .tudf training scenes");
    cmd_td->add_option("--out", td_out, "denoiser checkpoint directory")->required();
    cmd_td->add_flag("--resume", td_resume, "resume from interrupted state in --out");

    // ---- sample-patch --------------------------------------------------------
    auto* cmd_sp = app.add_subcommand("sample-patch", "draw one patch from a trained denoiser");
    std::string sp_model, sp_out, sp_sampler;
    uint64_t sp_seed = 0;
    int sp_steps = 0;
    cmd_sp->add_option("--model", sp_model, "denoiser checkpoint (.dck)")->required();
    cmd_sp->add_option("--seed", sp_seed, "rng seed");
    cmd_sp->add_option("--steps", sp_steps, "sampler steps (default 50)");
    cmd_sp->add_option("--sampler", sp_sampler, "ddpm|ddim (default ddim)");
    cmd_sp->add_option("--out", sp_out, "output .lt3p patch")->required();
    int sp_patch = 0;
    cmd_sp->add_option("--patch", sp_patch, "patch edge (default: from config/ladder)");

    // ---- generate -------------------------------------------------------------
    auto* cmd_gen = app.add_subcommand("generate", "synthesize a scene coarse-to-fine");
    std::string g_models, g_out, g_mesh, g_sampler, g_journal;
    double g_ext_x = 0, g_ext_y = 0, g_overlap = 0, g_iso = 0;
    int g_steps = 0;
    uint64_t g_seed = 0;
    cmd_gen->add_option("--models", g_models, "directory with codec + denoiser checkpoints")
        ->required();
    cmd_gen->add_option("--config", config_path, "run config (.yaml)")->required();
    cmd_gen->add_option("--extent-x", g_ext_x, "scene x extent in meters")->required();
    cmd_gen->add_option("--extent-y", g_ext_y, "scene y extent in meters")->required();
    cmd_gen->add_option("--seed", g_seed, "rng seed");
    cmd_gen->add_option("--sampler", g_sampler, "ddpm|ddim");
    cmd_gen->add_option("--steps", g_steps, "sampler steps");
    cmd_gen->add_option("--overlap", g_overlap, "patch overlap fraction (default 0.5)");
    cmd_gen->add_option("--journal", g_journal, "progress journal path (ndjson)");
    cmd_gen->add_option("--out", g_out, "output .tudf scene")->required();
    cmd_gen->add_option("--mesh", g_mesh, "also contour to this mesh path");
    cmd_gen->add_option("--iso", g_iso, "iso level for --mesh (default: one voxel)");

    // ---- complete -------------------------------------------------------------
    auto* cmd_cmp = app.add_subcommand("complete", "complete a partial scene");
    std::string c_partial, c_mask, c_models, c_out, c_sampler, c_journal;
    double c_ext_x = 0, c_ext_y = 0, c_overlap = 0;
    int c_steps = 0;
    uint64_t c_seed = 0;
    cmd_cmp->add_option("--partial", c_partial, "partial scene .tudf")->required();
    cmd_cmp->add_option("--mask", c_mask, "known-region mask (.mask)")->required();
    cmd_cmp->add_option("--models", c_models, "model checkpoint directory")->required();
    cmd_cmp->add_option("--config", config_path, "run config (.yaml)")->required();
    cmd_cmp->add_option("--extent-x", c_ext_x, "target x extent in meters (default: partial)");
    cmd_cmp->add_option("--extent-y", c_ext_y, "target y extent in meters (default: partial)");
    cmd_cmp->add_option("--seed", c_seed, "rng seed");
    cmd_cmp->add_option("--sampler", c_sampler, "ddpm|ddim");
    cmd_cmp->add_option("--steps", c_steps, "sampler steps");
    cmd_cmp->add_option("--overlap", c_overlap, "patch overlap fraction");
    cmd_cmp->add_option("--journal", c_journal, "progress journal path (ndjson)");
    cmd_cmp->add_option("--out", c_out, "output .tudf scene")->required();

    // ---- evaluate --------------------------------------------------------------
    auto* cmd_ev = app.add_subcommand("evaluate", "point-cloud set metrics over two mesh dirs");
    std::string ev_gen, ev_ref, ev_out;
    int ev_points = 8192, ev_exact = 256;
    uint64_t ev_seed = 0;
    cmd_ev->add_option("--generated-dir", ev_gen, "directory of generated meshes")->required();
    cmd_ev->add_option("--reference-dir", ev_ref, "directory of reference meshes")->required();
    cmd_ev->add_option("--points", ev_points, "surface samples per mesh (default 8192)");
    cmd_ev->add_option("--emd-exact-threshold", ev_exact,
                       "exact assignment up to this size (default 256)");
    cmd_ev->add_option("--seed", ev_seed, "sampling seed");
    cmd_ev->add_option("--out", ev_out, "output report .json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        Timer timer;

        if (*cmd_scenes) {
            fs::create_directories(ms_out_dir);
            cfg::Manifest m;
            m.subcommand = "make-scenes";
            m.seed = ms_seed;
            for (int k = 0; k < ms_count; ++k) {
                geo::SceneSpec spec;
                spec.seed = ms_seed + uint64_t(k);
                auto mesh = geo::generate_scene(spec);
                char name[64];
                std::snprintf(name, sizeof name, "/scene_%04d.obj", k);
                const std::string path = ms_out_dir + name;
                geo::save_mesh(path, mesh);
                m.add_output(path);
            }
            m.wall_ms = timer.ms();
            m.write(ms_out_dir + "/make-scenes.manifest.json");
            std::cout << "wrote " << ms_count << " scenes to " << ms_out_dir << "\n";
        }

        if (*cmd_vox) {
            auto mesh = geo::load_mesh(vx_in);
            Box3 bounds = mesh.bounds ? *mesh.bounds : mesh.compute_bounds();
            bounds.lo = bounds.lo - Vec3{vx_pad, vx_pad, vx_pad};
            bounds.hi = bounds.hi + Vec3{vx_pad, vx_pad, vx_pad};
            geo::VoxelizeStats stats;
            TUDFGrid grid = geo::voxelize_tudf(mesh, vx_voxel, vx_trunc, bounds, &stats);
            if (stats.degenerate_faces_skipped > 0)
                std::cerr << "warning: skipped " << stats.degenerate_faces_skipped
                          << " degenerate faces\n";
            io::save_tudf(vx_out, grid);
            cfg::Manifest m;
            m.subcommand = "voxelize";
            m.resolved_config = {{"voxel_size", vx_voxel}, {"truncation", vx_trunc},
                                 {"pad", vx_pad},          {"in", vx_in}};
            m.config_hash = io::sha256_hex(m.resolved_config.dump());
            m.wall_ms = timer.ms();
            write_manifest_for(vx_out, m);
            std::cout << "voxelized " << vx_in << " -> " << vx_out << " (" << grid.values.nx << "x"
                      << grid.values.ny << "x" << grid.values.nz << ")\n";
        }

        if (*cmd_ext) {
            TUDFGrid grid = io::load_tudf(ex_in);
            // Default: one voxel, kept inside (0, truncation) for coarse grids.
            const double iso =
                ex_iso > 0 ? ex_iso : std::min(double(grid.voxel_size), grid.truncation / 2.0);
            auto mesh = geo::extract_mesh(grid, iso);
            geo::save_mesh(ex_out, mesh);
            std::cout << "extracted " << mesh.faces.size() << " triangles at iso " << iso << "\n";
        }

        if (*cmd_tc) {
            cfg::RunConfig rc = cfg::validate_config(config_path);
            const std::string data = tc_data.empty() ? rc.paths.data_dir : tc_data;
            if (data.empty() || !fs::exists(data))
                throw std::runtime_error("train-codecs: data dir not found (" + data +
                                         "); run `make-scenes` + `voxelize` first");
            auto scenes = load_tudf_dir(data);
            if (scenes.empty())
                throw std::runtime_error("train-codecs: no .tudf files in " + data +
                                         "; run `voxelize` first");
            fs::create_directories(tc_out);

            tree::CodecTrainConfig cc;
            cc.levels = rc.levels;
            cc.factors = rc.factors;
            cc.latent_channels = rc.latent_channels;
            cc.width = rc.codec.width;
            cc.groups = rc.codec.groups;
            cc.tau = float(rc.tau);
            cc.patch_size = rc.codec.patch_size;
            cc.batch_size = rc.codec.batch_size;
            cc.lr = rc.codec.lr;
            cc.steps = rc.codec.steps;
            cc.augment_data = rc.codec.augment;
            cc.seed = rc.seed;
            cc.log_path = tc_out + "/train_codecs.ndjson";
            if (tc_resume) {
                cc.state_dir = tc_out;
                cc.checkpoint_every = std::max<int64_t>(1, cc.steps / 20);
            }

            auto codecs = tree::train_codecs(scenes, {}, cc);
            cfg::Manifest m;
            m.subcommand = "train-codecs";
            m.resolved_config = rc.resolved_json();
            m.config_hash = rc.config_hash();
            m.seed = rc.seed;
            for (auto& codec : codecs) {
                const std::string path =
                    tc_out + "/codec_level" + std::to_string(codec.config.level) + ".lck";
                tree::save_codec(path, codec);
                m.add_output(path);
                std::cout << "level " << codec.config.level
                          << ": plateau=" << codec.plateau_loss
                          << " test_recon=" << codec.test_recon_err << "\n";
            }
            m.wall_ms = timer.ms();
            m.write(tc_out + "/train-codecs.manifest.json");
        }

        if (*cmd_enc) {
            auto codecs = load_codec_stack(en_codecs);
            TUDFGrid scene = io::load_tudf(en_scene);
            auto tree = tree::build_tree(codecs, scene);
            tree::save_tree(en_out, tree);
            cfg::Manifest m;
            m.subcommand = "encode";
            m.wall_ms = timer.ms();
            write_manifest_for(en_out, m);
            std::cout << "encoded " << en_scene << " -> " << en_out << " (" << tree.levels
                      << " levels)\n";
        }

        if (*cmd_dec) {
            auto codecs = load_codec_stack(de_codecs);
            auto tree = tree::load_tree(de_tree);
            TUDFGrid scene = tree::reconstruct(codecs, tree);
            io::save_tudf(de_out, scene);
            cfg::Manifest m;
            m.subcommand = "decode";
            m.wall_ms = timer.ms();
            write_manifest_for(de_out, m);
            std::cout << "decoded " << de_tree << " -> " << de_out << "\n";
        }

        if (*cmd_td) {
            cfg::RunConfig rc = cfg::validate_config(config_path);
            auto codecs = load_codec_stack(td_codecs);
            const std::string data = td_data.empty() ? rc.paths.data_dir : td_data;
            if (data.empty() || !fs::exists(data))
                throw std::runtime_error("train-diffusion: data dir not found (" + data + ")");
            auto scenes = load_tudf_dir(data);
            if (scenes.empty()) throw std::runtime_error("train-diffusion: no .tudf files in " + data);
            if (td_level < 1 || td_level > int(codecs.size()))
                throw std::runtime_error("train-diffusion: level out of range 1.." +
                                         std::to_string(codecs.size()));
            fs::create_directories(td_out);

            diff::DiffusionTrainConfig dc;
            dc.level = td_level;
            dc.patch_size = rc.diffusion.patch_sizes[size_t(td_level - 1)];
            dc.batch_size = rc.diffusion.batch_size;
            dc.lr = rc.diffusion.lr;
            dc.steps = rc.diffusion.steps;
            dc.family = diff::schedule_family_from_string(rc.diffusion.schedule);
            dc.timesteps = rc.diffusion.timesteps;
            dc.base_width = rc.diffusion.base_width;
            dc.channel_mults = rc.diffusion.channel_mults;
            dc.groups = rc.diffusion.groups;
            dc.sin_dim = rc.diffusion.sin_dim;
            dc.temb_dim = rc.diffusion.temb_dim;
            dc.augment_data = rc.diffusion.augment;
            dc.seed = rc.seed;
            dc.log_path = td_out + "/train_diffusion_level" + std::to_string(td_level) + ".ndjson";
            if (td_resume) {
                dc.state_dir = td_out;
                dc.checkpoint_every = std::max<int64_t>(1, dc.steps / 20);
            }

            auto result = diff::train_denoiser(codecs, scenes, dc);
            const std::string path =
                td_out + "/denoiser_level" + std::to_string(td_level) + ".dck";
            diff::save_denoiser(path, *result.denoiser, dc.steps, result.final_ema);
            cfg::Manifest m;
            m.subcommand = "train-diffusion";
            m.resolved_config = rc.resolved_json();
            m.config_hash = rc.config_hash();
            m.seed = rc.seed;
            m.wall_ms = timer.ms();
            write_manifest_for(path, m);
            std::cout << "level " << td_level << ": final ema loss " << result.final_ema << "\n";
        }

        if (*cmd_sp) {
            auto denoiser = diff::load_denoiser(sp_model);
            const auto& dc = denoiser->config();
            const int p = sp_patch > 0 ? sp_patch : 8;
            diff::SamplerConfig sampler;
            if (!sp_sampler.empty()) sampler.kind = diff::sampler_from_string(sp_sampler);
            if (sp_steps > 0) sampler.steps = std::min(sp_steps, dc.timesteps);
            sampler.steps = std::min(sampler.steps, dc.timesteps);
            const auto sched = diff::NoiseSchedule::make(dc.family, dc.timesteps);
            Rng rng(sp_seed);
            if (denoiser->conditional())
                throw std::runtime_error(
                    "sample-patch: conditional levels need a condition; use `generate`");
            auto z = diff::sample_patch(*denoiser, sched, {1, dc.z_channels, p, p, p}, nullptr,
                                        sampler, rng);
            denoiser->destandardize_z(z);
            diff::LatentPatch patch;
            patch.values = std::move(z);
            patch.level = dc.level;
            patch.kind = dc.conditional ? diff::LatentPatch::Kind::LatentOnly
                                        : diff::LatentPatch::Kind::GeometryLatent;
            io::ByteWriter w;
            w.u32(0x3150544c);  // "LTP1"
            w.u32(1);
            w.u32(uint32_t(patch.level));
            w.u8(patch.kind == diff::LatentPatch::Kind::GeometryLatent ? 1 : 0);
            w.u32(uint32_t(dc.z_channels));
            w.u32(uint32_t(p));
            w.u32(uint32_t(p));
            w.u32(uint32_t(p));
            w.f32_array(patch.values.ptr(), size_t(patch.values.numel()));
            io::write_file_atomic(sp_out, std::move(w.buf));
            std::cout << "sampled patch -> " << sp_out << "\n";
        }

        if (*cmd_gen) {
            cfg::RunConfig rc = cfg::validate_config(config_path);
            auto models = load_models(g_models);
            auto sc = synth_config(rc, g_sampler, g_steps, g_overlap, g_journal);
            int cum = 1;
            for (const auto& c : models.codecs) cum *= c.config.factor;
            const double voxel1 = rc.voxel_size * cum;
            const int pz = sc.patch_sizes.empty() ? 8 : sc.patch_sizes[0];
            const int ext[3] = {std::max(pz, int(std::lround(g_ext_x / voxel1))),
                                std::max(pz, int(std::lround(g_ext_y / voxel1))), pz};
            TUDFGrid scene = synth::generate_scene(models, ext, sc, g_seed,
                                                   float(rc.voxel_size), Vec3{0, 0, 0});
            io::save_tudf(g_out, scene);
            cfg::Manifest m;
            m.subcommand = "generate";
            m.resolved_config = rc.resolved_json();
            m.config_hash = rc.config_hash();
            m.seed = g_seed;
            m.wall_ms = timer.ms();
            write_manifest_for(g_out, m);
            if (!g_mesh.empty()) {
                const double iso =
                    g_iso > 0 ? g_iso : std::min(double(scene.voxel_size), scene.truncation / 2.0);
                geo::save_mesh(g_mesh, geo::extract_mesh(scene, iso));
            }
            std::cout << "generated " << scene.values.nx << "x" << scene.values.ny << "x"
                      << scene.values.nz << " -> " << g_out << "\n";
        }

        if (*cmd_cmp) {
            cfg::RunConfig rc = cfg::validate_config(config_path);
            auto models = load_models(c_models);
            auto sc = synth_config(rc, c_sampler, c_steps, c_overlap, c_journal);
            synth::CompletionInput input;
            input.partial = io::load_tudf(c_partial);
            input.known_mask = io::load_mask(c_mask);
            int cum = 1;
            for (const auto& c : models.codecs) cum *= c.config.factor;
            const double voxel1 = double(input.partial.voxel_size) * cum;
            input.target_extent_level1[0] =
                c_ext_x > 0 ? int(std::lround(c_ext_x / voxel1)) : input.partial.values.nx / cum;
            input.target_extent_level1[1] =
                c_ext_y > 0 ? int(std::lround(c_ext_y / voxel1)) : input.partial.values.ny / cum;
            input.target_extent_level1[2] = input.partial.values.nz / cum;
            TUDFGrid scene = synth::complete_scene(models, input, sc, c_seed);
            io::save_tudf(c_out, scene);
            cfg::Manifest m;
            m.subcommand = "complete";
            m.resolved_config = rc.resolved_json();
            m.config_hash = rc.config_hash();
            m.seed = c_seed;
            m.wall_ms = timer.ms();
            write_manifest_for(c_out, m);
            std::cout << "completed -> " << c_out << "\n";
        }

        if (*cmd_ev) {
            auto load_dir = [&](const std::string& dir, metrics::PointCloud::Source tag) {
                std::vector<std::string> paths;
                for (const auto& e : fs::directory_iterator(dir)) {
                    const auto ext = e.path().extension();
                    if (ext == ".obj" || ext == ".ply") paths.push_back(e.path().string());
                }
                std::sort(paths.begin(), paths.end());
                std::vector<metrics::PointCloud> clouds;
                uint64_t k = 0;
                for (const auto& p : paths) {
                    auto cloud = metrics::sample_points(geo::load_mesh(p), ev_points, ev_seed + k++);
                    cloud.source = tag;
                    clouds.push_back(std::move(cloud));
                }
                return clouds;
            };
            auto gen = load_dir(ev_gen, metrics::PointCloud::Source::Generated);
            auto ref = load_dir(ev_ref, metrics::PointCloud::Source::Reference);
            if (gen.empty() || ref.empty())
                throw std::runtime_error("evaluate: both directories must contain meshes");
            auto report = metrics::full_report(gen, ref, ev_exact);
            report.seed = ev_seed;
            report.points_per_cloud = ev_points;
            io::write_file_atomic(ev_out, report.to_json() + "\n");
            std::cout << report.to_json() << "\n";
        }

        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
