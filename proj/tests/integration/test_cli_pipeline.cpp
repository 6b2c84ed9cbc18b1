// End-to-end smoke of the CLI: procedural scenes -> voxelize -> tiny codec
// and diffusion training -> generate (bit-identical across seed reruns) ->
// evaluate, plus prerequisite and manifest-reproduction checks.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ltree/core/binio.hpp"
#include "ltree/core/tudf_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "ltree_cli_smoke";

int run(const std::string& args) {
    const std::string cmd = std::string(LTREE_CLI) + " " + args + " >> " +
                            (kWork / "cli.log").string() + " 2>&1";
    return std::system(cmd.c_str());
}

std::string file_hash(const fs::path& p) {
    return ltree::io::sha256_hex(ltree::io::read_file(p.string()));
}

}  // namespace

TEST_CASE("cli pipeline smoke") {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    const std::string cfg_path = (kWork / "cfg.yaml").string();
    std::ofstream(cfg_path) << R"(levels: 2
resolutions: [4, 8]
factors: [2]
latent_channels: 2
tau: 0.1
voxel_size: 0.25
seed: 3
codec:
  width: 8
  patch_size: 8
  batch_size: 2
  lr: 2.0e-3
  steps: 60
diffusion:
  base_width: 8
  channel_mults: [1, 2]
  groups: 4
  sin_dim: 8
  temb_dim: 16
  patch_sizes: [4]
  batch_size: 2
  lr: 1.0e-3
  steps: 40
  timesteps: 50
sampler:
  kind: ddim
  steps: 8
)";

    // Scenes and grids.
    REQUIRE(run("make-scenes --seed 100 --count 2 --out-dir " + (kWork / "meshes").string()) == 0);
    REQUIRE(fs::exists(kWork / "meshes" / "scene_0000.obj"));
    REQUIRE(fs::exists(kWork / "meshes" / "make-scenes.manifest.json"));
    fs::create_directories(kWork / "grids");
    for (int i = 0; i < 2; ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "scene_%04d", i);
        REQUIRE(run("voxelize --in " + (kWork / "meshes" / (std::string(name) + ".obj")).string() +
                    " --voxel-size 0.25 --truncation 0.1 --out " +
                    (kWork / "grids" / (std::string(name) + ".tudf")).string()) == 0);
    }

    // Prerequisite ordering: generate before training names the missing step.
    fs::create_directories(kWork / "models");
    CHECK(run("generate --models " + (kWork / "models").string() + " --config " + cfg_path +
              " --extent-x 2 --extent-y 2 --seed 5 --out " + (kWork / "nope.tudf").string()) != 0);
    {
        const std::string log = ltree::io::read_file((kWork / "cli.log").string());
        CHECK(log.find("train-codecs") != std::string::npos);
    }

    // Codec training; encode/decode round trip.
    REQUIRE(run("train-codecs --config " + cfg_path + " --data-dir " + (kWork / "grids").string() +
                " --out " + (kWork / "models").string()) == 0);
    REQUIRE(fs::exists(kWork / "models" / "codec_level1.lck"));
    REQUIRE(run("encode --scene " + (kWork / "grids" / "scene_0000.tudf").string() + " --codecs " +
                (kWork / "models").string() + " --out " + (kWork / "tree.lt3").string()) == 0);
    REQUIRE(run("decode --tree " + (kWork / "tree.lt3").string() + " --codecs " +
                (kWork / "models").string() + " --out " + (kWork / "recon.tudf").string()) == 0);

    // Missing denoiser named before diffusion training.
    CHECK(run("generate --models " + (kWork / "models").string() + " --config " + cfg_path +
              " --extent-x 2 --extent-y 2 --seed 5 --out " + (kWork / "nope.tudf").string()) != 0);
    {
        const std::string log = ltree::io::read_file((kWork / "cli.log").string());
        CHECK(log.find("train-diffusion") != std::string::npos);
    }

    // Diffusion training (level 1 of a 2-level ladder).
    REQUIRE(run("train-diffusion --level 1 --codecs " + (kWork / "models").string() +
                " --config " + cfg_path + " --data-dir " + (kWork / "grids").string() +
                " --out " + (kWork / "models").string()) == 0);
    REQUIRE(fs::exists(kWork / "models" / "denoiser_level1.dck"));

    // Unconditional patch sampling.
    REQUIRE(run("sample-patch --model " + (kWork / "models" / "denoiser_level1.dck").string() +
                " --seed 4 --patch 4 --out " + (kWork / "patch.lt3p").string()) == 0);

    // Generation is deterministic per seed: byte-identical artifacts.
    const std::string gen_cmd = "generate --models " + (kWork / "models").string() + " --config " +
                                cfg_path + " --extent-x 2.5 --extent-y 2.5 --seed 5 --mesh " +
                                (kWork / "scene.obj").string() + " --journal " +
                                (kWork / "journal.ndjson").string() + " --out ";
    REQUIRE(run(gen_cmd + (kWork / "scene_a.tudf").string()) == 0);
    REQUIRE(run(gen_cmd + (kWork / "scene_b.tudf").string()) == 0);
    CHECK(file_hash(kWork / "scene_a.tudf") == file_hash(kWork / "scene_b.tudf"));

    // Manifest reproduction: the recorded output hash matches the artifact.
    {
        json manifest =
            json::parse(ltree::io::read_file((kWork / "scene_a.tudf.manifest.json").string()));
        CHECK(manifest["subcommand"] == "generate");
        CHECK(manifest["seed"] == 5);
        CHECK(manifest["outputs"][0]["sha256"] == file_hash(kWork / "scene_a.tudf"));
        CHECK(manifest["config"]["levels"] == 2);
    }

    // The progress journal carries per-placement and per-step records.
    {
        const std::string journal = ltree::io::read_file((kWork / "journal.ndjson").string());
        CHECK(journal.find("\"stage\":\"coarse\"") != std::string::npos);
        CHECK(journal.find("\"wave\"") != std::string::npos);
        CHECK(journal.find("\"ms\"") != std::string::npos);
    }

    // Resuming a finished run is a no-op that still succeeds.
    REQUIRE(run("train-codecs --config " + cfg_path + " --data-dir " + (kWork / "grids").string() +
                " --out " + (kWork / "models").string() + " --resume") == 0);
    REQUIRE(run("train-codecs --config " + cfg_path + " --data-dir " + (kWork / "grids").string() +
                " --out " + (kWork / "models").string() + " --resume") == 0);

    // A different seed gives a different scene.
    REQUIRE(run("generate --models " + (kWork / "models").string() + " --config " + cfg_path +
                " --extent-x 2.5 --extent-y 2.5 --seed 6 --out " +
                (kWork / "scene_c.tudf").string()) == 0);
    CHECK(file_hash(kWork / "scene_a.tudf") != file_hash(kWork / "scene_c.tudf"));

    // Completion from a partial scene (left half known).
    {
        auto grid = ltree::io::load_tudf((kWork / "grids" / "scene_0000.tudf").string());
        // Crop to a cum-aligned box (cum = 2).
        const int nx = grid.values.nx / 2 * 2, ny = grid.values.ny / 2 * 2,
                  nz = grid.values.nz / 2 * 2;
        ltree::TUDFGrid cropped;
        cropped.values = ltree::Grid3f(nx, ny, nz);
        cropped.voxel_size = grid.voxel_size;
        cropped.origin = grid.origin;
        cropped.truncation = grid.truncation;
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x)
                    cropped.values.at(x, y, z) = grid.values.at(x, y, z);
        ltree::io::save_tudf((kWork / "partial.tudf").string(), cropped);
        ltree::Grid3f mask(nx, ny, nz, 0.f);
        const int known_w = (nx / 2) / 2 * 2;  // cum-aligned half
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < known_w; ++x) mask.at(x, y, z) = 1.f;
        ltree::io::save_mask((kWork / "partial.mask").string(), mask);
    }
    REQUIRE(run("complete --partial " + (kWork / "partial.tudf").string() + " --mask " +
                (kWork / "partial.mask").string() + " --models " + (kWork / "models").string() +
                " --config " + cfg_path + " --seed 11 --out " +
                (kWork / "completed.tudf").string()) == 0);
    CHECK(fs::exists(kWork / "completed.tudf"));

    // Evaluate over two mesh directories.
    fs::create_directories(kWork / "ref_meshes");
    REQUIRE(run("make-scenes --seed 200 --count 2 --out-dir " +
                (kWork / "ref_meshes").string()) == 0);
    REQUIRE(run("evaluate --generated-dir " + (kWork / "meshes").string() + " --reference-dir " +
                (kWork / "ref_meshes").string() + " --points 256 --seed 1 --out " +
                (kWork / "report.json").string()) == 0);
    {
        json rep = json::parse(ltree::io::read_file((kWork / "report.json").string()));
        CHECK(rep.contains("mmd_cd"));
        CHECK(rep.contains("nna_emd"));
        CHECK(rep["points_per_cloud"] == 256);
    }

    fs::remove_all(kWork);
}
