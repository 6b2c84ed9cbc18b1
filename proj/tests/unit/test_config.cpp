#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ltree/config/config.hpp"
#include "ltree/config/manifest.hpp"
#include "ltree/config/yaml.hpp"
#include "ltree/core/binio.hpp"

using namespace ltree;
using nlohmann::json;

TEST_CASE("yaml subset: scalars, nesting, lists, comments") {
    const std::string text = R"(
# run configuration
levels: 3
tau: 0.1            # meters
name: "hello world"
enabled: true
factors: [2, 4]
codec:
  width: 16
  lr: 1.0e-4
  inner:
    deep: -7
)";
    json j = cfg::parse_yaml(text);
    CHECK(j["levels"] == 3);
    CHECK(j["tau"] == 0.1);
    CHECK(j["name"] == "hello world");
    CHECK(j["enabled"] == true);
    CHECK(j["factors"] == json({2, 4}));
    CHECK(j["codec"]["width"] == 16);
    CHECK(j["codec"]["lr"] == 1.0e-4);
    CHECK(j["codec"]["inner"]["deep"] == -7);

    CHECK_THROWS(cfg::parse_yaml("key: [1, 2"));
    CHECK_THROWS(cfg::parse_yaml("- item\n"));
    CHECK_THROWS(cfg::parse_yaml("a:\n\tb: 1\n"));
    CHECK_THROWS(cfg::parse_yaml("a: 1\na: 2\n"));
}

TEST_CASE("minimal config expands to the recorded defaults") {
    cfg::RunConfig rc = cfg::config_from_json(json::object());
    CHECK(rc.levels == 3);
    CHECK(rc.latent_channels == 4);
    CHECK(rc.tau == 0.1);
    CHECK(rc.voxel_size == 0.022);
    CHECK(rc.overlap_fraction == 0.5);
    CHECK(rc.resolutions == std::vector<int>({16, 32, 128}));
    CHECK(rc.factors == std::vector<int>({2, 4}));
    CHECK(rc.codec.batch_size == 4);
    CHECK(rc.codec.lr == 1e-4);
    CHECK(rc.diffusion.batch_size == 8);
    CHECK(rc.diffusion.lr == 1e-4);
    CHECK(rc.diffusion.timesteps == 1000);
    CHECK(rc.diffusion.schedule == "cosine");
    CHECK(rc.sampler.kind == "ddim");
    CHECK(rc.sampler.steps == 50);
    // Derived patch ladder follows the resolutions prefix.
    CHECK(rc.diffusion.patch_sizes == std::vector<int>({16, 32}));

    // The resolved form records every default.
    json resolved = rc.resolved_json();
    CHECK(resolved["levels"] == 3);
    CHECK(resolved["latent_channels"] == 4);
    CHECK(resolved["codec"]["batch_size"] == 4);
    CHECK(!rc.config_hash().empty());
}

TEST_CASE("unknown keys are rejected") {
    json j;
    j["levles"] = 3;  // typo
    CHECK_THROWS_WITH_AS(cfg::config_from_json(j), doctest::Contains("unknown key: levles"),
                         std::invalid_argument);
    json nested;
    nested["codec"]["wdith"] = 8;
    CHECK_THROWS_WITH_AS(cfg::config_from_json(nested),
                         doctest::Contains("unknown key: codec.wdith"), std::invalid_argument);
}

TEST_CASE("ladder/factor mismatch is rejected with the failing arithmetic") {
    json j;
    j["resolutions"] = {16, 32, 128};
    j["factors"] = {2, 2};
    try {
        cfg::config_from_json(j);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("32 * 2 = 64") != std::string::npos);
        CHECK(msg.find("128") != std::string::npos);
    }
}

TEST_CASE("all violations reported at once") {
    json j;
    j["levels"] = 1;
    j["tau"] = -1.0;
    j["overlap_fraction"] = 1.5;
    j["bogus"] = true;
    try {
        cfg::config_from_json(j);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("unknown key: bogus") != std::string::npos);
        CHECK(msg.find("levels must be >= 2") != std::string::npos);
        CHECK(msg.find("tau must be > 0") != std::string::npos);
        CHECK(msg.find("overlap_fraction") != std::string::npos);
    }
}

TEST_CASE("nonexistent configured paths are flagged") {
    json j;
    j["paths"]["data_dir"] = "/definitely/not/a/path";
    CHECK_THROWS_WITH_AS(cfg::config_from_json(j), doctest::Contains("path does not exist"),
                         std::invalid_argument);
}

TEST_CASE("validate_config reads a yaml file end to end") {
    namespace fs = std::filesystem;
    const auto path = fs::temp_directory_path() / "cfg_test.yaml";
    std::ofstream(path) << "levels: 2\nresolutions: [8, 16]\nfactors: [2]\nseed: 42\n";
    cfg::RunConfig rc = cfg::validate_config(path.string());
    CHECK(rc.levels == 2);
    CHECK(rc.seed == 42);
    CHECK(rc.diffusion.patch_sizes == std::vector<int>({8}));
    fs::remove(path);
}

TEST_CASE("manifest: outputs hashed, file written") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "manifest_test";
    fs::create_directories(dir);
    const auto artifact = dir / "artifact.bin";
    io::write_file_atomic(artifact.string(), "some bytes");

    cfg::Manifest m;
    m.subcommand = "test";
    m.seed = 7;
    m.resolved_config = {{"k", "v"}};
    m.config_hash = io::sha256_hex(m.resolved_config.dump());
    m.add_output(artifact.string());
    m.write((dir / "artifact.manifest.json").string());

    json j = json::parse(io::read_file((dir / "artifact.manifest.json").string()));
    CHECK(j["subcommand"] == "test");
    CHECK(j["seed"] == 7);
    CHECK(j["outputs"][0]["sha256"] == io::sha256_hex(std::string("some bytes")));
    CHECK(j.contains("source_rev"));
    fs::remove_all(dir);
}
