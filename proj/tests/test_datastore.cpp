#include "robohang/datastore.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

using namespace robohang;
namespace fs = std::filesystem;

namespace {

std::string freshStoreDir(const char* tag) {
    std::string dir = std::string("/tmp/robohang_store_") + tag;
    fs::remove_all(dir);
    return dir;
}

Sample randomSample(int phase, Rng& rng, int h = 12, int w = 16) {
    Sample s;
    s.phase = phase;
    s.channels = 3;
    s.height = h;
    s.width = w;
    s.obs.resize(size_t(3 * h * w));
    for (float& x : s.obs) x = float(rng.uniform(-3, 3));
    s.au = rng.uniformInt(0, w - 1);
    s.av = rng.uniformInt(0, h - 1);
    s.bu = rng.uniformInt(0, w - 1);
    s.bv = rng.uniformInt(0, h - 1);
    s.s = uint8_t(rng.uniformInt(0, 1));
    s.seed = rng.nextU64();
    return s;
}

EpisodeConfig coarseConfig(uint64_t seed) {
    EpisodeConfig cfg;
    cfg.seed = seed;
    cfg.garment.meshResolution = 0.05;
    return cfg;
}

}  // namespace

TEST_CASE("sample round trip is bit exact") {
    DataStore store = openStore(freshStoreDir("roundtrip"));
    Rng rng(1);
    Sample s = randomSample(1, rng);
    long id = writeSample(store, s);
    REQUIRE(id == 0);
    Sample r = readSample(store, 1, id);
    REQUIRE(r.phase == s.phase);
    REQUIRE(r.channels == s.channels);
    REQUIRE(r.height == s.height);
    REQUIRE(r.width == s.width);
    REQUIRE(r.obs == s.obs);
    REQUIRE(r.au == s.au);
    REQUIRE(r.av == s.av);
    REQUIRE(r.bu == s.bu);
    REQUIRE(r.bv == s.bv);
    REQUIRE(r.s == s.s);
    REQUIRE(r.seed == s.seed);
}

TEST_CASE("corruption is detected") {
    DataStore store = openStore(freshStoreDir("corrupt"));
    Rng rng(2);
    writeSample(store, randomSample(2, rng));
    std::string blob = store.root + "/samples/phase2/0000000.rhds";
    SECTION("truncated blob") {
        auto size = fs::file_size(blob);
        fs::resize_file(blob, size - 1);
        REQUIRE_THROWS_AS(readSample(store, 2, 0), std::runtime_error);
    }
    SECTION("bad magic") {
        std::fstream f(blob, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
        f.close();
        REQUIRE_THROWS_AS(readSample(store, 2, 0), std::runtime_error);
    }
    SECTION("missing index") {
        REQUIRE_THROWS_AS(readSample(store, 2, 5), std::runtime_error);
    }
}

TEST_CASE("manifest bookkeeping") {
    DataStore store = openStore(freshStoreDir("manifest"));
    Rng rng(3);
    int n1 = 0, n2 = 0;
    for (int i = 0; i < 40; ++i) {
        int phase = rng.uniformInt(1, 2);
        writeSample(store, randomSample(phase, rng));
        (phase == 1 ? n1 : n2)++;
    }
    REQUIRE(sampleCount(store, 1) == n1);
    REQUIRE(sampleCount(store, 2) == n2);
    REQUIRE(int(readAllSamples(store, 1).size()) == n1);

    SECTION("reopening preserves the counts") {
        DataStore again = openStore(store.root);
        REQUIRE(sampleCount(again, 1) == n1);
    }
    SECTION("mismatched resolution is rejected") {
        Sample odd = randomSample(1, rng, 8, 8);
        REQUIRE_THROWS_AS(writeSample(store, odd), std::invalid_argument);
    }
    SECTION("provenance notes accumulate") {
        noteProvenance(store, json{{"policy", "heuristic"}, {"round", 0}});
        noteProvenance(store, json{{"policy", "valuemap"}, {"round", 1}});
        REQUIRE(readManifest(store)["provenance"].size() == 2);
    }
}

TEST_CASE("episode config json round trip") {
    EpisodeConfig cfg = coarseConfig(77);
    cfg.materials.muLo = 0.23;
    cfg.geometry.insertionDistance = 0.135;
    cfg.camera = makeLookAtCamera(Vec3(0.1, -0.2, 1.4), Vec3(0.02, 0, 0), 96, 96, 140.0);
    cfg.logTickPoses = true;
    EpisodeConfig back = episodeConfigFromJson(episodeConfigToJson(cfg));
    REQUIRE(back.seed == cfg.seed);
    REQUIRE(back.garment.meshResolution == cfg.garment.meshResolution);
    REQUIRE(back.materials.muLo == cfg.materials.muLo);
    REQUIRE(back.geometry.insertionDistance == cfg.geometry.insertionDistance);
    REQUIRE(back.camera.fx == cfg.camera.fx);
    REQUIRE((back.camera.pose.translation - cfg.camera.pose.translation).norm() == 0.0);
    REQUIRE(back.camera.pose.rotation.coeffs() == cfg.camera.pose.rotation.coeffs());
    REQUIRE(back.logTickPoses == cfg.logTickPoses);
}

TEST_CASE("episode log and replay") {
    DataStore store = openStore(freshStoreDir("episodes"));
    EpisodeConfig cfg = coarseConfig(31);
    cfg.logTickPoses = true;
    Episode ep = reset(cfg);
    std::string path = writeEpisodeLog(store, ep, "ep_31");
    json record = loadEpisodeRecord(path);
    REQUIRE(record["s1"] == -1);
    REQUIRE(record["s"] == 0);
    REQUIRE(record["tickPoses"].size() == size_t(ep.controlTicks));

    SECTION("malformed records are rejected") {
        json broken = record;
        broken.erase("clothDigest");
        REQUIRE_THROWS_AS(validateEpisodeRecord(broken), std::runtime_error);
        json wrongSchema = record;
        wrongSchema["schema"] = "something-else";
        REQUIRE_THROWS_AS(validateEpisodeRecord(wrongSchema), std::runtime_error);
    }
    SECTION("replay reproduces the cloth digest bitwise") {
        Episode again = replayEpisode(record);
        char digest[17];
        std::snprintf(digest, sizeof(digest), "%016llx",
                      (unsigned long long)clothDigest(again.scene.cloth.x));
        REQUIRE(record["clothDigest"].get<std::string>() == digest);
    }
}
