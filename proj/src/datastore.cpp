#include "robohang/datastore.hpp"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace robohang {

namespace {

std::string manifestPath(const DataStore& s) { return s.root + "/manifest.json"; }

std::string phaseDir(const DataStore& s, int phase) {
    return s.root + "/samples/phase" + std::to_string(phase);
}

std::string blobPath(const DataStore& s, int phase, long index) {
    std::ostringstream name;
    name << phaseDir(s, phase) << "/";
    name.width(7);
    name.fill('0');
    name << index;
    return name.str() + ".rhds";
}

void writeManifest(const DataStore& s, const json& m) {
    std::string tmp = manifestPath(s) + ".tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw std::runtime_error("cannot write manifest: " + tmp);
        f << m.dump(2) << "\n";
    }
    fs::rename(tmp, manifestPath(s));
}

void putLe16(std::ostream& f, uint16_t v) {
    unsigned char b[2] = {(unsigned char)(v), (unsigned char)(v >> 8)};
    f.write(reinterpret_cast<char*>(b), 2);
}
void putLe32(std::ostream& f, uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8), (unsigned char)(v >> 16),
                          (unsigned char)(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
}
void putLe64(std::ostream& f, uint64_t v) {
    putLe32(f, uint32_t(v));
    putLe32(f, uint32_t(v >> 32));
}
uint16_t getLe16(std::istream& f) {
    unsigned char b[2];
    f.read(reinterpret_cast<char*>(b), 2);
    return uint16_t(b[0] | b[1] << 8);
}
uint32_t getLe32(std::istream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}
uint64_t getLe64(std::istream& f) {
    uint64_t lo = getLe32(f);
    return lo | uint64_t(getLe32(f)) << 32;
}

json poseToJson(const Pose& p) {
    return json{{"q", {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()}},
                {"t", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

}  // namespace

DataStore openStore(const std::string& root) {
    DataStore s{root};
    fs::create_directories(phaseDir(s, 1));
    fs::create_directories(phaseDir(s, 2));
    fs::create_directories(root + "/episodes");
    if (!fs::exists(manifestPath(s))) {
        json m;
        m["formatVersion"] = 1;
        m["channels"] = {{"phase1", {"depth", "garment", "neckline"}},
                         {"phase2", {"depth", "garment", "hanger"}}};
        m["height"] = 0;
        m["width"] = 0;
        m["counts"] = {{"phase1", 0}, {"phase2", 0}};
        m["provenance"] = json::array();
        auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        m["createdAt"] = buf;
        writeManifest(s, m);
    }
    return s;
}

json readManifest(const DataStore& store) {
    std::ifstream f(manifestPath(store));
    if (!f) throw std::runtime_error("store has no manifest: " + store.root);
    return json::parse(f);
}

long sampleCount(const DataStore& store, int phase) {
    return readManifest(store)["counts"]["phase" + std::to_string(phase)].get<long>();
}

void noteProvenance(DataStore& store, const json& note) {
    json m = readManifest(store);
    m["provenance"].push_back(note);
    writeManifest(store, m);
}

long writeSample(DataStore& store, const Sample& sample) {
    if (sample.phase != 1 && sample.phase != 2) throw std::invalid_argument("bad sample phase");
    if (int(sample.obs.size()) != sample.channels * sample.height * sample.width)
        throw std::invalid_argument("sample stack size mismatch");
    json m = readManifest(store);
    if (m["height"].get<int>() == 0) {
        m["height"] = sample.height;
        m["width"] = sample.width;
    } else if (m["height"].get<int>() != sample.height || m["width"].get<int>() != sample.width) {
        throw std::invalid_argument("sample resolution differs from the store's");
    }
    std::string key = "phase" + std::to_string(sample.phase);
    long index = m["counts"][key].get<long>();

    std::ofstream f(blobPath(store, sample.phase, index), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write sample blob");
    f.write("RHDS", 4);
    putLe32(f, 1);
    f.put(char(sample.phase));
    f.put(char(sample.channels));
    putLe16(f, uint16_t(sample.height));
    putLe16(f, uint16_t(sample.width));
    for (float v : sample.obs) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        putLe32(f, bits);
    }
    putLe16(f, uint16_t(sample.au));
    putLe16(f, uint16_t(sample.av));
    putLe16(f, uint16_t(sample.bu));
    putLe16(f, uint16_t(sample.bv));
    f.put(char(sample.s));
    putLe64(f, sample.seed);
    f.close();
    if (!f) throw std::runtime_error("sample blob write failed");

    m["counts"][key] = index + 1;
    writeManifest(store, m);  // publish after the blob is durable
    return index;
}

Sample readSample(const DataStore& store, int phase, long index) {
    std::string path = blobPath(store, phase, index);
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("missing sample blob: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "RHDS", 4) != 0)
        throw std::runtime_error("bad sample magic: " + path);
    if (getLe32(f) != 1) throw std::runtime_error("unsupported sample version: " + path);
    Sample s;
    s.phase = f.get();
    s.channels = f.get();
    s.height = getLe16(f);
    s.width = getLe16(f);
    if (!f || s.phase != phase || s.channels < 1 || s.height < 1 || s.width < 1)
        throw std::runtime_error("corrupt sample header: " + path);
    s.obs.resize(size_t(s.channels) * size_t(s.height) * size_t(s.width));
    for (float& v : s.obs) {
        uint32_t bits = getLe32(f);
        std::memcpy(&v, &bits, 4);
    }
    s.au = getLe16(f);
    s.av = getLe16(f);
    s.bu = getLe16(f);
    s.bv = getLe16(f);
    s.s = uint8_t(f.get());
    s.seed = getLe64(f);
    if (!f) throw std::runtime_error("truncated sample blob: " + path);
    f.peek();
    if (!f.eof()) throw std::runtime_error("trailing bytes in sample blob: " + path);
    return s;
}

std::vector<Sample> readAllSamples(const DataStore& store, int phase) {
    long n = sampleCount(store, phase);
    std::vector<Sample> out;
    out.reserve(size_t(n));
    for (long i = 0; i < n; ++i) out.push_back(readSample(store, phase, i));
    return out;
}

uint64_t clothDigest(const std::vector<Vec3>& x) {
    uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the raw bit patterns
    auto mix = [&](double d) {
        uint64_t bits;
        std::memcpy(&bits, &d, 8);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 0x100000001b3ull;
        }
    };
    for (const Vec3& v : x) {
        mix(v.x());
        mix(v.y());
        mix(v.z());
    }
    return h;
}

json episodeConfigToJson(const EpisodeConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["garment"] = {{"kind", toString(c.garment.kind)},
                    {"torsoWidth", c.garment.torsoWidth},
                    {"torsoHeight", c.garment.torsoHeight},
                    {"sleeveLength", c.garment.sleeveLength},
                    {"necklineWidth", c.garment.necklineWidth},
                    {"necklineDepth", c.garment.necklineDepth},
                    {"meshResolution", c.garment.meshResolution},
                    {"seed", c.garment.seed}};
    j["hanger"] = {{"shoulderWidth", c.hanger.shoulderWidth},
                   {"shoulderDroopLeft", c.hanger.shoulderDroopLeft},
                   {"shoulderDroopRight", c.hanger.shoulderDroopRight},
                   {"hasCrossbar", c.hanger.hasCrossbar},
                   {"capsuleRadius", c.hanger.capsuleRadius},
                   {"seed", c.hanger.seed}};
    j["materials"] = {{"youngLo", c.materials.youngLo},   {"youngHi", c.materials.youngHi},
                      {"densityLo", c.materials.densityLo}, {"densityHi", c.materials.densityHi},
                      {"muLo", c.materials.muLo},         {"muHi", c.materials.muHi}};
    j["baseMaterial"] = {{"youngModulus", c.baseMaterial.youngModulus},
                         {"poissonRatio", c.baseMaterial.poissonRatio},
                         {"areaDensity", c.baseMaterial.areaDensity},
                         {"bendingStiffness", c.baseMaterial.bendingStiffness},
                         {"frictionMu", c.baseMaterial.frictionMu},
                         {"thickness", c.baseMaterial.thickness},
                         {"rayleighDamping", c.baseMaterial.rayleighDamping}};
    j["collision"] = {{"d0", c.collision.d0}, {"penaltyStiffness", c.collision.penaltyStiffness}};
    j["camera"] = {{"fx", c.camera.fx},       {"fy", c.camera.fy},
                   {"cx", c.camera.cx},       {"cy", c.camera.cy},
                   {"width", c.camera.width}, {"height", c.camera.height},
                   {"pose", poseToJson(c.camera.pose)}};
    j["geometry"] = {{"hoverHeight", c.geometry.hoverHeight},
                     {"pressHeight", c.geometry.pressHeight},
                     {"liftHeight", c.geometry.liftHeight},
                     {"insertionDistance", c.geometry.insertionDistance},
                     {"dragDistance", c.geometry.dragDistance},
                     {"dragAngleDeg", c.geometry.dragAngleDeg},
                     {"dragHeight", c.geometry.dragHeight},
                     {"pullBackDistance", c.geometry.pullBackDistance},
                     {"rotateDuration", c.geometry.rotateDuration},
                     {"tiltDeg", c.geometry.tiltDeg}};
    j["poseNoiseTranslation"] = c.poseNoiseTranslation;
    j["poseNoiseYawDeg"] = c.poseNoiseYawDeg;
    j["settleTime"] = c.settleTime;
    j["dt"] = c.dt;
    j["controlTick"] = c.controlTick;
    j["gripperSpeed"] = c.gripperSpeed;
    j["logTickPoses"] = c.logTickPoses;
    return j;
}

EpisodeConfig episodeConfigFromJson(const json& j) {
    EpisodeConfig c;
    c.seed = j.at("seed").get<uint64_t>();
    const json& g = j.at("garment");
    c.garment.kind = garmentKindFromString(g.at("kind").get<std::string>());
    c.garment.torsoWidth = g.at("torsoWidth");
    c.garment.torsoHeight = g.at("torsoHeight");
    c.garment.sleeveLength = g.at("sleeveLength");
    c.garment.necklineWidth = g.at("necklineWidth");
    c.garment.necklineDepth = g.at("necklineDepth");
    c.garment.meshResolution = g.at("meshResolution");
    c.garment.seed = g.at("seed").get<uint64_t>();
    const json& h = j.at("hanger");
    c.hanger.shoulderWidth = h.at("shoulderWidth");
    c.hanger.shoulderDroopLeft = h.at("shoulderDroopLeft");
    c.hanger.shoulderDroopRight = h.at("shoulderDroopRight");
    c.hanger.hasCrossbar = h.at("hasCrossbar");
    c.hanger.capsuleRadius = h.at("capsuleRadius");
    c.hanger.seed = h.at("seed").get<uint64_t>();
    const json& mr = j.at("materials");
    c.materials = {mr.at("youngLo"), mr.at("youngHi"), mr.at("densityLo"),
                   mr.at("densityHi"), mr.at("muLo"), mr.at("muHi")};
    const json& bm = j.at("baseMaterial");
    c.baseMaterial.youngModulus = bm.at("youngModulus");
    c.baseMaterial.poissonRatio = bm.at("poissonRatio");
    c.baseMaterial.areaDensity = bm.at("areaDensity");
    c.baseMaterial.bendingStiffness = bm.at("bendingStiffness");
    c.baseMaterial.frictionMu = bm.at("frictionMu");
    c.baseMaterial.thickness = bm.at("thickness");
    c.baseMaterial.rayleighDamping = bm.at("rayleighDamping");
    c.collision.d0 = j.at("collision").at("d0");
    c.collision.penaltyStiffness = j.at("collision").at("penaltyStiffness");
    const json& cam = j.at("camera");
    c.camera.fx = cam.at("fx");
    c.camera.fy = cam.at("fy");
    c.camera.cx = cam.at("cx");
    c.camera.cy = cam.at("cy");
    c.camera.width = cam.at("width");
    c.camera.height = cam.at("height");
    const json& q = cam.at("pose").at("q");
    const json& t = cam.at("pose").at("t");
    c.camera.pose.rotation = Quat(q[0], q[1], q[2], q[3]).normalized();
    c.camera.pose.translation = Vec3(t[0], t[1], t[2]);
    const json& ge = j.at("geometry");
    c.geometry.hoverHeight = ge.at("hoverHeight");
    c.geometry.pressHeight = ge.at("pressHeight");
    c.geometry.liftHeight = ge.at("liftHeight");
    c.geometry.insertionDistance = ge.at("insertionDistance");
    c.geometry.dragDistance = ge.at("dragDistance");
    c.geometry.dragAngleDeg = ge.at("dragAngleDeg");
    c.geometry.dragHeight = ge.at("dragHeight");
    c.geometry.pullBackDistance = ge.at("pullBackDistance");
    c.geometry.rotateDuration = ge.at("rotateDuration");
    c.geometry.tiltDeg = ge.at("tiltDeg");
    c.poseNoiseTranslation = j.at("poseNoiseTranslation");
    c.poseNoiseYawDeg = j.at("poseNoiseYawDeg");
    c.settleTime = j.at("settleTime");
    c.dt = j.at("dt");
    c.controlTick = j.at("controlTick");
    c.gripperSpeed = j.at("gripperSpeed");
    c.logTickPoses = j.value("logTickPoses", false);
    return c;
}

json episodeRecord(const Episode& ep) {
    json r;
    r["schema"] = "robohang-episode/1";
    r["config"] = episodeConfigToJson(ep.config);
    auto params = [](const PrimitiveParams& p) {
        return json{{"au", p.au}, {"av", p.av}, {"bu", p.bu}, {"bv", p.bv},
                    {"degraded", p.degraded}};
    };
    r["phase1"] = ep.s1 >= 0 ? params(ep.phase1) : json(nullptr);
    r["phase2"] = ep.s2 >= 0 ? params(ep.phase2) : json(nullptr);
    r["s1"] = ep.s1;
    r["s2"] = ep.s2;
    r["s"] = (ep.s1 > 0 && ep.s2 > 0) ? 1 : 0;
    r["coverageLeft"] = ep.coverageLeft;
    r["coverageRight"] = ep.coverageRight;
    r["graspMissPhase1"] = ep.graspMissPhase1;
    r["graspMissPhase2"] = ep.graspMissPhase2;
    r["controlTicks"] = ep.controlTicks;
    r["diagnostics"] = {{"proximityPairs", ep.scene.diag.proximityPairs},
                        {"ccdImpulses", ep.scene.diag.ccdImpulses},
                        {"ccdClamps", ep.scene.diag.ccdClamps},
                        {"dtHalvings", ep.scene.diag.dtHalvings}};
    char digest[17];
    std::snprintf(digest, sizeof(digest), "%016llx",
                  (unsigned long long)clothDigest(ep.scene.cloth.x));
    r["clothDigest"] = digest;
    r["vertexCount"] = ep.scene.cloth.x.size();
    if (!ep.tickPoses.empty()) {
        json poses = json::array();
        for (const auto& [a, b] : ep.tickPoses)
            poses.push_back({poseToJson(a), poseToJson(b)});
        r["tickPoses"] = std::move(poses);
    }
    return r;
}

void validateEpisodeRecord(const json& record) {
    const char* required[] = {"schema",       "config",       "s1",
                              "s2",           "s",            "coverageLeft",
                              "coverageRight", "clothDigest", "diagnostics"};
    for (const char* key : required)
        if (!record.contains(key))
            throw std::runtime_error(std::string("episode record missing field: ") + key);
    if (record["schema"] != "robohang-episode/1")
        throw std::runtime_error("unknown episode record schema");
    episodeConfigFromJson(record["config"]).validate();
}

std::string writeEpisodeLog(DataStore& store, const Episode& ep, const std::string& name) {
    json r = episodeRecord(ep);
    validateEpisodeRecord(r);
    std::string path = store.root + "/episodes/" + name + ".jsonl";
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write episode log: " + path);
    f << r.dump() << "\n";
    if (!f) throw std::runtime_error("episode log write failed: " + path);
    return path;
}

json loadEpisodeRecord(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open episode log: " + path);
    json r = json::parse(f);
    validateEpisodeRecord(r);
    return r;
}

Episode replayEpisode(const json& record) {
    validateEpisodeRecord(record);
    EpisodeConfig cfg = episodeConfigFromJson(record["config"]);
    Episode ep = reset(cfg);
    auto runPhase = [&](const json& p, int phase) {
        PrimitiveParams params;
        params.au = p.at("au");
        params.av = p.at("av");
        params.bu = p.at("bu");
        params.bv = p.at("bv");
        if (phase == 1)
            execPressAndLift(ep, params);
        else
            execDragAndRotate(ep, params);
    };
    if (!record["phase1"].is_null()) runPhase(record["phase1"], 1);
    if (!record["phase2"].is_null()) runPhase(record["phase2"], 2);
    return ep;
}

}  // namespace robohang
