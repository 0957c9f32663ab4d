#include "robohang/collect.hpp"

#include <atomic>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace robohang {

namespace {

constexpr uint64_t kAssetStream = 3;
constexpr uint64_t kPolicyStream = 4;

uint64_t fnv1a64(uint64_t value) {
    uint64_t h = 1469598103934665603ull;
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (8 * i)) & 0xffu;
        h *= 1099511628211ull;
    }
    return h;
}

void zeroNeckline(std::vector<float>& stack, const Observation& obs) {
    // Phase-1 channel order is (depth, garment, neckline).
    std::fill(stack.begin() + size_t(2) * obs.depth.size(),
              stack.begin() + size_t(3) * obs.depth.size(), 0.0f);
}

PrimitiveParams chooseParams(const CollectConfig& cfg, const Episode& ep, int phase, Rng& rng) {
    switch (cfg.policy) {
        case PolicyKind::Heuristic:
            return phase == 1 ? heuristicPhase1(ep, rng, cfg.rules)
                              : heuristicPhase2(ep, rng, cfg.rules);
        case PolicyKind::Fixed:
            return phase == 1 ? cfg.fixedPhase1 : cfg.fixedPhase2;
        case PolicyKind::ValueMap: {
            const PhaseModels* models = phase == 1 ? cfg.models1 : cfg.models2;
            if (!models) throw std::invalid_argument("value-map policy requires models");
            const Observation& obs = phase == 1 ? ep.o1 : ep.o2;
            std::vector<float> stack = stackChannels(obs, phase);
            if (phase == 1 && cfg.zeroNecklineChannel) zeroNeckline(stack, obs);
            if (cfg.explore)
                return valueMapAct(*models, stack, obs.width, obs.height, cfg.exploration, &rng);
            return valueMapAct(*models, stack, obs.width, obs.height);
        }
    }
    throw std::invalid_argument("unknown policy");
}

struct EpisodeResult {
    EpisodeOutcome outcome;
    bool hasData = false;
    Sample sample1, sample2;
    json record;
};

EpisodeResult runOne(const CollectConfig& cfg, uint64_t seed) {
    EpisodeResult res;
    res.outcome.seed = seed;
    try {
        Episode ep = runEpisode(cfg, seed);
        res.outcome.s1 = ep.s1;
        res.outcome.s2 = ep.s2;
        res.outcome.s = ep.s1 * ep.s2;
        res.outcome.coverageLeft = ep.coverageLeft;
        res.outcome.coverageRight = ep.coverageRight;
        res.outcome.degraded = ep.phase1.degraded || ep.phase2.degraded;
        res.sample1 = sampleFromEpisode(ep, 1);
        res.sample2 = sampleFromEpisode(ep, 2);
        res.record = episodeRecord(ep);
        res.hasData = true;
    } catch (const std::exception& e) {
        res.outcome.failed = true;
        res.outcome.error = e.what();
    }
    return res;
}

}  // namespace

bool isTestGarmentId(uint64_t garmentId) { return fnv1a64(garmentId) % 6 == 0; }

EpisodeConfig episodeConfigFor(const CollectConfig& cfg, uint64_t seed) {
    if (cfg.garmentPool < 1 || cfg.hangerPool < 1)
        throw std::invalid_argument("asset pools must be non-empty");
    EpisodeConfig c = cfg.base;
    c.seed = seed;
    Rng draw = Rng::stream(seed, kAssetStream);
    uint64_t garmentId = 0;
    for (int attempt = 0; attempt < 256; ++attempt) {
        garmentId = uint64_t(draw.uniformInt(0, cfg.garmentPool - 1));
        if (cfg.split < 0 || isTestGarmentId(garmentId) == (cfg.split == 1)) break;
    }
    double resolution = cfg.base.garment.meshResolution;
    c.garment = randomGarmentSpec(garmentId);
    c.garment.meshResolution = resolution;
    c.hanger = randomHangerSpec(uint64_t(draw.uniformInt(0, cfg.hangerPool - 1)));
    return c;
}

Episode runEpisode(const CollectConfig& cfg, uint64_t seed) {
    Episode ep = reset(episodeConfigFor(cfg, seed));
    Rng policyRng = Rng::stream(seed, kPolicyStream);
    execPressAndLift(ep, chooseParams(cfg, ep, 1, policyRng));
    execDragAndRotate(ep, chooseParams(cfg, ep, 2, policyRng));
    return ep;
}

Sample sampleFromEpisode(const Episode& ep, int phase) {
    if (phase != 1 && phase != 2) throw std::invalid_argument("phase must be 1 or 2");
    const Observation& obs = phase == 1 ? ep.o1 : ep.o2;
    const PrimitiveParams& params = phase == 1 ? ep.phase1 : ep.phase2;
    int label = phase == 1 ? ep.s1 : ep.s2;
    if (label < 0) throw std::logic_error("episode phase has not been executed");
    Sample s;
    s.phase = phase;
    s.channels = 3;
    s.height = obs.height;
    s.width = obs.width;
    s.obs = stackChannels(obs, phase);
    s.au = params.au;
    s.av = params.av;
    s.bu = params.bu;
    s.bv = params.bv;
    s.s = uint8_t(label);
    s.seed = ep.config.seed;
    return s;
}

CollectStats collectEpisodes(DataStore* store, const CollectConfig& cfg, int count) {
    if (count < 0) throw std::invalid_argument("negative episode count");
    CollectStats stats;
    std::map<int, EpisodeResult> ready;
    std::mutex mu;
    std::condition_variable cv;
    std::atomic<int> next{0};

    auto workerLoop = [&]() {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= count) return;
            EpisodeResult res = runOne(cfg, cfg.seedBase + uint64_t(i));
            std::lock_guard<std::mutex> lock(mu);
            ready.emplace(i, std::move(res));
            cv.notify_all();
        }
    };

    int workers = std::min(std::max(1, cfg.workers), std::max(1, count));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(workerLoop);

    // Publish strictly in episode order so stores and logs are identical for
    // any worker count.
    for (int i = 0; i < count; ++i) {
        EpisodeResult res;
        {
            std::unique_lock<std::mutex> lock(mu);
            cv.wait(lock, [&] { return ready.count(i) > 0; });
            res = std::move(ready.at(i));
            ready.erase(i);
        }
        stats.episodes++;
        if (res.outcome.failed) {
            stats.failures++;
        } else {
            stats.s1Sum += res.outcome.s1;
            stats.s2Sum += res.outcome.s2;
            stats.sSum += res.outcome.s;
            if (store && cfg.writeSamples) {
                writeSample(*store, res.sample1);
                writeSample(*store, res.sample2);
            }
            if (store && cfg.writeLogs) {
                std::string name = "ep_" + std::to_string(res.outcome.seed);
                std::ofstream out(store->root + "/episodes/" + name + ".jsonl");
                out << res.record.dump() << "\n";
            }
        }
        stats.outcomes.push_back(std::move(res.outcome));
    }
    for (std::thread& t : pool) t.join();
    return stats;
}

IterateResult iterativeCollect(DataStore& store, int rounds, int perRound,
                               const CollectConfig& cfg, const TrainConfig& train,
                               bool retrainFromScratch) {
    if (rounds < 0 || perRound < 0) throw std::invalid_argument("negative schedule");
    if (sampleCount(store, 1) == 0 || sampleCount(store, 2) == 0)
        throw std::invalid_argument("iterative collection requires heuristic init data");

    json manifest = readManifest(store);
    int h = manifest["height"], w = manifest["width"];

    IterateResult res;
    auto freshModels = [&]() {
        for (PhaseModels* m : {&res.phase1, &res.phase2}) {
            m->qa = makeScoreMapModel(3, h, w);
            m->qb = makeScoreMapModel(4, h, w);
        }
    };
    auto trainAll = [&](uint64_t seedOffset) {
        TrainConfig tc = train;
        tc.seed = train.seed + seedOffset;
        for (int phase : {1, 2}) {
            std::vector<Sample> samples = readAllSamples(store, phase);
            if (phase == 1 && cfg.zeroNecklineChannel) {
                size_t plane = size_t(h) * size_t(w);
                for (Sample& s : samples)
                    std::fill(s.obs.begin() + 2 * plane, s.obs.begin() + 3 * plane, 0.0f);
            }
            trainPhase(phase == 1 ? res.phase1 : res.phase2, samples, tc);
        }
    };

    freshModels();
    trainAll(0);

    for (int r = 0; r < rounds; ++r) {
        CollectConfig cc = cfg;
        cc.policy = PolicyKind::ValueMap;
        cc.models1 = &res.phase1;
        cc.models2 = &res.phase2;
        cc.explore = true;
        cc.seedBase = cfg.seedBase + uint64_t(r) * uint64_t(perRound);
        noteProvenance(store, json{{"policy", "valuemap"},
                                   {"round", r},
                                   {"seedBase", cc.seedBase},
                                   {"episodes", perRound}});
        CollectStats stats = collectEpisodes(&store, cc, perRound);
        res.roundSuccessRates.push_back(stats.successRate());
        res.rounds.push_back(std::move(stats));
        if (retrainFromScratch) freshModels();
        trainAll(uint64_t(r) + 1);
    }
    return res;
}

}  // namespace robohang
