#pragma once

#include "robohang/datastore.hpp"

namespace robohang {

// Generator settings shared by collection, evaluation, and the iterative loop.
// Episode i runs with seed seedBase + i; the seed alone determines the garment,
// hanger, materials, pose, and every policy draw, so results are independent of
// the worker count.
struct CollectConfig {
    uint64_t seedBase = 1;
    int garmentPool = 12;  // distinct garment spec ids drawn per episode
    int hangerPool = 2;
    int split = -1;  // -1 any garment, 0 train split, 1 test split (5:1 by id hash)
    PolicyKind policy = PolicyKind::Heuristic;
    HeuristicRules rules;
    PrimitiveParams fixedPhase1, fixedPhase2;       // PolicyKind::Fixed
    const PhaseModels* models1 = nullptr;           // PolicyKind::ValueMap
    const PhaseModels* models2 = nullptr;
    bool explore = false;  // value-map exploration (collection only)
    Exploration exploration;
    bool writeSamples = true;
    bool writeLogs = true;
    bool zeroNecklineChannel = false;  // "w/o neckline mask" ablation
    int workers = 1;
    EpisodeConfig base;  // template for camera/material/geometry settings
};

// 5:1 train/test partition of garment ids by hash; true = held-out test id.
bool isTestGarmentId(uint64_t garmentId);

// The fully-determined config of one episode (asset draws included).
EpisodeConfig episodeConfigFor(const CollectConfig& cfg, uint64_t seed);

struct EpisodeOutcome {
    uint64_t seed = 0;
    bool failed = false;
    std::string error;
    int s1 = 0, s2 = 0, s = 0;
    double coverageLeft = 0.0, coverageRight = 0.0;
    bool degraded = false;  // any phase used a best-effort heuristic candidate
};

struct CollectStats {
    long episodes = 0, failures = 0;
    long s1Sum = 0, s2Sum = 0, sSum = 0;
    std::vector<EpisodeOutcome> outcomes;

    double successRate() const { return episodes ? double(sSum) / double(episodes) : 0.0; }
    double phase1Rate() const { return episodes ? double(s1Sum) / double(episodes) : 0.0; }
    double phase2Rate() const { return episodes ? double(s2Sum) / double(episodes) : 0.0; }
};

// Runs one full two-phase episode under the configured policy.
Episode runEpisode(const CollectConfig& cfg, uint64_t seed);

// Training samples extracted from a finished episode (phase 1 and 2).
Sample sampleFromEpisode(const Episode& ep, int phase);

// Runs `count` episodes (seeds seedBase..seedBase+count-1) across cfg.workers
// threads, publishing samples and logs to the store in episode order.  Failed
// episodes are counted and skipped, never aborting the batch.  `store` may be
// null for evaluation-only runs.
CollectStats collectEpisodes(DataStore* store, const CollectConfig& cfg, int count);

struct IterateResult {
    PhaseModels phase1, phase2;
    std::vector<CollectStats> rounds;
    std::vector<double> roundSuccessRates;
};

// Eq. (1)-(6) training on the store's current data, then `rounds` iterations of
// collect-with-ValueMap (with exploration) -> append -> retrain on everything.
// Requires heuristic init data already present in the store; rounds = 0 is the
// "w/o online data" ablation.
IterateResult iterativeCollect(DataStore& store, int rounds, int perRound,
                               const CollectConfig& cfg, const TrainConfig& train,
                               bool retrainFromScratch = false);

}  // namespace robohang
