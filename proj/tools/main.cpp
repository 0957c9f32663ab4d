#include "robohang/config.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace robohang;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNonConvergence = 4;

struct CommonOpts {
    std::string configPath;
    std::vector<std::string> overrides;
};

void addCommon(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.configPath, "TOML run configuration");
    cmd->add_option("--set", opts.overrides, "key=value overrides on top of the config file");
}

RunConfig loadRunConfig(const CommonOpts& opts) {
    json tree = opts.configPath.empty() ? json::object() : parseTomlFile(opts.configPath);
    return resolveRunConfig(tree, opts.overrides);
}

// Wilson 95% score interval for k successes out of n.
std::pair<double, double> wilson95(long k, long n) {
    if (n == 0) return {0.0, 1.0};
    const double z = 1.959963984540054;
    double p = double(k) / double(n), z2 = z * z;
    double denom = 1.0 + z2 / double(n);
    double center = (p + z2 / (2.0 * double(n))) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / double(n) + z2 / (4.0 * double(n) * double(n))) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

json rateReport(const char* name, long k, long n) {
    auto [lo, hi] = wilson95(k, n);
    return json{{"name", name}, {"successes", k},      {"episodes", n},
                {"rate", n ? double(k) / double(n) : 0.0}, {"wilson95Lo", lo}, {"wilson95Hi", hi}};
}

void printStats(const CollectStats& stats) {
    auto line = [&](const char* name, long k) {
        auto [lo, hi] = wilson95(k, stats.episodes);
        std::printf("%-4s %3ld/%3ld = %.3f  [%.3f, %.3f]\n", name, k, stats.episodes,
                    stats.episodes ? double(k) / double(stats.episodes) : 0.0, lo, hi);
    };
    line("S1", stats.s1Sum);
    line("S2", stats.s2Sum);
    line("S", stats.sSum);
    if (stats.failures) std::printf("failed episodes: %ld\n", stats.failures);
}

PhaseModels loadPhaseModels(const std::string& dir, int phase) {
    PhaseModels m;
    std::string prefix = dir + "/phase" + std::to_string(phase);
    m.qa = loadModel(prefix + "_qa.rhqm");
    m.qb = loadModel(prefix + "_qb.rhqm");
    return m;
}

void savePhaseModels(const PhaseModels& m, const std::string& dir, int phase,
                     const std::string& echo) {
    fs::create_directories(dir);
    std::string prefix = dir + "/phase" + std::to_string(phase);
    saveModel(m.qa, TrainMode::ValueBce, prefix + "_qa.rhqm", echo);
    saveModel(m.qb, TrainMode::ValueBce, prefix + "_qb.rhqm", echo);
}

int cmdGenAssets(int garments, int hangers, const std::string& out, uint64_t seed) {
    fs::create_directories(out);
    for (int i = 0; i < garments; ++i) {
        GarmentAsset g = generateGarment(randomGarmentSpec(seed + uint64_t(i)));
        char name[64];
        std::snprintf(name, sizeof(name), "%s/garment_%04d", out.c_str(), i);
        saveGarment(g, name);
    }
    for (int i = 0; i < hangers; ++i) {
        HangerModel h = generateHanger(randomHangerSpec(seed + uint64_t(i)));
        char name[64];
        std::snprintf(name, sizeof(name), "%s/hanger_%04d", out.c_str(), i);
        saveHanger(h, name);
    }
    std::printf("wrote %d garments and %d hangers to %s\n", garments, hangers, out.c_str());
    return 0;
}

int cmdCollect(RunConfig rc, int episodes, const std::string& out, const std::string& modelDir) {
    rc.collect.workers = capWorkers(rc.workers);
    PhaseModels m1, m2;
    if (rc.collect.policy == PolicyKind::ValueMap) {
        m1 = loadPhaseModels(modelDir, 1);
        m2 = loadPhaseModels(modelDir, 2);
        rc.collect.models1 = &m1;
        rc.collect.models2 = &m2;
    }
    DataStore store = openStore(out);
    noteProvenance(store, json{{"command", "collect"},
                               {"seedBase", rc.collect.seedBase},
                               {"episodes", episodes},
                               {"config", rc.echo}});
    CollectStats stats = collectEpisodes(&store, rc.collect, episodes);
    printStats(stats);
    return 0;
}

int cmdTrain(const RunConfig& rc, const std::string& data, int phase, const std::string& mode,
             const std::string& out) {
    DataStore store = openStore(data);
    std::vector<Sample> samples = readAllSamples(store, phase);
    if (samples.empty()) {
        std::fprintf(stderr, "no phase-%d samples in %s\n", phase, data.c_str());
        return kExitIo;
    }
    TrainConfig tc = rc.train;
    std::string echo = rc.echo.dump();
    json manifest = readManifest(store);
    int h = manifest["height"], w = manifest["width"];
    PhaseModels m;
    m.qa = makeScoreMapModel(3, h, w);
    m.qb = makeScoreMapModel(4, h, w);
    if (mode == "value") {
        tc.mode = TrainMode::ValueBce;
        trainPhase(m, samples, tc);
        savePhaseModels(m, out, phase, echo);
    } else {
        tc.mode = TrainMode::IlCrossEntropy;
        std::vector<Sample> positives;
        for (const Sample& s : samples)
            if (s.s == 1) positives.push_back(s);
        if (positives.empty()) {
            std::fprintf(stderr, "IL training needs positive samples\n");
            return kExitIo;
        }
        TrainStats tb = trainILMode(m.qb, positives, tc, true);
        TrainStats ta = trainILMode(m.qa, positives, tc, false);
        std::printf("IL loss: conditioned %.4f -> %.4f, unconditioned %.4f -> %.4f\n",
                    tb.firstEpochLoss, tb.finalLoss, ta.firstEpochLoss, ta.finalLoss);
        fs::create_directories(out);
        std::string prefix = out + "/phase" + std::to_string(phase);
        saveModel(m.qb, TrainMode::IlCrossEntropy, prefix + "_qb.rhqm", echo);
        saveModel(m.qa, TrainMode::IlCrossEntropy, prefix + "_qa.rhqm", echo);
        return 0;
    }
    std::printf("trained phase-%d models on %zu samples\n", phase, samples.size());
    return 0;
}

int cmdIterate(RunConfig rc, const std::string& data, int rounds, int perRound,
               bool retrainFromScratch) {
    rc.collect.workers = capWorkers(rc.workers);
    DataStore store = openStore(data);
    IterateResult res = iterativeCollect(store, rounds, perRound, rc.collect, rc.train,
                                         retrainFromScratch);
    for (size_t r = 0; r < res.roundSuccessRates.size(); ++r)
        std::printf("round %zu: S = %.3f\n", r, res.roundSuccessRates[r]);
    savePhaseModels(res.phase1, rc.modelDir, 1, rc.echo.dump());
    savePhaseModels(res.phase2, rc.modelDir, 2, rc.echo.dump());
    std::printf("models written to %s\n", rc.modelDir.c_str());
    return 0;
}

int cmdEval(RunConfig rc, int episodes, const std::string& split, const std::string& modelDir,
            const std::string& reportPath) {
    rc.collect.workers = capWorkers(rc.workers);
    rc.collect.split = split == "train" ? 0 : split == "test" ? 1 : -1;
    rc.collect.explore = false;
    rc.collect.writeSamples = false;
    rc.collect.writeLogs = false;
    PhaseModels m1, m2;
    if (rc.collect.policy == PolicyKind::ValueMap) {
        m1 = loadPhaseModels(modelDir, 1);
        m2 = loadPhaseModels(modelDir, 2);
        rc.collect.models1 = &m1;
        rc.collect.models2 = &m2;
    }
    CollectStats stats = collectEpisodes(nullptr, rc.collect, episodes);
    printStats(stats);
    if (!reportPath.empty()) {
        json report{{"split", split},
                    {"seedBase", rc.collect.seedBase},
                    {"failures", stats.failures},
                    {"config", rc.echo},
                    {"metrics",
                     {rateReport("S1", stats.s1Sum, stats.episodes),
                      rateReport("S2", stats.s2Sum, stats.episodes),
                      rateReport("S", stats.sSum, stats.episodes)}}};
        json perEpisode = json::array();
        for (const EpisodeOutcome& o : stats.outcomes)
            perEpisode.push_back(json{{"seed", o.seed},
                                      {"failed", o.failed},
                                      {"s1", o.s1},
                                      {"s2", o.s2},
                                      {"s", o.s}});
        report["episodes"] = perEpisode;
        std::ofstream f(reportPath);
        if (!f) {
            std::fprintf(stderr, "cannot write report %s\n", reportPath.c_str());
            return kExitIo;
        }
        f << report.dump(2) << "\n";
    }
    return 0;
}

int cmdRollout(RunConfig rc, uint64_t seed, const std::string& framesDir,
               const std::string& logStore) {
    if (!framesDir.empty()) rc.collect.base.recordFramesDir = framesDir;
    rc.collect.seedBase = seed;
    Episode ep = runEpisode(rc.collect, seed);
    std::printf("seed %llu: S1=%d S2=%d S=%d coverage L=%.3f R=%.3f\n",
                (unsigned long long)seed, ep.s1, ep.s2, ep.s1 * ep.s2, ep.coverageLeft,
                ep.coverageRight);
    if (!logStore.empty()) {
        DataStore store = openStore(logStore);
        std::string path = writeEpisodeLog(store, ep, "rollout_" + std::to_string(seed));
        std::printf("episode log: %s\n", path.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"robohang: cloth-simulation hanger-insertion environment"};
    app.require_subcommand(1);

    CommonOpts common;

    auto* gen = app.add_subcommand("gen-assets", "Generate garment and hanger assets");
    int garments = 12, hangers = 2;
    std::string genOut = "assets";
    uint64_t genSeed = 1;
    gen->add_option("--garments", garments);
    gen->add_option("--hangers", hangers);
    gen->add_option("--out", genOut);
    gen->add_option("--seed", genSeed);

    auto* collect = app.add_subcommand("collect", "Run episodes and store samples");
    std::string policy = "heuristic", out = "data", modelDir = "models";
    int episodes = 10, workers = 0;
    uint64_t seedBase = 0;
    addCommon(collect, common);
    collect->add_option("--policy", policy)->check(CLI::IsMember({"heuristic", "fixed", "valuemap"}));
    collect->add_option("--episodes", episodes);
    collect->add_option("--workers", workers);
    collect->add_option("--out", out);
    collect->add_option("--models", modelDir);
    collect->add_option("--seed-base", seedBase);

    auto* train = app.add_subcommand("train", "Train score maps from a store");
    std::string data = "data", mode = "value", ckptOut = "models";
    int phase = 1;
    addCommon(train, common);
    train->add_option("--data", data);
    train->add_option("--phase", phase)->check(CLI::IsMember({1, 2}));
    train->add_option("--mode", mode)->check(CLI::IsMember({"value", "il"}));
    train->add_option("--out", ckptOut);

    auto* iterate = app.add_subcommand("iterate", "Iterative collect-and-fine-tune loop");
    int rounds = 5, perRound = 120;
    bool retrainFromScratch = false;
    addCommon(iterate, common);
    iterate->add_option("--data", data);
    iterate->add_option("--rounds", rounds);
    iterate->add_option("--per-round", perRound);
    iterate->add_option("--workers", workers);
    iterate->add_option("--models", modelDir);
    iterate->add_option("--seed-base", seedBase);
    iterate->add_flag("--retrain-from-scratch", retrainFromScratch);

    auto* eval = app.add_subcommand("eval", "Evaluate a policy");
    std::string split = "test", report;
    addCommon(eval, common);
    eval->add_option("--policy", policy)->check(CLI::IsMember({"heuristic", "fixed", "valuemap"}));
    eval->add_option("--episodes", episodes);
    eval->add_option("--split", split)->check(CLI::IsMember({"train", "test", "any"}));
    eval->add_option("--workers", workers);
    eval->add_option("--models", modelDir);
    eval->add_option("--seed-base", seedBase);
    eval->add_option("--report", report);

    auto* rollout = app.add_subcommand("rollout", "Run and log one episode");
    uint64_t rolloutSeed = 1;
    std::string framesDir, logStore;
    addCommon(rollout, common);
    rollout->add_option("--seed", rolloutSeed);
    rollout->add_option("--policy", policy)->check(CLI::IsMember({"heuristic", "fixed", "valuemap"}));
    rollout->add_option("--models", modelDir);
    rollout->add_option("--record-frames", framesDir);
    rollout->add_option("--log-store", logStore);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig rc;
        if (!gen->parsed()) {
            rc = loadRunConfig(common);
            if (workers > 0) rc.workers = workers;
            if (collect->parsed() || eval->parsed() || rollout->parsed()) {
                if (collect->count("--policy") || eval->count("--policy") ||
                    rollout->count("--policy")) {
                    if (policy == "heuristic") rc.collect.policy = PolicyKind::Heuristic;
                    if (policy == "fixed") rc.collect.policy = PolicyKind::Fixed;
                    if (policy == "valuemap") rc.collect.policy = PolicyKind::ValueMap;
                }
            }
            if (seedBase != 0) rc.collect.seedBase = seedBase;
            if (!modelDir.empty() && iterate->parsed()) rc.modelDir = modelDir;
        }
        if (gen->parsed()) return cmdGenAssets(garments, hangers, genOut, genSeed);
        if (collect->parsed()) return cmdCollect(rc, episodes, out, modelDir);
        if (train->parsed()) return cmdTrain(rc, data, phase, mode, ckptOut);
        if (iterate->parsed()) return cmdIterate(rc, data, rounds, perRound, retrainFromScratch);
        if (eval->parsed()) return cmdEval(rc, episodes, split, modelDir, report);
        if (rollout->parsed()) return cmdRollout(rc, rolloutSeed, framesDir, logStore);
    } catch (const NonConvergence& e) {
        std::fprintf(stderr, "non-convergence: %s\n", e.what());
        return kExitNonConvergence;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::ios_base::failure& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kExitIo;
    } catch (const std::runtime_error& e) {
        // Runtime errors here come from files that are missing or unreadable.
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
    return 0;
}
