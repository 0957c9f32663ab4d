#pragma once

#include "robohang/policy.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace robohang {

// One training record: per-phase channel stack plus the action pair and label.
// Phase-1 channels are (depth, garment, neckline); phase-2 (depth, garment, hanger).
struct Sample {
    int phase = 1;
    int channels = 3, height = 0, width = 0;
    std::vector<float> obs;  // channels*H*W, channel-major row-major
    int au = 0, av = 0;      // p_a (press / drag)
    int bu = 0, bv = 0;      // p_b (lift / rotate)
    uint8_t s = 0;           // phase success label
    uint64_t seed = 0;       // episode provenance
    int sHat = -1;           // relabeled supervision, -1 until assigned
};

// Channel stack of an observation for the given phase.
std::vector<float> stackChannels(const Observation& obs, int phase);

// One-hot conditioning channel appended to a stack.
std::vector<float> withOneHot(const std::vector<float>& stack, int width, int height, int u, int v);

// Per-pixel logistic scorer over multi-scale local features: raw channel
// values, box-filtered means at radii {1, 3, 7, 15}, normalized pixel
// coordinates with their quadratic terms, and a bias.  Zero-initialized
// weights score 0.5 everywhere.
struct ScoreMapModel {
    int channels = 0;  // input channels, including any one-hot conditioning
    int height = 0, width = 0;
    std::vector<double> weights;  // 5*channels + 6

    int featureCount() const { return 5 * channels + 6; }
};

ScoreMapModel makeScoreMapModel(int channels, int height, int width);

// Full H*W probability map for one input stack.
std::vector<float> predict(const ScoreMapModel& model, const std::vector<float>& stack);

enum class TrainMode { ValueBce, IlCrossEntropy };

struct TrainConfig {
    double learningRate = 0.5;
    int epochs = 30;
    int batchSize = 32;
    uint64_t seed = 0;
    TrainMode mode = TrainMode::ValueBce;

    void validate() const;
};

struct TrainStats {
    double firstEpochLoss = 0.0;
    double finalLoss = 0.0;
    long steps = 0;
};

// BCE at the labeled pixel p_b of the conditioned input obs (+) oneHot(p_a).
TrainStats trainConditional(ScoreMapModel& qb, const std::vector<Sample>& samples,
                            const TrainConfig& cfg);

// S_hat = [max predict(q_b, obs (+) oneHot(p_a)) > 0.5], written into each sample.
void relabel(const ScoreMapModel& qb, std::vector<Sample>& samples);

// BCE at p_a of the raw stack against the relabeled S_hat.
TrainStats trainUnconditional(ScoreMapModel& qa, const std::vector<Sample>& samples,
                              const TrainConfig& cfg);

// Softmax cross-entropy over all pixels at the labeled point; positives only.
// `conditioned` selects p_b on obs (+) oneHot(p_a) versus p_a on the raw stack.
TrainStats trainILMode(ScoreMapModel& model, const std::vector<Sample>& samples,
                       const TrainConfig& cfg, bool conditioned);

// Checkpoint file: magic RHQM, version, C/H/W, mode, f32 parameter blob,
// config echo JSON.
void saveModel(const ScoreMapModel& model, TrainMode mode, const std::string& path,
               const std::string& configEcho = "{}");
ScoreMapModel loadModel(const std::string& path, TrainMode* mode = nullptr,
                        std::string* configEcho = nullptr);

// The two models of one phase: q_a unconditioned (C channels), q_b conditioned
// (C+1 channels).
struct PhaseModels {
    ScoreMapModel qa, qb;
};

// argmax of q_a, then argmax of q_b conditioned on the chosen p_a; optional
// epsilon/softmax exploration during collection.
PrimitiveParams valueMapAct(const PhaseModels& models, const std::vector<float>& stack, int width,
                            int height, const Exploration& exploration = {}, Rng* rng = nullptr);

// Train q_b, relabel, train q_a on one phase's samples (Eqs. 1-3 / 4-6 order).
void trainPhase(PhaseModels& models, std::vector<Sample>& samples, const TrainConfig& cfg);

}  // namespace robohang
