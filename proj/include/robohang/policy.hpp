#pragma once

#include "robohang/env.hpp"

#include <utility>
#include <vector>

namespace robohang {

enum class PolicyKind { Heuristic, Fixed, ValueMap };

// Sampling rules of the heuristic collection policy.  The qualitative rules
// are fixed; the constants are tuned once against the desk-scale success band.
struct HeuristicRules {
    int maxSamples = 200;
    double pressRingMargin = 0.01;  // min distance from the neckline ring, m
    double liftMin = 0.02, liftMax = 0.06;  // lift-point distance from press, m
    double liftDirCos = 0.0;  // min cosine against the away-from-centroid direction
    double dragRightFraction = 0.25;  // rightmost u-fraction of the garment bbox
    double dragUpperFraction = 0.5;   // upper v-fraction of the garment bbox
    double rotateOffsetMin = 0.01, rotateOffsetMax = 0.03;  // right of the ring end, m
    double rotateJitter = 0.05;   // downward jitter, m, to flatten the swing onto the garment
    double insertionProbe = 0.19;  // hanger travel past the press point to keep on-garment, m
};

// State-based heuristics: rejection-sample up to maxSamples candidates against
// the rules; when nothing passes, return the least-violating candidate with
// `degraded` set.  Valid (non-degraded) outputs always satisfy the mask
// preconditions of the corresponding primitive.
PrimitiveParams heuristicPhase1(const Episode& ep, Rng& rng, const HeuristicRules& rules = {});
PrimitiveParams heuristicPhase2(const Episode& ep, Rng& rng, const HeuristicRules& rules = {});

struct Exploration {
    double epsilon = 0.3;     // probability of sampling instead of argmax
    double temperature = 0.1; // softmax temperature when sampling
};

// Argmax over a row-major height*width score map; ties break toward the
// lowest row-major index.  Returns (u, v).
std::pair<int, int> argmaxPixel(const std::vector<float>& map, int width, int height);

// Softmax(map / temperature) sample.
std::pair<int, int> softmaxSamplePixel(const std::vector<float>& map, int width, int height,
                                       double temperature, Rng& rng);

// Greedy argmax, or with probability epsilon a softmax sample when rng is
// non-null (collection-time exploration).
std::pair<int, int> actFromMap(const std::vector<float>& map, int width, int height,
                               const Exploration& exploration, Rng* rng);

}  // namespace robohang
