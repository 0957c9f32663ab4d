#include "robohang/policy.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace robohang;

namespace {

EpisodeConfig coarseConfig(uint64_t seed) {
    EpisodeConfig cfg;
    cfg.seed = seed;
    cfg.garment.meshResolution = 0.05;
    cfg.poseNoiseTranslation = 0.0;
    cfg.poseNoiseYawDeg = 0.0;
    return cfg;
}

double garmentCentroidU(const Observation& o) {
    double sum = 0;
    long n = 0;
    for (int v = 0; v < o.height; ++v)
        for (int u = 0; u < o.width; ++u)
            if (o.maskGarment[o.at(u, v)]) {
                sum += u;
                n++;
            }
    return sum / double(n);
}

}  // namespace

TEST_CASE("heuristic phase 1") {
    Episode ep = reset(coarseConfig(21));
    double centerU = garmentCentroidU(ep.o1);
    Rng rng(100);
    for (int i = 0; i < 20; ++i) {
        PrimitiveParams p = heuristicPhase1(ep, rng);
        REQUIRE_FALSE(p.degraded);
        // mask preconditions of the press-and-lift primitive
        REQUIRE(ep.o1.maskNeckline[ep.o1.at(p.au, p.av)] == 1);
        REQUIRE(ep.o1.maskGarment[ep.o1.at(p.bu, p.bv)] == 1);
        // press point stays left of the garment midline on a symmetric tee
        REQUIRE(double(p.au) < centerU);
    }
    SECTION("deterministic in the rng seed") {
        Rng a(7), b(7);
        PrimitiveParams pa = heuristicPhase1(ep, a);
        PrimitiveParams pb = heuristicPhase1(ep, b);
        REQUIRE(pa.au == pb.au);
        REQUIRE(pa.av == pb.av);
        REQUIRE(pa.bu == pb.bu);
        REQUIRE(pa.bv == pb.bv);
    }
}

TEST_CASE("heuristic phase 2") {
    Episode ep = reset(coarseConfig(22));
    SECTION("requires phase 1") {
        Rng rng(1);
        REQUIRE_THROWS_AS(heuristicPhase2(ep, rng), std::logic_error);
    }
    // stand in for an executed phase 1: reuse the settled observation
    ep.s1 = 0;
    ep.o2 = ep.o1;

    int uLo = ep.o2.width, uHi = -1, vLo = ep.o2.height, vHi = -1;
    for (int v = 0; v < ep.o2.height; ++v)
        for (int u = 0; u < ep.o2.width; ++u)
            if (ep.o2.maskGarment[ep.o2.at(u, v)]) {
                uLo = std::min(uLo, u);
                uHi = std::max(uHi, u);
                vLo = std::min(vLo, v);
                vHi = std::max(vHi, v);
            }
    Rng rng(200);
    for (int i = 0; i < 20; ++i) {
        PrimitiveParams p = heuristicPhase2(ep, rng);
        REQUIRE_FALSE(p.degraded);
        REQUIRE(ep.o2.maskGarment[ep.o2.at(p.au, p.av)] == 1);
        // drag point in the rightmost quarter, upper half of the garment bbox
        REQUIRE(p.au >= uLo + int(std::lround(0.75 * (uHi - uLo))));
        REQUIRE(p.av <= vLo + int(std::lround(0.5 * (vHi - vLo))));
        // rotate target in bounds, to the right of the drag region's garment
        REQUIRE(p.bu >= 0);
        REQUIRE(p.bu < ep.o2.width);
        REQUIRE(p.bv >= 0);
        REQUIRE(p.bv < ep.o2.height);
    }
}

TEST_CASE("score map argmax") {
    const int w = 16, h = 8;
    std::vector<float> map(size_t(w * h), 0.25f);
    SECTION("all-equal map breaks ties toward the lowest index") {
        REQUIRE(argmaxPixel(map, w, h) == std::pair<int, int>{0, 0});
    }
    map[size_t(3) * w + 12] = 0.9f;
    SECTION("unique maximum is found") {
        REQUIRE(argmaxPixel(map, w, h) == std::pair<int, int>{12, 3});
    }
    SECTION("invariant under a strictly monotone transform") {
        std::vector<float> squashed(map.size());
        for (size_t i = 0; i < map.size(); ++i)
            squashed[i] = std::tanh(3.0f * map[i]) - 2.0f;
        REQUIRE(argmaxPixel(squashed, w, h) == argmaxPixel(map, w, h));
    }
    SECTION("size mismatch throws") {
        REQUIRE_THROWS_AS(argmaxPixel(map, w, h + 1), std::invalid_argument);
    }
}

TEST_CASE("score map exploration") {
    const int w = 16, h = 8;
    std::vector<float> map(size_t(w * h), 0.0f);
    map[size_t(5) * w + 2] = 1.0f;
    SECTION("cold softmax concentrates on the maximum") {
        Rng rng(3);
        for (int i = 0; i < 100; ++i)
            REQUIRE(softmaxSamplePixel(map, w, h, 0.01, rng) == std::pair<int, int>{2, 5});
    }
    SECTION("warm softmax spreads out") {
        Rng rng(4);
        int offPeak = 0;
        for (int i = 0; i < 100; ++i)
            if (softmaxSamplePixel(map, w, h, 10.0, rng) != std::pair<int, int>{2, 5}) offPeak++;
        REQUIRE(offPeak > 50);
    }
    SECTION("zero epsilon and null rng are greedy") {
        Rng rng(5);
        Exploration none{0.0, 0.1};
        for (int i = 0; i < 10; ++i) {
            REQUIRE(actFromMap(map, w, h, none, &rng) == std::pair<int, int>{2, 5});
            REQUIRE(actFromMap(map, w, h, Exploration{}, nullptr) == std::pair<int, int>{2, 5});
        }
    }
    SECTION("exploration sometimes deviates") {
        Rng rng(6);
        Exploration ex{1.0, 10.0};
        int offPeak = 0;
        for (int i = 0; i < 100; ++i)
            if (actFromMap(map, w, h, ex, &rng) != std::pair<int, int>{2, 5}) offPeak++;
        REQUIRE(offPeak > 50);
    }
}
