#pragma once

#include "robohang/assets.hpp"
#include "robohang/scene.hpp"
#include "robohang/sensor.hpp"

#include <string>
#include <vector>

namespace robohang {

// Multiplicative / absolute ranges applied to the base ClothMaterial per episode.
struct MaterialRanges {
    double youngLo = 0.5, youngHi = 2.0;      // x base youngModulus
    double densityLo = 0.7, densityHi = 1.5;  // x base areaDensity
    double muLo = 0.1, muHi = 0.6;            // absolute frictionMu

    void validate() const;
};

// Scripted end-effector program constants.  The qualitative script is fixed;
// these dimensions are tuned once against recorded reference episodes.
struct PrimitiveGeometry {
    double hoverHeight = 0.06;       // m above the press point before descending
    double pressHeight = 0.007;      // H_l height above the table while pressing
    double liftHeight = 0.05;        // cloth lift
    double insertionDistance = 0.15; // horizontal hanger travel along press->lift
    double dragDistance = 0.06;      // phase-2 cloth drag
    double dragAngleDeg = -30.0;     // drag direction: +x rotated toward +y
    double dragHeight = 0.035;       // cloth height while dragging
    double pullBackDistance = 0.02;  // final pull-back before release
    double rotateDuration = 2.0;     // s, hanger rotation interpolation
    double tiltDeg = 25.0;           // hanger axis tilt: H_r raised during insertion
};

struct EpisodeConfig {
    uint64_t seed = 0;
    GarmentSpec garment;
    HangerSpec hanger;
    MaterialRanges materials;
    ClothMaterial baseMaterial;
    CollisionConfig collision;
    Camera camera;  // default: overhead look-at, set by EpisodeConfig()
    PrimitiveGeometry geometry;
    double poseNoiseTranslation = 0.03;  // m
    double poseNoiseYawDeg = 10.0;
    double settleTime = 0.5;   // s
    double dt = 0.002;         // s, simulation substep
    double controlTick = 0.01; // s, end-effector waypoint spacing
    double gripperSpeed = 0.2; // m/s free-space speed limit
    std::string recordFramesDir;  // empty = no OBJ frame export
    bool logTickPoses = false;    // keep per-tick gripper poses for the episode log

    EpisodeConfig();
    void validate() const;
};

// Pixel-parametrized primitive: (a, b) = (press, lift) in phase 1 and
// (drag, rotate) in phase 2.
struct PrimitiveParams {
    int au = 0, av = 0;
    int bu = 0, bv = 0;
    bool degraded = false;  // heuristic fell back to its best-effort candidate
};

struct Episode {
    EpisodeConfig config;
    GarmentAsset garment;
    HangerModel hanger;
    Scene scene;
    Camera camera;
    int hangerRigid = -1;
    int gripperA = 0;  // holds the hanger in phase 1, drags in phase 2
    int gripperB = 1;  // lifts in phase 1, holds the hanger in phase 2
    Observation o1, o2;
    PrimitiveParams phase1, phase2;
    int s1 = -1, s2 = -1;  // -1 = phase not evaluated yet
    double coverageLeft = -1.0, coverageRight = -1.0;
    bool graspMissPhase1 = false, graspMissPhase2 = false;
    long controlTicks = 0;
    long framesWritten = 0;
    std::vector<std::pair<Pose, Pose>> tickPoses;  // filled when logTickPoses is set
};

// Current world positions of the hanger keypoints.
Vec3 hangerLeft(const Episode& ep);
Vec3 hangerRight(const Episode& ep);
Vec3 hangerGrasp(const Episode& ep);

// Lays the garment flat on the table at a randomized planar pose, places the
// hanger beside it, samples materials, settles, and renders O1.
// Throws ResetFailed when the settle never comes to rest.
Episode reset(const EpisodeConfig& config);

// Phase 1: press the neckline with H_l, lift the garment, insert the hanger.
// Returns S1 and stores it (with O2) in the episode.
// Throws ParamRejected for out-of-bounds / off-mask parameters.
int execPressAndLift(Episode& ep, const PrimitiveParams& params);

// Phase 2: re-grasp the hanger, drag the right shoulder, rotate H_r into the
// garment, pull back.  Returns S2.  Requires phase 1 to have run.
int execDragAndRotate(Episode& ep, const PrimitiveParams& params);

// Fraction of nRays uniform directions from `point` that hit any triangle.
double rayCoverage(const Vec3& point, const std::vector<Vec3>& vertices,
                   const std::vector<Triangle>& triangles, int nRays, Rng& rng);

// Generalized winding number of the surface around `point`.
// Throws std::domain_error when the point lies on a triangle.
double windingNumber(const Vec3& point, const std::vector<Vec3>& vertices,
                     const std::vector<Triangle>& triangles);

// Success oracles over the current scene geometry: coverage of 512 rays from
// the hanger endpoint against the garment, thresholds 0.95 / 0.90 (inclusive).
// The optional out-parameter reports the raw coverage fraction.
int successLeft(const Episode& ep, double* coverage = nullptr);
int successRight(const Episode& ep, double* coverage = nullptr);

}  // namespace robohang
