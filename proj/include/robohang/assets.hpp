#pragma once

#include "robohang/core.hpp"
#include "robohang/mesh.hpp"

#include <string>
#include <vector>

namespace robohang {

enum class GarmentKind { Tee, Tank, OpenCollar };

const char* toString(GarmentKind k);
GarmentKind garmentKindFromString(const std::string& s);

struct GarmentSpec {
    GarmentKind kind = GarmentKind::Tee;
    double torsoWidth = 0.45;     // m
    double torsoHeight = 0.55;    // m
    double sleeveLength = 0.12;   // m, ignored for tank
    double necklineWidth = 0.18;  // m
    double necklineDepth = 0.07;  // m, front panel
    double meshResolution = 0.02; // target edge length, m
    uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument
};

struct GarmentAsset {
    GarmentSpec spec;
    TriMesh mesh;  // merged front+back panels, restUV filled
    std::vector<int> necklineVertexIds;  // ordered closed ring, CCW viewed from above
    std::vector<Edge> seamEdgeIds;
    std::vector<char> isFrontVertex;  // 1 for front-panel (and welded seam) vertices

    // triangles with a vertex within `radius` geodesic distance of the neckline ring
    std::vector<int> necklineRegionTriangles(double radius = 0.03) const;
};

struct HangerSpec {
    double shoulderWidth = 0.40;       // m, |H_l - H_r|
    double shoulderDroopLeft = 0.30;   // rad
    double shoulderDroopRight = 0.30;  // rad
    bool hasCrossbar = true;
    double capsuleRadius = 0.003;  // m
    uint64_t seed = 0;

    void validate() const;
};

struct HangerModel {
    HangerSpec spec;
    // body frame: shoulder curve in the xz-plane, hook rising in +z over the center
    std::vector<std::vector<Vec3>> polylines;  // shoulder, hook, optional crossbar
    double capsuleRadius = 0.003;
    Vec3 keypointGrasp, keypointLeft, keypointRight;  // H_g, H_l, H_r

    std::vector<std::pair<Vec3, Vec3>> segments() const;
};

GarmentAsset generateGarment(const GarmentSpec& spec);
HangerModel generateHanger(const HangerSpec& spec);

// signed distance (m) to the capsule-swept centerline and its unit gradient
double hangerSdf(const HangerModel& model, const Vec3& point, Vec3* gradient = nullptr);

// Asset files: <name>.obj + <name>.meta.json
void saveGarment(const GarmentAsset& asset, const std::string& pathPrefix);
GarmentAsset loadGarment(const std::string& pathPrefix);
void saveHanger(const HangerModel& model, const std::string& pathPrefix);
HangerModel loadHanger(const std::string& pathPrefix);

// Diverse specs for dataset generation; deterministic in seed.
GarmentSpec randomGarmentSpec(uint64_t seed);
HangerSpec randomHangerSpec(uint64_t seed);

}  // namespace robohang
