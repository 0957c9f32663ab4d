#pragma once

#include "robohang/core.hpp"
#include "robohang/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace robohang {

// Pinhole camera.  Camera frame: +z is the view direction, +x right, +y down;
// pose maps camera coordinates to world.
struct Camera {
    double fx = 160.0, fy = 160.0;
    double cx = 64.0, cy = 64.0;
    int width = 128, height = 128;
    Pose pose;

    void validate() const;
};

// Overhead camera looking at `target` from `position` (view axis toward the
// target, image +x aligned with world +x as far as possible).
Camera makeLookAtCamera(const Vec3& position, const Vec3& target, int width, int height,
                        double focalPixels);

struct Observation {
    int width = 0, height = 0;
    std::vector<float> depth;          // row-major H*W meters, 0 = no hit
    std::vector<uint8_t> maskGarment;  // {0,1}
    std::vector<uint8_t> maskNeckline;
    std::vector<uint8_t> maskHanger;

    size_t at(int u, int v) const { return size_t(v) * size_t(width) + size_t(u); }
};

// Ray-cast render: cloth triangles via BVH, rigid bodies via sphere tracing
// (128 steps, eps 1e-4 m); depth clipped to (0.05, 5) m.  The neckline mask
// marks hits on scene.necklineTriangles; the hanger mask marks rigid bodies
// named "hanger".
Observation render(const Scene& scene, const Camera& camera);

// Intersection of the pixel ray with the horizontal plane z = fixedZ.
// Throws std::domain_error for rays parallel to the plane.
Vec3 backProject(double u, double v, const Camera& camera, double fixedZ);

// Continuous pixel coordinates of a world point; false when behind the camera.
bool project(const Vec3& worldPoint, const Camera& camera, double& u, double& v);

struct NoiseRanges {
    double intrinsicsJitter = 0.02;  // relative, +-2%
    double rotationJitterDeg = 1.0;
    double translationJitter = 0.01;  // m
    double depthSigma = 0.003;        // m
    double depthDropout = 0.005;      // fraction of pixels zeroed
    double morphologyProb = 0.5;      // per-mask erode and dilate probability
};

Camera randomizeCamera(const Camera& camera, Rng& rng, const NoiseRanges& ranges);
Observation randomizeObservation(const Observation& obs, Rng& rng, const NoiseRanges& ranges);

// 16-bit grayscale PNG of depth in millimeters plus one 8-bit PNG per mask:
// <prefix>_depth.png, _garment.png, _neckline.png, _hanger.png.
bool saveObservationPngs(const Observation& obs, const std::string& prefix);

}  // namespace robohang
