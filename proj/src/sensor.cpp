#include "robohang/sensor.hpp"

#include "robohang/geometry.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace robohang {

void Camera::validate() const {
    if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("camera focal lengths must be positive");
    if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
        throw std::invalid_argument("camera principal point must lie inside the image");
    if (width <= 0 || height <= 0) throw std::invalid_argument("camera resolution must be positive");
}

Camera makeLookAtCamera(const Vec3& position, const Vec3& target, int width, int height,
                        double focalPixels) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = focalPixels;
    cam.cx = width / 2.0;
    cam.cy = height / 2.0;
    Vec3 z = (target - position).normalized();
    Vec3 xHint = Vec3::UnitX();
    if (std::abs(z.dot(xHint)) > 0.99) xHint = Vec3::UnitY();
    Vec3 x = (xHint - xHint.dot(z) * z).normalized();
    Vec3 y = z.cross(x).normalized();
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    cam.pose.rotation = Quat(r).normalized();
    cam.pose.translation = position;
    return cam;
}

namespace {
constexpr double kNearClip = 0.05;
constexpr double kFarClip = 5.0;
constexpr int kSphereTraceSteps = 128;
constexpr double kSphereTraceEps = 1e-4;
}  // namespace

Observation render(const Scene& scene, const Camera& camera) {
    camera.validate();
    Observation obs;
    obs.width = camera.width;
    obs.height = camera.height;
    size_t np = size_t(camera.width) * size_t(camera.height);
    obs.depth.assign(np, 0.0f);
    obs.maskGarment.assign(np, 0);
    obs.maskNeckline.assign(np, 0);
    obs.maskHanger.assign(np, 0);

    TriangleBvh bvh;
    if (!scene.mesh.triangles.empty()) bvh = TriangleBvh(scene.cloth.x, scene.mesh.triangles);
    std::unordered_set<int> neckTris(scene.necklineTriangles.begin(), scene.necklineTriangles.end());

    const Vec3 orig = camera.pose.translation;
    const Mat3 rot = camera.pose.rotation.toRotationMatrix();

    for (int v = 0; v < camera.height; ++v) {
        for (int u = 0; u < camera.width; ++u) {
            Vec3 dirLocal((u + 0.5 - camera.cx) / camera.fx, (v + 0.5 - camera.cy) / camera.fy, 1.0);
            double dirNorm = dirLocal.norm();
            dirLocal /= dirNorm;
            Vec3 dir = rot * dirLocal;
            double cosZ = dirLocal.z();  // view-axis component per unit ray length

            double bestRay = std::numeric_limits<double>::max();
            int hitKind = -1;  // 0 cloth, 1 rigid
            int hitId = -1;

            if (!bvh.empty()) {
                auto hit = bvh.raycast(orig, dir, kNearClip / cosZ, kFarClip / cosZ);
                if (hit) {
                    bestRay = hit->t;
                    hitKind = 0;
                    hitId = hit->triangle;
                }
            }
            for (int ri = 0; ri < int(scene.rigids.size()); ++ri) {
                const RigidBody& body = scene.rigids[size_t(ri)];
                double t = kNearClip / cosZ;
                for (int step = 0; step < kSphereTraceSteps; ++step) {
                    if (t >= std::min(bestRay, kFarClip / cosZ)) break;
                    double d = body.sdf(orig + t * dir);
                    if (d < kSphereTraceEps) {
                        if (t < bestRay) {
                            bestRay = t;
                            hitKind = 1;
                            hitId = ri;
                        }
                        break;
                    }
                    t += d;
                }
            }

            if (hitKind < 0) continue;
            double depthZ = bestRay * cosZ;
            if (depthZ <= kNearClip || depthZ >= kFarClip) continue;
            size_t px = obs.at(u, v);
            obs.depth[px] = float(depthZ);
            if (hitKind == 0) {
                obs.maskGarment[px] = 1;
                if (neckTris.count(hitId)) obs.maskNeckline[px] = 1;
            } else if (scene.rigids[size_t(hitId)].name == "hanger") {
                obs.maskHanger[px] = 1;
            }
        }
    }
    return obs;
}

Vec3 backProject(double u, double v, const Camera& camera, double fixedZ) {
    Vec3 dirLocal((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0);
    Vec3 dir = camera.pose.rotation * dirLocal;
    if (std::abs(dir.z()) < 1e-12)
        throw std::domain_error("pixel ray is parallel to the back-projection plane");
    double t = (fixedZ - camera.pose.translation.z()) / dir.z();
    return camera.pose.translation + t * dir;
}

bool project(const Vec3& worldPoint, const Camera& camera, double& u, double& v) {
    Vec3 q = camera.pose.applyInverse(worldPoint);
    if (q.z() <= 1e-12) return false;
    u = camera.fx * q.x() / q.z() + camera.cx;
    v = camera.fy * q.y() / q.z() + camera.cy;
    return true;
}

Camera randomizeCamera(const Camera& camera, Rng& rng, const NoiseRanges& ranges) {
    Camera out = camera;
    out.fx *= 1.0 + ranges.intrinsicsJitter * rng.uniform(-1, 1);
    out.fy *= 1.0 + ranges.intrinsicsJitter * rng.uniform(-1, 1);
    out.cx = std::clamp(camera.cx * (1.0 + ranges.intrinsicsJitter * rng.uniform(-1, 1)), 0.0,
                        double(camera.width) - 1e-6);
    out.cy = std::clamp(camera.cy * (1.0 + ranges.intrinsicsJitter * rng.uniform(-1, 1)), 0.0,
                        double(camera.height) - 1e-6);
    double angle = ranges.rotationJitterDeg * M_PI / 180.0 * rng.uniform01();
    Vec3 axis = rng.unitSphere();
    out.pose.rotation = (Quat(Eigen::AngleAxisd(angle, axis)) * camera.pose.rotation).normalized();
    out.pose.translation =
        camera.pose.translation + ranges.translationJitter * rng.uniform01() * rng.unitSphere();
    return out;
}

namespace {

// erode/dilate with a 3x3 cross structuring element
std::vector<uint8_t> morph(const std::vector<uint8_t>& mask, int w, int h, bool dilate) {
    std::vector<uint8_t> out(mask.size(), 0);
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            bool acc = !dilate;
            const int du[5] = {0, 1, -1, 0, 0};
            const int dv[5] = {0, 0, 0, 1, -1};
            for (int k = 0; k < 5; ++k) {
                int uu = u + du[k], vv = v + dv[k];
                bool val = uu >= 0 && uu < w && vv >= 0 && vv < h &&
                           mask[size_t(vv) * size_t(w) + size_t(uu)] != 0;
                if (dilate)
                    acc = acc || val;
                else
                    acc = acc && val;
            }
            out[size_t(v) * size_t(w) + size_t(u)] = acc ? 1 : 0;
        }
    return out;
}

}  // namespace

Observation randomizeObservation(const Observation& obs, Rng& rng, const NoiseRanges& ranges) {
    Observation out = obs;
    for (auto& d : out.depth) {
        if (d <= 0.0f) continue;
        if (ranges.depthSigma > 0) d += float(ranges.depthSigma * rng.gaussian());
        if (rng.uniform01() < ranges.depthDropout) d = 0.0f;
    }
    auto maybeMorph = [&](std::vector<uint8_t>& mask) {
        if (rng.uniform01() < ranges.morphologyProb) mask = morph(mask, out.width, out.height, false);
        if (rng.uniform01() < ranges.morphologyProb) mask = morph(mask, out.width, out.height, true);
    };
    maybeMorph(out.maskGarment);
    maybeMorph(out.maskNeckline);
    maybeMorph(out.maskHanger);
    // containment is re-enforced after independent morphology
    for (size_t i = 0; i < out.maskNeckline.size(); ++i)
        out.maskNeckline[i] = uint8_t(out.maskNeckline[i] & out.maskGarment[i]);
    return out;
}

namespace {

void putU32(std::vector<uint8_t>& buf, uint32_t v) {
    buf.push_back(uint8_t(v >> 24));
    buf.push_back(uint8_t(v >> 16));
    buf.push_back(uint8_t(v >> 8));
    buf.push_back(uint8_t(v));
}

bool writePng(const std::string& path, const std::vector<uint8_t>& raw, int w, int h, int bitDepth) {
    // raw: filtered scanlines already prefixed with filter byte 0
    uLongf compCap = compressBound(uLong(raw.size()));
    std::vector<uint8_t> comp(compCap);
    if (compress2(comp.data(), &compCap, raw.data(), uLong(raw.size()), 6) != Z_OK) return false;
    comp.resize(compCap);

    std::vector<uint8_t> out;
    const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.insert(out.end(), sig, sig + 8);
    auto chunk = [&](const char* type, const std::vector<uint8_t>& data) {
        putU32(out, uint32_t(data.size()));
        size_t start = out.size();
        out.insert(out.end(), type, type + 4);
        out.insert(out.end(), data.begin(), data.end());
        uint32_t crc = uint32_t(crc32(0, out.data() + start, uInt(out.size() - start)));
        putU32(out, crc);
    };
    std::vector<uint8_t> ihdr;
    putU32(ihdr, uint32_t(w));
    putU32(ihdr, uint32_t(h));
    ihdr.push_back(uint8_t(bitDepth));  // grayscale
    ihdr.push_back(0);                  // color type 0
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    chunk("IHDR", ihdr);
    chunk("IDAT", comp);
    chunk("IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) return false;
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    return bool(f);
}

}  // namespace

bool saveObservationPngs(const Observation& obs, const std::string& prefix) {
    int w = obs.width, h = obs.height;
    std::vector<uint8_t> depthRaw;
    depthRaw.reserve(size_t(h) * (size_t(w) * 2 + 1));
    for (int v = 0; v < h; ++v) {
        depthRaw.push_back(0);  // filter none
        for (int u = 0; u < w; ++u) {
            double mm = double(obs.depth[obs.at(u, v)]) * 1000.0;
            uint16_t q = uint16_t(std::clamp(mm, 0.0, 65535.0));
            depthRaw.push_back(uint8_t(q >> 8));
            depthRaw.push_back(uint8_t(q));
        }
    }
    if (!writePng(prefix + "_depth.png", depthRaw, w, h, 16)) return false;

    auto writeMask = [&](const std::vector<uint8_t>& mask, const std::string& name) {
        std::vector<uint8_t> raw;
        raw.reserve(size_t(h) * (size_t(w) + 1));
        for (int v = 0; v < h; ++v) {
            raw.push_back(0);
            for (int u = 0; u < w; ++u) raw.push_back(mask[obs.at(u, v)] ? 255 : 0);
        }
        return writePng(prefix + name, raw, w, h, 8);
    };
    return writeMask(obs.maskGarment, "_garment.png") &&
           writeMask(obs.maskNeckline, "_neckline.png") &&
           writeMask(obs.maskHanger, "_hanger.png");
}

}  // namespace robohang
