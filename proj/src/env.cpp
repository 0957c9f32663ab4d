#include "robohang/env.hpp"

#include "robohang/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace robohang {

void MaterialRanges::validate() const {
    if (!(youngLo > 0 && youngLo <= youngHi)) throw std::invalid_argument("bad Young's modulus range");
    if (!(densityLo > 0 && densityLo <= densityHi)) throw std::invalid_argument("bad density range");
    if (!(muLo >= 0 && muLo <= muHi && muHi <= 1.5)) throw std::invalid_argument("bad friction range");
}

EpisodeConfig::EpisodeConfig() {
    camera = makeLookAtCamera(Vec3(0, 0, 1.5), Vec3::Zero(), 128, 128, 160.0);
}

void EpisodeConfig::validate() const {
    garment.validate();
    hanger.validate();
    materials.validate();
    baseMaterial.validate();
    collision.validate();
    camera.validate();
    if (!(dt > 0 && dt <= 0.002 + 1e-12)) throw std::invalid_argument("dt must be in (0, 2 ms]");
    if (!(controlTick >= dt)) throw std::invalid_argument("controlTick must be >= dt");
    if (!(settleTime >= 0)) throw std::invalid_argument("settleTime must be non-negative");
    if (poseNoiseTranslation < 0 || poseNoiseYawDeg < 0)
        throw std::invalid_argument("pose noise ranges must be non-negative");
    if (!(gripperSpeed > 0)) throw std::invalid_argument("gripperSpeed must be positive");
}

namespace {

Pose heldRigidTargetToGripper(const Gripper& g, const Pose& rigidTarget) {
    return rigidTarget.compose(g.rigidOffset.inverse());
}

void recordTick(Episode& ep) {
    ep.controlTicks++;
    // optional tracing of the hanger tip relative to the cloth layers
    static const char* trace = std::getenv("ROBOHANG_TRACE_TIP");
    if (trace && ep.hangerRigid >= 0 && ep.controlTicks % 10 == 0) {
        TriangleBvh bvh(ep.scene.cloth.x, ep.scene.mesh.triangles);
        auto layers = [&](const Vec3& p, const Vec3& d) {
            int n = 0;
            Vec3 q = p;
            while (n < 9) {
                auto h = bvh.raycast(q, d, 1e-6);
                if (!h) break;
                ++n;
                q += (h->t + 1e-6) * d;
            }
            return n;
        };
        Vec3 hl = ep.scene.rigids[size_t(ep.hangerRigid)].pose.apply(ep.hanger.keypointLeft);
        Vec3 hr = ep.scene.rigids[size_t(ep.hangerRigid)].pose.apply(ep.hanger.keypointRight);
        std::fprintf(stderr,
                     "tick %ld L(%.3f,%.3f,%.3f) a=%d b=%d | R(%.3f,%.3f,%.3f) a=%d b=%d\n",
                     ep.controlTicks, hl.x(), hl.y(), hl.z(), layers(hl, Vec3::UnitZ()),
                     layers(hl, -Vec3::UnitZ()), hr.x(), hr.y(), hr.z(),
                     layers(hr, Vec3::UnitZ()), layers(hr, -Vec3::UnitZ()));
    }
    if (ep.config.logTickPoses)
        ep.tickPoses.emplace_back(ep.scene.grippers[0].frame, ep.scene.grippers[1].frame);
    if (ep.config.recordFramesDir.empty()) return;
    std::ostringstream name;
    name << ep.config.recordFramesDir << "/frame_";
    name.width(5);
    name.fill('0');
    name << ep.framesWritten << ".obj";
    exportFrame(ep.scene, name.str());
    ep.framesWritten++;
}

void driveGripper(Episode& ep, int gripperId, const Pose& target, double speed) {
    auto waypoints = moveEndEffector(ep.scene.grippers[size_t(gripperId)].frame, target, speed,
                                     ep.config.controlTick);
    for (const Pose& wp : waypoints) {
        applyGripperWaypoint(ep.scene, gripperId, wp, ep.config.controlTick, ep.config.dt);
        recordTick(ep);
    }
}

void driveHeldRigid(Episode& ep, int gripperId, const Pose& rigidTarget, double speed) {
    driveGripper(ep, gripperId,
                 heldRigidTargetToGripper(ep.scene.grippers[size_t(gripperId)], rigidTarget), speed);
}

void settleFor(Episode& ep, double seconds) {
    int ticks = std::max(1, int(std::ceil(seconds / ep.config.controlTick - 1e-9)));
    int sub = std::max(1, int(std::llround(ep.config.controlTick / ep.config.dt)));
    for (int t = 0; t < ticks; ++t) {
        for (int i = 0; i < sub; ++i) sceneStep(ep.scene, ep.config.controlTick / sub);
        recordTick(ep);
    }
}

double maxClothSpeed(const Scene& scene) {
    double m = 0.0;
    for (const Vec3& v : scene.cloth.v) m = std::max(m, v.norm());
    return m;
}

// Rotation taking direction `a` to the x-like slot with `up` resolved
// perpendicular to it; used as a pair to map one frame onto another.
Mat3 triad(const Vec3& a, const Vec3& upHint) {
    Mat3 m;
    m.col(0) = a.normalized();
    Vec3 z = upHint - upHint.dot(m.col(0)) * m.col(0);
    if (z.norm() < 1e-9) z = std::abs(a.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitY();
    m.col(2) = z.normalized();
    m.col(1) = m.col(2).cross(m.col(0));
    return m;
}

constexpr uint64_t kSuccessRaySeed = 0x5ca1ab1e;
constexpr int kSuccessRays = 512;

}  // namespace

Vec3 hangerLeft(const Episode& ep) {
    return ep.scene.rigids[size_t(ep.hangerRigid)].pose.apply(ep.hanger.keypointLeft);
}
Vec3 hangerRight(const Episode& ep) {
    return ep.scene.rigids[size_t(ep.hangerRigid)].pose.apply(ep.hanger.keypointRight);
}
Vec3 hangerGrasp(const Episode& ep) {
    return ep.scene.rigids[size_t(ep.hangerRigid)].pose.apply(ep.hanger.keypointGrasp);
}

Episode reset(const EpisodeConfig& config) {
    config.validate();
    Episode ep;
    ep.config = config;
    ep.garment = generateGarment(config.garment);
    ep.hanger = generateHanger(config.hanger);
    ep.camera = config.camera;
    if (!config.recordFramesDir.empty())
        std::filesystem::create_directories(config.recordFramesDir);

    Rng materialRng = Rng::stream(config.seed, 1);
    ClothMaterial mat = config.baseMaterial;
    mat.youngModulus *= materialRng.uniform(config.materials.youngLo, config.materials.youngHi);
    mat.areaDensity *= materialRng.uniform(config.materials.densityLo, config.materials.densityHi);
    mat.frictionMu = materialRng.uniform(config.materials.muLo, config.materials.muHi);

    // flat placement: recenter the panels on the origin, then a random planar pose
    Rng poseRng = Rng::stream(config.seed, 2);
    double r = config.poseNoiseTranslation * std::sqrt(poseRng.uniform01());
    double phi = poseRng.uniform(0.0, 2.0 * M_PI);
    double yaw = config.poseNoiseYawDeg * M_PI / 180.0 * poseRng.uniform(-1.0, 1.0);
    Vec2 offset(r * std::cos(phi), r * std::sin(phi));
    TriMesh mesh = ep.garment.mesh;
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& v : mesh.vertices) centroid += v;
    if (!mesh.vertices.empty()) centroid /= double(mesh.vertices.size());
    double c = std::cos(yaw), s = std::sin(yaw);
    for (Vec3& v : mesh.vertices) {
        double x = v.x() - centroid.x(), y = v.y() - centroid.y();
        v.x() = c * x - s * y + offset.x();
        v.y() = s * x + c * y + offset.y();
    }

    ep.scene = makeScene(mesh, mat, config.collision, 0.0);
    ep.scene.necklineTriangles = ep.garment.necklineRegionTriangles();
    ep.scene.grippers.resize(2);

    // hanger flat on the table beside the garment, hook pointing away (-y)
    RigidBody hangerBody;
    {
        Pose pose;
        pose.rotation = Quat(Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitX())).normalized();
        pose.translation = Vec3(0, -0.45, ep.hanger.capsuleRadius);
        hangerBody = makeHangerBody(ep.hanger, pose, 0.3);
        hangerBody.name = "hanger";
    }
    ep.scene.rigids.push_back(hangerBody);
    ep.hangerRigid = int(ep.scene.rigids.size()) - 1;

    settleFor(ep, config.settleTime);
    double extra = 0.0;
    while (maxClothSpeed(ep.scene) > 1e-3 && extra < 1.5) {
        settleFor(ep, 0.1);
        extra += 0.1;
    }
    double residual = maxClothSpeed(ep.scene);
    if (residual > 1e-3)
        throw ResetFailed("cloth failed to come to rest, max speed " + std::to_string(residual));

    ep.o1 = render(ep.scene, ep.camera);
    return ep;
}

namespace {

void requireInBounds(const PrimitiveParams& p, const Camera& cam) {
    auto in = [&](int u, int v) { return u >= 0 && u < cam.width && v >= 0 && v < cam.height; };
    if (!in(p.au, p.av) || !in(p.bu, p.bv)) throw ParamRejected("pixel out of image bounds");
}

}  // namespace

int execPressAndLift(Episode& ep, const PrimitiveParams& params) {
    requireInBounds(params, ep.camera);
    if (!ep.o1.maskNeckline[ep.o1.at(params.au, params.av)])
        throw ParamRejected("p_press is not on the neckline mask");
    if (!ep.o1.maskGarment[ep.o1.at(params.bu, params.bv)])
        throw ParamRejected("p_lift is not on the garment mask");
    ep.phase1 = params;

    const PrimitiveGeometry& geo = ep.config.geometry;
    Vec3 pPress = backProject(params.au, params.av, ep.camera, ep.scene.tableZ);
    Vec3 pLift = backProject(params.bu, params.bv, ep.camera, ep.scene.tableZ);
    Vec3 dir = pLift - pPress;
    dir.z() = 0.0;
    dir = dir.norm() > 1e-9 ? Vec3(dir.normalized()) : Vec3::UnitY();

    Scene& scene = ep.scene;
    if (scene.grippers[size_t(ep.gripperA)].state != GripperState::ClosedOnHanger)
        graspHanger(scene, ep.gripperA, ep.hangerRigid, hangerGrasp(ep), hangerLeft(ep),
                    hangerRight(ep));

    // clear the table before reorienting
    Pose rigidPose = scene.rigids[size_t(ep.hangerRigid)].pose;
    driveHeldRigid(ep, ep.gripperA,
                   Pose{rigidPose.rotation, rigidPose.translation + Vec3(0, 0, 0.12)},
                   ep.config.gripperSpeed);

    // insertion attitude: hanger axis along press->lift, H_r raised by tiltDeg
    double beta = geo.tiltDeg * M_PI / 180.0;
    Vec3 axisWorld = std::cos(beta) * dir - std::sin(beta) * Vec3::UnitZ();
    Vec3 axisBody = (ep.hanger.keypointLeft - ep.hanger.keypointRight).normalized();
    Mat3 rot = triad(axisWorld, Vec3::UnitZ()) * triad(axisBody, Vec3::UnitZ()).transpose();
    Pose hover;
    hover.rotation = Quat(rot).normalized();
    hover.translation = pPress + Vec3(0, 0, geo.hoverHeight) - rot * ep.hanger.keypointLeft;
    driveHeldRigid(ep, ep.gripperA, hover, ep.config.gripperSpeed);

    Pose press = hover;
    press.translation.z() += geo.pressHeight - geo.hoverHeight;
    driveHeldRigid(ep, ep.gripperA, press, 0.05);

    // the grasp ball must reach a vertex even on coarse meshes
    double graspRadius = std::max(0.008, 0.8 * ep.config.garment.meshResolution);
    Gripper& lifter = scene.grippers[size_t(ep.gripperB)];
    lifter.frame.rotation = Quat::Identity();
    lifter.frame.translation = pLift + Vec3(0, 0, 0.002);
    try {
        graspCloth(scene, ep.gripperB, lifter.frame.translation, graspRadius);
    } catch (const GraspMiss&) {
        ep.graspMissPhase1 = true;
    }
    if (!ep.graspMissPhase1) {
        Pose up = lifter.frame;
        up.translation.z() += geo.liftHeight;
        driveGripper(ep, ep.gripperB, up, 0.1);
    }

    Pose inserted = scene.rigids[size_t(ep.hangerRigid)].pose;
    inserted.translation += geo.insertionDistance * dir;
    driveHeldRigid(ep, ep.gripperA, inserted, 0.08);

    if (scene.grippers[size_t(ep.gripperB)].state == GripperState::ClosedOnCloth)
        releaseGripper(scene, ep.gripperB);
    settleFor(ep, 0.3);

    ep.s1 = successLeft(ep, &ep.coverageLeft);
    ep.o2 = render(scene, ep.camera);
    return ep.s1;
}

int execDragAndRotate(Episode& ep, const PrimitiveParams& params) {
    if (ep.s1 < 0) throw std::logic_error("phase 1 has not executed");
    requireInBounds(params, ep.camera);
    if (!ep.o2.maskGarment[ep.o2.at(params.au, params.av)])
        throw ParamRejected("p_drag is not on the garment mask");
    ep.phase2 = params;

    const PrimitiveGeometry& geo = ep.config.geometry;
    Scene& scene = ep.scene;

    // swap the hanger to the other gripper at its current pose
    releaseGripper(scene, ep.gripperA);
    graspHanger(scene, ep.gripperB, ep.hangerRigid, hangerGrasp(ep), hangerLeft(ep),
                hangerRight(ep));

    Vec3 pDrag = backProject(params.au, params.av, ep.camera, ep.scene.tableZ);
    double th = geo.dragAngleDeg * M_PI / 180.0;
    Vec3 dragDir(std::cos(th), -std::sin(th), 0.0);

    double graspRadius = std::max(0.008, 0.8 * ep.config.garment.meshResolution);
    Gripper& dragger = scene.grippers[size_t(ep.gripperA)];
    dragger.frame.rotation = Quat::Identity();
    dragger.frame.translation = pDrag + Vec3(0, 0, 0.002);
    try {
        graspCloth(scene, ep.gripperA, dragger.frame.translation, graspRadius);
    } catch (const GraspMiss&) {
        ep.graspMissPhase2 = true;
    }
    if (!ep.graspMissPhase2) {
        Pose up = dragger.frame;
        up.translation.z() = ep.scene.tableZ + geo.dragHeight;
        driveGripper(ep, ep.gripperA, up, 0.05);
        Pose out = up;
        out.translation += geo.dragDistance * dragDir;
        driveGripper(ep, ep.gripperA, out, 0.1);
    }

    // rotate the hanger about H_l so H_r sweeps onto the back-projected
    // p_rotate target; the motion both yaws and levels the tilted hanger
    Vec3 hl = hangerLeft(ep), hr = hangerRight(ep);
    Vec3 target = backProject(params.bu, params.bv, ep.camera, ep.scene.tableZ);
    target.z() = hl.z();  // keep the inserted end's height
    Vec3 cur = hr - hl, want = target - hl;
    Vec3 axis = Vec3::UnitZ();
    double angle = 0.0;
    if (cur.norm() > 1e-9 && want.norm() > 1e-9) {
        Vec3 c = cur.normalized().cross(want.normalized());
        double s = c.norm();
        angle = std::atan2(s, cur.normalized().dot(want.normalized()));
        if (s > 1e-9) axis = c / s;
    }
    int ticks = std::max(1, int(std::llround(geo.rotateDuration / ep.config.controlTick)));
    Pose start = scene.grippers[size_t(ep.gripperB)].frame;
    for (int k = 1; k <= ticks; ++k) {
        Eigen::AngleAxisd rot(angle * double(k) / ticks, axis);
        Pose wp;
        wp.rotation = (Quat(rot) * start.rotation).normalized();
        wp.translation = hl + rot * (start.translation - hl);
        applyGripperWaypoint(scene, ep.gripperB, wp, ep.config.controlTick, ep.config.dt);
        recordTick(ep);
    }

    if (dragger.state == GripperState::ClosedOnCloth) {
        Pose back = dragger.frame;
        back.translation -= geo.pullBackDistance * dragDir;
        driveGripper(ep, ep.gripperA, back, 0.05);
        releaseGripper(scene, ep.gripperA);
    }
    settleFor(ep, 0.3);

    ep.s2 = successRight(ep, &ep.coverageRight);
    return ep.s2;
}

double rayCoverage(const Vec3& point, const std::vector<Vec3>& vertices,
                   const std::vector<Triangle>& triangles, int nRays, Rng& rng) {
    if (nRays < 1) throw std::invalid_argument("nRays must be >= 1");
    if (triangles.empty()) return 0.0;
    TriangleBvh bvh(vertices, triangles);
    int hits = 0;
    for (int i = 0; i < nRays; ++i)
        if (bvh.anyHit(point, rng.unitSphere(), 1e-9)) hits++;
    return double(hits) / double(nRays);
}

double windingNumber(const Vec3& point, const std::vector<Vec3>& vertices,
                     const std::vector<Triangle>& triangles) {
    double total = 0.0;
    for (const Triangle& t : triangles) {
        const Vec3 &a = vertices[size_t(t[0])], &b = vertices[size_t(t[1])],
                   &c = vertices[size_t(t[2])];
        Vec3 bary;
        if ((closestPointTriangle(point, a, b, c, bary) - point).norm() < 1e-12)
            throw std::domain_error("winding number undefined on the surface");
        total += signedSolidAngle(point, a, b, c);
    }
    return total / (4.0 * M_PI);
}

int successLeft(const Episode& ep, double* coverage) {
    Rng rng(kSuccessRaySeed);
    double f = rayCoverage(hangerLeft(ep), ep.scene.cloth.x, ep.scene.mesh.triangles, kSuccessRays,
                           rng);
    if (coverage) *coverage = f;
    return f >= 0.95 - 1e-12 ? 1 : 0;
}

int successRight(const Episode& ep, double* coverage) {
    Rng rng(kSuccessRaySeed + 1);
    double f = rayCoverage(hangerRight(ep), ep.scene.cloth.x, ep.scene.mesh.triangles, kSuccessRays,
                           rng);
    if (coverage) *coverage = f;
    return f >= 0.90 - 1e-12 ? 1 : 0;
}

}  // namespace robohang
