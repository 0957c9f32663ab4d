#include "robohang/scene.hpp"

#include "robohang/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace robohang {

double SdfShape::eval(const Vec3& p) const {
    switch (kind) {
        case SdfKind::HalfSpace:
            return normal.dot(p) - offset;
        case SdfKind::CapsuleChain: {
            double best = std::numeric_limits<double>::max();
            for (const auto& line : polylines)
                for (size_t i = 0; i + 1 < line.size(); ++i) {
                    double t;
                    best = std::min(best, pointSegmentDistance(p, line[i], line[i + 1], t));
                }
            return best - radius;
        }
        case SdfKind::Box: {
            Vec3 q = p.cwiseAbs() - halfExtents;
            double outside = q.cwiseMax(0.0).norm();
            double inside = std::min(q.maxCoeff(), 0.0);
            return outside + inside;
        }
        case SdfKind::Union: {
            double best = std::numeric_limits<double>::max();
            for (const auto& c : children) best = std::min(best, c.eval(p));
            return best;
        }
    }
    return std::numeric_limits<double>::max();
}

RigidBody makeTable(double tableZ, double frictionMu) {
    RigidBody b;
    b.name = "table";
    b.shape.kind = SdfKind::HalfSpace;
    b.shape.normal = Vec3::UnitZ();
    b.shape.offset = tableZ;
    b.frictionMu = frictionMu;
    return b;
}

RigidBody makeHangerBody(const HangerModel& model, const Pose& pose, double frictionMu) {
    RigidBody b;
    b.name = "hanger";
    b.shape.kind = SdfKind::CapsuleChain;
    b.shape.polylines = model.polylines;
    b.shape.radius = model.capsuleRadius;
    b.pose = pose;
    b.frictionMu = frictionMu;
    return b;
}

Scene makeScene(const TriMesh& clothMesh, const ClothMaterial& material,
                const CollisionConfig& collision, double tableZ) {
    material.validate();
    collision.validate();
    Scene s;
    s.mesh = clothMesh;
    s.hinges = clothMesh.interiorHinges();
    s.edges = clothMesh.uniqueEdges();
    if (clothMesh.vertexCount() > 0) s.cloth = makeClothState(clothMesh, material);
    s.material = material;
    s.collision = collision;
    s.tableZ = tableZ;
    s.rigids.push_back(makeTable(tableZ, 0.5));
    return s;
}

namespace {

void advanceKinematics(Scene& scene, double dt) {
    auto integrate = [&](Pose& pose, const Vec3& lin, const Vec3& ang) {
        pose.translation += dt * lin;
        double w = ang.norm();
        if (w > 1e-12) {
            pose.rotation = (Quat(Eigen::AngleAxisd(w * dt, ang / w)) * pose.rotation).normalized();
        }
    };
    for (auto& g : scene.grippers) integrate(g.frame, g.linearVelocity, g.angularVelocity);
    for (auto& r : scene.rigids) integrate(r.pose, r.linearVelocity, r.angularVelocity);
    // held rigid bodies track their gripper exactly
    for (auto& g : scene.grippers)
        if (g.state == GripperState::ClosedOnHanger && g.heldRigid >= 0) {
            RigidBody& r = scene.rigids[size_t(g.heldRigid)];
            r.pose = g.frame.compose(g.rigidOffset);
            r.linearVelocity = g.linearVelocity +
                               g.angularVelocity.cross(r.pose.translation - g.frame.translation);
            r.angularVelocity = g.angularVelocity;
        }
}

void substep(Scene& scene, double dt) {
    advanceKinematics(scene, dt);
    const int n = int(scene.cloth.x.size());
    if (n == 0) {
        scene.simTime += dt;
        return;
    }

    std::vector<Vec3> f(size_t(n), Vec3::Zero());
    SparseSystem k(n);
    ForceDiagnostics fd;
    membraneForces(scene.mesh, scene.cloth, scene.material, &f, &k, &fd, true,
                   &scene.membraneCache);
    bendingForces(scene.hinges, scene.cloth, scene.material, &f, &k, &fd);
    scene.diag.degenerateElements += fd.degenerateElements;
    for (int i = 0; i < n; ++i) f[size_t(i)] += scene.cloth.mass[size_t(i)] * Vec3(0, 0, -9.81);

    std::vector<RigidSdfFn> sdfs;
    sdfs.reserve(scene.rigids.size());
    for (const auto& r : scene.rigids)
        sdfs.push_back([&r](const Vec3& p) { return r.sdf(p); });
    auto pairs = findProximities(scene.cloth, scene.mesh, scene.edges, sdfs, scene.collision.d0);
    scene.diag.proximityPairs += long(pairs.size());
    std::vector<double> normalMags;
    penaltyForces(pairs, scene.cloth, scene.mesh, scene.edges, sdfs, scene.collision, &f, &k,
                  &normalMags);

    // friction on cloth-rigid contacts only; self-friction off.  The pair
    // coefficient (geometric mean of cloth and body mu) is folded into the
    // per-pair normal magnitude so frictionForces runs with mu = 1.
    std::vector<Vec3> relVel(pairs.size(), Vec3::Zero());
    std::vector<double> fricMags(pairs.size(), 0.0);
    for (size_t pi = 0; pi < pairs.size(); ++pi) {
        if (pairs[pi].kind != PairKind::VertexRigid) continue;
        const auto& p = pairs[pi];
        const RigidBody& r = scene.rigids[size_t(p.b)];
        relVel[pi] = scene.cloth.v[size_t(p.a)] - r.velocityAt(scene.cloth.x[size_t(p.a)]);
        fricMags[pi] = normalMags[pi] * std::sqrt(scene.material.frictionMu * r.frictionMu);
    }
    frictionForces(pairs, relVel, 1.0, fricMags, scene.collision.frictionEpsilon, scene.mesh,
                   scene.edges, &f);
    SparseSystem fricD(n);
    frictionDamping(pairs, relVel, 1.0, fricMags, scene.collision.frictionEpsilon, scene.mesh,
                    scene.edges, &fricD);

    std::vector<Attachment> atts;
    for (auto& g : scene.grippers)
        if (g.state == GripperState::ClosedOnCloth)
            for (size_t hi = 0; hi < g.heldVertices.size(); ++hi) {
                Vec3 target = g.frame.apply(g.heldOffsets[hi]);
                Vec3 tv = g.linearVelocity + g.angularVelocity.cross(target - g.frame.translation);
                atts.push_back({g.heldVertices[hi], target, tv});
            }

    std::vector<Vec3> xPrev = scene.cloth.x;
    ClothState next = implicitStep(scene.cloth, f, k, scene.material.rayleighDamping, dt, atts,
                                   scene.cgTol, scene.cgMaxIter, &fricD);

    CcdDiagnostics cd;
    std::vector<Vec3> xSafe = ccdResolve(xPrev, next.x, scene.mesh, scene.edges, scene.collision, &cd);
    scene.diag.ccdImpulses += cd.impulses;
    scene.diag.ccdClamps += cd.conservativeClamps;

    // resolve any leftover rigid penetration by SDF projection (rigid motion
    // per substep is far below the capsule radius, so no rigid CCD needed)
    for (int i = 0; i < n; ++i) {
        for (const auto& r : scene.rigids) {
            double d = r.sdf(xSafe[size_t(i)]);
            if (d < 0) {
                const double h = 1e-6;
                Vec3 g;
                for (int a = 0; a < 3; ++a) {
                    Vec3 dp = Vec3::Zero();
                    dp[a] = h;
                    g[a] = (r.sdf(xSafe[size_t(i)] + dp) - r.sdf(xSafe[size_t(i)] - dp)) / (2 * h);
                }
                if (g.squaredNorm() > 1e-12) xSafe[size_t(i)] += (-d + 1e-6) * g.normalized();
            }
        }
    }

    // attachments stay exact even after CCD/projection corrections
    for (const auto& a : atts) xSafe[size_t(a.vertex)] = a.targetPosition;

    for (int i = 0; i < n; ++i) {
        next.v[size_t(i)] = (xSafe[size_t(i)] - xPrev[size_t(i)]) / dt;
        next.x[size_t(i)] = xSafe[size_t(i)];
    }
    for (const auto& a : atts) next.v[size_t(a.vertex)] = a.targetVelocity;
    scene.cloth = std::move(next);
    scene.simTime += dt;
}

}  // namespace

void sceneStep(Scene& scene, double dt) {
    if (!(dt > 0) || dt > 0.002 + 1e-12)
        throw std::invalid_argument("sceneStep requires 0 < dt <= 2 ms");
    // snapshot only what a substep mutates; topology and assembly caches
    // survive a retry unchanged (stale cache entries refresh on their own)
    ClothState cloth = scene.cloth;
    auto rigids = scene.rigids;
    auto grippers = scene.grippers;
    double simTime = scene.simTime;
    SceneDiagnostics diag = scene.diag;
    try {
        substep(scene, dt);
    } catch (const NonConvergence&) {
        scene.cloth = std::move(cloth);
        scene.rigids = std::move(rigids);
        scene.grippers = std::move(grippers);
        scene.simTime = simTime;
        scene.diag = diag;
        scene.diag.dtHalvings++;
        substep(scene, dt / 2);  // second failure propagates
        substep(scene, dt / 2);
    }
}

void graspCloth(Scene& scene, int gripperId, const Vec3& worldPoint, double graspRadius,
                double zBand) {
    Gripper& g = scene.grippers[size_t(gripperId)];
    if (g.state != GripperState::Open) throw std::logic_error("gripper is not open");
    double zMax = -std::numeric_limits<double>::max();
    std::vector<int> inBall;
    for (int i = 0; i < int(scene.cloth.x.size()); ++i) {
        if ((scene.cloth.x[size_t(i)] - worldPoint).norm() <= graspRadius) {
            inBall.push_back(i);
            zMax = std::max(zMax, scene.cloth.x[size_t(i)].z());
        }
    }
    if (inBall.empty()) throw GraspMiss();
    g.state = GripperState::ClosedOnCloth;
    g.graspRadius = graspRadius;
    g.heldVertices.clear();
    g.heldOffsets.clear();
    for (int i : inBall)
        if (scene.cloth.x[size_t(i)].z() >= zMax - zBand) {
            g.heldVertices.push_back(i);
            g.heldOffsets.push_back(g.frame.applyInverse(scene.cloth.x[size_t(i)]));
        }
}

void graspHanger(Scene& scene, int gripperId, int rigidId, const Vec3& graspPoint, const Vec3& hl,
                 const Vec3& hr) {
    Gripper& g = scene.grippers[size_t(gripperId)];
    Vec3 axis = (hl - hr).normalized();
    g.frame.rotation = Quat(Eigen::AngleAxisd(M_PI / 4.0, axis)).normalized();
    g.frame.translation = graspPoint;
    g.state = GripperState::ClosedOnHanger;
    g.heldRigid = rigidId;
    g.rigidOffset = g.frame.inverse().compose(scene.rigids[size_t(rigidId)].pose);
}

void releaseGripper(Scene& scene, int gripperId) {
    Gripper& g = scene.grippers[size_t(gripperId)];
    if (g.state == GripperState::ClosedOnHanger && g.heldRigid >= 0) {
        RigidBody& r = scene.rigids[size_t(g.heldRigid)];
        r.linearVelocity = Vec3::Zero();
        r.angularVelocity = Vec3::Zero();
    }
    g.state = GripperState::Open;
    g.heldVertices.clear();
    g.heldOffsets.clear();
    g.heldRigid = -1;
}

std::vector<Pose> moveEndEffector(const Pose& current, const Pose& target, double speedLimit,
                                  double tick) {
    if (!(speedLimit > 0)) throw std::invalid_argument("speedLimit must be positive");
    double dist = (target.translation - current.translation).norm();
    double angle = current.rotation.angularDistance(target.rotation);
    if (dist < 1e-12 && angle < 1e-12) return {};
    const double angularRate = 1.5;  // rad/s, paired with the linear limit
    double duration = std::max(dist / speedLimit, angle / angularRate);
    int steps = std::max(1, int(std::ceil(duration / tick - 1e-9)));
    std::vector<Pose> out;
    out.reserve(size_t(steps));
    for (int i = 1; i <= steps; ++i) {
        double a = double(i) / steps;
        Pose p;
        p.translation = (1 - a) * current.translation + a * target.translation;
        p.rotation = current.rotation.slerp(a, target.rotation).normalized();
        out.push_back(p);
    }
    return out;
}

void applyGripperWaypoint(Scene& scene, int gripperId, const Pose& waypoint, double tick, double dt) {
    Gripper& g = scene.grippers[size_t(gripperId)];
    g.linearVelocity = (waypoint.translation - g.frame.translation) / tick;
    Quat dq = (waypoint.rotation * g.frame.rotation.conjugate()).normalized();
    Eigen::AngleAxisd aa(dq);
    g.angularVelocity = aa.angle() / tick * aa.axis();
    if (aa.angle() < 1e-12) g.angularVelocity = Vec3::Zero();
    int steps = std::max(1, int(std::llround(tick / dt)));
    for (int i = 0; i < steps; ++i) sceneStep(scene, tick / steps);
    // land exactly on the waypoint to avoid drift accumulating over a script
    g.frame = waypoint;
    g.linearVelocity = Vec3::Zero();
    g.angularVelocity = Vec3::Zero();
}

bool exportFrame(const Scene& scene, const std::string& objPath) {
    std::vector<std::vector<Vec3>> polylines;
    for (const auto& r : scene.rigids)
        if (r.shape.kind == SdfKind::CapsuleChain)
            for (const auto& line : r.shape.polylines) {
                std::vector<Vec3> world;
                world.reserve(line.size());
                for (const auto& p : line) world.push_back(r.pose.apply(p));
                polylines.push_back(std::move(world));
            }
    return writeObj(objPath, scene.cloth.x, scene.mesh.triangles, polylines);
}

}  // namespace robohang
