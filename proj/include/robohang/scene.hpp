#pragma once

#include "robohang/assets.hpp"
#include "robohang/cloth.hpp"
#include "robohang/collision.hpp"
#include "robohang/core.hpp"
#include "robohang/mesh.hpp"

#include <optional>
#include <string>
#include <vector>

namespace robohang {

enum class SdfKind { HalfSpace, CapsuleChain, Box, Union };

// Signed-distance shape in body-local coordinates.
struct SdfShape {
    SdfKind kind = SdfKind::HalfSpace;
    Vec3 normal = Vec3::UnitZ();  // half-space: sdf = n.p - offset
    double offset = 0.0;
    std::vector<std::vector<Vec3>> polylines;  // capsule chain
    double radius = 0.0;
    Vec3 halfExtents = Vec3::Zero();  // box
    std::vector<SdfShape> children;   // union

    double eval(const Vec3& pLocal) const;
};

// Kinematic rigid body: pose scripted, never force-driven.
struct RigidBody {
    std::string name;
    SdfShape shape;
    Pose pose;
    Vec3 linearVelocity = Vec3::Zero();
    Vec3 angularVelocity = Vec3::Zero();
    double frictionMu = 0.3;

    double sdf(const Vec3& worldP) const { return shape.eval(pose.applyInverse(worldP)); }
    Vec3 velocityAt(const Vec3& worldP) const {
        return linearVelocity + angularVelocity.cross(worldP - pose.translation);
    }
};

RigidBody makeTable(double tableZ, double frictionMu);
RigidBody makeHangerBody(const HangerModel& model, const Pose& pose, double frictionMu);

enum class GripperState { Open, ClosedOnCloth, ClosedOnHanger };

// Free-floating end-effector frame; no arm kinematics.
struct Gripper {
    Pose frame;
    Vec3 linearVelocity = Vec3::Zero();
    Vec3 angularVelocity = Vec3::Zero();
    GripperState state = GripperState::Open;
    double graspRadius = 0.008;
    std::vector<int> heldVertices;
    std::vector<Vec3> heldOffsets;  // gripper-frame offsets of held vertices
    int heldRigid = -1;
    Pose rigidOffset;  // gripper-frame pose of the held rigid body
};

struct SceneDiagnostics {
    long proximityPairs = 0;
    long ccdImpulses = 0;
    long ccdClamps = 0;
    long dtHalvings = 0;
    long degenerateElements = 0;
};

struct Scene {
    TriMesh mesh;  // cloth topology + rest shape
    std::vector<Hinge> hinges;
    std::vector<Edge> edges;
    ClothState cloth;
    ClothMaterial material;
    CollisionConfig collision;
    std::vector<RigidBody> rigids;
    std::vector<Gripper> grippers;
    std::vector<int> necklineTriangles;  // cloth triangles counted as neckline region
    double simTime = 0.0;
    double tableZ = 0.0;
    double cgTol = 1e-4;
    int cgMaxIter = 400;
    SceneDiagnostics diag;
    MembraneCache membraneCache;  // assembly scratch, rebuilt lazily
};

// Builds hinges/edges/cloth state from the mesh and adds the table.
Scene makeScene(const TriMesh& clothMesh, const ClothMaterial& material,
                const CollisionConfig& collision, double tableZ = 0.0);

// One substep: kinematic rigid/gripper advance, force assembly, one implicit
// Newton step, CCD.  dt must be <= 2 ms.  NonConvergence propagates after one
// automatic dt-halving retry (two half substeps).
void sceneStep(Scene& scene, double dt);

// Attach the topmost cloth layer near worldPoint: vertices inside graspRadius
// whose z lies within zBand of the ball's maximum z.  Throws GraspMiss when
// the ball is empty.
void graspCloth(Scene& scene, int gripperId, const Vec3& worldPoint, double graspRadius = 0.008,
                double zBand = 0.001);

// Rigidly couple a hanger body to the gripper: frame centered at the grasp
// keypoint with a +45 degree rotation about (H_l - H_r).
void graspHanger(Scene& scene, int gripperId, int rigidId, const Vec3& graspPoint, const Vec3& hl,
                 const Vec3& hr);

void releaseGripper(Scene& scene, int gripperId);

// Straight-line Cartesian trajectory: lerp position, slerp rotation, sampled
// every `tick` seconds at speedLimit.  Excludes the start pose, ends exactly
// at target; empty when target equals current.
std::vector<Pose> moveEndEffector(const Pose& current, const Pose& target, double speedLimit = 0.2,
                                  double tick = 0.01);

// Drive one control tick: set the gripper to the waypoint (with matching
// velocities) and run ceil(tick/dt) substeps.
void applyGripperWaypoint(Scene& scene, int gripperId, const Pose& waypoint, double tick, double dt);

// Per-frame OBJ export of the cloth plus rigid capsule centerlines.
bool exportFrame(const Scene& scene, const std::string& objPath);

}  // namespace robohang
