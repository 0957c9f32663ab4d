#pragma once

#include "robohang/cloth.hpp"
#include "robohang/core.hpp"
#include "robohang/mesh.hpp"
#include "robohang/sparse.hpp"

#include <functional>
#include <vector>

namespace robohang {

struct CollisionConfig {
    double d0 = 0.0015;            // m, proximity activation distance
    double penaltyStiffness = 1e5; // N/m^3
    int ccdIterationsMax = 8;
    double frictionEpsilon = 1e-4; // m/s tangential regularization

    void validate() const;
};

enum class PairKind { VertexTriangle, EdgeEdge, VertexRigid };

struct ProximityPair {
    PairKind kind;
    int a;  // cloth vertex id (VT, VR) or index into the edge list (EE)
    int b;  // triangle id (VT), edge list index (EE), rigid body id (VR)
    // witness weights, frozen at detection time: VT = barycentric on the
    // triangle, EE = (s on edge a, t on edge b)
    double w[3] = {0, 0, 0};
    Vec3 normal;  // unit, from the second element toward the first
    double distance;
};

using RigidSdfFn = std::function<double(const Vec3&)>;

// All vertex-triangle / edge-edge cloth pairs closer than d0 (topologically
// adjacent elements excluded) plus cloth vertices inside the d0 shell of any
// rigid SDF.  Uniform spatial hash broadphase, cell size d0.  Output is
// sorted by (kind, a, b) so identical inputs give identical lists.
std::vector<ProximityPair> findProximities(const ClothState& state, const TriMesh& mesh,
                                           const std::vector<Edge>& edges,
                                           const std::vector<RigidSdfFn>& rigidSdfs, double d0);

// Cubic penalty E(d) = k*(d0-d)^3 for d < d0, evaluated with the frozen
// witness weights so the analytic gradient is the exact derivative of the
// summed energy.  Appends into forces/stiffness; per-pair normal force
// magnitudes optionally reported for the friction pass.
void penaltyForces(const std::vector<ProximityPair>& pairs, const ClothState& state,
                   const TriMesh& mesh, const std::vector<Edge>& edges,
                   const std::vector<RigidSdfFn>& rigidSdfs, const CollisionConfig& config,
                   std::vector<Vec3>* forces, SparseSystem* stiffness,
                   std::vector<double>* normalMagnitudes = nullptr);
double penaltyEnergy(const std::vector<ProximityPair>& pairs, const ClothState& state,
                     const TriMesh& mesh, const std::vector<Edge>& edges,
                     const std::vector<RigidSdfFn>& rigidSdfs, const CollisionConfig& config);

// Smoothed Coulomb friction: f_t = -mu*|f_n| * v_t / sqrt(|v_t|^2 + eps^2),
// applied along each pair's witness weights.  relativeVelocities[i] is the
// velocity of the pair's first element relative to its second.
void frictionForces(const std::vector<ProximityPair>& pairs, const std::vector<Vec3>& relativeVelocities,
                    double mu, const std::vector<double>& normalMagnitudes, double frictionEpsilon,
                    const TriMesh& mesh, const std::vector<Edge>& edges, std::vector<Vec3>* forces);

// Velocity-derivative of the smoothed friction force (tangential damping,
// symmetric negative semidefinite).  Feeding it to the integrator's extra
// damping slot makes friction semi-implicit; purely explicit friction
// overshoots on light vertices and leaves them quivering instead of sticking.
void frictionDamping(const std::vector<ProximityPair>& pairs,
                     const std::vector<Vec3>& relativeVelocities, double mu,
                     const std::vector<double>& normalMagnitudes, double frictionEpsilon,
                     const TriMesh& mesh, const std::vector<Edge>& edges, SparseSystem* damping);

struct CcdDiagnostics {
    int impulses = 0;
    int conservativeClamps = 0;
};

// Resolves vertex-triangle and edge-edge collisions along xPrev -> xCandidate.
// Returns an intersection-free state: impulse response at the earliest
// time-of-impact up to ccdIterationsMax rounds, then conservative advancement
// to the last certified-safe fraction of the step.
std::vector<Vec3> ccdResolve(const std::vector<Vec3>& xPrev, const std::vector<Vec3>& xCandidate,
                             const TriMesh& mesh, const std::vector<Edge>& edges,
                             const CollisionConfig& config, CcdDiagnostics* diag = nullptr);

}  // namespace robohang
