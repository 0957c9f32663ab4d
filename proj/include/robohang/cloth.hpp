#pragma once

#include "robohang/core.hpp"
#include "robohang/mesh.hpp"
#include "robohang/sparse.hpp"

#include <cmath>
#include <vector>

namespace robohang {

struct ClothMaterial {
    double youngModulus = 1.0e5;     // Pa
    double poissonRatio = 0.3;       // must stay in [0, 0.49]
    double areaDensity = 0.15;       // kg/m^2
    double bendingStiffness = 5e-6;  // N*m
    double frictionMu = 0.3;
    double thickness = 0.001;        // m
    double rayleighDamping = 0.5;    // 1/s, mass-proportional

    void validate() const;
};

struct ClothState {
    std::vector<Vec3> x;
    std::vector<Vec3> v;
    std::vector<double> mass;  // kg, lumped
};

// Lump areaDensity * restArea / 3 onto each triangle corner.  Rest areas come
// from restUV when present (the true sewing-pattern areas), else from the 3D
// rest positions.
ClothState makeClothState(const TriMesh& mesh, const ClothMaterial& material);

// Kinematic attachment: the vertex takes this motion exactly during the step.
struct Attachment {
    int vertex;
    Vec3 targetPosition;
    Vec3 targetVelocity;
};

struct ForceDiagnostics {
    int degenerateElements = 0;
};

// Per-scene scratch for membraneForces.  The rest-shape element data is
// computed once, and the PSD-projected element Hessians are reused while a
// triangle's deformed-edge matrix stays within `tol` of the cached one (the
// projection dominates assembly cost and a slightly stale PSD Hessian only
// perturbs the Newton preconditioning, never the forces).
struct MembraneCache {
    double tol = 1e-5;  // m, per-entry deformed-edge drift before refresh
    bool elementsReady = false;
    std::vector<Mat2> invDm;
    std::vector<double> coef;
    std::vector<char> elementValid;
    std::vector<Eigen::Matrix<double, 3, 2>> ds;
    std::vector<Eigen::Matrix<double, 9, 9>> hessian;
    std::vector<char> hessianValid;
};

// map the signed angle difference into (-pi, pi]; seam hinges rest near +-pi
// so the raw difference would otherwise jump by 2*pi
inline double wrapToPi(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a < 0) a += 2.0 * M_PI;
    return a - M_PI;
}

// St. Venant-Kirchhoff constant-strain-triangle membrane.  Appends -grad E
// into `forces` and df/dx blocks into `stiffness` (either may be null).
// projectPsd clamps each element Hessian's eigenvalues at zero before the
// sign flip; tests disable it to compare the exact Hessian against finite
// differences.  A non-null cache skips redundant rest-shape setup and PSD
// projections across calls on the same mesh.
void membraneForces(const TriMesh& mesh, const ClothState& state, const ClothMaterial& material,
                    std::vector<Vec3>* forces, SparseSystem* stiffness,
                    ForceDiagnostics* diag = nullptr, bool projectPsd = true,
                    MembraneCache* cache = nullptr);
double membraneEnergy(const TriMesh& mesh, const ClothState& state, const ClothMaterial& material);

// Discrete-hinge bending E = sum k * wrap(theta - theta_rest)^2 * (|e|/h_e)
// over precomputed hinges; Gauss-Newton (gradient outer product) Hessian.
void bendingForces(const std::vector<Hinge>& hinges, const ClothState& state,
                   const ClothMaterial& material, std::vector<Vec3>* forces,
                   SparseSystem* stiffness, ForceDiagnostics* diag = nullptr);
double bendingEnergy(const std::vector<Hinge>& hinges, const ClothState& state,
                     const ClothMaterial& material);

// One implicit-Euler step with a single Newton iteration:
//   (M - dt*D - dt^2*K) dv = dt * (f + dt*K*v),  D = -rayleighDamping*M + extraDamping
// extraDamping carries any additional velocity derivatives (e.g. friction);
// it must be symmetric negative semidefinite.  Attached vertices move
// kinematically and are filtered out of the solve.  Throws NonConvergence if
// the CG solve fails; caller may halve dt.
ClothState implicitStep(const ClothState& state, const std::vector<Vec3>& forces,
                        const SparseSystem& stiffness, double rayleighDamping, double dt,
                        const std::vector<Attachment>& attachments, double cgTol = 1e-4,
                        int cgMaxIter = 400, const SparseSystem* extraDamping = nullptr);

}  // namespace robohang
