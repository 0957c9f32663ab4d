#include "robohang/cloth.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace robohang {

void ClothMaterial::validate() const {
    if (!(youngModulus >= 0) || !(areaDensity > 0) || !(bendingStiffness >= 0) ||
        !(frictionMu >= 0) || !(thickness > 0) || !(rayleighDamping >= 0))
        throw std::invalid_argument("cloth material parameters must be non-negative");
    if (!(poissonRatio >= 0.0 && poissonRatio <= 0.49))
        throw std::invalid_argument("poissonRatio must lie in [0, 0.49]");
}

ClothState makeClothState(const TriMesh& mesh, const ClothMaterial& material) {
    material.validate();
    ClothState st;
    st.x = mesh.vertices;
    st.v.assign(mesh.vertexCount(), Vec3::Zero());
    st.mass.assign(mesh.vertexCount(), 0.0);
    for (const auto& t : mesh.triangles) {
        double area;
        if (!mesh.restUV.empty()) {
            Vec2 a = mesh.restUV[size_t(t[1])] - mesh.restUV[size_t(t[0])];
            Vec2 b = mesh.restUV[size_t(t[2])] - mesh.restUV[size_t(t[0])];
            area = 0.5 * std::abs(a.x() * b.y() - a.y() * b.x());
        } else {
            area = 0.5 * (mesh.vertices[size_t(t[1])] - mesh.vertices[size_t(t[0])])
                             .cross(mesh.vertices[size_t(t[2])] - mesh.vertices[size_t(t[0])])
                             .norm();
        }
        for (int k = 0; k < 3; ++k) st.mass[size_t(t[k])] += material.areaDensity * area / 3.0;
    }
    for (double m : st.mass)
        if (!(m > 0)) throw std::invalid_argument("isolated vertex has zero lumped mass");
    return st;
}

namespace {

struct Element {
    Mat2 invDm;       // inverse of rest-edge matrix
    double coef;      // restArea * thickness
    bool valid;
};

Element elementSetup(const TriMesh& mesh, const Triangle& t, const ClothMaterial& mat) {
    Element el;
    Vec2 a = mesh.restUV[size_t(t[1])] - mesh.restUV[size_t(t[0])];
    Vec2 b = mesh.restUV[size_t(t[2])] - mesh.restUV[size_t(t[0])];
    Mat2 dm;
    dm.col(0) = a;
    dm.col(1) = b;
    double det = dm.determinant();
    el.valid = std::abs(det) > 1e-14;
    if (el.valid) {
        el.invDm = dm.inverse();
        el.coef = 0.5 * std::abs(det) * mat.thickness;
    }
    return el;
}

// plane-stress Lame parameters
void lame(const ClothMaterial& m, double& mu, double& lambda) {
    mu = m.youngModulus / (2.0 * (1.0 + m.poissonRatio));
    lambda = m.youngModulus * m.poissonRatio / (1.0 - m.poissonRatio * m.poissonRatio);
}

using Mat32 = Eigen::Matrix<double, 3, 2>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Vec9 = Eigen::Matrix<double, 9, 1>;

Mat32 deformedEdges(const ClothState& st, const Triangle& t) {
    Mat32 ds;
    ds.col(0) = st.x[size_t(t[1])] - st.x[size_t(t[0])];
    ds.col(1) = st.x[size_t(t[2])] - st.x[size_t(t[0])];
    return ds;
}

bool deformedDegenerate(const Mat32& ds) {
    return 0.5 * Vec3(ds.col(0)).cross(Vec3(ds.col(1))).norm() < 1e-12;
}

Mat32 firstPiola(const Mat32& f, double mu, double lambda) {
    Mat2 e = 0.5 * (f.transpose() * f - Mat2::Identity());
    return f * (2.0 * mu * e + lambda * e.trace() * Mat2::Identity());
}

}  // namespace

double membraneEnergy(const TriMesh& mesh, const ClothState& state, const ClothMaterial& material) {
    double mu, lambda;
    lame(material, mu, lambda);
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        Element el = elementSetup(mesh, t, material);
        if (!el.valid) continue;
        Mat32 ds = deformedEdges(state, t);
        if (deformedDegenerate(ds)) continue;
        Mat32 f = ds * el.invDm;
        Mat2 e = 0.5 * (f.transpose() * f - Mat2::Identity());
        total += el.coef * (mu * (e * e).trace() + 0.5 * lambda * e.trace() * e.trace());
    }
    return total;
}

void membraneForces(const TriMesh& mesh, const ClothState& state, const ClothMaterial& material,
                    std::vector<Vec3>* forces, SparseSystem* stiffness, ForceDiagnostics* diag,
                    bool projectPsd, MembraneCache* cache) {
    double mu, lambda;
    lame(material, mu, lambda);
    const size_t nt = mesh.triangles.size();
    if (cache && (!cache->elementsReady || cache->invDm.size() != nt)) {
        cache->invDm.resize(nt);
        cache->coef.resize(nt);
        cache->elementValid.assign(nt, 0);
        for (size_t ti = 0; ti < nt; ++ti) {
            Element el = elementSetup(mesh, mesh.triangles[ti], material);
            cache->elementValid[ti] = el.valid ? 1 : 0;
            if (el.valid) {
                cache->invDm[ti] = el.invDm;
                cache->coef[ti] = el.coef;
            }
        }
        cache->ds.resize(nt);
        cache->hessian.resize(nt);
        cache->hessianValid.assign(nt, 0);
        cache->elementsReady = true;
    }
    for (size_t ti = 0; ti < nt; ++ti) {
        const Triangle& t = mesh.triangles[ti];
        Element el;
        if (cache) {
            el.valid = cache->elementValid[ti] != 0;
            if (el.valid) {
                el.invDm = cache->invDm[ti];
                el.coef = cache->coef[ti];
            }
        } else {
            el = elementSetup(mesh, t, material);
        }
        Mat32 ds = deformedEdges(state, t);
        if (!el.valid || deformedDegenerate(ds)) {
            if (diag) diag->degenerateElements++;
            continue;
        }
        Mat32 f = ds * el.invDm;
        Mat2 e = 0.5 * (f.transpose() * f - Mat2::Identity());

        if (forces) {
            Mat32 grad = el.coef * firstPiola(f, mu, lambda) * el.invDm.transpose();
            (*forces)[size_t(t[1])] -= grad.col(0);
            (*forces)[size_t(t[2])] -= grad.col(1);
            (*forces)[size_t(t[0])] += grad.col(0) + grad.col(1);
        }

        if (stiffness) {
            if (cache && projectPsd && cache->hessianValid[ti] &&
                (ds - cache->ds[ti]).cwiseAbs().maxCoeff() < cache->tol) {
                const Mat9& h = cache->hessian[ti];
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c)
                        stiffness->addBlock(t[r], t[c], -h.block<3, 3>(3 * r, 3 * c));
                continue;
            }
            // exact element Hessian via directional derivatives of P(F)
            Mat9 h;
            for (int k = 0; k < 9; ++k) {
                int vtx = k / 3, axis = k % 3;
                Mat32 dDs = Mat32::Zero();
                if (vtx == 0) {
                    dDs(axis, 0) = -1.0;
                    dDs(axis, 1) = -1.0;
                } else {
                    dDs(axis, vtx - 1) = 1.0;
                }
                Mat32 df = dDs * el.invDm;
                Mat2 de = 0.5 * (df.transpose() * f + f.transpose() * df);
                Mat32 dp = df * (2.0 * mu * e + lambda * e.trace() * Mat2::Identity()) +
                           f * (2.0 * mu * de + lambda * de.trace() * Mat2::Identity());
                Mat32 dGrad = el.coef * dp * el.invDm.transpose();
                Vec9 col;
                col.segment<3>(0) = -(dGrad.col(0) + dGrad.col(1));
                col.segment<3>(3) = dGrad.col(0);
                col.segment<3>(6) = dGrad.col(1);
                h.col(k) = col;
            }
            h = 0.5 * (h + h.transpose()).eval();
            if (projectPsd) {
                Eigen::SelfAdjointEigenSolver<Mat9> eig(h);
                Vec9 clamped = eig.eigenvalues().cwiseMax(0.0);
                h = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
                if (cache) {
                    cache->ds[ti] = ds;
                    cache->hessian[ti] = h;
                    cache->hessianValid[ti] = 1;
                }
            }
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    stiffness->addBlock(t[r], t[c], -h.block<3, 3>(3 * r, 3 * c));
        }
    }
}

double bendingEnergy(const std::vector<Hinge>& hinges, const ClothState& state,
                     const ClothMaterial& material) {
    double total = 0.0;
    for (const auto& h : hinges) {
        const Vec3 &p0 = state.x[size_t(h.e0)], &p1 = state.x[size_t(h.e1)];
        const Vec3 &q0 = state.x[size_t(h.opp0)], &q1 = state.x[size_t(h.opp1)];
        Vec3 e = p1 - p0;
        if (e.cross(q0 - p0).squaredNorm() < 1e-24 || (q1 - p0).cross(e).squaredNorm() < 1e-24)
            continue;
        double w = wrapToPi(dihedralAngle(p0, p1, q0, q1) - h.restAngle);
        total += material.bendingStiffness * w * w * (h.restEdgeLength / h.restHeight);
    }
    return total;
}

void bendingForces(const std::vector<Hinge>& hinges, const ClothState& state,
                   const ClothMaterial& material, std::vector<Vec3>* forces,
                   SparseSystem* stiffness, ForceDiagnostics* diag) {
    for (const auto& h : hinges) {
        const Vec3 &p0 = state.x[size_t(h.e0)], &p1 = state.x[size_t(h.e1)];
        const Vec3 &q0 = state.x[size_t(h.opp0)], &q1 = state.x[size_t(h.opp1)];
        Vec3 e = p1 - p0;
        Vec3 n0 = e.cross(q0 - p0);        // same orientation as dihedralAngle's normals
        Vec3 n1 = (q1 - p0).cross(e);
        double el2 = e.squaredNorm(), el = std::sqrt(el2);
        if (n0.squaredNorm() < 1e-24 || n1.squaredNorm() < 1e-24 || el2 < 1e-24) {
            if (diag) diag->degenerateElements++;
            continue;
        }
        double w = wrapToPi(dihedralAngle(p0, p1, q0, q1) - h.restAngle);
        double c = material.bendingStiffness * (h.restEdgeLength / h.restHeight);

        double in0 = el / n0.squaredNorm(), in1 = el / n1.squaredNorm();
        Vec3 gq0 = -in0 * n0;
        Vec3 gq1 = -in1 * n1;
        double a0 = (q0 - p1).dot(e) / el2, a1 = (q1 - p1).dot(e) / el2;
        double b0 = (q0 - p0).dot(e) / el2, b1 = (q1 - p0).dot(e) / el2;
        Vec3 gp0 = -(a0 * in0 * n0 + a1 * in1 * n1);
        Vec3 gp1 = b0 * in0 * n0 + b1 * in1 * n1;

        int ids[4] = {h.e0, h.e1, h.opp0, h.opp1};
        Vec3 grads[4] = {gp0, gp1, gq0, gq1};
        if (forces)
            for (int k = 0; k < 4; ++k) (*forces)[size_t(ids[k])] -= 2.0 * c * w * grads[k];
        if (stiffness) {
            // Gauss-Newton approximation: keep the PSD outer-product term,
            // drop the indefinite d2(theta) term
            for (int r = 0; r < 4; ++r)
                for (int s = 0; s < 4; ++s)
                    stiffness->addBlock(ids[r], ids[s], -2.0 * c * (grads[r] * grads[s].transpose()));
        }
    }
}

ClothState implicitStep(const ClothState& state, const std::vector<Vec3>& forces,
                        const SparseSystem& stiffness, double rayleighDamping, double dt,
                        const std::vector<Attachment>& attachments, double cgTol, int cgMaxIter,
                        const SparseSystem* extraDamping) {
    const int n = int(state.x.size());
    VecX vflat(3 * n), fflat(3 * n);
    for (int i = 0; i < n; ++i) {
        vflat.segment<3>(3 * i) = state.v[size_t(i)];
        fflat.segment<3>(3 * i) = forces[size_t(i)];
    }

    SparseSystem sys(n);
    sys.assignScaled(stiffness, -dt * dt);
    for (int i = 0; i < n; ++i)
        sys.addBlock(i, i, state.mass[size_t(i)] * (1.0 + dt * rayleighDamping) * Mat3::Identity());
    if (extraDamping) sys.addScaled(*extraDamping, -dt);
    // the current damping force -alpha*M*v enters the rhs; its velocity
    // derivative -alpha*M is already inside the system matrix
    VecX damp(3 * n);
    for (int i = 0; i < n; ++i) damp.segment<3>(3 * i) = state.mass[size_t(i)] * state.v[size_t(i)];
    sys.b = dt * (fflat - rayleighDamping * damp + dt * stiffness.multiply(vflat));

    std::vector<VertexConstraint> constraints;
    constraints.reserve(attachments.size());
    for (const auto& a : attachments)
        constraints.push_back({a.vertex, a.targetVelocity - state.v[size_t(a.vertex)]});

    VecX dv = solveFilteredCG(sys, constraints, cgTol, cgMaxIter);

    ClothState out = state;
    for (int i = 0; i < n; ++i) {
        out.v[size_t(i)] = state.v[size_t(i)] + dv.segment<3>(3 * i);
        out.x[size_t(i)] = state.x[size_t(i)] + dt * out.v[size_t(i)];
    }
    for (const auto& a : attachments) {
        out.v[size_t(a.vertex)] = a.targetVelocity;
        out.x[size_t(a.vertex)] = a.targetPosition;
    }
    return out;
}

}  // namespace robohang
