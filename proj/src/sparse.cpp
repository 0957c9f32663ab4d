#include "robohang/sparse.hpp"

#include <Eigen/Dense>

namespace robohang {

VecX solveFilteredCG(const SparseSystem& system, const std::vector<VertexConstraint>& constraints,
                     double tol, int maxIter) {
    const int n = system.numVertices();
    std::vector<char> fixed(size_t(n), 0);
    VecX x = VecX::Zero(3 * n);
    for (const auto& c : constraints) {
        fixed[size_t(c.vertex)] = 1;
        x.segment<3>(3 * c.vertex) = c.deltaV;
    }
    auto filter = [&](VecX& v) {
        for (int i = 0; i < n; ++i)
            if (fixed[size_t(i)]) v.segment<3>(3 * i).setZero();
    };

    // block-Jacobi preconditioner; pseudo-inverse guards rank-deficient blocks
    std::vector<Mat3> pinv(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Mat3 d = system.diagonalBlock(i);
        if (d.isZero(0.0))
            pinv[size_t(i)] = Mat3::Identity();
        else
            pinv[size_t(i)] = d.completeOrthogonalDecomposition().pseudoInverse();
    }
    auto precondition = [&](const VecX& v) {
        VecX out(v.size());
        for (int i = 0; i < n; ++i) out.segment<3>(3 * i) = pinv[size_t(i)] * v.segment<3>(3 * i);
        return out;
    };

    VecX bf = system.b;
    filter(bf);
    double bNorm = bf.norm();
    VecX r = system.b - system.multiply(x);
    filter(r);
    if (bNorm == 0.0) bNorm = 1.0;
    if (r.norm() / bNorm <= tol) return x;

    VecX d = precondition(r);
    filter(d);
    double deltaNew = r.dot(d);
    for (int iter = 0; iter < maxIter; ++iter) {
        VecX q = system.multiply(d);
        filter(q);
        double dq = d.dot(q);
        if (dq <= 0.0) break;  // lost positive definiteness numerically
        double alpha = deltaNew / dq;
        x += alpha * d;
        r -= alpha * q;
        if (r.norm() / bNorm <= tol) return x;
        VecX s = precondition(r);
        filter(s);
        double deltaOld = deltaNew;
        deltaNew = r.dot(s);
        d = s + (deltaNew / deltaOld) * d;
    }
    throw NonConvergence(r.norm() / bNorm);
}

}  // namespace robohang
