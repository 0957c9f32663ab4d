#pragma once

#include "robohang/core.hpp"

#include <vector>

namespace robohang {

// Symmetric sparse matrix in block 3x3 layout (one block row/column per
// vertex) plus a right-hand side.  Blocks are accumulated additively; only
// the blocks actually touched are stored.  Sized for the few-thousand-DoF
// systems a cloth step produces, favoring simplicity over peak throughput.
class SparseSystem {
public:
    SparseSystem() = default;
    explicit SparseSystem(int numVertices) { resize(numVertices); }

    void resize(int numVertices) {
        rows_.assign(size_t(numVertices), {});
        b = VecX::Zero(3 * numVertices);
    }
    int numVertices() const { return int(rows_.size()); }

    void addBlock(int i, int j, const Mat3& m) {
        Row& row = rows_[size_t(i)];
        for (size_t k = 0; k < row.cols.size(); ++k) {
            if (row.cols[k] == j) {
                row.blocks[k] += m;
                return;
            }
        }
        row.cols.push_back(j);
        row.blocks.push_back(m);
    }

    // y = A x
    VecX multiply(const VecX& x) const {
        VecX y = VecX::Zero(x.size());
        for (int i = 0; i < numVertices(); ++i) {
            const Row& row = rows_[size_t(i)];
            Vec3 acc = Vec3::Zero();
            for (size_t k = 0; k < row.cols.size(); ++k)
                acc += row.blocks[k] * x.segment<3>(3 * row.cols[k]);
            y.segment<3>(3 * i) = acc;
        }
        return y;
    }

    Mat3 diagonalBlock(int i) const {
        const Row& row = rows_[size_t(i)];
        for (size_t k = 0; k < row.cols.size(); ++k)
            if (row.cols[k] == i) return row.blocks[k];
        return Mat3::Zero();
    }

    // this = scale * other (blocks only; b zeroed).  Copies the sparsity
    // structure wholesale, which beats re-inserting block by block when the
    // target is empty.
    void assignScaled(const SparseSystem& other, double scale) {
        rows_ = other.rows_;
        for (auto& row : rows_)
            for (auto& blk : row.blocks) blk *= scale;
        b = VecX::Zero(3 * numVertices());
    }

    // this += scale * other (blocks only; b untouched)
    void addScaled(const SparseSystem& other, double scale) {
        for (int i = 0; i < other.numVertices(); ++i) {
            const Row& row = other.rows_[size_t(i)];
            for (size_t k = 0; k < row.cols.size(); ++k)
                addBlock(i, row.cols[k], scale * row.blocks[k]);
        }
    }

    VecX b;

private:
    // Per-row block storage in first-touch order; rows stay short (tens of
    // entries), so a linear scan beats hashing.
    struct Row {
        std::vector<int> cols;
        std::vector<Mat3> blocks;
    };
    std::vector<Row> rows_;
};

// Prescribed motion of a constrained vertex inside the linear solve.
struct VertexConstraint {
    int vertex;
    Vec3 deltaV;  // prescribed solution value on this block
};

// Preconditioned CG with per-vertex constraint filtering (Baraff-Witkin
// style).  Constrained blocks carry their prescribed value exactly and are
// excluded from the Krylov iteration; the block-diagonal of A is the
// preconditioner.  Throws NonConvergence past maxIter.
VecX solveFilteredCG(const SparseSystem& system, const std::vector<VertexConstraint>& constraints,
                     double tol = 1e-4, int maxIter = 400);

}  // namespace robohang
