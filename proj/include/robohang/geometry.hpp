#pragma once

#include "robohang/core.hpp"
#include "robohang/mesh.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace robohang {

struct Aabb {
    Vec3 lo{Vec3::Constant(std::numeric_limits<double>::max())};
    Vec3 hi{Vec3::Constant(-std::numeric_limits<double>::max())};

    void expand(const Vec3& p) { lo = lo.cwiseMin(p); hi = hi.cwiseMax(p); }
    void expand(const Aabb& b) { lo = lo.cwiseMin(b.lo); hi = hi.cwiseMax(b.hi); }
    void pad(double r) { lo.array() -= r; hi.array() += r; }
    bool overlaps(const Aabb& b) const {
        return (lo.array() <= b.hi.array()).all() && (b.lo.array() <= hi.array()).all();
    }
    Vec3 center() const { return 0.5 * (lo + hi); }
};

// Closest point on triangle abc to p; returns barycentric weights (wa, wb, wc).
Vec3 closestPointTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, Vec3& bary);

// Closest points between segments p1q1 and p2q2; returns parameters (s, t) in [0,1].
void closestSegmentSegment(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2,
                           double& s, double& t);

double pointSegmentDistance(const Vec3& p, const Vec3& a, const Vec3& b, double& t);

// Moller-Trumbore; hits with t in (tMin, tMax). Backfaces count.
bool rayTriangle(const Vec3& orig, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c,
                 double& t, double tMin = 1e-9, double tMax = std::numeric_limits<double>::max());

// Exact (tolerance-free) triangle-triangle overlap test, coplanar case included.
bool triTriIntersect(const Vec3& a0, const Vec3& a1, const Vec3& a2,
                     const Vec3& b0, const Vec3& b1, const Vec3& b2);

// Signed solid angle subtended by triangle abc at p (van Oosterom & Strackee).
double signedSolidAngle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Real roots of c3 t^3 + c2 t^2 + c1 t + c0 = 0 within [0, 1], ascending.
int cubicRootsInUnit(double c3, double c2, double c1, double c0, double roots[3]);

// Earliest coplanarity time in [0,1] at which moving vertex p passes through moving
// triangle abc, validated by proximity at the root. Returns nullopt when no impact.
std::optional<double> ccdVertexTriangle(const Vec3& p0, const Vec3& p1, const Vec3& a0, const Vec3& a1,
                                        const Vec3& b0, const Vec3& b1, const Vec3& c0, const Vec3& c1,
                                        double tolerance);
std::optional<double> ccdEdgeEdge(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1,
                                  const Vec3& r0, const Vec3& r1, const Vec3& s0, const Vec3& s1,
                                  double tolerance);

// Static binary AABB tree over a triangle soup; rebuilt per query batch.
class TriangleBvh {
public:
    TriangleBvh() = default;
    TriangleBvh(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles);

    struct Hit {
        double t;
        int triangle;
        Vec3 bary;
    };
    std::optional<Hit> raycast(const Vec3& orig, const Vec3& dir, double tMin = 1e-9,
                               double tMax = std::numeric_limits<double>::max()) const;
    bool anyHit(const Vec3& orig, const Vec3& dir, double tMin = 1e-9,
                double tMax = std::numeric_limits<double>::max()) const;
    bool empty() const { return nodes_.empty(); }

private:
    struct Node {
        Aabb box;
        int left = -1, right = -1;  // children; leaf iff left < 0
        int first = 0, count = 0;   // triangle range for leaves
    };
    int build(int first, int count);

    const std::vector<Vec3>* verts_ = nullptr;
    const std::vector<Triangle>* tris_ = nullptr;
    std::vector<int> order_;
    std::vector<Aabb> triBoxes_;
    std::vector<Vec3> centers_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace robohang
