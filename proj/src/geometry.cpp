#include "robohang/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace robohang {

Vec3 closestPointTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, Vec3& bary) {
    // Ericson, Real-Time Collision Detection, 5.1.5
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) { bary = Vec3(1, 0, 0); return a; }

    Vec3 bp = p - b;
    double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) { bary = Vec3(0, 1, 0); return b; }

    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        double v = d1 / (d1 - d3);
        bary = Vec3(1.0 - v, v, 0.0);
        return a + v * ab;
    }

    Vec3 cp = p - c;
    double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) { bary = Vec3(0, 0, 1); return c; }

    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        double w = d2 / (d2 - d6);
        bary = Vec3(1.0 - w, 0.0, w);
        return a + w * ac;
    }

    double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        bary = Vec3(0.0, 1.0 - w, w);
        return b + w * (c - b);
    }

    double denom = 1.0 / (va + vb + vc);
    double v = vb * denom, w = vc * denom;
    bary = Vec3(1.0 - v - w, v, w);
    return a + ab * v + ac * w;
}

void closestSegmentSegment(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2,
                           double& s, double& t) {
    // Ericson 5.1.9
    Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
    double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
    const double kEps = 1e-18;
    if (a <= kEps && e <= kEps) { s = t = 0.0; return; }
    if (a <= kEps) {
        s = 0.0;
        t = std::clamp(f / e, 0.0, 1.0);
        return;
    }
    double c = d1.dot(r);
    if (e <= kEps) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
        return;
    }
    double b = d1.dot(d2);
    double denom = a * e - b * b;
    s = denom > kEps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
    t = (b * s + f) / e;
    if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
    } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
    }
}

double pointSegmentDistance(const Vec3& p, const Vec3& a, const Vec3& b, double& t) {
    Vec3 ab = b - a;
    double len2 = ab.squaredNorm();
    t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (p - (a + t * ab)).norm();
}

bool rayTriangle(const Vec3& orig, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c,
                 double& t, double tMin, double tMax) {
    Vec3 e1 = b - a, e2 = c - a;
    Vec3 pv = dir.cross(e2);
    double det = e1.dot(pv);
    if (std::abs(det) < 1e-16) return false;
    double invDet = 1.0 / det;
    Vec3 tv = orig - a;
    double u = tv.dot(pv) * invDet;
    if (u < 0.0 || u > 1.0) return false;
    Vec3 qv = tv.cross(e1);
    double v = dir.dot(qv) * invDet;
    if (v < 0.0 || u + v > 1.0) return false;
    double tt = e2.dot(qv) * invDet;
    if (tt <= tMin || tt >= tMax) return false;
    t = tt;
    return true;
}

double signedSolidAngle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 u = a - p, v = b - p, w = c - p;
    double lu = u.norm(), lv = v.norm(), lw = w.norm();
    double num = u.dot(v.cross(w));
    double den = lu * lv * lw + u.dot(v) * lw + v.dot(w) * lu + w.dot(u) * lv;
    return 2.0 * std::atan2(num, den);
}

// ---------------------------------------------------------------------------
// Exact triangle-triangle intersection (Moller 1997), coplanar case included.

namespace {

int planeSide(double d) { return d > 0.0 ? 1 : (d < 0.0 ? -1 : 0); }

// projected 2D helpers for the coplanar case
double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

bool segsIntersect2d(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    double d1 = orient2d(c, d, a), d2 = orient2d(c, d, b);
    double d3 = orient2d(a, b, c), d4 = orient2d(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    auto onSeg = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        return std::min(p.x(), q.x()) <= r.x() && r.x() <= std::max(p.x(), q.x()) &&
               std::min(p.y(), q.y()) <= r.y() && r.y() <= std::max(p.y(), q.y());
    };
    if (d1 == 0 && onSeg(c, d, a)) return true;
    if (d2 == 0 && onSeg(c, d, b)) return true;
    if (d3 == 0 && onSeg(a, b, c)) return true;
    if (d4 == 0 && onSeg(a, b, d)) return true;
    return false;
}

bool pointInTri2d(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
    double d1 = orient2d(a, b, p), d2 = orient2d(b, c, p), d3 = orient2d(c, a, p);
    bool hasNeg = (d1 < 0) || (d2 < 0) || (d3 < 0);
    bool hasPos = (d1 > 0) || (d2 > 0) || (d3 > 0);
    return !(hasNeg && hasPos);
}

bool coplanarTriTri(const Vec3& n, const Vec3& a0, const Vec3& a1, const Vec3& a2,
                    const Vec3& b0, const Vec3& b1, const Vec3& b2) {
    int axis = 0;
    Vec3 an = n.cwiseAbs();
    if (an.y() > an.x()) axis = 1;
    if (an.z() > an[axis]) axis = 2;
    int i0 = (axis + 1) % 3, i1 = (axis + 2) % 3;
    auto proj = [&](const Vec3& p) { return Vec2(p[i0], p[i1]); };
    Vec2 A[3] = {proj(a0), proj(a1), proj(a2)};
    Vec2 B[3] = {proj(b0), proj(b1), proj(b2)};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (segsIntersect2d(A[i], A[(i + 1) % 3], B[j], B[(j + 1) % 3])) return true;
    if (pointInTri2d(A[0], B[0], B[1], B[2])) return true;
    if (pointInTri2d(B[0], A[0], A[1], A[2])) return true;
    return false;
}

// Interval occupied on the intersection line by the triangle with projected
// coordinates proj[] and signed plane distances d[]. Collects edge crossings
// and on-plane vertices; valid whenever the signs of d are not all equal.
bool computeInterval(const double proj[3], const double d[3], double& t0, double& t1) {
    double pts[6];
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        if (planeSide(d[i]) == 0) pts[n++] = proj[i];
        int j = (i + 1) % 3;
        if (planeSide(d[i]) * planeSide(d[j]) < 0)
            pts[n++] = proj[i] + (proj[j] - proj[i]) * d[i] / (d[i] - d[j]);
    }
    if (n == 0) return false;
    t0 = *std::min_element(pts, pts + n);
    t1 = *std::max_element(pts, pts + n);
    return true;
}

}  // namespace

bool triTriIntersect(const Vec3& a0, const Vec3& a1, const Vec3& a2,
                     const Vec3& b0, const Vec3& b1, const Vec3& b2) {
    double spread = std::max({(a1 - a0).norm(), (a2 - a0).norm(), (b1 - b0).norm(), (b2 - b0).norm(),
                              (a0 - b0).norm()});

    Vec3 n2 = (b1 - b0).cross(b2 - b0);
    double da[3] = {n2.dot(a0 - b0), n2.dot(a1 - b0), n2.dot(a2 - b0)};
    // snap roundoff noise to zero so near-coplanar strips take the coplanar path
    double epsA = 1e-12 * n2.norm() * spread;
    for (double& d : da)
        if (std::abs(d) <= epsA) d = 0.0;
    if ((da[0] > 0 && da[1] > 0 && da[2] > 0) || (da[0] < 0 && da[1] < 0 && da[2] < 0)) return false;

    Vec3 n1 = (a1 - a0).cross(a2 - a0);
    double db[3] = {n1.dot(b0 - a0), n1.dot(b1 - a0), n1.dot(b2 - a0)};
    double epsB = 1e-12 * n1.norm() * spread;
    for (double& d : db)
        if (std::abs(d) <= epsB) d = 0.0;
    if ((db[0] > 0 && db[1] > 0 && db[2] > 0) || (db[0] < 0 && db[1] < 0 && db[2] < 0)) return false;

    if (da[0] == 0 && da[1] == 0 && da[2] == 0) return coplanarTriTri(n1, a0, a1, a2, b0, b1, b2);

    Vec3 dir = n1.cross(n2);
    int axis = 0;
    Vec3 ad = dir.cwiseAbs();
    if (ad.y() > ad.x()) axis = 1;
    if (ad.z() > ad[axis]) axis = 2;

    double pa[3] = {a0[axis], a1[axis], a2[axis]};
    double pb[3] = {b0[axis], b1[axis], b2[axis]};
    double s0, s1, t0, t1;
    if (!computeInterval(pa, da, s0, s1)) return coplanarTriTri(n1, a0, a1, a2, b0, b1, b2);
    if (!computeInterval(pb, db, t0, t1)) return coplanarTriTri(n1, a0, a1, a2, b0, b1, b2);
    return s1 >= t0 && t1 >= s0;
}

// ---------------------------------------------------------------------------
// Cubic roots and CCD

int cubicRootsInUnit(double c3, double c2, double c1, double c0, double roots[3]) {
    const double kEps = 1e-30;
    auto eval = [&](double t) { return ((c3 * t + c2) * t + c1) * t + c0; };
    auto deriv = [&](double t) { return (3.0 * c3 * t + 2.0 * c2) * t + c1; };
    double raw[3];
    int nRaw = 0;
    if (std::abs(c3) < kEps * std::max({std::abs(c2), std::abs(c1), std::abs(c0), 1e-300})) {
        if (std::abs(c2) < kEps * std::max({std::abs(c1), std::abs(c0), 1e-300})) {
            if (std::abs(c1) > 0.0) raw[nRaw++] = -c0 / c1;
        } else {
            double disc = c1 * c1 - 4.0 * c2 * c0;
            if (disc >= 0.0) {
                double sq = std::sqrt(disc);
                double q = -0.5 * (c1 + (c1 >= 0 ? sq : -sq));
                raw[nRaw++] = q / c2;
                if (q != 0.0) raw[nRaw++] = c0 / q;
            }
        }
    } else {
        double a = c2 / c3, b = c1 / c3, c = c0 / c3;
        double p = b - a * a / 3.0;
        double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
        double off = a / 3.0;
        double disc = q * q / 4.0 + p * p * p / 27.0;
        if (disc > 0.0) {
            double sq = std::sqrt(disc);
            double u = std::cbrt(-q / 2.0 + sq), v = std::cbrt(-q / 2.0 - sq);
            raw[nRaw++] = u + v - off;
        } else {
            double r = std::sqrt(std::max(0.0, -p * p * p / 27.0));
            double phi = std::acos(std::clamp(r > 0 ? -q / (2.0 * r) : 0.0, -1.0, 1.0));
            double m = 2.0 * std::sqrt(std::max(0.0, -p / 3.0));
            for (int k = 0; k < 3; ++k)
                raw[nRaw++] = m * std::cos((phi + 2.0 * M_PI * k) / 3.0) - off;
        }
    }
    int n = 0;
    for (int i = 0; i < nRaw; ++i) {
        double t = raw[i];
        // Newton polish
        for (int it = 0; it < 3; ++it) {
            double d = deriv(t);
            if (std::abs(d) < 1e-30) break;
            t -= eval(t) / d;
        }
        if (t >= -1e-9 && t <= 1.0 + 1e-9) {
            t = std::clamp(t, 0.0, 1.0);
            bool dup = false;
            for (int j = 0; j < n; ++j)
                if (std::abs(roots[j] - t) < 1e-10) dup = true;
            if (!dup) roots[n++] = t;
        }
    }
    std::sort(roots, roots + n);
    return n;
}

std::optional<double> ccdVertexTriangle(const Vec3& p0, const Vec3& p1, const Vec3& a0, const Vec3& a1,
                                        const Vec3& b0, const Vec3& b1, const Vec3& c0, const Vec3& c1,
                                        double tolerance) {
    Vec3 u = a0 - p0, v = b0 - p0, w = c0 - p0;
    Vec3 du = (a1 - p1) - u, dv = (b1 - p1) - v, dw = (c1 - p1) - w;
    auto det = [](const Vec3& x, const Vec3& y, const Vec3& z) { return x.dot(y.cross(z)); };
    double k0 = det(u, v, w);
    double k1 = det(du, v, w) + det(u, dv, w) + det(u, v, dw);
    double k2 = det(u, dv, dw) + det(du, v, dw) + det(du, dv, w);
    double k3 = det(du, dv, dw);
    double roots[3];
    int n = cubicRootsInUnit(k3, k2, k1, k0, roots);
    for (int i = 0; i < n; ++i) {
        double t = roots[i];
        Vec3 p = p0 + t * (p1 - p0);
        Vec3 a = a0 + t * (a1 - a0), b = b0 + t * (b1 - b0), c = c0 + t * (c1 - c0);
        Vec3 bary;
        Vec3 q = closestPointTriangle(p, a, b, c, bary);
        if ((p - q).norm() <= tolerance) return t;
    }
    return std::nullopt;
}

std::optional<double> ccdEdgeEdge(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1,
                                  const Vec3& r0, const Vec3& r1, const Vec3& s0, const Vec3& s1,
                                  double tolerance) {
    // edges (p,q) and (r,s); coplanarity of q-p, s-r, r-p
    Vec3 u = q0 - p0, v = s0 - r0, w = r0 - p0;
    Vec3 du = (q1 - p1) - u, dv = (s1 - r1) - v, dw = (r1 - p1) - w;
    auto det = [](const Vec3& x, const Vec3& y, const Vec3& z) { return x.dot(y.cross(z)); };
    double k0 = det(u, v, w);
    double k1 = det(du, v, w) + det(u, dv, w) + det(u, v, dw);
    double k2 = det(u, dv, dw) + det(du, v, dw) + det(du, dv, w);
    double k3 = det(du, dv, dw);
    double roots[3];
    int n = cubicRootsInUnit(k3, k2, k1, k0, roots);
    for (int i = 0; i < n; ++i) {
        double t = roots[i];
        Vec3 p = p0 + t * (p1 - p0), q = q0 + t * (q1 - q0);
        Vec3 r = r0 + t * (r1 - r0), s = s0 + t * (s1 - s0);
        double a, b;
        closestSegmentSegment(p, q, r, s, a, b);
        Vec3 x = p + a * (q - p), y = r + b * (s - r);
        if ((x - y).norm() <= tolerance) return t;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// BVH

TriangleBvh::TriangleBvh(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles)
    : verts_(&vertices), tris_(&triangles) {
    size_t n = triangles.size();
    if (n == 0) return;
    order_.resize(n);
    triBoxes_.resize(n);
    centers_.resize(n);
    for (size_t i = 0; i < n; ++i) {
        order_[i] = int(i);
        Aabb box;
        for (int k = 0; k < 3; ++k) box.expand(vertices[size_t(triangles[i][k])]);
        triBoxes_[i] = box;
        centers_[i] = box.center();
    }
    nodes_.reserve(2 * n);
    root_ = build(0, int(n));
}

int TriangleBvh::build(int first, int count) {
    Node node;
    for (int i = first; i < first + count; ++i) node.box.expand(triBoxes_[size_t(order_[size_t(i)])]);
    int idx = int(nodes_.size());
    nodes_.push_back(node);
    if (count <= 4) {
        nodes_[size_t(idx)].first = first;
        nodes_[size_t(idx)].count = count;
        return idx;
    }
    Aabb cbox;
    for (int i = first; i < first + count; ++i) cbox.expand(centers_[size_t(order_[size_t(i)])]);
    Vec3 ext = cbox.hi - cbox.lo;
    int axis = 0;
    if (ext.y() > ext.x()) axis = 1;
    if (ext.z() > ext[axis]) axis = 2;
    int mid = first + count / 2;
    std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                     [&](int a, int b) { return centers_[size_t(a)][axis] < centers_[size_t(b)][axis]; });
    int left = build(first, mid - first);
    int right = build(mid, first + count - mid);
    nodes_[size_t(idx)].left = left;
    nodes_[size_t(idx)].right = right;
    return idx;
}

namespace {
bool rayAabb(const Vec3& orig, const Vec3& invDir, const Aabb& box, double tMax) {
    double t0 = 0.0, t1 = tMax;
    for (int k = 0; k < 3; ++k) {
        double ta = (box.lo[k] - orig[k]) * invDir[k];
        double tb = (box.hi[k] - orig[k]) * invDir[k];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}
}  // namespace

std::optional<TriangleBvh::Hit> TriangleBvh::raycast(const Vec3& orig, const Vec3& dir, double tMin,
                                                     double tMax) const {
    if (root_ < 0) return std::nullopt;
    Vec3 invDir;
    for (int k = 0; k < 3; ++k) invDir[k] = dir[k] != 0.0 ? 1.0 / dir[k] : 1e300;
    std::optional<Hit> best;
    double tBest = tMax;
    int stack[64];
    int sp = 0;
    stack[sp++] = root_;
    while (sp > 0) {
        const Node& node = nodes_[size_t(stack[--sp])];
        if (!rayAabb(orig, invDir, node.box, tBest)) continue;
        if (node.left < 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                int tri = order_[size_t(i)];
                const Triangle& f = (*tris_)[size_t(tri)];
                const Vec3 &a = (*verts_)[size_t(f[0])], &b = (*verts_)[size_t(f[1])],
                           &c = (*verts_)[size_t(f[2])];
                double t;
                if (rayTriangle(orig, dir, a, b, c, t, tMin, tBest)) {
                    tBest = t;
                    Vec3 p = orig + t * dir, bary;
                    closestPointTriangle(p, a, b, c, bary);
                    best = Hit{t, tri, bary};
                }
            }
        } else {
            stack[sp++] = node.left;
            stack[sp++] = node.right;
        }
    }
    return best;
}

bool TriangleBvh::anyHit(const Vec3& orig, const Vec3& dir, double tMin, double tMax) const {
    if (root_ < 0) return false;
    Vec3 invDir;
    for (int k = 0; k < 3; ++k) invDir[k] = dir[k] != 0.0 ? 1.0 / dir[k] : 1e300;
    int stack[64];
    int sp = 0;
    stack[sp++] = root_;
    while (sp > 0) {
        const Node& node = nodes_[size_t(stack[--sp])];
        if (!rayAabb(orig, invDir, node.box, tMax)) continue;
        if (node.left < 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const Triangle& f = (*tris_)[size_t(order_[size_t(i)])];
                double t;
                if (rayTriangle(orig, dir, (*verts_)[size_t(f[0])], (*verts_)[size_t(f[1])],
                                (*verts_)[size_t(f[2])], t, tMin, tMax))
                    return true;
            }
        } else {
            stack[sp++] = node.left;
            stack[sp++] = node.right;
        }
    }
    return false;
}

}  // namespace robohang
