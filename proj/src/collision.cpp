#include "robohang/collision.hpp"

#include "robohang/geometry.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace robohang {

void CollisionConfig::validate() const {
    if (!(d0 > 0) || !(penaltyStiffness > 0))
        throw std::invalid_argument("collision config requires d0 > 0 and penaltyStiffness > 0");
}

namespace {

// Uniform hash grid over AABBs.  The cell size adapts to the element size so
// an element touches O(1) cells; the query pad supplies the d0 shell.
class SpatialGrid {
public:
    explicit SpatialGrid(double cellSize) : cell_(std::max(cellSize, 1e-9)) {}

    void insert(int id, const Aabb& box) {
        forEachCell(box, [&](uint64_t key) { cells_[key].push_back(id); });
        if (id >= int(stamps_.size())) stamps_.resize(size_t(id) + 1, 0);
    }

    // ids deduplicated by a per-id visit stamp; output order follows cell
    // iteration, so callers needing a canonical order must sort their results
    void query(const Aabb& box, std::vector<int>& out) const {
        out.clear();
        ++stamp_;
        forEachCell(box, [&](uint64_t key) {
            auto it = cells_.find(key);
            if (it == cells_.end()) return;
            for (int id : it->second)
                if (stamps_[size_t(id)] != stamp_) {
                    stamps_[size_t(id)] = stamp_;
                    out.push_back(id);
                }
        });
    }

private:
    template <typename F>
    void forEachCell(const Aabb& box, F&& f) const {
        int lo[3], hi[3];
        for (int k = 0; k < 3; ++k) {
            lo[k] = int(std::floor(box.lo[k] / cell_));
            hi[k] = int(std::floor(box.hi[k] / cell_));
        }
        for (int x = lo[0]; x <= hi[0]; ++x)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int z = lo[2]; z <= hi[2]; ++z)
                    f(splitmix64(uint64_t(uint32_t(x))) ^
                      splitmix64(uint64_t(uint32_t(y)) << 20 ^ 0x9e3779b9ull) ^
                      splitmix64(uint64_t(uint32_t(z)) << 40 ^ 0x85ebca6bull));
    }

    double cell_;
    std::unordered_map<uint64_t, std::vector<int>> cells_;
};

bool edgesShareVertex(const Edge& a, const Edge& b) {
    return a.a == b.a || a.a == b.b || a.b == b.a || a.b == b.b;
}

bool triangleHasVertex(const Triangle& t, int v) { return t[0] == v || t[1] == v || t[2] == v; }

double meshElementScale(const std::vector<Vec3>& x, const TriMesh& mesh) {
    double maxEdge = 0.0;
    for (const auto& t : mesh.triangles)
        for (int k = 0; k < 3; ++k)
            maxEdge = std::max(maxEdge, (x[size_t(t[k])] - x[size_t(t[(k + 1) % 3])]).norm());
    return maxEdge;
}

}  // namespace

std::vector<ProximityPair> findProximities(const ClothState& state, const TriMesh& mesh,
                                           const std::vector<Edge>& edges,
                                           const std::vector<RigidSdfFn>& rigidSdfs, double d0) {
    std::vector<ProximityPair> pairs;
    const auto& x = state.x;
    double cellSize = std::max(d0, meshElementScale(x, mesh));

    // vertex-triangle
    {
        SpatialGrid grid(cellSize);
        std::vector<Aabb> triBoxes(mesh.triangles.size());
        for (int ti = 0; ti < int(mesh.triangles.size()); ++ti) {
            Aabb box;
            for (int k = 0; k < 3; ++k) box.expand(x[size_t(mesh.triangles[size_t(ti)][k])]);
            box.pad(d0);
            triBoxes[size_t(ti)] = box;
            grid.insert(ti, box);
        }
        std::vector<int> cands;
        for (int vi = 0; vi < int(x.size()); ++vi) {
            Aabb box;
            box.expand(x[size_t(vi)]);
            grid.query(box, cands);
            for (int ti : cands) {
                if (!triBoxes[size_t(ti)].overlaps(box)) continue;
                const Triangle& t = mesh.triangles[size_t(ti)];
                if (triangleHasVertex(t, vi)) continue;
                Vec3 bary;
                Vec3 q = closestPointTriangle(x[size_t(vi)], x[size_t(t[0])], x[size_t(t[1])],
                                              x[size_t(t[2])], bary);
                Vec3 diff = x[size_t(vi)] - q;
                double d = diff.norm();
                if (d >= d0 || d < 1e-15) continue;
                ProximityPair p;
                p.kind = PairKind::VertexTriangle;
                p.a = vi;
                p.b = ti;
                p.w[0] = bary[0];
                p.w[1] = bary[1];
                p.w[2] = bary[2];
                p.normal = diff / d;
                p.distance = d;
                pairs.push_back(p);
            }
        }
    }

    // edge-edge; deduplicate by requiring a < b
    {
        SpatialGrid grid(cellSize);
        auto edgeBox = [&](const Edge& e) {
            Aabb box;
            box.expand(x[size_t(e.a)]);
            box.expand(x[size_t(e.b)]);
            return box;
        };
        std::vector<Aabb> eBoxes(edges.size());
        for (int ei = 0; ei < int(edges.size()); ++ei) {
            Aabb box = edgeBox(edges[size_t(ei)]);
            box.pad(d0);
            eBoxes[size_t(ei)] = box;
            grid.insert(ei, box);
        }
        std::vector<int> cands;
        for (int ei = 0; ei < int(edges.size()); ++ei) {
            const Edge& ea = edges[size_t(ei)];
            Aabb abox = edgeBox(ea);
            grid.query(abox, cands);
            for (int ej : cands) {
                if (ej <= ei) continue;
                if (!abox.overlaps(eBoxes[size_t(ej)])) continue;
                const Edge& eb = edges[size_t(ej)];
                if (edgesShareVertex(ea, eb)) continue;
                double s, t;
                closestSegmentSegment(x[size_t(ea.a)], x[size_t(ea.b)], x[size_t(eb.a)],
                                      x[size_t(eb.b)], s, t);
                Vec3 pa = x[size_t(ea.a)] + s * (x[size_t(ea.b)] - x[size_t(ea.a)]);
                Vec3 pb = x[size_t(eb.a)] + t * (x[size_t(eb.b)] - x[size_t(eb.a)]);
                Vec3 diff = pa - pb;
                double d = diff.norm();
                if (d >= d0 || d < 1e-15) continue;
                ProximityPair p;
                p.kind = PairKind::EdgeEdge;
                p.a = ei;
                p.b = ej;
                p.w[0] = s;
                p.w[1] = t;
                p.normal = diff / d;
                p.distance = d;
                pairs.push_back(p);
            }
        }
    }

    // vertex-rigid via SDF shell
    for (int ri = 0; ri < int(rigidSdfs.size()); ++ri) {
        for (int vi = 0; vi < int(x.size()); ++vi) {
            double d = rigidSdfs[size_t(ri)](x[size_t(vi)]);
            if (d >= d0) continue;
            const double h = 1e-6;
            Vec3 g;
            for (int k = 0; k < 3; ++k) {
                Vec3 dp = Vec3::Zero();
                dp[k] = h;
                g[k] = (rigidSdfs[size_t(ri)](x[size_t(vi)] + dp) -
                        rigidSdfs[size_t(ri)](x[size_t(vi)] - dp)) /
                       (2 * h);
            }
            ProximityPair p;
            p.kind = PairKind::VertexRigid;
            p.a = vi;
            p.b = ri;
            p.normal = g.norm() > 1e-12 ? (g / g.norm()).eval() : Vec3(0, 0, 1);
            p.distance = d;
            pairs.push_back(p);
        }
    }

    std::sort(pairs.begin(), pairs.end(), [](const ProximityPair& l, const ProximityPair& r) {
        if (l.kind != r.kind) return int(l.kind) < int(r.kind);
        if (l.a != r.a) return l.a < r.a;
        return l.b < r.b;
    });
    return pairs;
}

namespace {

// witness separation for a pair under the frozen weights
struct Witness {
    Vec3 diff;       // first minus second witness point
    int ids[4];      // involved cloth vertices, -1 padded
    double coef[4];  // signed weights multiplying each vertex in diff
    int count;
};

Witness witnessOf(const ProximityPair& p, const ClothState& state, const TriMesh& mesh,
                  const std::vector<Edge>& edges) {
    Witness w{};
    const auto& x = state.x;
    if (p.kind == PairKind::VertexTriangle) {
        const Triangle& t = mesh.triangles[size_t(p.b)];
        w.diff = x[size_t(p.a)] - (p.w[0] * x[size_t(t[0])] + p.w[1] * x[size_t(t[1])] +
                                   p.w[2] * x[size_t(t[2])]);
        w.ids[0] = p.a;
        w.coef[0] = 1.0;
        for (int k = 0; k < 3; ++k) {
            w.ids[k + 1] = t[k];
            w.coef[k + 1] = -p.w[k];
        }
        w.count = 4;
    } else if (p.kind == PairKind::EdgeEdge) {
        const Edge &ea = edges[size_t(p.a)], &eb = edges[size_t(p.b)];
        double s = p.w[0], t = p.w[1];
        w.diff = ((1 - s) * x[size_t(ea.a)] + s * x[size_t(ea.b)]) -
                 ((1 - t) * x[size_t(eb.a)] + t * x[size_t(eb.b)]);
        w.ids[0] = ea.a;
        w.coef[0] = 1 - s;
        w.ids[1] = ea.b;
        w.coef[1] = s;
        w.ids[2] = eb.a;
        w.coef[2] = -(1 - t);
        w.ids[3] = eb.b;
        w.coef[3] = -t;
        w.count = 4;
    } else {
        w.ids[0] = p.a;
        w.coef[0] = 1.0;
        w.count = 1;
    }
    return w;
}

}  // namespace

double penaltyEnergy(const std::vector<ProximityPair>& pairs, const ClothState& state,
                     const TriMesh& mesh, const std::vector<Edge>& edges,
                     const std::vector<RigidSdfFn>& rigidSdfs, const CollisionConfig& config) {
    double total = 0.0;
    for (const auto& p : pairs) {
        double d;
        if (p.kind == PairKind::VertexRigid)
            d = rigidSdfs[size_t(p.b)](state.x[size_t(p.a)]);
        else
            d = witnessOf(p, state, mesh, edges).diff.norm();
        if (d < config.d0) {
            double gap = config.d0 - d;
            total += config.penaltyStiffness * gap * gap * gap;
        }
    }
    return total;
}

void penaltyForces(const std::vector<ProximityPair>& pairs, const ClothState& state,
                   const TriMesh& mesh, const std::vector<Edge>& edges,
                   const std::vector<RigidSdfFn>& rigidSdfs, const CollisionConfig& config,
                   std::vector<Vec3>* forces, SparseSystem* stiffness,
                   std::vector<double>* normalMagnitudes) {
    if (normalMagnitudes) normalMagnitudes->assign(pairs.size(), 0.0);
    for (size_t pi = 0; pi < pairs.size(); ++pi) {
        const auto& p = pairs[pi];
        Witness w = witnessOf(p, state, mesh, edges);
        double d;
        Vec3 n;
        if (p.kind == PairKind::VertexRigid) {
            d = rigidSdfs[size_t(p.b)](state.x[size_t(p.a)]);
            const double h = 1e-6;
            for (int k = 0; k < 3; ++k) {
                Vec3 dp = Vec3::Zero();
                dp[k] = h;
                n[k] = (rigidSdfs[size_t(p.b)](state.x[size_t(p.a)] + dp) -
                        rigidSdfs[size_t(p.b)](state.x[size_t(p.a)] - dp)) /
                       (2 * h);
            }
        } else {
            d = w.diff.norm();
            n = d > 1e-15 ? (w.diff / d).eval() : p.normal;
        }
        if (d >= config.d0) continue;
        double gap = config.d0 - d;
        double mag = 3.0 * config.penaltyStiffness * gap * gap;  // -dE/dd
        if (normalMagnitudes) (*normalMagnitudes)[pi] = mag;
        if (forces)
            for (int k = 0; k < w.count; ++k) (*forces)[size_t(w.ids[k])] += mag * w.coef[k] * n;
        if (stiffness) {
            // Gauss-Newton: keep the PSD curvature of the cubic along the
            // normal, drop the indefinite witness-rotation term
            double curve = 6.0 * config.penaltyStiffness * gap;
            Mat3 nn = curve * (n * n.transpose());
            for (int r = 0; r < w.count; ++r)
                for (int c = 0; c < w.count; ++c)
                    stiffness->addBlock(w.ids[r], w.ids[c], -(w.coef[r] * w.coef[c]) * nn);
        }
    }
}

void frictionForces(const std::vector<ProximityPair>& pairs, const std::vector<Vec3>& relativeVelocities,
                    double mu, const std::vector<double>& normalMagnitudes, double frictionEpsilon,
                    const TriMesh& mesh, const std::vector<Edge>& edges, std::vector<Vec3>* forces) {
    if (mu == 0.0) return;
    for (size_t pi = 0; pi < pairs.size(); ++pi) {
        const auto& p = pairs[pi];
        double fn = normalMagnitudes[pi];
        if (fn <= 0.0) continue;
        const Vec3& n = p.normal;
        Vec3 vt = relativeVelocities[pi] - relativeVelocities[pi].dot(n) * n;
        Vec3 ft = -mu * fn * vt / std::sqrt(vt.squaredNorm() + frictionEpsilon * frictionEpsilon);
        if (p.kind == PairKind::VertexRigid) {
            (*forces)[size_t(p.a)] += ft;
        } else if (p.kind == PairKind::VertexTriangle) {
            const Triangle& t = mesh.triangles[size_t(p.b)];
            (*forces)[size_t(p.a)] += ft;
            for (int k = 0; k < 3; ++k) (*forces)[size_t(t[k])] -= p.w[k] * ft;
        } else {
            const Edge &ea = edges[size_t(p.a)], &eb = edges[size_t(p.b)];
            (*forces)[size_t(ea.a)] += (1 - p.w[0]) * ft;
            (*forces)[size_t(ea.b)] += p.w[0] * ft;
            (*forces)[size_t(eb.a)] -= (1 - p.w[1]) * ft;
            (*forces)[size_t(eb.b)] -= p.w[1] * ft;
        }
    }
}

void frictionDamping(const std::vector<ProximityPair>& pairs,
                     const std::vector<Vec3>& relativeVelocities, double mu,
                     const std::vector<double>& normalMagnitudes, double frictionEpsilon,
                     const TriMesh& mesh, const std::vector<Edge>& edges, SparseSystem* damping) {
    if (mu == 0.0) return;
    for (size_t pi = 0; pi < pairs.size(); ++pi) {
        const auto& p = pairs[pi];
        double fn = normalMagnitudes[pi];
        if (fn <= 0.0) continue;
        const Vec3& n = p.normal;
        Vec3 vt = relativeVelocities[pi] - relativeVelocities[pi].dot(n) * n;
        double c = mu * fn / std::sqrt(vt.squaredNorm() + frictionEpsilon * frictionEpsilon);
        Mat3 tang = -c * (Mat3::Identity() - n * n.transpose());

        int ids[4];
        double coef[4];
        int count;
        if (p.kind == PairKind::VertexRigid) {
            ids[0] = p.a;
            coef[0] = 1.0;
            count = 1;
        } else if (p.kind == PairKind::VertexTriangle) {
            const Triangle& t = mesh.triangles[size_t(p.b)];
            ids[0] = p.a;
            coef[0] = 1.0;
            for (int k = 0; k < 3; ++k) {
                ids[k + 1] = t[k];
                coef[k + 1] = -p.w[k];
            }
            count = 4;
        } else {
            const Edge &ea = edges[size_t(p.a)], &eb = edges[size_t(p.b)];
            ids[0] = ea.a;
            coef[0] = 1 - p.w[0];
            ids[1] = ea.b;
            coef[1] = p.w[0];
            ids[2] = eb.a;
            coef[2] = -(1 - p.w[1]);
            ids[3] = eb.b;
            coef[3] = -p.w[1];
            count = 4;
        }
        for (int r = 0; r < count; ++r)
            for (int s = 0; s < count; ++s)
                damping->addBlock(ids[r], ids[s], coef[r] * coef[s] * tang);
    }
}

namespace {

struct CcdHit {
    double t;
    PairKind kind;  // VertexTriangle or EdgeEdge
    int a, b;
};

std::vector<CcdHit> detectCcd(const std::vector<Vec3>& x0, const std::vector<Vec3>& x1,
                              const TriMesh& mesh, const std::vector<Edge>& edges, double tol) {
    std::vector<CcdHit> hits;
    double cellSize = std::max(1e-4, meshElementScale(x0, mesh));

    auto sweptBox = [&](int v) {
        Aabb box;
        box.expand(x0[size_t(v)]);
        box.expand(x1[size_t(v)]);
        return box;
    };

    // vertex vs swept triangle
    {
        SpatialGrid grid(cellSize);
        std::vector<Aabb> triBoxes(mesh.triangles.size());
        for (int ti = 0; ti < int(mesh.triangles.size()); ++ti) {
            Aabb box;
            for (int k = 0; k < 3; ++k) box.expand(sweptBox(mesh.triangles[size_t(ti)][k]));
            box.pad(tol);
            triBoxes[size_t(ti)] = box;
            grid.insert(ti, box);
        }
        std::vector<int> cands;
        for (int vi = 0; vi < int(x0.size()); ++vi) {
            Aabb vbox = sweptBox(vi);
            grid.query(vbox, cands);
            for (int ti : cands) {
                if (!vbox.overlaps(triBoxes[size_t(ti)])) continue;
                const Triangle& t = mesh.triangles[size_t(ti)];
                if (triangleHasVertex(t, vi)) continue;
                auto hit = ccdVertexTriangle(x0[size_t(vi)], x1[size_t(vi)], x0[size_t(t[0])],
                                             x1[size_t(t[0])], x0[size_t(t[1])], x1[size_t(t[1])],
                                             x0[size_t(t[2])], x1[size_t(t[2])], tol);
                if (hit) hits.push_back({*hit, PairKind::VertexTriangle, vi, ti});
            }
        }
    }
    // edge vs swept edge
    {
        SpatialGrid grid(cellSize);
        auto edgeBox = [&](const Edge& e) {
            Aabb box;
            box.expand(sweptBox(e.a));
            box.expand(sweptBox(e.b));
            return box;
        };
        std::vector<Aabb> eBoxes(edges.size());
        for (int ei = 0; ei < int(edges.size()); ++ei) {
            Aabb box = edgeBox(edges[size_t(ei)]);
            box.pad(tol);
            eBoxes[size_t(ei)] = box;
            grid.insert(ei, box);
        }
        std::vector<int> cands;
        for (int ei = 0; ei < int(edges.size()); ++ei) {
            const Edge& ea = edges[size_t(ei)];
            Aabb abox = edgeBox(ea);
            grid.query(abox, cands);
            for (int ej : cands) {
                if (ej <= ei) continue;
                if (!abox.overlaps(eBoxes[size_t(ej)])) continue;
                const Edge& eb = edges[size_t(ej)];
                if (edgesShareVertex(ea, eb)) continue;
                auto hit = ccdEdgeEdge(x0[size_t(ea.a)], x1[size_t(ea.a)], x0[size_t(ea.b)],
                                       x1[size_t(ea.b)], x0[size_t(eb.a)], x1[size_t(eb.a)],
                                       x0[size_t(eb.b)], x1[size_t(eb.b)], tol);
                if (hit) hits.push_back({*hit, PairKind::EdgeEdge, ei, ej});
            }
        }
    }
    std::sort(hits.begin(), hits.end(), [](const CcdHit& l, const CcdHit& r) {
        if (l.t != r.t) return l.t < r.t;
        if (l.kind != r.kind) return int(l.kind) < int(r.kind);
        if (l.a != r.a) return l.a < r.a;
        return l.b < r.b;
    });
    return hits;
}

}  // namespace

std::vector<Vec3> ccdResolve(const std::vector<Vec3>& xPrev, const std::vector<Vec3>& xCandidate,
                             const TriMesh& mesh, const std::vector<Edge>& edges,
                             const CollisionConfig& config, CcdDiagnostics* diag) {
    std::vector<Vec3> x1 = xCandidate;
    const double tol = config.d0 / 10.0;    // proximity validation + safety shell
    const double sep = config.d0 / 20.0;    // target residual separation

    for (int round = 0; round < config.ccdIterationsMax; ++round) {
        auto hits = detectCcd(xPrev, x1, mesh, edges, tol);
        if (hits.empty()) return x1;

        for (const auto& h : hits) {
            if (diag) diag->impulses++;
            double t = h.t;
            auto at = [&](int v) { return xPrev[size_t(v)] + t * (x1[size_t(v)] - xPrev[size_t(v)]); };
            auto rest = [&](int v) { return (1.0 - t) * (x1[size_t(v)] - xPrev[size_t(v)]); };
            if (h.kind == PairKind::VertexTriangle) {
                const Triangle& tr = mesh.triangles[size_t(h.b)];
                Vec3 bary;
                closestPointTriangle(at(h.a), at(tr[0]), at(tr[1]), at(tr[2]), bary);
                Vec3 n = (at(tr[1]) - at(tr[0])).cross(at(tr[2]) - at(tr[0]));
                if (n.squaredNorm() < 1e-24) continue;
                n.normalize();
                Vec3 relRest = rest(h.a) - (bary[0] * rest(tr[0]) + bary[1] * rest(tr[1]) +
                                            bary[2] * rest(tr[2]));
                // side the vertex approaches from
                Vec3 approach = at(h.a) - (bary[0] * at(tr[0]) + bary[1] * at(tr[1]) +
                                           bary[2] * at(tr[2]));
                double side = approach.dot(n) >= 0 ? 1.0 : -1.0;
                double vn = relRest.dot(side * n);
                double target = sep;
                if (vn < target) {
                    double corr = target - vn;
                    double wSum = 1.0 + bary.squaredNorm();
                    x1[size_t(h.a)] += (corr / wSum) * side * n;
                    for (int k = 0; k < 3; ++k)
                        x1[size_t(tr[k])] -= (corr * bary[k] / wSum) * side * n;
                }
            } else {
                const Edge &ea = edges[size_t(h.a)], &eb = edges[size_t(h.b)];
                double s, u;
                closestSegmentSegment(at(ea.a), at(ea.b), at(eb.a), at(eb.b), s, u);
                Vec3 pa = at(ea.a) + s * (at(ea.b) - at(ea.a));
                Vec3 pb = at(eb.a) + u * (at(eb.b) - at(eb.a));
                Vec3 n = pa - pb;
                if (n.squaredNorm() < 1e-24)
                    n = (at(ea.b) - at(ea.a)).cross(at(eb.b) - at(eb.a));
                if (n.squaredNorm() < 1e-24) continue;
                n.normalize();
                Vec3 relRest = ((1 - s) * rest(ea.a) + s * rest(ea.b)) -
                               ((1 - u) * rest(eb.a) + u * rest(eb.b));
                double vn = relRest.dot(n);
                if (vn < sep) {
                    double corr = sep - vn;
                    double wSum = (1 - s) * (1 - s) + s * s + (1 - u) * (1 - u) + u * u;
                    x1[size_t(ea.a)] += (corr * (1 - s) / wSum) * n;
                    x1[size_t(ea.b)] += (corr * s / wSum) * n;
                    x1[size_t(eb.a)] -= (corr * (1 - u) / wSum) * n;
                    x1[size_t(eb.b)] -= (corr * u / wSum) * n;
                }
            }
        }
    }

    // conservative advancement: fall back to the last certified-safe fraction
    auto hits = detectCcd(xPrev, x1, mesh, edges, tol);
    if (hits.empty()) return x1;
    if (diag) diag->conservativeClamps++;
    double tSafe = std::max(0.0, hits.front().t - 1e-4);
    for (size_t i = 0; i < x1.size(); ++i)
        x1[i] = xPrev[i] + tSafe * (x1[i] - xPrev[i]);
    return x1;
}

}  // namespace robohang
