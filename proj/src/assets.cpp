#include "robohang/assets.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>

using nlohmann::json;

namespace robohang {

const char* toString(GarmentKind k) {
    switch (k) {
        case GarmentKind::Tee: return "tee";
        case GarmentKind::Tank: return "tank";
        case GarmentKind::OpenCollar: return "open-collar";
    }
    return "tee";
}

GarmentKind garmentKindFromString(const std::string& s) {
    if (s == "tee") return GarmentKind::Tee;
    if (s == "tank") return GarmentKind::Tank;
    if (s == "open-collar") return GarmentKind::OpenCollar;
    throw std::invalid_argument("unknown garment kind: " + s);
}

void GarmentSpec::validate() const {
    if (torsoWidth <= 0 || torsoHeight <= 0 || necklineWidth <= 0 || necklineDepth <= 0 ||
        meshResolution <= 0)
        throw std::invalid_argument("garment dimensions must be strictly positive");
    if (kind != GarmentKind::Tank && sleeveLength < 0)
        throw std::invalid_argument("sleeveLength must be non-negative");
    if (necklineWidth >= torsoWidth)
        throw std::invalid_argument("necklineWidth must be smaller than torsoWidth");
    if (necklineDepth >= 0.6 * torsoHeight)
        throw std::invalid_argument("necklineDepth too large for torsoHeight");
    if (meshResolution > 0.5 * necklineWidth)
        throw std::invalid_argument("meshResolution too coarse for the neckline");
}

void HangerSpec::validate() const {
    if (shoulderWidth <= 0 || capsuleRadius <= 0)
        throw std::invalid_argument("hanger dimensions must be strictly positive");
    if (shoulderDroopLeft < 0 || shoulderDroopRight < 0 || shoulderDroopLeft > 0.8 ||
        shoulderDroopRight > 0.8)
        throw std::invalid_argument("shoulder droop out of range [0, 0.8] rad");
}

namespace {

// rest-pose z separation between the two flat panels
constexpr double kPanelGap = 0.0025;

struct PanelGrid {
    int nCols = 0, nRows = 0;  // vertices: nCols x (nRows+1)
    int center = 0;            // center column index
    int torsoHalfCols = 0;     // columns with |i-center| <= this are torso
    int neckHalfCols = 0;      // columns with |i-center| < this carry neckline depth
    int bandRow = 0;           // sleeve columns are active for j >= bandRow
    bool hasSleeves = false;
    double dx = 0, height = 0;

    bool vertexActive(int i, int j) const {
        if (j < 0 || j > nRows || i < 0 || i >= nCols) return false;
        if (std::abs(i - center) <= torsoHalfCols) return true;
        return hasSleeves && j >= bandRow;
    }
    bool cellActive(int i, int j) const {
        return vertexActive(i, j) && vertexActive(i + 1, j) && vertexActive(i, j + 1) &&
               vertexActive(i + 1, j + 1);
    }
    bool boundaryVertex(int i, int j) const {
        if (!vertexActive(i, j)) return false;
        return !(cellActive(i, j) && cellActive(i - 1, j) && cellActive(i, j - 1) &&
                 cellActive(i - 1, j - 1));
    }
    double colX(int i) const { return (i - center) * dx; }
};

double necklineDepthAt(const GarmentSpec& spec, const PanelGrid& g, int i, bool front) {
    int off = std::abs(i - g.center);
    if (off >= g.neckHalfCols) return 0.0;
    double xr = double(off) / double(g.neckHalfCols);
    double depth = front ? spec.necklineDepth : 0.3 * spec.necklineDepth;
    if (spec.kind == GarmentKind::OpenCollar && front) return depth * (1.0 - xr);
    return depth * std::sqrt(std::max(0.0, 1.0 - xr * xr));
}

}  // namespace

GarmentAsset generateGarment(const GarmentSpec& spec) {
    spec.validate();

    PanelGrid g;
    g.height = spec.torsoHeight;
    g.hasSleeves = spec.kind == GarmentKind::Tee && spec.sleeveLength > 0;
    double res = spec.meshResolution;
    double hw = 0.5 * spec.torsoWidth;
    double halfSpan = hw + (g.hasSleeves ? spec.sleeveLength : 0.0);
    int halfCols = std::max(3, int(std::ceil(halfSpan / res)));
    g.dx = halfSpan / halfCols;
    g.nCols = 2 * halfCols + 1;
    g.center = halfCols;
    g.torsoHalfCols = std::max(2, int(std::round(hw / g.dx)));
    if (g.torsoHalfCols > halfCols) g.torsoHalfCols = halfCols;
    g.neckHalfCols = std::max(2, int(std::round(0.5 * spec.necklineWidth / g.dx)));
    if (g.neckHalfCols >= g.torsoHalfCols)
        throw std::invalid_argument("neckline meshes as wide as the torso; refine meshResolution");
    g.nRows = std::max(4, int(std::ceil(spec.torsoHeight / res)));
    double dy = spec.torsoHeight / g.nRows;
    int bandRows = std::max(2, int(std::round(std::min(0.12, 0.3 * spec.torsoHeight) / dy)));
    g.bandRow = g.nRows - bandRows;

    // open (unsewn) boundary vertices
    auto isOpen = [&](int i, int j) {
        int off = std::abs(i - g.center);
        if (j == g.nRows && off < g.neckHalfCols) return true;           // neckline
        if (j == 0 && off < g.torsoHalfCols) return true;                // hem
        if (g.hasSleeves && (i == 0 || i == g.nCols - 1) && j > g.bandRow && j < g.nRows)
            return true;                                                 // cuffs
        return false;
    };

    GarmentAsset asset;
    asset.spec = spec;
    TriMesh& mesh = asset.mesh;

    std::vector<int> frontIdx(size_t(g.nCols) * size_t(g.nRows + 1), -1);
    std::vector<int> backIdx(size_t(g.nCols) * size_t(g.nRows + 1), -1);
    auto at = [&](std::vector<int>& v, int i, int j) -> int& {
        return v[size_t(j) * size_t(g.nCols) + size_t(i)];
    };

    auto warpedY = [&](int i, int j, bool front) {
        double d = necklineDepthAt(spec, g, i, front);
        return (double(j) * dy) * (g.height - d) / g.height;
    };

    // front panel (z = gap, welded seams at gap/2)
    for (int j = 0; j <= g.nRows; ++j) {
        for (int i = 0; i < g.nCols; ++i) {
            if (!g.vertexActive(i, j)) continue;
            bool welded = g.boundaryVertex(i, j) && !isOpen(i, j);
            double y = warpedY(i, j, true);
            at(frontIdx, i, j) = int(mesh.vertices.size());
            mesh.vertices.emplace_back(g.colX(i), y, welded ? 0.5 * kPanelGap : kPanelGap);
            mesh.restUV.emplace_back(g.colX(i), y);
            asset.isFrontVertex.push_back(1);
        }
    }
    // back panel, sharing welded vertices
    for (int j = 0; j <= g.nRows; ++j) {
        for (int i = 0; i < g.nCols; ++i) {
            if (!g.vertexActive(i, j)) continue;
            bool welded = g.boundaryVertex(i, j) && !isOpen(i, j);
            if (welded) {
                at(backIdx, i, j) = at(frontIdx, i, j);
                continue;
            }
            double y = warpedY(i, j, false);
            at(backIdx, i, j) = int(mesh.vertices.size());
            mesh.vertices.emplace_back(g.colX(i), y, 0.0);
            mesh.restUV.emplace_back(g.colX(i), y);
            asset.isFrontVertex.push_back(0);
        }
    }

    size_t frontTriCount = 0;
    auto isWelded = [&](int i, int j) { return g.boundaryVertex(i, j) && !isOpen(i, j); };
    auto emitQuad = [&](std::vector<int>& idx, int i, int j, bool flip) {
        int v00 = at(idx, i, j), v10 = at(idx, i + 1, j);
        int v01 = at(idx, i, j + 1), v11 = at(idx, i + 1, j + 1);
        bool diag = ((i + j) & 1) != 0;
        // a diagonal joining two welded vertices would be shared by four
        // triangles after sewing; pick the other one
        if (diag && isWelded(i, j) && isWelded(i + 1, j + 1)) diag = false;
        if (!diag && isWelded(i + 1, j) && isWelded(i, j + 1)) diag = true;
        std::array<std::array<int, 3>, 2> tris;
        if (diag) {
            tris = {{{v00, v10, v11}, {v00, v11, v01}}};
        } else {
            tris = {{{v00, v10, v01}, {v10, v11, v01}}};
        }
        for (auto t : tris) {
            if (flip) std::swap(t[1], t[2]);
            mesh.triangles.push_back({t});
        }
    };
    for (int j = 0; j < g.nRows; ++j)
        for (int i = 0; i < g.nCols - 1; ++i)
            if (g.cellActive(i, j)) emitQuad(frontIdx, i, j, false);
    frontTriCount = mesh.triangles.size();
    for (int j = 0; j < g.nRows; ++j)
        for (int i = 0; i < g.nCols - 1; ++i)
            if (g.cellActive(i, j)) emitQuad(backIdx, i, j, true);

    // reject degenerate rest triangles
    for (const auto& t : mesh.triangles) {
        Vec2 a = mesh.restUV[size_t(t[0])], b = mesh.restUV[size_t(t[1])], c = mesh.restUV[size_t(t[2])];
        double area = 0.5 * std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
        if (area <= 1e-10) throw std::invalid_argument("spec meshes with degenerate triangles");
    }

    // neckline ring: front top curve left-to-right, then back curve right-to-left,
    // joined at the welded shoulder endpoints
    std::vector<int> ring;
    ring.push_back(at(frontIdx, g.center - g.neckHalfCols, g.nRows));
    for (int i = g.center - g.neckHalfCols + 1; i < g.center + g.neckHalfCols; ++i)
        ring.push_back(at(frontIdx, i, g.nRows));
    ring.push_back(at(frontIdx, g.center + g.neckHalfCols, g.nRows));
    for (int i = g.center + g.neckHalfCols - 1; i > g.center - g.neckHalfCols; --i)
        ring.push_back(at(backIdx, i, g.nRows));
    // orient counter-clockwise viewed from +z
    double area2 = 0;
    for (size_t k = 0; k < ring.size(); ++k) {
        const Vec3& p = mesh.vertices[size_t(ring[k])];
        const Vec3& q = mesh.vertices[size_t(ring[(k + 1) % ring.size()])];
        area2 += p.x() * q.y() - q.x() * p.y();
    }
    if (area2 < 0) std::reverse(ring.begin(), ring.end());
    asset.necklineVertexIds = ring;

    // seam edges: shared by one front and one back triangle
    std::map<std::pair<int, int>, std::pair<bool, bool>> edgePanels;
    for (size_t tIdx = 0; tIdx < mesh.triangles.size(); ++tIdx) {
        const auto& t = mesh.triangles[tIdx];
        bool front = tIdx < frontTriCount;
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            auto& flags = edgePanels[{a, b}];
            (front ? flags.first : flags.second) = true;
        }
    }
    for (const auto& [e, flags] : edgePanels)
        if (flags.first && flags.second) asset.seamEdgeIds.push_back({e.first, e.second});

    return asset;
}

std::vector<int> GarmentAsset::necklineRegionTriangles(double radius) const {
    // Dijkstra over mesh edges from the ring vertices
    size_t n = mesh.vertexCount();
    std::vector<double> dist(n, std::numeric_limits<double>::max());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (int v : necklineVertexIds) {
        dist[size_t(v)] = 0.0;
        heap.push({0.0, v});
    }
    std::vector<std::vector<std::pair<int, double>>> adj(n);
    for (const auto& e : mesh.uniqueEdges()) {
        double len = (mesh.vertices[size_t(e.a)] - mesh.vertices[size_t(e.b)]).norm();
        adj[size_t(e.a)].push_back({e.b, len});
        adj[size_t(e.b)].push_back({e.a, len});
    }
    while (!heap.empty()) {
        auto [d, v] = heap.top();
        heap.pop();
        if (d > dist[size_t(v)] || d > radius) continue;
        for (auto [u, len] : adj[size_t(v)]) {
            if (d + len < dist[size_t(u)]) {
                dist[size_t(u)] = d + len;
                heap.push({d + len, u});
            }
        }
    }
    std::vector<int> tris;
    for (size_t t = 0; t < mesh.triangleCount(); ++t) {
        const auto& f = mesh.triangles[t];
        if (dist[size_t(f[0])] <= radius || dist[size_t(f[1])] <= radius || dist[size_t(f[2])] <= radius)
            tris.push_back(int(t));
    }
    return tris;
}

HangerModel generateHanger(const HangerSpec& spec) {
    spec.validate();
    HangerModel model;
    model.spec = spec;
    model.capsuleRadius = spec.capsuleRadius;

    double hw = 0.5 * spec.shoulderWidth;
    const int nShoulder = 24;
    std::vector<Vec3> shoulder;
    for (int k = 0; k <= nShoulder; ++k) {
        double x = -hw + spec.shoulderWidth * double(k) / nShoulder;
        double droop = x < 0 ? spec.shoulderDroopLeft : spec.shoulderDroopRight;
        double z = -std::tan(droop) * x * x / hw;
        shoulder.emplace_back(x, 0.0, z);
    }
    // normalize so the endpoint distance is exactly shoulderWidth
    double span = (shoulder.back() - shoulder.front()).norm();
    double scale = spec.shoulderWidth / span;
    for (auto& p : shoulder) p *= scale;

    std::vector<Vec3> hook;
    const double hookRise = 0.05, hookR = 0.025;
    Vec3 apex = shoulder[size_t(nShoulder / 2)];
    hook.push_back(apex);
    hook.push_back(apex + Vec3(0, 0, hookRise));
    Vec3 arcCenter = apex + Vec3(-hookR, 0, hookRise);
    const int nArc = 12;
    for (int k = 1; k <= nArc; ++k) {
        double theta = (4.0 * M_PI / 3.0) * double(k) / nArc;  // 240 degree planar arc
        hook.push_back(arcCenter + hookR * Vec3(std::cos(theta), 0.0, std::sin(theta)));
    }

    model.polylines.push_back(shoulder);
    model.polylines.push_back(hook);
    if (spec.hasCrossbar) {
        int inset = std::max(1, nShoulder / 10);
        model.polylines.push_back({shoulder[size_t(inset)], shoulder[size_t(nShoulder - inset)]});
    }

    model.keypointLeft = shoulder.front();
    model.keypointRight = shoulder.back();
    model.keypointGrasp = arcCenter + hookR * Vec3(0, 0, 1);  // top of the hook arc
    return model;
}

std::vector<std::pair<Vec3, Vec3>> HangerModel::segments() const {
    std::vector<std::pair<Vec3, Vec3>> segs;
    for (const auto& line : polylines)
        for (size_t i = 0; i + 1 < line.size(); ++i) segs.push_back({line[i], line[i + 1]});
    return segs;
}

double hangerSdf(const HangerModel& model, const Vec3& point, Vec3* gradient) {
    double best = std::numeric_limits<double>::max();
    Vec3 bestClosest = Vec3::Zero();
    for (const auto& line : model.polylines) {
        for (size_t i = 0; i + 1 < line.size(); ++i) {
            const Vec3 &a = line[i], &b = line[i + 1];
            Vec3 ab = b - a;
            double len2 = ab.squaredNorm();
            double t = len2 > 0 ? std::clamp((point - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
            Vec3 c = a + t * ab;
            double d = (point - c).norm();
            if (d < best) {
                best = d;
                bestClosest = c;
            }
        }
    }
    if (gradient) {
        Vec3 dir = point - bestClosest;
        double n = dir.norm();
        *gradient = n > 1e-12 ? Vec3(dir / n) : Vec3(0, 0, 1);
    }
    return best - model.capsuleRadius;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

json garmentSpecToJson(const GarmentSpec& s) {
    return json{{"kind", toString(s.kind)},
                {"torsoWidth", s.torsoWidth},
                {"torsoHeight", s.torsoHeight},
                {"sleeveLength", s.sleeveLength},
                {"necklineWidth", s.necklineWidth},
                {"necklineDepth", s.necklineDepth},
                {"meshResolution", s.meshResolution},
                {"seed", s.seed}};
}

GarmentSpec garmentSpecFromJson(const json& j) {
    GarmentSpec s;
    s.kind = garmentKindFromString(j.at("kind").get<std::string>());
    s.torsoWidth = j.at("torsoWidth");
    s.torsoHeight = j.at("torsoHeight");
    s.sleeveLength = j.at("sleeveLength");
    s.necklineWidth = j.at("necklineWidth");
    s.necklineDepth = j.at("necklineDepth");
    s.meshResolution = j.at("meshResolution");
    s.seed = j.at("seed");
    return s;
}

}  // namespace

void saveGarment(const GarmentAsset& asset, const std::string& pathPrefix) {
    if (!writeObj(pathPrefix + ".obj", asset.mesh.vertices, asset.mesh.triangles))
        throw std::runtime_error("cannot write " + pathPrefix + ".obj");
    json meta;
    meta["type"] = "garment";
    meta["spec"] = garmentSpecToJson(asset.spec);
    meta["necklineVertexIds"] = asset.necklineVertexIds;
    json seams = json::array();
    for (const auto& e : asset.seamEdgeIds) seams.push_back({e.a, e.b});
    meta["seamEdgeIds"] = seams;
    json uv = json::array();
    for (const auto& p : asset.mesh.restUV) uv.push_back({p.x(), p.y()});
    meta["restUV"] = uv;
    meta["isFrontVertex"] = asset.isFrontVertex;
    std::ofstream out(pathPrefix + ".meta.json");
    if (!out) throw std::runtime_error("cannot write " + pathPrefix + ".meta.json");
    out << meta.dump(1);
}

GarmentAsset loadGarment(const std::string& pathPrefix) {
    GarmentAsset asset;
    if (!readObj(pathPrefix + ".obj", asset.mesh.vertices, asset.mesh.triangles))
        throw std::runtime_error("cannot read " + pathPrefix + ".obj");
    std::ifstream in(pathPrefix + ".meta.json");
    if (!in) throw std::runtime_error("cannot read " + pathPrefix + ".meta.json");
    json meta = json::parse(in);
    asset.spec = garmentSpecFromJson(meta.at("spec"));
    asset.necklineVertexIds = meta.at("necklineVertexIds").get<std::vector<int>>();
    for (const auto& e : meta.at("seamEdgeIds")) asset.seamEdgeIds.push_back({e[0], e[1]});
    for (const auto& p : meta.at("restUV")) asset.mesh.restUV.emplace_back(p[0], p[1]);
    asset.isFrontVertex = meta.at("isFrontVertex").get<std::vector<char>>();
    return asset;
}

void saveHanger(const HangerModel& model, const std::string& pathPrefix) {
    if (!writeObj(pathPrefix + ".obj", {}, {}, model.polylines))
        throw std::runtime_error("cannot write " + pathPrefix + ".obj");
    json meta;
    meta["type"] = "hanger";
    meta["spec"] = json{{"shoulderWidth", model.spec.shoulderWidth},
                        {"shoulderDroopLeft", model.spec.shoulderDroopLeft},
                        {"shoulderDroopRight", model.spec.shoulderDroopRight},
                        {"hasCrossbar", model.spec.hasCrossbar},
                        {"capsuleRadius", model.spec.capsuleRadius},
                        {"seed", model.spec.seed}};
    meta["capsuleRadius"] = model.capsuleRadius;
    json lines = json::array();
    for (const auto& line : model.polylines) {
        json pts = json::array();
        for (const auto& p : line) pts.push_back({p.x(), p.y(), p.z()});
        lines.push_back(pts);
    }
    meta["polylines"] = lines;
    auto pt = [](const Vec3& p) { return json{p.x(), p.y(), p.z()}; };
    meta["keypoints"] = json{{"H_g", pt(model.keypointGrasp)},
                             {"H_l", pt(model.keypointLeft)},
                             {"H_r", pt(model.keypointRight)}};
    std::ofstream out(pathPrefix + ".meta.json");
    if (!out) throw std::runtime_error("cannot write " + pathPrefix + ".meta.json");
    out << meta.dump(1);
}

HangerModel loadHanger(const std::string& pathPrefix) {
    std::ifstream in(pathPrefix + ".meta.json");
    if (!in) throw std::runtime_error("cannot read " + pathPrefix + ".meta.json");
    json meta = json::parse(in);
    HangerModel model;
    const json& s = meta.at("spec");
    model.spec.shoulderWidth = s.at("shoulderWidth");
    model.spec.shoulderDroopLeft = s.at("shoulderDroopLeft");
    model.spec.shoulderDroopRight = s.at("shoulderDroopRight");
    model.spec.hasCrossbar = s.at("hasCrossbar");
    model.spec.capsuleRadius = s.at("capsuleRadius");
    model.spec.seed = s.at("seed");
    model.capsuleRadius = meta.at("capsuleRadius");
    for (const auto& line : meta.at("polylines")) {
        std::vector<Vec3> pts;
        for (const auto& p : line) pts.emplace_back(p[0], p[1], p[2]);
        model.polylines.push_back(std::move(pts));
    }
    auto pt = [](const json& p) { return Vec3(p[0], p[1], p[2]); };
    model.keypointGrasp = pt(meta.at("keypoints").at("H_g"));
    model.keypointLeft = pt(meta.at("keypoints").at("H_l"));
    model.keypointRight = pt(meta.at("keypoints").at("H_r"));
    return model;
}

GarmentSpec randomGarmentSpec(uint64_t seed) {
    Rng rng = Rng::stream(seed, 0xA55E75);
    GarmentSpec s;
    s.seed = seed;
    switch (rng.uniformInt(0, 2)) {
        case 0: s.kind = GarmentKind::Tee; break;
        case 1: s.kind = GarmentKind::Tank; break;
        default: s.kind = GarmentKind::OpenCollar; break;
    }
    s.torsoWidth = rng.uniform(0.38, 0.52);
    s.torsoHeight = rng.uniform(0.48, 0.64);
    s.sleeveLength = rng.uniform(0.08, 0.16);
    s.necklineWidth = rng.uniform(0.16, 0.22);
    s.necklineDepth = s.kind == GarmentKind::OpenCollar ? rng.uniform(0.08, 0.12)
                                                        : rng.uniform(0.05, 0.09);
    return s;
}

HangerSpec randomHangerSpec(uint64_t seed) {
    Rng rng = Rng::stream(seed, 0x4A46E2);
    HangerSpec s;
    s.seed = seed;
    s.shoulderWidth = rng.uniform(0.36, 0.44);
    s.shoulderDroopLeft = rng.uniform(0.2, 0.4);
    s.shoulderDroopRight = s.shoulderDroopLeft + rng.uniform(-0.05, 0.05);
    s.hasCrossbar = rng.uniform01() < 0.7;
    s.capsuleRadius = rng.uniform(0.0025, 0.0040);
    return s;
}

}  // namespace robohang
