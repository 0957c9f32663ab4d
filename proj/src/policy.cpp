#include "robohang/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace robohang {

namespace {

struct Candidate {
    PrimitiveParams params;
    int violations = std::numeric_limits<int>::max();
    double margin = -std::numeric_limits<double>::max();  // tie-break, larger is better
};

void consider(Candidate& best, const PrimitiveParams& p, int violations, double margin) {
    if (violations < best.violations || (violations == best.violations && margin > best.margin)) {
        best.params = p;
        best.violations = violations;
        best.margin = margin;
    }
}

bool toPixel(const Vec3& world, const Camera& cam, int& u, int& v) {
    double du, dv;
    if (!project(world, cam, du, dv)) return false;
    u = int(std::lround(du));
    v = int(std::lround(dv));
    return u >= 0 && u < cam.width && v >= 0 && v < cam.height;
}

Vec3 sampleOnTriangles(const Episode& ep, const std::vector<int>& tris, Rng& rng) {
    const Triangle& t = ep.scene.mesh.triangles[size_t(tris[size_t(rng.uniformInt(0, int(tris.size()) - 1))])];
    double a = rng.uniform01(), b = rng.uniform01();
    if (a + b > 1.0) {
        a = 1.0 - a;
        b = 1.0 - b;
    }
    const auto& x = ep.scene.cloth.x;
    return (1.0 - a - b) * x[size_t(t[0])] + a * x[size_t(t[1])] + b * x[size_t(t[2])];
}

}  // namespace

PrimitiveParams heuristicPhase1(const Episode& ep, Rng& rng, const HeuristicRules& rules) {
    const auto& ring = ep.garment.necklineVertexIds;
    if (ring.empty() || ep.scene.necklineTriangles.empty())
        throw std::logic_error("garment has no neckline ring");
    const auto& x = ep.scene.cloth.x;

    Vec2 ringLo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
    Vec2 ringHi = -ringLo;
    Vec2 centroid = Vec2::Zero();
    for (int id : ring) {
        Vec2 p = x[size_t(id)].head<2>();
        ringLo = ringLo.cwiseMin(p);
        ringHi = ringHi.cwiseMax(p);
        centroid += p;
    }
    centroid /= double(ring.size());
    double leftThirdMaxX = ringLo.x() + (ringHi.x() - ringLo.x()) / 3.0;

    auto ringDistance = [&](const Vec2& p) {
        double d = std::numeric_limits<double>::max();
        for (int id : ring) d = std::min(d, (x[size_t(id)].head<2>() - p).norm());
        return d;
    };

    std::vector<int> liftPool;
    for (size_t i = 0; i < x.size(); ++i)
        if (ep.garment.isFrontVertex[i]) liftPool.push_back(int(i));
    if (liftPool.empty()) throw std::logic_error("garment has no front-layer vertices");

    // stage 1: press point in the neckline interior (inside the ring loop,
    // where the hanger tip can drop through the opening), left third of the
    // ring bounding box, clear of the ring itself
    std::vector<Vec2> poly;
    poly.reserve(ring.size());
    for (int id : ring) poly.push_back(x[size_t(id)].head<2>());
    auto insideRing = [&](const Vec2& p) {
        bool inside = false;
        for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
            if ((poly[i].y() > p.y()) != (poly[j].y() > p.y()) &&
                p.x() < poly[j].x() + (poly[i].x() - poly[j].x()) * (p.y() - poly[i].y()) /
                                          (poly[j].y() - poly[i].y()))
                inside = !inside;
        }
        return inside;
    };

    Candidate bestPress;
    Vec3 press = Vec3::Zero();
    for (int it = 0; it < rules.maxSamples && bestPress.violations != 0; ++it) {
        Vec2 xy(rng.uniform(ringLo.x(), leftThirdMaxX), rng.uniform(ringLo.y(), ringHi.y()));
        Vec3 cand(xy.x(), xy.y(), 0.0);
        int bad = 0;
        double rd = ringDistance(xy);
        if (!insideRing(xy)) bad += 2;
        if (rd < rules.pressRingMargin) bad++;
        PrimitiveParams p;
        if (toPixel(cand, ep.camera, p.au, p.av)) {
            if (!ep.o1.maskNeckline[ep.o1.at(p.au, p.av)]) bad++;
        } else {
            bad += 2;
            p.au = ep.camera.width / 2;
            p.av = ep.camera.height / 2;
        }
        if (bad < bestPress.violations || (bad == bestPress.violations && rd > bestPress.margin))
            press = cand;
        consider(bestPress, p, bad, rd);
    }

    // stage 2: lift point 2-6 cm from the press, away from the ring centroid;
    // restrict the sample pool to the distance annulus first so the rejection
    // budget is spent on the direction and visibility rules
    Vec2 away = (press.head<2>() - centroid).normalized();
    // ideal travel direction: the hanger's left end should come to rest half a
    // span left of the ring centroid, a little below it to clear the shoulder
    // seam; aim the press->lift line there
    double span = (ep.hanger.keypointLeft - ep.hanger.keypointRight).norm();
    Vec2 hlTarget(centroid.x() - 0.5 * span - 0.01, centroid.y() - 0.04);
    Vec2 dirTarget = hlTarget - press.head<2>();
    dirTarget = dirTarget.norm() > 1e-12 ? Vec2(dirTarget.normalized()) : away;
    std::vector<int> annulus;
    for (int id : liftPool) {
        double d = (x[size_t(id)].head<2>() - press.head<2>()).norm();
        if (d >= rules.liftMin && d <= rules.liftMax) annulus.push_back(id);
    }
    if (!annulus.empty()) liftPool = std::move(annulus);
    Candidate bestLift;
    for (int it = 0; it < rules.maxSamples; ++it) {
        const Vec3& lift = x[size_t(liftPool[size_t(rng.uniformInt(0, int(liftPool.size()) - 1))])];
        int bad = 0;
        Vec2 d = lift.head<2>() - press.head<2>();
        if (d.norm() < rules.liftMin || d.norm() > rules.liftMax) bad++;
        Vec2 dir = d.norm() > 1e-12 ? Vec2(d.normalized()) : away;
        if (dir.dot(away) < rules.liftDirCos) bad++;
        double align = dir.dot(dirTarget);
        // the hanger travels well past the lift point; only directions whose
        // travel endpoint stays on the garment can end up covered
        Vec3 probe(press.x() + rules.insertionProbe * dir.x(),
                   press.y() + rules.insertionProbe * dir.y(), 0.0);
        int pu, pv;
        if (!toPixel(probe, ep.camera, pu, pv) || !ep.o1.maskGarment[ep.o1.at(pu, pv)]) bad++;
        PrimitiveParams p;
        if (toPixel(lift, ep.camera, p.bu, p.bv)) {
            if (!ep.o1.maskGarment[ep.o1.at(p.bu, p.bv)]) bad++;
        } else {
            bad += 2;
            p.bu = ep.camera.width / 2;
            p.bv = ep.camera.height / 2;
        }
        consider(bestLift, p, bad, align);
    }

    PrimitiveParams out;
    out.au = bestPress.params.au;
    out.av = bestPress.params.av;
    out.bu = bestLift.params.bu;
    out.bv = bestLift.params.bv;
    out.degraded = bestPress.violations != 0 || bestLift.violations != 0;
    return out;
}

PrimitiveParams heuristicPhase2(const Episode& ep, Rng& rng, const HeuristicRules& rules) {
    if (ep.s1 < 0) throw std::logic_error("phase 1 has not executed");
    const Observation& obs = ep.o2;
    const auto& ring = ep.garment.necklineVertexIds;
    if (ring.empty()) throw std::logic_error("garment has no neckline ring");
    const auto& x = ep.scene.cloth.x;

    int uLo = obs.width, uHi = -1, vLo = obs.height, vHi = -1;
    for (int v = 0; v < obs.height; ++v)
        for (int u = 0; u < obs.width; ++u)
            if (obs.maskGarment[obs.at(u, v)]) {
                uLo = std::min(uLo, u);
                uHi = std::max(uHi, u);
                vLo = std::min(vLo, v);
                vHi = std::max(vHi, v);
            }
    if (uHi < 0) {
        PrimitiveParams p{obs.width / 2, obs.height / 2, obs.width / 2, obs.height / 2, true};
        return p;
    }
    int uFrom = uLo + int(std::lround((1.0 - rules.dragRightFraction) * (uHi - uLo)));
    int vTo = vLo + int(std::lround(rules.dragUpperFraction * (vHi - vLo)));

    // right end of the neckline ring in world coordinates
    Vec3 ringRight = x[size_t(ring[0])];
    for (int id : ring)
        if (x[size_t(id)].x() > ringRight.x()) ringRight = x[size_t(id)];

    // the rotation swings the right end from H_l through p_rotate out to a
    // full hanger span; prefer aims whose swept endpoint stays on the garment
    Vec2 hl = hangerLeft(ep).head<2>();
    double span = (ep.hanger.keypointLeft - ep.hanger.keypointRight).norm();

    Candidate best;
    for (int it = 0; it < rules.maxSamples; ++it) {
        PrimitiveParams p;
        p.au = rng.uniformInt(uFrom, uHi);
        p.av = rng.uniformInt(vLo, vTo);
        int bad = obs.maskGarment[obs.at(p.au, p.av)] ? 0 : 1;

        Vec3 rotate = ringRight + Vec3(rng.uniform(rules.rotateOffsetMin, rules.rotateOffsetMax),
                                       rng.uniform(-rules.rotateJitter, 0.0), 0.0);
        if (!toPixel(rotate, ep.camera, p.bu, p.bv)) {
            bad += 2;
            p.bu = obs.width / 2;
            p.bv = obs.height / 2;
        }
        Vec2 aim = rotate.head<2>() - hl;
        double margin = 0.0;
        if (aim.norm() > 1e-12) {
            aim.normalize();
            Vec2 hrPred = hl + span * aim;
            int qu, qv;
            if (!toPixel(Vec3(hrPred.x(), hrPred.y(), 0.0), ep.camera, qu, qv) ||
                !obs.maskGarment[obs.at(qu, qv)])
                bad++;
            Vec2 hrIn = hrPred - 0.02 * aim;
            if (!toPixel(Vec3(hrIn.x(), hrIn.y(), 0.0), ep.camera, qu, qv) ||
                !obs.maskGarment[obs.at(qu, qv)])
                bad++;
            // the dragged flap must tent over the landing spot; require the
            // grasp's dragged-to endpoint to stop close past the right end
            const PrimitiveGeometry& geo = ep.config.geometry;
            double th = geo.dragAngleDeg * M_PI / 180.0;
            Vec2 dragDir(std::cos(th), -std::sin(th));
            Vec2 dragW = backProject(p.au, p.av, ep.camera, ep.scene.tableZ).head<2>();
            Vec2 held = dragW + geo.dragDistance * dragDir;
            double reach = (held - hrPred).norm();
            if (reach > 0.04) bad++;
            margin = -reach;
        }

        consider(best, p, bad, margin);
        if (bad == 0) return best.params;
    }
    best.params.degraded = true;
    return best.params;
}

std::pair<int, int> argmaxPixel(const std::vector<float>& map, int width, int height) {
    if (int(map.size()) != width * height || map.empty())
        throw std::invalid_argument("score map size mismatch");
    size_t bestIdx = 0;
    for (size_t i = 1; i < map.size(); ++i)
        if (map[i] > map[bestIdx]) bestIdx = i;
    return {int(bestIdx) % width, int(bestIdx) / width};
}

std::pair<int, int> softmaxSamplePixel(const std::vector<float>& map, int width, int height,
                                       double temperature, Rng& rng) {
    if (int(map.size()) != width * height || map.empty())
        throw std::invalid_argument("score map size mismatch");
    if (!(temperature > 0)) throw std::invalid_argument("temperature must be positive");
    float peak = *std::max_element(map.begin(), map.end());
    std::vector<double> cumulative(map.size());
    double total = 0.0;
    for (size_t i = 0; i < map.size(); ++i) {
        total += std::exp((double(map[i]) - double(peak)) / temperature);
        cumulative[i] = total;
    }
    double r = rng.uniform01() * total;
    size_t idx = size_t(std::lower_bound(cumulative.begin(), cumulative.end(), r) -
                        cumulative.begin());
    idx = std::min(idx, map.size() - 1);
    return {int(idx) % width, int(idx) / width};
}

std::pair<int, int> actFromMap(const std::vector<float>& map, int width, int height,
                               const Exploration& exploration, Rng* rng) {
    if (rng && exploration.epsilon > 0 && rng->uniform01() < exploration.epsilon)
        return softmaxSamplePixel(map, width, height, exploration.temperature, *rng);
    return argmaxPixel(map, width, height);
}

}  // namespace robohang
