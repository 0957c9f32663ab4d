#include "robohang/env.hpp"

#include "robohang/geometry.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace robohang;

namespace {

// closed axis-aligned box with outward-facing triangles
TriMesh makeBox(const Vec3& lo, const Vec3& hi) {
    TriMesh m;
    for (int k = 0; k < 8; ++k)
        m.vertices.emplace_back(k & 1 ? hi.x() : lo.x(), k & 2 ? hi.y() : lo.y(),
                                k & 4 ? hi.z() : lo.z());
    auto quad = [&](int a, int b, int c, int d) {
        m.triangles.push_back({{a, b, c}});
        m.triangles.push_back({{a, c, d}});
    };
    quad(0, 2, 3, 1);  // z = lo (normal -z)
    quad(4, 5, 7, 6);  // z = hi (normal +z)
    quad(0, 1, 5, 4);  // y = lo
    quad(2, 6, 7, 3);  // y = hi
    quad(0, 4, 6, 2);  // x = lo
    quad(1, 3, 7, 5);  // x = hi
    return m;
}

// octahedron subdivided toward a sphere of radius r (closed, outward)
TriMesh makeSphereMesh(const Vec3& center, double r, int levels) {
    TriMesh m;
    m.vertices = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0),
                  Vec3(0, -1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1)};
    m.triangles = {{{0, 2, 4}}, {{2, 1, 4}}, {{1, 3, 4}}, {{3, 0, 4}},
                   {{2, 0, 5}}, {{1, 2, 5}}, {{3, 1, 5}}, {{0, 3, 5}}};
    for (int l = 0; l < levels; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            int id = int(m.vertices.size());
            m.vertices.push_back((m.vertices[size_t(a)] + m.vertices[size_t(b)]).normalized());
            mid[key] = id;
            return id;
        };
        std::vector<Triangle> next;
        for (const Triangle& t : m.triangles) {
            int ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
            next.push_back({{t[0], ab, ca}});
            next.push_back({{t[1], bc, ab}});
            next.push_back({{t[2], ca, bc}});
            next.push_back({{ab, bc, ca}});
        }
        m.triangles = std::move(next);
    }
    for (Vec3& v : m.vertices) v = center + r * v.normalized();
    return m;
}

EpisodeConfig coarseConfig(uint64_t seed) {
    EpisodeConfig cfg;
    cfg.seed = seed;
    cfg.garment.meshResolution = 0.05;
    cfg.poseNoiseTranslation = 0.0;
    cfg.poseNoiseYawDeg = 0.0;
    return cfg;
}

Vec3 clothCentroid(const Scene& s) {
    Vec3 c = Vec3::Zero();
    for (const Vec3& v : s.cloth.x) c += v;
    return c / double(s.cloth.x.size());
}

}  // namespace

TEST_CASE("winding number of closed and open surfaces") {
    TriMesh cube = makeBox(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
    SECTION("interior is one, exterior is zero") {
        REQUIRE(windingNumber(Vec3(0.1, -0.2, 0.3), cube.vertices, cube.triangles) ==
                Catch::Approx(1.0).margin(1e-9));
        REQUIRE(windingNumber(Vec3(2, 0.3, -1), cube.vertices, cube.triangles) ==
                Catch::Approx(0.0).margin(1e-9));
    }
    SECTION("half-open cube subtends one half at the missing face") {
        TriMesh open = cube;
        open.triangles.erase(open.triangles.begin() + 2, open.triangles.begin() + 4);  // z = hi
        REQUIRE(windingNumber(Vec3(0, 0, 0.5), open.vertices, open.triangles) ==
                Catch::Approx(0.5).margin(1e-6));
    }
    SECTION("surface point is rejected") {
        REQUIRE_THROWS_AS(windingNumber(Vec3(0.5, 0, 0), cube.vertices, cube.triangles),
                          std::domain_error);
    }
}

TEST_CASE("ray coverage") {
    TriMesh sphere = makeSphereMesh(Vec3(0.2, -0.1, 0.4), 0.15, 3);
    SECTION("enclosed point sees every ray hit") {
        Rng rng(1);
        REQUIRE(rayCoverage(Vec3(0.2, -0.1, 0.4), sphere.vertices, sphere.triangles, 512, rng) ==
                1.0);
    }
    SECTION("distant point sees nothing") {
        Rng rng(2);
        REQUIRE(rayCoverage(Vec3(5, 5, 5), sphere.vertices, sphere.triangles, 512, rng) == 0.0);
    }
    SECTION("agrees with the winding number on closed meshes") {
        // hit/no-hit coverage of an exterior point near the surface measures the
        // subtended solid angle, not the winding number, so sample points that are
        // clearly inside or clearly outside
        Rng pointRng(3);
        for (int i = 0; i < 50; ++i) {
            double d = i % 2 ? pointRng.uniform(0.0, 0.8 * 0.15) : pointRng.uniform(0.5, 0.9);
            Vec3 p = Vec3(0.2, -0.1, 0.4) + d * pointRng.unitSphere();
            double w;
            try {
                w = windingNumber(p, sphere.vertices, sphere.triangles);
            } catch (const std::domain_error&) {
                continue;
            }
            Rng rayRng(100 + uint64_t(i));
            double f = rayCoverage(p, sphere.vertices, sphere.triangles, 512, rayRng);
            REQUIRE(f == Catch::Approx(std::abs(w)).margin(0.03));
        }
    }
    SECTION("extra enclosing geometry never decreases coverage") {
        TriMesh shell = makeSphereMesh(Vec3(0.2, -0.1, 0.4), 0.5, 2);
        Rng pointRng(4);
        for (int i = 0; i < 10; ++i) {
            Vec3 p = Vec3(0.2, -0.1, 0.4) + 0.3 * pointRng.unitSphere() * pointRng.uniform01();
            Rng r1(7), r2(7);
            double base = rayCoverage(p, sphere.vertices, sphere.triangles, 256, r1);
            TriMesh both = sphere;
            int off = int(both.vertices.size());
            both.vertices.insert(both.vertices.end(), shell.vertices.begin(), shell.vertices.end());
            for (Triangle t : shell.triangles)
                both.triangles.push_back({{t[0] + off, t[1] + off, t[2] + off}});
            double more = rayCoverage(p, both.vertices, both.triangles, 256, r2);
            REQUIRE(more >= base);
        }
    }
}

TEST_CASE("reset produces a settled flat garment") {
    Episode ep = reset(coarseConfig(5));
    SECTION("zero pose noise keeps the centroid at the origin") {
        Vec3 c = clothCentroid(ep.scene);
        REQUIRE(std::hypot(c.x(), c.y()) <= 1e-3);
    }
    SECTION("cloth is at rest on the table") {
        double vmax = 0;
        double zmin = std::numeric_limits<double>::max();
        for (size_t i = 0; i < ep.scene.cloth.x.size(); ++i) {
            vmax = std::max(vmax, ep.scene.cloth.v[i].norm());
            zmin = std::min(zmin, ep.scene.cloth.x[i].z());
        }
        REQUIRE(vmax <= 1e-3);
        REQUIRE(zmin >= -ep.config.collision.d0);
    }
    SECTION("observation sees garment and neckline but no hanger pixels in frame center") {
        int garment = 0, neck = 0;
        for (size_t i = 0; i < ep.o1.maskGarment.size(); ++i) {
            garment += ep.o1.maskGarment[i];
            neck += ep.o1.maskNeckline[i];
        }
        REQUIRE(garment > 100);
        REQUIRE(neck > 10);
        REQUIRE(neck < garment);
    }
    SECTION("same seed reproduces the observation bitwise") {
        Episode ep2 = reset(coarseConfig(5));
        REQUIRE(ep2.o1.depth == ep.o1.depth);
        REQUIRE(ep2.o1.maskGarment == ep.o1.maskGarment);
        REQUIRE(ep2.o1.maskNeckline == ep.o1.maskNeckline);
        for (size_t i = 0; i < ep.scene.cloth.x.size(); ++i)
            REQUIRE(ep2.scene.cloth.x[i] == ep.scene.cloth.x[i]);
    }
    SECTION("different seeds move the garment") {
        EpisodeConfig noisy = coarseConfig(6);
        noisy.poseNoiseTranslation = 0.03;
        noisy.poseNoiseYawDeg = 10.0;
        Episode ep2 = reset(noisy);
        Vec3 c = clothCentroid(ep2.scene);
        REQUIRE(std::hypot(c.x(), c.y()) > 1e-4);
        REQUIRE(std::hypot(c.x(), c.y()) <= 0.031);
    }
}

TEST_CASE("primitive parameter validation") {
    Episode ep = reset(coarseConfig(7));
    SECTION("out-of-bounds pixels are rejected") {
        PrimitiveParams p{-1, 4, 10, 10};
        REQUIRE_THROWS_AS(execPressAndLift(ep, p), ParamRejected);
        p = PrimitiveParams{10, 10, 128, 0};
        REQUIRE_THROWS_AS(execPressAndLift(ep, p), ParamRejected);
    }
    SECTION("empty-table pixels are rejected") {
        // find a garment-free pixel and a neckline pixel
        int bareU = -1, bareV = -1, neckU = -1, neckV = -1;
        for (int v = 0; v < ep.o1.height; ++v)
            for (int u = 0; u < ep.o1.width; ++u) {
                if (!ep.o1.maskGarment[ep.o1.at(u, v)] && bareU < 0) { bareU = u; bareV = v; }
                if (ep.o1.maskNeckline[ep.o1.at(u, v)] && neckU < 0) { neckU = u; neckV = v; }
            }
        REQUIRE(bareU >= 0);
        REQUIRE(neckU >= 0);
        REQUIRE_THROWS_AS(execPressAndLift(ep, PrimitiveParams{bareU, bareV, neckU, neckV}),
                          ParamRejected);  // press off the neckline
        REQUIRE_THROWS_AS(execPressAndLift(ep, PrimitiveParams{neckU, neckV, bareU, bareV}),
                          ParamRejected);  // lift off the garment
    }
    SECTION("phase 2 requires phase 1") {
        REQUIRE_THROWS_AS(execDragAndRotate(ep, PrimitiveParams{10, 10, 10, 10}),
                          std::logic_error);
    }
}

TEST_CASE("press-and-lift smoke episode", "[slow]") {
    Episode ep = reset(coarseConfig(11));
    // hand-picked interior pixels: neckline point left of center, lift point below it
    int pressU = -1, pressV = -1, liftU = -1, liftV = -1;
    for (int v = 0; v < ep.o1.height; ++v)
        for (int u = 0; u < ep.o1.width; ++u) {
            if (ep.o1.maskNeckline[ep.o1.at(u, v)] && u < 64) { pressU = u; pressV = v; }
        }
    for (int v = ep.o1.height - 1; v >= 0 && liftU < 0; --v)
        for (int u = 0; u < ep.o1.width; ++u)
            if (ep.o1.maskGarment[ep.o1.at(u, v)] && std::abs(u - pressU) < 10) {
                liftU = u;
                liftV = v;
                break;
            }
    REQUIRE(pressU >= 0);
    REQUIRE(liftU >= 0);

    int s1 = execPressAndLift(ep, PrimitiveParams{pressU, pressV, liftU, liftV});
    REQUIRE((s1 == 0 || s1 == 1));
    REQUIRE(ep.s1 == s1);
    REQUIRE(ep.coverageLeft >= 0.0);
    REQUIRE(ep.coverageLeft <= 1.0);
    REQUIRE(int(ep.o2.depth.size()) == ep.o1.width * ep.o1.height);
    REQUIRE(ep.controlTicks > 0);

    SECTION("phase 2 runs to completion afterwards") {
        int dragU = -1, dragV = -1;
        for (int v = 0; v < ep.o2.height; ++v)
            for (int u = ep.o2.width - 1; u >= 0; --u)
                if (ep.o2.maskGarment[ep.o2.at(u, v)] && u > dragU) { dragU = u; dragV = v; }
        REQUIRE(dragU >= 0);
        int s2 = execDragAndRotate(ep, PrimitiveParams{dragU, dragV, 90, 40});
        REQUIRE((s2 == 0 || s2 == 1));
        REQUIRE(ep.s2 == s2);
    }
}
