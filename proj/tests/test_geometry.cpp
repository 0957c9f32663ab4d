#include "robohang/geometry.hpp"
#include "robohang/core.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace robohang;

TEST_CASE("closest point on triangle beats dense sampling") {
    Rng rng(7);
    for (int iter = 0; iter < 200; ++iter) {
        Vec3 a = Vec3::Random(), b = Vec3::Random(), c = Vec3::Random();
        Vec3 p = 2.0 * Vec3::Random();
        Vec3 bary;
        Vec3 q = closestPointTriangle(p, a, b, c, bary);
        double d = (p - q).norm();
        REQUIRE(std::abs(bary.sum() - 1.0) < 1e-12);
        REQUIRE(bary.minCoeff() >= -1e-12);
        REQUIRE((bary.x() * a + bary.y() * b + bary.z() * c - q).norm() < 1e-9);
        // dense barycentric sampling oracle
        for (int i = 0; i <= 20; ++i) {
            for (int j = 0; i + j <= 20; ++j) {
                double u = i / 20.0, v = j / 20.0;
                Vec3 s = (1 - u - v) * a + u * b + v * c;
                REQUIRE(d <= (p - s).norm() + 1e-9);
            }
        }
        (void)rng;
    }
}

TEST_CASE("segment-segment closest points beat dense sampling") {
    for (int iter = 0; iter < 200; ++iter) {
        Vec3 p1 = Vec3::Random(), q1 = Vec3::Random(), p2 = Vec3::Random(), q2 = Vec3::Random();
        double s, t;
        closestSegmentSegment(p1, q1, p2, q2, s, t);
        double d = ((p1 + s * (q1 - p1)) - (p2 + t * (q2 - p2))).norm();
        for (int i = 0; i <= 25; ++i)
            for (int j = 0; j <= 25; ++j) {
                Vec3 x = p1 + (i / 25.0) * (q1 - p1);
                Vec3 y = p2 + (j / 25.0) * (q2 - p2);
                REQUIRE(d <= (x - y).norm() + 1e-9);
            }
    }
}

TEST_CASE("ray-triangle basics") {
    Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
    double t;
    REQUIRE(rayTriangle(Vec3(0.2, 0.2, 1.0), Vec3(0, 0, -1), a, b, c, t));
    REQUIRE(t == Catch::Approx(1.0));
    REQUIRE_FALSE(rayTriangle(Vec3(0.9, 0.9, 1.0), Vec3(0, 0, -1), a, b, c, t));
    REQUIRE_FALSE(rayTriangle(Vec3(0.2, 0.2, 1.0), Vec3(0, 0, 1), a, b, c, t));
}

TEST_CASE("triangle-triangle intersection cases") {
    Vec3 a0(0, 0, 0), a1(1, 0, 0), a2(0, 1, 0);
    SECTION("piercing") {
        REQUIRE(triTriIntersect(a0, a1, a2, Vec3(0.2, 0.2, -0.5), Vec3(0.3, 0.2, 0.5),
                                Vec3(0.2, 0.3, 0.5)));
    }
    SECTION("separate parallel") {
        REQUIRE_FALSE(triTriIntersect(a0, a1, a2, Vec3(0, 0, 0.1), Vec3(1, 0, 0.1), Vec3(0, 1, 0.1)));
    }
    SECTION("separate same plane") {
        REQUIRE_FALSE(triTriIntersect(a0, a1, a2, Vec3(2, 0, 0), Vec3(3, 0, 0), Vec3(2, 1, 0)));
    }
    SECTION("coplanar overlapping") {
        REQUIRE(triTriIntersect(a0, a1, a2, Vec3(0.1, 0.1, 0), Vec3(0.9, 0.1, 0), Vec3(0.1, 0.9, 0)));
    }
    SECTION("coplanar containment") {
        REQUIRE(triTriIntersect(a0, a1, a2, Vec3(-1, -1, 0), Vec3(3, -1, 0), Vec3(-1, 3, 0)));
    }
    SECTION("crossing plane but outside") {
        REQUIRE_FALSE(triTriIntersect(a0, a1, a2, Vec3(5, 5, -1), Vec3(6, 5, 1), Vec3(5, 6, 1)));
    }
}

TEST_CASE("solid angle over closed cube") {
    std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                           {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    // outward-oriented cube faces
    int quads[6][4] = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                       {2, 3, 7, 6}, {1, 2, 6, 5}, {3, 0, 4, 7}};
    std::vector<Triangle> tris;
    for (auto& q : quads) {
        tris.push_back({{q[0], q[1], q[2]}});
        tris.push_back({{q[0], q[2], q[3]}});
    }
    auto winding = [&](const Vec3& p) {
        double sum = 0;
        for (const auto& t : tris)
            sum += signedSolidAngle(p, v[size_t(t[0])], v[size_t(t[1])], v[size_t(t[2])]);
        return sum / (4.0 * M_PI);
    };
    REQUIRE(winding(Vec3(0.5, 0.5, 0.5)) == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(winding(Vec3(0.2, 0.8, 0.3)) == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(winding(Vec3(2.0, 0.5, 0.5)) == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(winding(Vec3(-3, -3, -3)) == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("cubic roots in unit interval") {
    double r[3];
    SECTION("three known roots") {
        // (t-0.1)(t-0.5)(t-0.9) = t^3 -1.5t^2 +0.59t -0.045
        int n = cubicRootsInUnit(1.0, -1.5, 0.59, -0.045, r);
        REQUIRE(n == 3);
        REQUIRE(r[0] == Catch::Approx(0.1).margin(1e-8));
        REQUIRE(r[1] == Catch::Approx(0.5).margin(1e-8));
        REQUIRE(r[2] == Catch::Approx(0.9).margin(1e-8));
    }
    SECTION("quadratic fallback") {
        // (t-0.25)(t-0.75)
        int n = cubicRootsInUnit(0.0, 1.0, -1.0, 0.1875, r);
        REQUIRE(n == 2);
        REQUIRE(r[0] == Catch::Approx(0.25).margin(1e-10));
        REQUIRE(r[1] == Catch::Approx(0.75).margin(1e-10));
    }
    SECTION("linear fallback") {
        int n = cubicRootsInUnit(0.0, 0.0, 2.0, -1.0, r);
        REQUIRE(n == 1);
        REQUIRE(r[0] == Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("no root in range") {
        int n = cubicRootsInUnit(1.0, 0.0, 0.0, -8.0, r);  // root at 2
        REQUIRE(n == 0);
    }
}

TEST_CASE("vertex-triangle CCD finds crossing time") {
    Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
    SECTION("straight crossing at t=0.5") {
        auto t = ccdVertexTriangle(Vec3(0.2, 0.2, 1), Vec3(0.2, 0.2, -1), a, a, b, b, c, c, 1e-6);
        REQUIRE(t.has_value());
        REQUIRE(*t == Catch::Approx(0.5).margin(1e-9));
    }
    SECTION("misses the triangle") {
        auto t = ccdVertexTriangle(Vec3(2, 2, 1), Vec3(2, 2, -1), a, a, b, b, c, c, 1e-6);
        REQUIRE_FALSE(t.has_value());
    }
    SECTION("coplanar but far") {
        auto t = ccdVertexTriangle(Vec3(5, 5, 1), Vec3(5, 5, -1), a, a, b, b, c, c, 1e-6);
        REQUIRE_FALSE(t.has_value());
    }
}

TEST_CASE("edge-edge CCD finds crossing time") {
    Vec3 r(0, -1, 0), s(0, 1, 0);  // static edge along y
    SECTION("crossing at t=0.5") {
        auto t = ccdEdgeEdge(Vec3(-1, 0, 1), Vec3(-1, 0, -1), Vec3(1, 0, 1), Vec3(1, 0, -1),
                             r, r, s, s, 1e-6);
        REQUIRE(t.has_value());
        REQUIRE(*t == Catch::Approx(0.5).margin(1e-9));
    }
    SECTION("passes beside") {
        auto t = ccdEdgeEdge(Vec3(2, 0, 1), Vec3(2, 0, -1), Vec3(4, 0, 1), Vec3(4, 0, -1),
                             r, r, s, s, 1e-6);
        REQUIRE_FALSE(t.has_value());
    }
}

TEST_CASE("BVH raycast equals brute force") {
    Rng rng(42);
    std::vector<Vec3> verts;
    std::vector<Triangle> tris;
    for (int i = 0; i < 120; ++i) {
        Vec3 base(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        int v0 = int(verts.size());
        verts.push_back(base);
        verts.push_back(base + 0.3 * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
        verts.push_back(base + 0.3 * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
        tris.push_back({{v0, v0 + 1, v0 + 2}});
    }
    TriangleBvh bvh(verts, tris);
    for (int iter = 0; iter < 500; ++iter) {
        Vec3 orig(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
        Vec3 dir = rng.unitSphere();
        double tBest = std::numeric_limits<double>::max();
        for (const auto& f : tris) {
            double t;
            if (rayTriangle(orig, dir, verts[size_t(f[0])], verts[size_t(f[1])], verts[size_t(f[2])],
                            t, 1e-9, tBest))
                tBest = t;
        }
        auto hit = bvh.raycast(orig, dir);
        if (tBest == std::numeric_limits<double>::max()) {
            REQUIRE_FALSE(hit.has_value());
            REQUIRE_FALSE(bvh.anyHit(orig, dir));
        } else {
            REQUIRE(hit.has_value());
            REQUIRE(hit->t == Catch::Approx(tBest).margin(1e-12));
            REQUIRE(bvh.anyHit(orig, dir));
        }
    }
}
