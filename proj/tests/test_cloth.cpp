#include "robohang/cloth.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace robohang;

namespace {

// planar grid cloth in the xy plane with restUV equal to rest positions
TriMesh makeGrid(int nx, int ny, double spacing) {
    TriMesh m;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            m.vertices.emplace_back(i * spacing, j * spacing, 0.0);
            m.restUV.emplace_back(i * spacing, j * spacing);
        }
    auto id = [&](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            m.triangles.push_back({{id(i, j), id(i + 1, j), id(i + 1, j + 1)}});
            m.triangles.push_back({{id(i, j), id(i + 1, j + 1), id(i, j + 1)}});
        }
    return m;
}

ClothState perturbed(const TriMesh& mesh, const ClothMaterial& mat, Rng& rng, double amp) {
    ClothState st = makeClothState(mesh, mat);
    for (auto& p : st.x)
        p += amp * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    return st;
}

double bboxDiag(const ClothState& st) {
    Vec3 lo = st.x[0], hi = st.x[0];
    for (const auto& p : st.x) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

// central-difference check of analytic forces against an energy functional
template <typename EnergyFn, typename ForceFn>
double gradientRelError(ClothState st, EnergyFn energy, ForceFn force) {
    std::vector<Vec3> f(st.x.size(), Vec3::Zero());
    force(st, f);
    double h = 1e-7 * bboxDiag(st);
    VecX gFd(3 * st.x.size()), gAn(3 * st.x.size());
    for (size_t i = 0; i < st.x.size(); ++i)
        for (int k = 0; k < 3; ++k) {
            double orig = st.x[i][k];
            st.x[i][k] = orig + h;
            double ep = energy(st);
            st.x[i][k] = orig - h;
            double em = energy(st);
            st.x[i][k] = orig;
            gFd[3 * long(i) + k] = (ep - em) / (2 * h);
            gAn[3 * long(i) + k] = -f[i][k];  // f = -grad E
        }
    return (gFd - gAn).norm() / std::max(gAn.norm(), 1e-12);
}

}  // namespace

TEST_CASE("material validation") {
    ClothMaterial m;
    REQUIRE_NOTHROW(m.validate());
    m.poissonRatio = 0.5;
    REQUIRE_THROWS_AS(m.validate(), std::invalid_argument);
    m.poissonRatio = 0.3;
    m.thickness = 0.0;
    REQUIRE_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("lumped masses sum to total cloth mass") {
    TriMesh mesh = makeGrid(4, 3, 0.05);
    ClothMaterial mat;
    ClothState st = makeClothState(mesh, mat);
    double total = 0;
    for (double m : st.mass) total += m;
    double area = 4 * 0.05 * 3 * 0.05;
    REQUIRE(total == Catch::Approx(mat.areaDensity * area).epsilon(1e-12));
}

TEST_CASE("membrane forces vanish at rest and restore under stretch") {
    TriMesh mesh = makeGrid(3, 3, 0.05);
    ClothMaterial mat;
    ClothState st = makeClothState(mesh, mat);

    std::vector<Vec3> f(st.x.size(), Vec3::Zero());
    membraneForces(mesh, st, mat, &f, nullptr);
    for (const auto& v : f) REQUIRE(v.norm() < 1e-12);

    SECTION("uniform stretch of a single triangle pulls inward") {
        TriMesh tri;
        tri.vertices = {Vec3(0, 0, 0), Vec3(0.1, 0, 0), Vec3(0, 0.1, 0)};
        tri.restUV = {Vec2(0, 0), Vec2(0.1, 0), Vec2(0, 0.1)};
        tri.triangles = {{{0, 1, 2}}};
        ClothState s = makeClothState(tri, mat);
        Vec3 centroid = (s.x[0] + s.x[1] + s.x[2]) / 3.0;
        for (auto& p : s.x) p = centroid + 1.01 * (p - centroid);
        std::vector<Vec3> g(3, Vec3::Zero());
        membraneForces(tri, s, mat, &g, nullptr);
        for (int i = 0; i < 3; ++i) {
            Vec3 radial = (s.x[size_t(i)] - centroid).normalized();
            REQUIRE(g[size_t(i)].dot(radial) < 0.0);
        }
    }
}

TEST_CASE("membrane gradient matches finite differences") {
    TriMesh mesh = makeGrid(4, 3, 0.05);  // 20 vertices
    ClothMaterial mat;
    Rng rng(21);
    for (int iter = 0; iter < 50; ++iter) {
        ClothState st = perturbed(mesh, mat, rng, 0.01);
        double err = gradientRelError(
            st, [&](const ClothState& s) { return membraneEnergy(mesh, s, mat); },
            [&](const ClothState& s, std::vector<Vec3>& f) { membraneForces(mesh, s, mat, &f, nullptr); });
        REQUIRE(err <= 1e-4);
    }
}

TEST_CASE("membrane exact Hessian matches force finite differences") {
    TriMesh mesh = makeGrid(3, 2, 0.05);
    ClothMaterial mat;
    Rng rng(22);
    ClothState st = perturbed(mesh, mat, rng, 0.008);
    int n = int(st.x.size());
    SparseSystem k(n);
    membraneForces(mesh, st, mat, nullptr, &k, nullptr, /*projectPsd=*/false);

    double h = 1e-6 * bboxDiag(st);
    Rng dir(5);
    VecX d(3 * n);
    for (int i = 0; i < 3 * n; ++i) d[i] = dir.uniform(-1, 1);
    d.normalize();
    ClothState sp = st, sm = st;
    for (int i = 0; i < n; ++i) {
        sp.x[size_t(i)] += h * d.segment<3>(3 * i);
        sm.x[size_t(i)] -= h * d.segment<3>(3 * i);
    }
    std::vector<Vec3> fp(size_t(n), Vec3::Zero()), fm(size_t(n), Vec3::Zero());
    membraneForces(mesh, sp, mat, &fp, nullptr);
    membraneForces(mesh, sm, mat, &fm, nullptr);
    VecX dfFd(3 * n);
    for (int i = 0; i < n; ++i) dfFd.segment<3>(3 * i) = (fp[size_t(i)] - fm[size_t(i)]) / (2 * h);
    VecX dfAn = k.multiply(d);
    REQUIRE((dfFd - dfAn).norm() <= 1e-3 * std::max(dfAn.norm(), 1e-12));
}

TEST_CASE("projected membrane stiffness is negative semidefinite") {
    TriMesh mesh = makeGrid(3, 2, 0.05);
    ClothMaterial mat;
    Rng rng(23);
    ClothState st = perturbed(mesh, mat, rng, 0.02);
    int n = int(st.x.size());
    SparseSystem k(n);
    membraneForces(mesh, st, mat, nullptr, &k);
    for (int iter = 0; iter < 40; ++iter) {
        VecX d(3 * n);
        for (int i = 0; i < 3 * n; ++i) d[i] = rng.uniform(-1, 1);
        REQUIRE(d.dot(k.multiply(d)) <= 1e-8);
    }
}

TEST_CASE("bending forces vanish flat and restore a fold") {
    TriMesh mesh = makeGrid(3, 3, 0.05);
    ClothMaterial mat;
    ClothState st = makeClothState(mesh, mat);
    auto hinges = mesh.interiorHinges();

    std::vector<Vec3> f(st.x.size(), Vec3::Zero());
    bendingForces(hinges, st, mat, &f, nullptr);
    for (const auto& v : f) REQUIRE(v.norm() < 1e-12);

    SECTION("folded strip feels a restoring torque") {
        TriMesh strip;
        strip.vertices = {Vec3(0, 0, 0), Vec3(0.1, 0, 0), Vec3(0.05, 0.1, 0), Vec3(0.05, -0.1, 0)};
        strip.triangles = {{{0, 1, 2}}, {{1, 0, 3}}};
        ClothMaterial m2;
        auto hs = strip.interiorHinges();
        REQUIRE(hs.size() == 1);
        ClothState s;
        s.x = strip.vertices;
        s.x[3] = Vec3(0.05, 0, 0.1);  // fold the second triangle up by 90 degrees
        s.v.assign(4, Vec3::Zero());
        s.mass.assign(4, 1.0);
        std::vector<Vec3> g(4, Vec3::Zero());
        bendingForces(hs, s, m2, &g, nullptr);
        // the force on the folded vertex should push it back toward flat
        double before = std::abs(wrapToPi(dihedralAngle(s.x[0], s.x[1], s.x[2], s.x[3]) - hs[0].restAngle));
        ClothState s2 = s;
        s2.x[3] += 1e-4 * g[3].normalized();
        double after = std::abs(wrapToPi(dihedralAngle(s2.x[0], s2.x[1], s2.x[2], s2.x[3]) - hs[0].restAngle));
        REQUIRE(after < before);
    }
}

TEST_CASE("bending gradient matches finite differences") {
    TriMesh mesh = makeGrid(4, 3, 0.05);
    ClothMaterial mat;
    auto hinges = mesh.interiorHinges();
    Rng rng(31);
    for (int iter = 0; iter < 50; ++iter) {
        ClothState st = perturbed(mesh, mat, rng, 0.01);
        double err = gradientRelError(
            st, [&](const ClothState& s) { return bendingEnergy(hinges, s, mat); },
            [&](const ClothState& s, std::vector<Vec3>& f) { bendingForces(hinges, s, mat, &f, nullptr); });
        REQUIRE(err <= 1e-4);
    }
}

TEST_CASE("angle wrapping keeps seam-like hinges stable") {
    REQUIRE(wrapToPi(0.3) == Catch::Approx(0.3));
    REQUIRE(wrapToPi(M_PI + 0.1) == Catch::Approx(-M_PI + 0.1));
    REQUIRE(wrapToPi(-M_PI - 0.1) == Catch::Approx(M_PI - 0.1));
    // a hinge resting at +pi-0.05 measured at -pi+0.05 is only 0.1 rad away
    REQUIRE(std::abs(wrapToPi((-M_PI + 0.05) - (M_PI - 0.05))) == Catch::Approx(0.1));
}

TEST_CASE("translational invariance of internal forces") {
    TriMesh mesh = makeGrid(4, 3, 0.05);
    ClothMaterial mat;
    auto hinges = mesh.interiorHinges();
    Rng rng(41);
    ClothState st = perturbed(mesh, mat, rng, 0.01);
    ClothState moved = st;
    for (auto& p : moved.x) p += Vec3(1.7, -2.3, 0.9);

    std::vector<Vec3> f1(st.x.size(), Vec3::Zero()), f2(st.x.size(), Vec3::Zero());
    membraneForces(mesh, st, mat, &f1, nullptr);
    bendingForces(hinges, st, mat, &f1, nullptr);
    membraneForces(mesh, moved, mat, &f2, nullptr);
    bendingForces(hinges, moved, mat, &f2, nullptr);
    for (size_t i = 0; i < f1.size(); ++i) REQUIRE((f1[i] - f2[i]).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("implicit step closed forms") {
    TriMesh mesh = makeGrid(2, 2, 0.05);
    ClothMaterial mat;
    ClothState st = makeClothState(mesh, mat);
    int n = int(st.x.size());
    for (int i = 0; i < n; ++i) st.v[size_t(i)] = Vec3(0.1 * i, -0.05, 0.02);
    std::vector<Vec3> zero(size_t(n), Vec3::Zero());
    SparseSystem noK(n);

    SECTION("ballistic with zero forces") {
        ClothState out = implicitStep(st, zero, noK, 0.0, 0.002, {});
        for (int i = 0; i < n; ++i) {
            REQUIRE((out.v[size_t(i)] - st.v[size_t(i)]).norm() < 1e-12);
            REQUIRE((out.x[size_t(i)] - (st.x[size_t(i)] + 0.002 * st.v[size_t(i)])).norm() < 1e-12);
        }
    }
    SECTION("gravity gives dv = dt*g per free vertex") {
        std::vector<Vec3> f(static_cast<size_t>(n));
        Vec3 g(0, 0, -9.81);
        for (int i = 0; i < n; ++i) f[size_t(i)] = st.mass[size_t(i)] * g;
        ClothState out = implicitStep(st, f, noK, 0.0, 0.002, {}, 1e-12);
        for (int i = 0; i < n; ++i)
            REQUIRE((out.v[size_t(i)] - st.v[size_t(i)] - 0.002 * g).norm() < 1e-10);
    }
    SECTION("attached vertex follows its target exactly") {
        Vec3 tv(0.1, 0, 0);
        Attachment att{0, st.x[0] + 0.002 * tv, tv};
        std::vector<Vec3> f(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) f[size_t(i)] = st.mass[size_t(i)] * Vec3(0, 0, -9.81);
        ClothState out = implicitStep(st, f, noK, 0.5, 0.002, {att});
        REQUIRE((out.x[0] - (st.x[0] + 0.002 * tv)).norm() == 0.0);
        REQUIRE((out.v[0] - tv).norm() == 0.0);
    }
}

TEST_CASE("momentum is conserved without attachments or gravity") {
    TriMesh mesh = makeGrid(4, 4, 0.05);
    ClothMaterial mat;
    auto hinges = mesh.interiorHinges();
    Rng rng(55);
    ClothState st = perturbed(mesh, mat, rng, 0.008);
    int n = int(st.x.size());
    for (int i = 0; i < n; ++i)
        st.v[size_t(i)] = 0.1 * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));

    for (int step = 0; step < 50; ++step) {
        Vec3 before = Vec3::Zero();
        for (int i = 0; i < n; ++i) before += st.mass[size_t(i)] * st.v[size_t(i)];
        std::vector<Vec3> f(size_t(n), Vec3::Zero());
        SparseSystem k(n);
        membraneForces(mesh, st, mat, &f, &k);
        bendingForces(hinges, st, mat, &f, &k);
        st = implicitStep(st, f, k, 0.0, 0.002, {}, 1e-12, 3000);
        Vec3 after = Vec3::Zero();
        for (int i = 0; i < n; ++i) after += st.mass[size_t(i)] * st.v[size_t(i)];
        REQUIRE((after - before).norm() <= 1e-8);
    }
}

TEST_CASE("pinned cloth under gravity reaches a fixed point") {
    TriMesh mesh = makeGrid(5, 5, 0.05);
    ClothMaterial mat;
    mat.rayleighDamping = 5.0;
    auto hinges = mesh.interiorHinges();
    ClothState st = makeClothState(mesh, mat);
    int n = int(st.x.size());
    std::vector<Attachment> pins = {{0, st.x[0], Vec3::Zero()}, {5, st.x[5], Vec3::Zero()}};
    Vec3 g(0, 0, -9.81);

    double dt = 0.002;
    double maxAcc = 0;
    for (int step = 0; step < 5000; ++step) {
        std::vector<Vec3> f(size_t(n), Vec3::Zero());
        SparseSystem k(n);
        membraneForces(mesh, st, mat, &f, &k);
        bendingForces(hinges, st, mat, &f, &k);
        for (int i = 0; i < n; ++i) f[size_t(i)] += st.mass[size_t(i)] * g;
        ClothState next = implicitStep(st, f, k, mat.rayleighDamping, dt, pins);
        if (step == 4999) {
            maxAcc = 0;
            for (int i = 0; i < n; ++i)
                maxAcc = std::max(maxAcc, (next.v[size_t(i)] - st.v[size_t(i)]).norm() / dt);
        }
        st = next;
    }
    REQUIRE(maxAcc <= 1e-3);
    // sanity: interior hangs below the pinned row
    double minZ = 0;
    for (const auto& p : st.x) minZ = std::min(minZ, p.z());
    REQUIRE(minZ < -0.05);
}
