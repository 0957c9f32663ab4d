#pragma once

#include "robohang/core.hpp"

#include <array>
#include <string>
#include <vector>

namespace robohang {

struct Triangle {
    std::array<int, 3> v;
    int operator[](int i) const { return v[size_t(i)]; }
};

// Interior edge shared by two triangles; the hinge for bending.
struct Hinge {
    int e0, e1;    // shared edge vertices
    int opp0, opp1;  // opposite vertices of the two incident triangles
    double restAngle = 0.0;
    double restEdgeLength = 0.0;
    double restHeight = 0.0;  // characteristic height h_e for the ||e||/h_e weight
};

struct Edge {
    int a, b;  // a < b
};

// Indexed triangle mesh with optional rest material coordinates.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    std::vector<Vec2> restUV;  // per-vertex 2D material coordinates, empty if not a cloth

    size_t vertexCount() const { return vertices.size(); }
    size_t triangleCount() const { return triangles.size(); }

    std::vector<Edge> uniqueEdges() const;
    std::vector<Hinge> interiorHinges() const;  // rest quantities filled from `vertices`
    // true if triangles i and j share at least one vertex
    static bool sharesVertex(const Triangle& a, const Triangle& b);
};

// Signed dihedral angle across edge (e0,e1) between triangles (e0,e1,o0) and (e0,o1,e1).
// Zero for coplanar triangles on opposite sides of the edge; range (-pi, pi].
double dihedralAngle(const Vec3& e0, const Vec3& e1, const Vec3& o0, const Vec3& o1);

bool writeObj(const std::string& path, const std::vector<Vec3>& vertices,
              const std::vector<Triangle>& triangles,
              const std::vector<std::vector<Vec3>>& polylines = {});
bool readObj(const std::string& path, std::vector<Vec3>& vertices, std::vector<Triangle>& triangles);

}  // namespace robohang
