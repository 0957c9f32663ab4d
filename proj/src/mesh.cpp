#include "robohang/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace robohang {

std::vector<Edge> TriMesh::uniqueEdges() const {
    std::vector<Edge> edges;
    edges.reserve(triangles.size() * 3);
    for (const auto& t : triangles) {
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            edges.push_back({a, b});
        }
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
        return x.a != y.a ? x.a < y.a : x.b < y.b;
    });
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](const Edge& x, const Edge& y) { return x.a == y.a && x.b == y.b; }),
                edges.end());
    return edges;
}

double dihedralAngle(const Vec3& e0, const Vec3& e1, const Vec3& o0, const Vec3& o1) {
    Vec3 e = e1 - e0;
    Vec3 n0 = (e1 - e0).cross(o0 - e0);
    Vec3 n1 = (o1 - e0).cross(e1 - e0);
    double sinA = n0.cross(n1).dot(e.normalized());
    double cosA = n0.dot(n1);
    return std::atan2(sinA, cosA);
}

std::vector<Hinge> TriMesh::interiorHinges() const {
    // map edge -> (opposite vertex, triangle) occurrences
    std::map<std::pair<int, int>, std::vector<int>> oppOf;
    for (const auto& t : triangles) {
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3], c = t[(k + 2) % 3];
            if (a > b) std::swap(a, b);
            oppOf[{a, b}].push_back(c);
        }
    }
    std::vector<Hinge> hinges;
    for (const auto& [edge, opps] : oppOf) {
        if (opps.size() != 2) continue;
        Hinge h;
        h.e0 = edge.first;
        h.e1 = edge.second;
        h.opp0 = opps[0];
        h.opp1 = opps[1];
        const Vec3 &p0 = vertices[size_t(h.e0)], &p1 = vertices[size_t(h.e1)];
        const Vec3 &q0 = vertices[size_t(h.opp0)], &q1 = vertices[size_t(h.opp1)];
        h.restAngle = dihedralAngle(p0, p1, q0, q1);
        h.restEdgeLength = (p1 - p0).norm();
        double a0 = 0.5 * (p1 - p0).cross(q0 - p0).norm();
        double a1 = 0.5 * (p1 - p0).cross(q1 - p0).norm();
        // average triangle height over the shared edge
        h.restHeight = (2.0 / 3.0) * (a0 + a1) / std::max(h.restEdgeLength, 1e-12);
        hinges.push_back(h);
    }
    return hinges;
}

bool TriMesh::sharesVertex(const Triangle& a, const Triangle& b) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (a[i] == b[j]) return true;
    return false;
}

bool writeObj(const std::string& path, const std::vector<Vec3>& vertices,
              const std::vector<Triangle>& triangles,
              const std::vector<std::vector<Vec3>>& polylines) {
    std::ofstream out(path);
    if (!out) return false;
    char buf[128];
    for (const auto& v : vertices) {
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
        out << buf;
    }
    for (const auto& t : triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    int base = int(vertices.size());
    for (const auto& line : polylines) {
        for (const auto& v : line) {
            std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
            out << buf;
        }
        out << "l";
        for (size_t i = 0; i < line.size(); ++i) out << ' ' << base + int(i) + 1;
        out << '\n';
        base += int(line.size());
    }
    return bool(out);
}

bool readObj(const std::string& path, std::vector<Vec3>& vertices, std::vector<Triangle>& triangles) {
    std::ifstream in(path);
    if (!in) return false;
    vertices.clear();
    triangles.clear();
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 v;
            ss >> v.x() >> v.y() >> v.z();
            vertices.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> f{};
            for (int k = 0; k < 3; ++k) {
                std::string tok;
                ss >> tok;
                f[size_t(k)] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
            }
            triangles.push_back({f});
        }
    }
    return true;
}

}  // namespace robohang
