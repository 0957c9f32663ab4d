#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace robohang {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using VecX = Eigen::VectorXd;

struct Pose {
    Quat rotation{Quat::Identity()};
    Vec3 translation{Vec3::Zero()};

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Vec3 applyInverse(const Vec3& p) const { return rotation.conjugate() * (p - translation); }
    Pose compose(const Pose& other) const {
        return Pose{(rotation * other.rotation).normalized(), rotation * other.translation + translation};
    }
    Pose inverse() const {
        Quat ri = rotation.conjugate();
        return Pose{ri, -(ri * translation)};
    }
};

// Counter-based seeding so independent random streams can be derived from one
// episode seed without any shared state.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic PRNG with explicit sampling helpers. std::mt19937_64 state
// transitions are standardized; the distribution helpers below avoid
// libstdc++-specific distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix64(seed)) {
        if (state_ == 0) state_ = 0x106689d45497fdb5ull;
    }
    static Rng stream(uint64_t seed, uint64_t streamId) {
        return Rng(splitmix64(seed ^ splitmix64(streamId + 0x632be59bd9b4e019ull)));
    }

    uint64_t nextU64() {
        // xorshift64*
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545f4914f6cdd1dull;
    }
    double uniform01() { return double(nextU64() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform01(); }
    int uniformInt(int lo, int hi) {  // inclusive range
        return lo + int(nextU64() % uint64_t(hi - lo + 1));
    }
    double gaussian() {
        // Box-Muller; one sample per call keeps the stream position obvious.
        double u1 = uniform01(), u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    Vec3 unitSphere() {
        double z = uniform(-1.0, 1.0);
        double phi = uniform(0.0, 2.0 * M_PI);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return Vec3(r * std::cos(phi), r * std::sin(phi), z);
    }

private:
    uint64_t state_;
};

struct NonConvergence : std::runtime_error {
    double residual;
    explicit NonConvergence(double r)
        : std::runtime_error("linear solver failed to converge, residual " + std::to_string(r)), residual(r) {}
};

struct GraspMiss : std::runtime_error {
    GraspMiss() : std::runtime_error("no cloth vertex within grasp radius") {}
};

struct ParamRejected : std::runtime_error {
    explicit ParamRejected(const std::string& why) : std::runtime_error("primitive params rejected: " + why) {}
};

struct ResetFailed : std::runtime_error {
    explicit ResetFailed(const std::string& why) : std::runtime_error("episode reset failed: " + why) {}
};

}  // namespace robohang
