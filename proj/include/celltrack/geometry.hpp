#ifndef CELLTRACK_GEOMETRY_HPP
#define CELLTRACK_GEOMETRY_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>

namespace celltrack {

/// Continuous 3D point / vector in voxel units.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

/// Voxel grid extents. Data layout everywhere is x-fastest, then y, then z.
struct GridDims {
    int width = 0;
    int height = 0;
    int depth = 0;

    bool operator==(const GridDims& o) const {
        return width == o.width && height == o.height && depth == o.depth;
    }
    bool operator!=(const GridDims& o) const { return !(*this == o); }

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(depth);
    }
    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(width) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(height) * static_cast<std::size_t>(z));
    }
    bool contains(int x, int y, int z) const {
        return x >= 0 && x < width && y >= 0 && y < height && z >= 0 && z < depth;
    }
    /// True when p lies in the closed interpolation domain [0,w-1]x[0,h-1]x[0,d-1].
    bool in_domain(const Vec3& p) const {
        return p.x >= 0.0 && p.x <= width - 1 && p.y >= 0.0 && p.y <= height - 1 && p.z >= 0.0 &&
               p.z <= depth - 1;
    }
};

}  // namespace celltrack

#endif
