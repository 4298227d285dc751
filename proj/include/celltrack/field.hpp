#ifndef CELLTRACK_FIELD_HPP
#define CELLTRACK_FIELD_HPP

#include <string>
#include <vector>

#include "celltrack/volume.hpp"

namespace celltrack {

/// Per-voxel 3-vector displacement field phi, mapping frame-t coordinates
/// toward frame-t+1. Components are stored as three planes in voxel units.
/// Convention: warp_image treats phi as backward sampling offsets
/// (out(p) = src(p - phi(p))), warp_point as the literal forward map
/// (c -> c + phi(c)). The two coincide exactly for constant fields.
class DisplacementField {
public:
    DisplacementField() = default;
    explicit DisplacementField(GridDims dims)
        : dims_(dims),
          dx_(dims.voxel_count(), 0.0f),
          dy_(dims.voxel_count(), 0.0f),
          dz_(dims.voxel_count(), 0.0f) {}

    GridDims dims() const { return dims_; }
    std::size_t voxel_count() const { return dx_.size(); }

    std::vector<float>& x() { return dx_; }
    std::vector<float>& y() { return dy_; }
    std::vector<float>& z() { return dz_; }
    const std::vector<float>& x() const { return dx_; }
    const std::vector<float>& y() const { return dy_; }
    const std::vector<float>& z() const { return dz_; }

    Vec3 at(int x, int y, int z) const {
        const std::size_t i = dims_.index(x, y, z);
        return {dx_[i], dy_[i], dz_[i]};
    }
    void set(int x, int y, int z, const Vec3& v) {
        const std::size_t i = dims_.index(x, y, z);
        dx_[i] = static_cast<float>(v.x);
        dy_[i] = static_cast<float>(v.y);
        dz_[i] = static_cast<float>(v.z);
    }

    /// Trilinear per-component sample at a continuous point (zero outside).
    Vec3 sample(const Vec3& p) const {
        return {sample_trilinear(std::span<const float>(dx_), dims_, p),
                sample_trilinear(std::span<const float>(dy_), dims_, p),
                sample_trilinear(std::span<const float>(dz_), dims_, p)};
    }

private:
    GridDims dims_;
    std::vector<float> dx_, dy_, dz_;
};

/// Backward warp: out(p) = sample_trilinear(src, p - phi(p)). A constant
/// field v shifts content by exactly +v. Throws on dims mismatch.
Volume3D warp_image(const Volume3D& src, const DisplacementField& field);

/// Forward point map c + phi(c), with phi interpolated trilinearly at c.
/// Throws std::invalid_argument when c is outside the field domain.
Vec3 warp_point(const Vec3& c, const DisplacementField& field);

/// Debug serialization as three .cvol volumes <base>.dx.cvol / .dy.cvol / .dz.cvol.
void save_field(const DisplacementField& field, const std::string& base_path);
DisplacementField load_field(const std::string& base_path);

}  // namespace celltrack

#endif
