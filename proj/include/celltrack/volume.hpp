#ifndef CELLTRACK_VOLUME_HPP
#define CELLTRACK_VOLUME_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "celltrack/geometry.hpp"

namespace celltrack {

/// Dense scalar field over a w*h*d voxel grid, x-fastest ordering.
/// Doubles as raw image (values in [0, inf)) and cell position heatmap
/// (values in [0, 1]). Treat instances as immutable once filled; sharing
/// across threads is then safe.
class Volume3D {
public:
    Volume3D() = default;
    Volume3D(int width, int height, int depth, float fill = 0.0f);
    explicit Volume3D(GridDims dims, float fill = 0.0f);
    Volume3D(GridDims dims, std::vector<float> data);

    GridDims dims() const { return dims_; }
    int width() const { return dims_.width; }
    int height() const { return dims_.height; }
    int depth() const { return dims_.depth; }
    std::size_t voxel_count() const { return data_.size(); }

    float at(int x, int y, int z) const { return data_[dims_.index(x, y, z)]; }
    float& at(int x, int y, int z) { return data_[dims_.index(x, y, z)]; }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    bool same_dims(const Volume3D& o) const { return dims_ == o.dims_; }

private:
    GridDims dims_;
    std::vector<float> data_;
};

/// Gaussian rendering parameters for cell position heatmaps.
struct HeatmapParams {
    enum class Combine { Max, SumClamped };

    Vec3 sigma{2.0, 2.0, 1.0};  // per-axis std-dev in voxels, each > 0
    Combine combine = Combine::Max;
    // Evaluation radius in sigmas; 0 evaluates the formula on the full grid.
    // A positive cutoff treats contributions beyond it as zero (at 6 sigma
    // the skipped terms are below 2e-8, invisible after the float32 store
    // for any voxel that also sees in-range content).
    double cutoff_sigmas = 0.0;
};

/// Trilinear sample of the 8 surrounding voxels. Points outside the closed
/// domain [0,w-1]x[0,h-1]x[0,d-1] read as 0 (zero-padding convention) and
/// never fault. Exact at integer coordinates.
double sample_trilinear(const Volume3D& v, const Vec3& p);

/// Same sampling against a raw component plane (used by displacement fields).
double sample_trilinear(std::span<const float> data, GridDims dims, const Vec3& p);

/// Renders unit-amplitude Gaussian peaks at the given points. Every value is
/// combine_i exp(-sum_axis (p_axis - c_i_axis)^2 / (2 sigma_axis^2)); the
/// result lies in [0,1]. Empty point list yields an all-zero volume.
Volume3D render_heatmap(std::span<const Vec3> points, GridDims dims, const HeatmapParams& params);

/// Amplitude-scaled variant; amplitudes must align with points. Heatmaps use
/// amplitudes in (0,1]; image synthesis may pass arbitrary positive contrast.
Volume3D render_heatmap(std::span<const Vec3> points, std::span<const double> amplitudes,
                        GridDims dims, const HeatmapParams& params);

/// Mean squared error (1/|Omega|) * sum_p (a(p)-b(p))^2, accumulated in
/// 64-bit slab-major so the value is independent of the thread budget.
/// Throws std::invalid_argument on dimension mismatch.
double mse(const Volume3D& a, const Volume3D& b);

/// Errors raised by the .cvol reader/writer, each failure mode distinct.
class VolumeIoError : public std::runtime_error {
public:
    enum class Kind { OpenFailed, BadMagic, BadVersion, DimOverflow, Truncated, WriteFailed };

    VolumeIoError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// ".cvol" container: little-endian, magic "CVOL", u32 version=1,
/// u32 w, u32 h, u32 d, then w*h*d float32 values in x-fastest order.
/// save followed by load is a bitwise identity.
void save_volume(const Volume3D& v, const std::string& path);
Volume3D load_volume(const std::string& path);

}  // namespace celltrack

#endif
