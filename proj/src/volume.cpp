#include "celltrack/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "celltrack/parallel.hpp"

namespace celltrack {

namespace {

void check_dims_positive(GridDims dims) {
    if (dims.width <= 0 || dims.height <= 0 || dims.depth <= 0) {
        throw std::invalid_argument("volume dims must be positive");
    }
}

}  // namespace

Volume3D::Volume3D(int width, int height, int depth, float fill)
    : Volume3D(GridDims{width, height, depth}, fill) {}

Volume3D::Volume3D(GridDims dims, float fill) : dims_(dims) {
    check_dims_positive(dims);
    data_.assign(dims.voxel_count(), fill);
}

Volume3D::Volume3D(GridDims dims, std::vector<float> data) : dims_(dims), data_(std::move(data)) {
    check_dims_positive(dims);
    if (data_.size() != dims.voxel_count()) {
        throw std::invalid_argument("volume data length must equal width*height*depth");
    }
}

double sample_trilinear(std::span<const float> data, GridDims dims, const Vec3& p) {
    if (!dims.in_domain(p)) return 0.0;

    const int x0 = static_cast<int>(std::floor(p.x));
    const int y0 = static_cast<int>(std::floor(p.y));
    const int z0 = static_cast<int>(std::floor(p.z));
    const double fx = p.x - x0;
    const double fy = p.y - y0;
    const double fz = p.z - z0;

    // Clamp the +1 corner at the far face; its weight is exactly 0 there.
    const int x1 = std::min(x0 + 1, dims.width - 1);
    const int y1 = std::min(y0 + 1, dims.height - 1);
    const int z1 = std::min(z0 + 1, dims.depth - 1);

    const double c000 = data[dims.index(x0, y0, z0)];
    const double c100 = data[dims.index(x1, y0, z0)];
    const double c010 = data[dims.index(x0, y1, z0)];
    const double c110 = data[dims.index(x1, y1, z0)];
    const double c001 = data[dims.index(x0, y0, z1)];
    const double c101 = data[dims.index(x1, y0, z1)];
    const double c011 = data[dims.index(x0, y1, z1)];
    const double c111 = data[dims.index(x1, y1, z1)];

    const double c00 = c000 + (c100 - c000) * fx;
    const double c10 = c010 + (c110 - c010) * fx;
    const double c01 = c001 + (c101 - c001) * fx;
    const double c11 = c011 + (c111 - c011) * fx;
    const double c0 = c00 + (c10 - c00) * fy;
    const double c1 = c01 + (c11 - c01) * fy;
    return c0 + (c1 - c0) * fz;
}

double sample_trilinear(const Volume3D& v, const Vec3& p) {
    return sample_trilinear(std::span<const float>(v.data()), v.dims(), p);
}

Volume3D render_heatmap(std::span<const Vec3> points, GridDims dims, const HeatmapParams& params) {
    std::vector<double> ones(points.size(), 1.0);
    return render_heatmap(points, std::span<const double>(ones), dims, params);
}

Volume3D render_heatmap(std::span<const Vec3> points, std::span<const double> amplitudes,
                        GridDims dims, const HeatmapParams& params) {
    check_dims_positive(dims);
    if (params.sigma.x <= 0.0 || params.sigma.y <= 0.0 || params.sigma.z <= 0.0) {
        throw std::invalid_argument("heatmap sigma components must be > 0");
    }
    if (points.size() != amplitudes.size()) {
        throw std::invalid_argument("render_heatmap: points/amplitudes size mismatch");
    }

    Volume3D out(dims, 0.0f);
    if (points.empty()) return out;

    const double inv2sx = 1.0 / (2.0 * params.sigma.x * params.sigma.x);
    const double inv2sy = 1.0 / (2.0 * params.sigma.y * params.sigma.y);
    const double inv2sz = 1.0 / (2.0 * params.sigma.z * params.sigma.z);
    const bool use_max = params.combine == HeatmapParams::Combine::Max;
    float* dst = out.data().data();

    if (params.cutoff_sigmas > 0.0) {
        // Bounded evaluation: each point touches only its cutoff box. Voxel
        // accumulation order follows point order, so results are independent
        // of the thread partition.
        const double cx = params.cutoff_sigmas * params.sigma.x;
        const double cy = params.cutoff_sigmas * params.sigma.y;
        const double cz = params.cutoff_sigmas * params.sigma.z;
        parallel_for_z(dims.depth, [&](int z) {
            for (int y = 0; y < dims.height; ++y) {
                const std::size_t base = dims.index(0, y, z);
                for (std::size_t i = 0; i < points.size(); ++i) {
                    const Vec3& c = points[i];
                    if (std::abs(z - c.z) > cz || std::abs(y - c.y) > cy) continue;
                    const int x0 = std::max(0, static_cast<int>(std::ceil(c.x - cx)));
                    const int x1 = std::min(dims.width - 1, static_cast<int>(std::floor(c.x + cx)));
                    const double dy = y - c.y;
                    const double dz = z - c.z;
                    const double row_term = dy * dy * inv2sy + dz * dz * inv2sz;
                    for (int x = x0; x <= x1; ++x) {
                        const double dx = x - c.x;
                        const double g = amplitudes[i] * std::exp(-(dx * dx * inv2sx + row_term));
                        float& cell = dst[base + static_cast<std::size_t>(x)];
                        if (use_max) {
                            if (g > cell) cell = static_cast<float>(g);
                        } else {
                            cell = static_cast<float>(std::min(1.0, cell + g));
                        }
                    }
                }
            }
        });
        return out;
    }

    parallel_for_z(dims.depth, [&](int z) {
        for (int y = 0; y < dims.height; ++y) {
            std::size_t row = dims.index(0, y, z);
            for (int x = 0; x < dims.width; ++x) {
                double acc = 0.0;
                for (std::size_t i = 0; i < points.size(); ++i) {
                    const double dx = x - points[i].x;
                    const double dy = y - points[i].y;
                    const double dz = z - points[i].z;
                    const double g =
                        amplitudes[i] * std::exp(-(dx * dx * inv2sx + dy * dy * inv2sy + dz * dz * inv2sz));
                    acc = use_max ? std::max(acc, g) : acc + g;
                }
                if (!use_max && acc > 1.0) acc = 1.0;
                dst[row + static_cast<std::size_t>(x)] = static_cast<float>(acc);
            }
        }
    });
    return out;
}

double mse(const Volume3D& a, const Volume3D& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("mse: volume dims mismatch");
    const GridDims dims = a.dims();
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    const std::size_t plane = static_cast<std::size_t>(dims.width) * dims.height;

    std::vector<double> partial(static_cast<std::size_t>(dims.depth), 0.0);
    parallel_for_z(dims.depth, [&](int z) {
        const std::size_t base = plane * static_cast<std::size_t>(z);
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            const double d = static_cast<double>(pa[base + i]) - static_cast<double>(pb[base + i]);
            acc += d * d;
        }
        partial[static_cast<std::size_t>(z)] = acc;
    });
    double total = 0.0;
    for (double s : partial) total += s;  // slab-major, deterministic
    return total / static_cast<double>(dims.voxel_count());
}

namespace {

constexpr char kMagic[4] = {'C', 'V', 'O', 'L'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxVoxels = 1ull << 28;  // 1 GiB of float payload

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void save_volume(const Volume3D& v, const std::string& path) {
    std::string header;
    header.append(kMagic, 4);
    put_u32(header, kVersion);
    put_u32(header, static_cast<std::uint32_t>(v.width()));
    put_u32(header, static_cast<std::uint32_t>(v.height()));
    put_u32(header, static_cast<std::uint32_t>(v.depth()));

    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw VolumeIoError(VolumeIoError::Kind::OpenFailed, "cannot open for write: " + path);
    bool ok = std::fwrite(header.data(), 1, header.size(), f) == header.size();
    if (ok && !v.data().empty()) {
        static_assert(sizeof(float) == 4);
        // Little-endian hosts write the payload directly; this is the on-disk order.
        ok = std::fwrite(v.data().data(), sizeof(float), v.data().size(), f) == v.data().size();
    }
    ok = (std::fclose(f) == 0) && ok;
    if (!ok) throw VolumeIoError(VolumeIoError::Kind::WriteFailed, "short write: " + path);
}

Volume3D load_volume(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw VolumeIoError(VolumeIoError::Kind::OpenFailed, "cannot open: " + path);

    unsigned char header[20];
    const std::size_t got = std::fread(header, 1, sizeof(header), f);
    if (got < sizeof(header)) {
        std::fclose(f);
        if (got >= 4 && std::memcmp(header, kMagic, 4) != 0) {
            throw VolumeIoError(VolumeIoError::Kind::BadMagic, "not a CVOL file: " + path);
        }
        throw VolumeIoError(VolumeIoError::Kind::Truncated, "truncated header: " + path);
    }
    if (std::memcmp(header, kMagic, 4) != 0) {
        throw VolumeIoError(VolumeIoError::Kind::BadMagic, "not a CVOL file: " + path);
    }
    if (get_u32(header + 4) != kVersion) {
        std::fclose(f);
        throw VolumeIoError(VolumeIoError::Kind::BadVersion, "unsupported CVOL version in " + path);
    }
    const std::uint32_t w = get_u32(header + 8);
    const std::uint32_t h = get_u32(header + 12);
    const std::uint32_t d = get_u32(header + 16);
    const std::uint64_t n = static_cast<std::uint64_t>(w) * h * d;
    if (w == 0 || h == 0 || d == 0 || n > kMaxVoxels || w > kMaxVoxels || h > kMaxVoxels ||
        d > kMaxVoxels) {
        std::fclose(f);
        throw VolumeIoError(VolumeIoError::Kind::DimOverflow, "unreasonable CVOL dims in " + path);
    }

    std::vector<float> data(static_cast<std::size_t>(n));
    const std::size_t read = std::fread(data.data(), sizeof(float), data.size(), f);
    std::fclose(f);
    if (read != data.size()) {
        throw VolumeIoError(VolumeIoError::Kind::Truncated,
                            "payload shorter than declared dims: " + path);
    }
    return Volume3D(GridDims{static_cast<int>(w), static_cast<int>(h), static_cast<int>(d)},
                    std::move(data));
}

}  // namespace celltrack
