#include "celltrack/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "celltrack/parallel.hpp"

namespace celltrack {

namespace {

std::vector<double> gaussian_taps(double sigma, int radius) {
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    for (int i = -radius; i <= radius; ++i) {
        taps[static_cast<std::size_t>(i + radius)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    }
    return taps;
}

// One separable correlation pass along the x axis, zero-padded.
void pass_x(const std::vector<float>& src, std::vector<float>& dst, GridDims dims,
            const std::vector<double>& taps, int radius) {
    const int w = dims.width;
    parallel_for_z(dims.depth, [&](int z) {
        for (int y = 0; y < dims.height; ++y) {
            const std::size_t row = dims.index(0, y, z);
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                const int lo = std::max(0, x - radius);
                const int hi = std::min(w - 1, x + radius);
                for (int u = lo; u <= hi; ++u) {
                    acc += taps[static_cast<std::size_t>(u - x + radius)] * src[row + u];
                }
                dst[row + static_cast<std::size_t>(x)] = static_cast<float>(acc);
            }
        }
    });
}

void pass_y(const std::vector<float>& src, std::vector<float>& dst, GridDims dims,
            const std::vector<double>& taps, int radius) {
    const int h = dims.height;
    const std::size_t sy = static_cast<std::size_t>(dims.width);
    parallel_for_z(dims.depth, [&](int z) {
        for (int y = 0; y < h; ++y) {
            const int lo = std::max(0, y - radius);
            const int hi = std::min(h - 1, y + radius);
            std::size_t i = dims.index(0, y, z);
            for (int x = 0; x < dims.width; ++x, ++i) {
                double acc = 0.0;
                std::size_t j = dims.index(x, lo, z);
                for (int u = lo; u <= hi; ++u, j += sy) {
                    acc += taps[static_cast<std::size_t>(u - y + radius)] * src[j];
                }
                dst[i] = static_cast<float>(acc);
            }
        }
    });
}

void pass_z(const std::vector<float>& src, std::vector<float>& dst, GridDims dims,
            const std::vector<double>& taps, int radius) {
    const int d = dims.depth;
    const std::size_t sz = static_cast<std::size_t>(dims.width) * dims.height;
    parallel_for_z(dims.depth, [&](int z) {
        const int lo = std::max(0, z - radius);
        const int hi = std::min(d - 1, z + radius);
        for (int y = 0; y < dims.height; ++y) {
            std::size_t i = dims.index(0, y, z);
            for (int x = 0; x < dims.width; ++x, ++i) {
                double acc = 0.0;
                std::size_t j = dims.index(x, y, lo);
                for (int u = lo; u <= hi; ++u, j += sz) {
                    acc += taps[static_cast<std::size_t>(u - z + radius)] * src[j];
                }
                dst[i] = static_cast<float>(acc);
            }
        }
    });
}

std::vector<float> separable_correlate(const std::vector<float>& src, GridDims dims,
                                       const std::vector<double>& tx, const std::vector<double>& ty,
                                       const std::vector<double>& tz, int rx, int ry, int rz) {
    std::vector<float> a(src.size()), b(src.size());
    pass_x(src, a, dims, tx, rx);
    pass_y(a, b, dims, ty, ry);
    pass_z(b, a, dims, tz, rz);
    return a;
}

}  // namespace

Volume3D estimate_heatmap(const Volume3D& image, const DetectConfig& cfg) {
    cfg.validate();
    const GridDims dims = image.dims();
    const int rx = std::max(1, static_cast<int>(std::ceil(3.0 * cfg.sigma.x)));
    const int ry = std::max(1, static_cast<int>(std::ceil(3.0 * cfg.sigma.y)));
    const int rz = std::max(1, static_cast<int>(std::ceil(3.0 * cfg.sigma.z)));
    const auto kx = gaussian_taps(cfg.sigma.x, rx);
    const auto ky = gaussian_taps(cfg.sigma.y, ry);
    const auto kz = gaussian_taps(cfg.sigma.z, rz);
    std::vector<double> k2x(kx.size()), k2y(ky.size()), k2z(kz.size());
    for (std::size_t i = 0; i < kx.size(); ++i) k2x[i] = kx[i] * kx[i];
    for (std::size_t i = 0; i < ky.size(); ++i) k2y[i] = ky[i] * ky[i];
    for (std::size_t i = 0; i < kz.size(); ++i) k2z[i] = kz[i] * kz[i];
    const std::vector<double> bx(kx.size(), 1.0), by(ky.size(), 1.0), bz(kz.size(), 1.0);

    const std::vector<float>& img = image.data();
    std::vector<float> img2(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) img2[i] = img[i] * img[i];
    const std::vector<float> ones(img.size(), 1.0f);

    // All window statistics are computed over the in-bounds part of the
    // support box, so border voxels see a correctly re-normalized kernel
    // instead of zero padding.
    const std::vector<float> corr = separable_correlate(img, dims, kx, ky, kz, rx, ry, rz);
    const std::vector<float> ksum = separable_correlate(ones, dims, kx, ky, kz, rx, ry, rz);
    const std::vector<float> k2sum = separable_correlate(ones, dims, k2x, k2y, k2z, rx, ry, rz);
    const std::vector<float> s1 = separable_correlate(img, dims, bx, by, bz, rx, ry, rz);
    const std::vector<float> s2 = separable_correlate(img2, dims, bx, by, bz, rx, ry, rz);
    const std::vector<float> count = separable_correlate(ones, dims, bx, by, bz, rx, ry, rz);

    Volume3D out(dims, 0.0f);
    float* dst = out.data().data();
    const std::size_t plane = static_cast<std::size_t>(dims.width) * dims.height;
    parallel_for_z(dims.depth, [&](int z) {
        const std::size_t lo = plane * static_cast<std::size_t>(z);
        const std::size_t hi = lo + plane;
        for (std::size_t i = lo; i < hi; ++i) {
            const double m = count[i];
            if (m < 1.0) continue;
            const double num = static_cast<double>(corr[i]) -
                               static_cast<double>(ksum[i]) * s1[i] / m;
            if (num <= 0.0) continue;
            const double kernel_var =
                static_cast<double>(k2sum[i]) - static_cast<double>(ksum[i]) * ksum[i] / m;
            const double image_var =
                static_cast<double>(s2[i]) - static_cast<double>(s1[i]) * s1[i] / m;
            const double denom = kernel_var * image_var;
            if (denom <= 1e-24) continue;
            dst[i] = static_cast<float>(std::min(1.0, num * num / denom));
        }
    });
    return out;
}

Volume3D regenerate_prior(const DetectionSet& prev, const DisplacementField& field, GridDims dims,
                          const HeatmapParams& params) {
    if (field.dims() != dims) throw std::invalid_argument("regenerate_prior: field dims mismatch");
    std::vector<Vec3> warped;
    std::vector<double> amps;
    warped.reserve(prev.size());
    amps.reserve(prev.size());
    for (std::size_t i = 0; i < prev.size(); ++i) {
        const Vec3 moved = warp_point(prev.points[i], field);
        if (!dims.in_domain(moved)) continue;  // left the volume: track ends here
        warped.push_back(moved);
        amps.push_back(prev.confidence.empty() ? 1.0 : prev.confidence[i]);
    }
    return render_heatmap(warped, amps, dims, params);
}

Volume3D fuse_pairwise(const Volume3D& image_hm, const Volume3D& prior_hm, double w) {
    if (!image_hm.same_dims(prior_hm)) throw std::invalid_argument("fuse_pairwise: dims mismatch");
    if (w < 0.0 || w > 1.0) throw std::invalid_argument("fuse_pairwise: w must be in [0,1]");
    Volume3D out(image_hm.dims(), 0.0f);
    const float* a = image_hm.data().data();
    const float* b = prior_hm.data().data();
    float* dst = out.data().data();
    const std::size_t n = out.voxel_count();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = (1.0 - w) * a[i] + w * b[i];
        dst[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

namespace {

struct PeakCandidate {
    float value;
    int x, y, z;
    Vec3 refined;
};

// 3-point quadratic fit per axis; only moves within +-0.5 voxel and only when
// both neighbors exist and the curvature is negative.
double quadratic_offset(double vm, double v0, double vp) {
    const double denom = vm - 2.0 * v0 + vp;
    if (denom >= 0.0) return 0.0;
    return std::clamp(0.5 * (vm - vp) / denom, -0.5, 0.5);
}

}  // namespace

DetectionSet detect_peaks(const Volume3D& hm, const DetectConfig& cfg, int frame) {
    cfg.validate();
    const GridDims dims = hm.dims();
    const int w = dims.width, h = dims.height, d = dims.depth;

    std::vector<std::vector<PeakCandidate>> per_slab(static_cast<std::size_t>(d));
    parallel_for_z(d, [&](int z) {
        auto& local = per_slab[static_cast<std::size_t>(z)];
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const float v = hm.at(x, y, z);
                if (!(v > cfg.peak_threshold)) continue;
                bool is_max = true;
                for (int dz = -1; dz <= 1 && is_max; ++dz) {
                    for (int dy = -1; dy <= 1 && is_max; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (dx == 0 && dy == 0 && dz == 0) continue;
                            const int nx = x + dx, ny = y + dy, nz = z + dz;
                            if (!dims.contains(nx, ny, nz)) continue;
                            if (hm.at(nx, ny, nz) >= v) {
                                is_max = false;
                                break;
                            }
                        }
                    }
                }
                if (!is_max) continue;
                PeakCandidate c{v, x, y, z, Vec3(x, y, z)};
                if (cfg.subvoxel_refine) {
                    if (x > 0 && x < w - 1) {
                        c.refined.x += quadratic_offset(hm.at(x - 1, y, z), v, hm.at(x + 1, y, z));
                    }
                    if (y > 0 && y < h - 1) {
                        c.refined.y += quadratic_offset(hm.at(x, y - 1, z), v, hm.at(x, y + 1, z));
                    }
                    if (z > 0 && z < d - 1) {
                        c.refined.z += quadratic_offset(hm.at(x, y, z - 1), v, hm.at(x, y, z + 1));
                    }
                }
                local.push_back(c);
            }
        }
    });

    std::vector<PeakCandidate> candidates;
    for (auto& slab : per_slab) {
        candidates.insert(candidates.end(), slab.begin(), slab.end());
    }
    std::sort(candidates.begin(), candidates.end(), [](const PeakCandidate& a, const PeakCandidate& b) {
        if (a.value != b.value) return a.value > b.value;
        if (a.z != b.z) return a.z < b.z;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });

    DetectionSet out;
    out.frame = frame;
    const double r2 = cfg.nms_radius * cfg.nms_radius;
    for (const auto& c : candidates) {
        bool suppressed = false;
        for (const Vec3& kept : out.points) {
            const Vec3 diff = c.refined - kept;
            if (diff.x * diff.x + diff.y * diff.y + diff.z * diff.z < r2) {
                suppressed = true;
                break;
            }
        }
        if (suppressed) continue;
        out.points.push_back(c.refined);
        out.confidence.push_back(c.value);
    }
    return out;
}

void write_detections_csv(const std::vector<DetectionSet>& sets, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw VolumeIoError(VolumeIoError::Kind::OpenFailed, "cannot open for write: " + path);
    std::fputs("frame,x,y,z,confidence\n", fp);
    for (const auto& s : sets) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            std::fprintf(fp, "%d,%.6f,%.6f,%.6f,%.6f\n", s.frame, s.points[i].x, s.points[i].y,
                         s.points[i].z, s.confidence[i]);
        }
    }
    if (std::fclose(fp) != 0) {
        throw VolumeIoError(VolumeIoError::Kind::WriteFailed, "short write: " + path);
    }
}

}  // namespace celltrack
