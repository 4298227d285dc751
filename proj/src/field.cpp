#include "celltrack/field.hpp"

#include <stdexcept>

#include "celltrack/parallel.hpp"

namespace celltrack {

Volume3D warp_image(const Volume3D& src, const DisplacementField& field) {
    if (src.dims() != field.dims()) throw std::invalid_argument("warp_image: dims mismatch");
    const GridDims dims = src.dims();
    Volume3D out(dims, 0.0f);
    const float* fx = field.x().data();
    const float* fy = field.y().data();
    const float* fz = field.z().data();
    const std::span<const float> data(src.data());
    float* dst = out.data().data();

    parallel_for_z(dims.depth, [&](int z) {
        for (int y = 0; y < dims.height; ++y) {
            std::size_t i = dims.index(0, y, z);
            for (int x = 0; x < dims.width; ++x, ++i) {
                const Vec3 q{x - static_cast<double>(fx[i]), y - static_cast<double>(fy[i]),
                             z - static_cast<double>(fz[i])};
                dst[i] = static_cast<float>(sample_trilinear(data, dims, q));
            }
        }
    });
    return out;
}

Vec3 warp_point(const Vec3& c, const DisplacementField& field) {
    if (!field.dims().in_domain(c)) {
        throw std::invalid_argument("warp_point: point outside field domain");
    }
    return c + field.sample(c);
}

void save_field(const DisplacementField& field, const std::string& base_path) {
    const GridDims dims = field.dims();
    save_volume(Volume3D(dims, field.x()), base_path + ".dx.cvol");
    save_volume(Volume3D(dims, field.y()), base_path + ".dy.cvol");
    save_volume(Volume3D(dims, field.z()), base_path + ".dz.cvol");
}

DisplacementField load_field(const std::string& base_path) {
    Volume3D vx = load_volume(base_path + ".dx.cvol");
    Volume3D vy = load_volume(base_path + ".dy.cvol");
    Volume3D vz = load_volume(base_path + ".dz.cvol");
    if (!vx.same_dims(vy) || !vx.same_dims(vz)) {
        throw std::invalid_argument("load_field: component dims mismatch");
    }
    DisplacementField f(vx.dims());
    f.x() = vx.data();
    f.y() = vy.data();
    f.z() = vz.data();
    return f;
}

}  // namespace celltrack
