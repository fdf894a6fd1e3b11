#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace microtrap {

using Vec3 = Eigen::Vector3d;

// Axis-aligned box, all coordinates in metres.
struct Box {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();

    bool contains(const Vec3& p) const
    {
        return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() &&
               p.y() <= hi.y() && p.z() >= lo.z() && p.z() <= hi.z();
    }
    bool contains(const Box& b) const
    {
        return contains(b.lo) && contains(b.hi);
    }
    bool intersects(const Box& b) const
    {
        return lo.x() < b.hi.x() && b.lo.x() < hi.x() && lo.y() < b.hi.y() &&
               b.lo.y() < hi.y() && lo.z() < b.hi.z() && b.lo.z() < hi.z();
    }
    Vec3 extent() const { return hi - lo; }
};

// Uniform cell-centered 3D grid. Linear index is row-major over (i, j, k):
// idx = (i*ny + j)*nz + k, so z varies fastest. Voxel (i,j,k) is centered at
// origin + (i+1/2, j+1/2, k+1/2) * spacing.
template <typename T>
class Grid3 {
  public:
    Grid3() = default;
    Grid3(std::array<int, 3> dims, Vec3 origin, double spacing, T fill = T{})
        : nx_(dims[0]), ny_(dims[1]), nz_(dims[2]), origin_(origin),
          spacing_(spacing),
          data_(static_cast<std::size_t>(nx_) * ny_ * nz_, fill)
    {
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    std::size_t size() const { return data_.size(); }
    const Vec3& origin() const { return origin_; }
    double spacing() const { return spacing_; }

    std::size_t idx(int i, int j, int k) const
    {
        return (static_cast<std::size_t>(i) * ny_ + j) * nz_ + k;
    }
    T& operator()(int i, int j, int k) { return data_[idx(i, j, k)]; }
    const T& operator()(int i, int j, int k) const
    {
        return data_[idx(i, j, k)];
    }
    T& operator[](std::size_t n) { return data_[n]; }
    const T& operator[](std::size_t n) const { return data_[n]; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    Vec3 center(int i, int j, int k) const
    {
        return origin_ + Vec3(i + 0.5, j + 0.5, k + 0.5) * spacing_;
    }

    // Continuous grid coordinates of a point (voxel units, center at +0.5).
    Vec3 to_grid(const Vec3& p) const { return (p - origin_) / spacing_; }

    bool in_bounds(int i, int j, int k) const
    {
        return i >= 0 && i < nx_ && j >= 0 && j < ny_ && k >= 0 && k < nz_;
    }

    // Index of the voxel whose cell contains p (floor of grid coordinates).
    std::array<int, 3> cell_of(const Vec3& p) const
    {
        const Vec3 g = to_grid(p);
        return {static_cast<int>(std::floor(g.x())),
                static_cast<int>(std::floor(g.y())),
                static_cast<int>(std::floor(g.z()))};
    }

  private:
    int nx_ = 0, ny_ = 0, nz_ = 0;
    Vec3 origin_ = Vec3::Zero();
    double spacing_ = 0.0;
    std::vector<T> data_;
};

// Grid resolution request: uniform spacing over a domain box. Dimensions are
// rounded to the nearest integer cell count per axis.
struct GridSpec {
    double spacing = 0.0;  // m

    std::array<int, 3> dims_for(const Box& domain) const
    {
        if (spacing <= 0.0) throw std::invalid_argument("spacing must be > 0");
        auto n = [&](double len) {
            const int c = static_cast<int>(std::lround(len / spacing));
            if (c < 3) throw std::invalid_argument("domain too small for spacing");
            return c;
        };
        const Vec3 e = domain.extent();
        return {n(e.x()), n(e.y()), n(e.z())};
    }
};

// Binary grid file layout (little endian): magic "MTGR", u32 payload code
// (0 = u16 labels, 1 = f64 field), 3 x u32 dims, 3 x f64 origin, f64 spacing,
// then the payload in the linear index order above.
void write_grid_u16(const std::string& path, const Grid3<std::uint16_t>& g);
void write_grid_f64(const std::string& path, const Grid3<double>& g);
Grid3<std::uint16_t> read_grid_u16(const std::string& path);
Grid3<double> read_grid_f64(const std::string& path);

}  // namespace microtrap
