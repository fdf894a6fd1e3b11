#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "microtrap/grid.hpp"

namespace microtrap {

// Axes: x runs along the trap line (axial), y is the in-plane transverse
// direction (cantilevers point along +/-y), z is normal to the chip. The chip
// plane is x-y; the active zone is centered on the origin.

enum class Layer : std::uint8_t { top, bottom };
enum class Side : std::uint8_t { north, south };
enum class Role : std::uint8_t { rf, dc };

struct ElectrodeLabel {
    int segment_index = 0;
    Layer layer = Layer::top;
    Side side = Side::north;
    Role role = Role::dc;

    std::string name() const;
};

// RF goes to the top cantilevers on the north side and the bottom cantilevers
// on the south side; the other diagonal carries the static potentials.
inline Role role_for(Layer layer, Side side)
{
    const bool rf = (layer == Layer::top && side == Side::north) ||
                    (layer == Layer::bottom && side == Side::south);
    return rf ? Role::rf : Role::dc;
}

struct GeometryParams {
    double s = 60e-6;        // tip-to-tip in-plane gap
    double h = 4e-6;         // insulator layer separation
    double t = 2.3e-6;       // electrode layer thickness
    double w = 130e-6;       // segment axial width
    double g = 25e-6;        // inter-segment gap
    int n_segments = 4;
    double undercut = 15e-6;       // insulator recess, metadata only
    double cantilever_length = 120e-6;  // tip toward substrate
    double doping_per_cm3 = 3e18;       // metadata only
    Box domain{Vec3(-400e-6, -200e-6, -120e-6), Vec3(400e-6, 200e-6, 120e-6)};
    enum class BoundaryCondition { grounded_box } boundary_condition =
        BoundaryCondition::grounded_box;

    // Throws std::invalid_argument on violated invariants. The domain box
    // must keep every face at least s away from the trap center so the
    // grounded closure stays out of the active region.
    void validate() const;

    int electrode_count() const { return 4 * n_segments; }
    double axial_extent() const { return n_segments * w + (n_segments - 1) * g; }
};

struct Electrode {
    int id = 0;
    ElectrodeLabel label;
    Box solid;
};

// Voxel labels: 0 vacuum, 1 boundary shell, 2+id electrode id.
struct VoxelMask {
    static constexpr std::uint16_t vacuum = 0;
    static constexpr std::uint16_t boundary = 1;
    static constexpr std::uint16_t first_electrode = 2;

    Grid3<std::uint16_t> grid;
    std::vector<ElectrodeLabel> labels;  // indexed by electrode id
    std::vector<std::int64_t> voxel_count;  // voxels captured per electrode

    int n_electrodes() const { return static_cast<int>(labels.size()); }
    static std::uint16_t electrode_value(int id)
    {
        return static_cast<std::uint16_t>(first_electrode + id);
    }
    bool is_electrode(std::uint16_t v) const { return v >= first_electrode; }
    bool is_fixed(std::uint16_t v) const { return v != vacuum; }
};

// Construct the 4*n_segments cantilever electrode boxes. Throws on invalid
// params, overlapping solids, or solids outside the domain.
std::vector<Electrode> build_trap(const GeometryParams& params);

// Label voxels by electrode membership of their centers; the outermost voxel
// shell becomes the grounded boundary. Throws if spacing > t or if any
// electrode captures zero voxels.
VoxelMask voxelize(const std::vector<Electrode>& electrodes, const Box& domain,
                   const GridSpec& spec);

inline VoxelMask voxelize(const GeometryParams& params, const GridSpec& spec)
{
    return voxelize(build_trap(params), params.domain, spec);
}

}  // namespace microtrap
