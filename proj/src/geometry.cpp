#include "microtrap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace microtrap {

std::string ElectrodeLabel::name() const
{
    std::string n = role == Role::rf ? "rf" : "dc";
    n += "_s" + std::to_string(segment_index);
    n += layer == Layer::top ? "_top" : "_bot";
    n += side == Side::north ? "_n" : "_s";
    return n;
}

void GeometryParams::validate() const
{
    if (s <= 0 || h <= 0 || t <= 0 || w <= 0)
        throw std::invalid_argument("geometry: s, h, t, w must be > 0");
    if (g < 0) throw std::invalid_argument("geometry: g must be >= 0");
    if (n_segments < 1)
        throw std::invalid_argument("geometry: n_segments must be >= 1");
    if (cantilever_length <= 0)
        throw std::invalid_argument("geometry: cantilever length must be > 0");
    if (undercut < 0)
        throw std::invalid_argument("geometry: undercut must be >= 0");
    const Vec3 lo = domain.lo, hi = domain.hi;
    for (int a = 0; a < 3; ++a) {
        if (hi[a] - lo[a] <= 0)
            throw std::invalid_argument("geometry: empty domain box");
        if (-lo[a] < s || hi[a] < s)
            throw std::invalid_argument(
                "geometry: domain face closer than s to the trap center");
    }
}

std::vector<Electrode> build_trap(const GeometryParams& p)
{
    p.validate();

    const double x0 = -0.5 * p.axial_extent();
    const double pitch = p.w + p.g;
    std::vector<Electrode> out;
    out.reserve(p.electrode_count());

    for (int k = 0; k < p.n_segments; ++k) {
        const double xa = x0 + k * pitch;
        const double xb = xa + p.w;
        for (Layer layer : {Layer::top, Layer::bottom}) {
            const double za = layer == Layer::top ? 0.5 * p.h : -0.5 * p.h - p.t;
            const double zb = za + p.t;
            for (Side side : {Side::north, Side::south}) {
                const double ya =
                    side == Side::north ? 0.5 * p.s : -0.5 * p.s - p.cantilever_length;
                const double yb = ya + p.cantilever_length;
                Electrode e;
                e.id = static_cast<int>(out.size());
                e.label = ElectrodeLabel{k, layer, side, role_for(layer, side)};
                e.solid = Box{Vec3(xa, ya, za), Vec3(xb, yb, zb)};
                // Picometre slack so solids may sit exactly on a domain face.
                const Vec3 eps = Vec3::Constant(1e-12);
                const Box dom{p.domain.lo - eps, p.domain.hi + eps};
                if (!dom.contains(e.solid))
                    throw std::invalid_argument("geometry: electrode " +
                                                e.label.name() +
                                                " outside the domain");
                out.push_back(e);
            }
        }
    }

    for (std::size_t a = 0; a < out.size(); ++a)
        for (std::size_t b = a + 1; b < out.size(); ++b)
            if (out[a].solid.intersects(out[b].solid))
                throw std::invalid_argument("geometry: electrodes " +
                                            out[a].label.name() + " and " +
                                            out[b].label.name() + " overlap");
    return out;
}

VoxelMask voxelize(const std::vector<Electrode>& electrodes, const Box& domain,
                   const GridSpec& spec)
{
    if (electrodes.empty()) throw std::invalid_argument("voxelize: no electrodes");
    double t_min = std::numeric_limits<double>::max();
    for (const auto& e : electrodes)
        t_min = std::min(t_min, e.solid.extent().z());
    if (spec.spacing > t_min + 1e-12)
        throw std::invalid_argument(
            "voxelize: spacing exceeds electrode layer thickness");

    const auto dims = spec.dims_for(domain);
    VoxelMask mask;
    mask.grid = Grid3<std::uint16_t>(dims, domain.lo, spec.spacing,
                                     VoxelMask::vacuum);
    mask.labels.resize(electrodes.size());
    mask.voxel_count.assign(electrodes.size(), 0);
    for (const auto& e : electrodes) mask.labels[e.id] = e.label;

    auto& g = mask.grid;
    for (const auto& e : electrodes) {
        // Index range of voxels whose centers can fall inside the solid.
        const Vec3 glo = g.to_grid(e.solid.lo), ghi = g.to_grid(e.solid.hi);
        const int ia = std::max(0, (int)std::ceil(glo.x() - 0.5));
        const int ja = std::max(0, (int)std::ceil(glo.y() - 0.5));
        const int ka = std::max(0, (int)std::ceil(glo.z() - 0.5));
        const int ib = std::min(g.nx() - 1, (int)std::floor(ghi.x() - 0.5));
        const int jb = std::min(g.ny() - 1, (int)std::floor(ghi.y() - 0.5));
        const int kb = std::min(g.nz() - 1, (int)std::floor(ghi.z() - 0.5));
        const std::uint16_t v = VoxelMask::electrode_value(e.id);
        for (int i = ia; i <= ib; ++i)
            for (int j = ja; j <= jb; ++j)
                for (int k = ka; k <= kb; ++k)
                    if (e.solid.contains(g.center(i, j, k)))
                        g(i, j, k) = v;
    }

    // Grounded boundary shell wins over anything it clips.
    for (int i = 0; i < g.nx(); ++i)
        for (int j = 0; j < g.ny(); ++j)
            for (int k = 0; k < g.nz(); ++k)
                if (i == 0 || j == 0 || k == 0 || i == g.nx() - 1 ||
                    j == g.ny() - 1 || k == g.nz() - 1)
                    g(i, j, k) = VoxelMask::boundary;

    for (std::size_t n = 0; n < g.size(); ++n)
        if (mask.is_electrode(g[n]))
            ++mask.voxel_count[g[n] - VoxelMask::first_electrode];

    for (std::size_t e = 0; e < electrodes.size(); ++e)
        if (mask.voxel_count[e] == 0)
            throw std::runtime_error("voxelize: electrode " +
                                     mask.labels[e].name() +
                                     " captured zero voxels");

    // Trap masks must keep the axis midpoint open; skip for electrode sets
    // whose domain does not cover the origin at all.
    const auto c = g.cell_of(Vec3::Zero());
    if (g.in_bounds(c[0], c[1], c[2]) &&
        mask.is_electrode(g(c[0], c[1], c[2])))
        throw std::runtime_error("voxelize: trap axis midpoint is not vacuum");

    return mask;
}

}  // namespace microtrap
