#include "microtrap/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace microtrap {

namespace {

// One multigrid level. Level 0 aliases the caller's solution grid and bakes
// the Dirichlet data into u; deeper levels hold corrections (u) against a
// restricted residual (f), with u pinned to 0 wherever any fine child is
// fixed. The 7-point operator carries the 1/h^2 of its level so residual
// transfer stays consistent under 2:1 coarsening.
struct Level {
    int nx = 0, ny = 0, nz = 0;
    double inv_h2 = 1.0;  // 1 / h^2, fine level h = 1
    std::vector<std::uint8_t> fixed;
    std::vector<double> u;
    std::vector<double> f;  // empty on the fine level (zero rhs)

    std::size_t size() const
    {
        return static_cast<std::size_t>(nx) * ny * nz;
    }
    std::size_t idx(int i, int j, int k) const
    {
        return (static_cast<std::size_t>(i) * ny + j) * nz + k;
    }
};

void smooth_color(Level& L, int color, double omega)
{
    const std::size_t sx = static_cast<std::size_t>(L.ny) * L.nz;
    const std::size_t sy = L.nz;
    const double h2 = 1.0 / L.inv_h2;
    const bool has_f = !L.f.empty();
    double* u = L.u.data();
    const double* f = has_f ? L.f.data() : nullptr;
    const std::uint8_t* fixed = L.fixed.data();

#pragma omp parallel for schedule(static)
    for (int i = 1; i < L.nx - 1; ++i) {
        for (int j = 1; j < L.ny - 1; ++j) {
            const int k0 = 1 + ((i + j + 1 + color) & 1);
            std::size_t n = L.idx(i, j, k0);
            for (int k = k0; k < L.nz - 1; k += 2, n += 2) {
                if (fixed[n]) continue;
                double s = u[n - sx] + u[n + sx] + u[n - sy] + u[n + sy] +
                           u[n - 1] + u[n + 1];
                if (has_f) s += h2 * f[n];
                const double gs = s * (1.0 / 6.0);
                u[n] += omega * (gs - u[n]);
            }
        }
    }
}

void smooth(Level& L, int sweeps, double omega)
{
    for (int s = 0; s < sweeps; ++s) {
        smooth_color(L, 0, omega);
        smooth_color(L, 1, omega);
    }
}

// Residual f - A u at a non-fixed cell.
inline double residual_at(const Level& L, std::size_t n, std::size_t sx,
                          std::size_t sy)
{
    const double* u = L.u.data();
    const double a =
        (6.0 * u[n] - (u[n - sx] + u[n + sx] + u[n - sy] + u[n + sy] +
                       u[n - 1] + u[n + 1])) *
        L.inv_h2;
    return (L.f.empty() ? 0.0 : L.f[n]) - a;
}

double residual_max(const Level& L)
{
    const std::size_t sx = static_cast<std::size_t>(L.ny) * L.nz;
    const std::size_t sy = L.nz;
    double worst = 0.0;
#pragma omp parallel for schedule(static) reduction(max : worst)
    for (int i = 1; i < L.nx - 1; ++i)
        for (int j = 1; j < L.ny - 1; ++j) {
            std::size_t n = L.idx(i, j, 1);
            for (int k = 1; k < L.nz - 1; ++k, ++n) {
                if (L.fixed[n]) continue;
                worst = std::max(worst, std::abs(residual_at(L, n, sx, sy)));
            }
        }
    return worst;
}

// Full-weighting restriction of the fine residual into the coarse rhs
// (children of a coarse cell average; fixed children contribute zero).
void restrict_residual(const Level& fine, Level& coarse)
{
    const std::size_t sx = static_cast<std::size_t>(fine.ny) * fine.nz;
    const std::size_t sy = fine.nz;
#pragma omp parallel for schedule(static)
    for (int I = 0; I < coarse.nx; ++I)
        for (int J = 0; J < coarse.ny; ++J)
            for (int K = 0; K < coarse.nz; ++K) {
                const std::size_t cn = coarse.idx(I, J, K);
                coarse.u[cn] = 0.0;
                if (coarse.fixed[cn]) {
                    coarse.f[cn] = 0.0;
                    continue;
                }
                double acc = 0.0;
                for (int di = 0; di < 2; ++di)
                    for (int dj = 0; dj < 2; ++dj)
                        for (int dk = 0; dk < 2; ++dk) {
                            const int i = 2 * I + di, j = 2 * J + dj,
                                      k = 2 * K + dk;
                            if (i >= fine.nx || j >= fine.ny || k >= fine.nz)
                                continue;
                            const std::size_t n = fine.idx(i, j, k);
                            if (fine.fixed[n]) continue;
                            acc += residual_at(fine, n, sx, sy);
                        }
                coarse.f[cn] = acc * 0.125;
            }
}

// Piecewise-constant prolongation of the coarse correction.
void prolong_add(const Level& coarse, Level& fine)
{
#pragma omp parallel for schedule(static)
    for (int i = 0; i < fine.nx; ++i)
        for (int j = 0; j < fine.ny; ++j) {
            const int I = i / 2, J = j / 2;
            std::size_t n = fine.idx(i, j, 0);
            for (int k = 0; k < fine.nz; ++k, ++n) {
                if (fine.fixed[n]) continue;
                fine.u[n] += coarse.u[coarse.idx(I, J, k / 2)];
            }
        }
}

void vcycle(std::vector<Level>& levels, std::size_t l, const SolverOptions& opt)
{
    Level& L = levels[l];
    if (l + 1 == levels.size()) {
        smooth(L, opt.coarse_sweeps, 1.0);
        return;
    }
    smooth(L, opt.pre_smooth, 1.0);
    restrict_residual(L, levels[l + 1]);
    vcycle(levels, l + 1, opt);
    prolong_add(levels[l + 1], L);
    smooth(L, opt.post_smooth, 1.0);
}

std::vector<Level> build_hierarchy(const VoxelMask& mask)
{
    std::vector<Level> levels(1);
    Level& fine = levels[0];
    fine.nx = mask.grid.nx();
    fine.ny = mask.grid.ny();
    fine.nz = mask.grid.nz();
    fine.inv_h2 = 1.0;
    fine.fixed.resize(fine.size());
    for (std::size_t n = 0; n < fine.size(); ++n)
        fine.fixed[n] = mask.grid[n] != VoxelMask::vacuum;

    while (true) {
        const Level& prev = levels.back();
        if (std::min({prev.nx, prev.ny, prev.nz}) <= 4) break;
        Level c;
        c.nx = (prev.nx + 1) / 2;
        c.ny = (prev.ny + 1) / 2;
        c.nz = (prev.nz + 1) / 2;
        c.inv_h2 = prev.inv_h2 * 0.25;
        c.fixed.assign(c.size(), 0);
        for (int i = 0; i < prev.nx; ++i)
            for (int j = 0; j < prev.ny; ++j)
                for (int k = 0; k < prev.nz; ++k)
                    if (prev.fixed[prev.idx(i, j, k)])
                        c.fixed[c.idx(i / 2, j / 2, k / 2)] = 1;
        // Coarse boundary shell stays pinned even where the fine shell
        // rounded away.
        for (int i = 0; i < c.nx; ++i)
            for (int j = 0; j < c.ny; ++j)
                for (int k = 0; k < c.nz; ++k)
                    if (i == 0 || j == 0 || k == 0 || i == c.nx - 1 ||
                        j == c.ny - 1 || k == c.nz - 1)
                        c.fixed[c.idx(i, j, k)] = 1;
        c.u.assign(c.size(), 0.0);
        c.f.assign(c.size(), 0.0);
        levels.push_back(std::move(c));
    }
    return levels;
}

// Shared driver: boundary values are already baked into `values`.
void run_solver(const VoxelMask& mask, std::vector<double>& values,
                double scale, const SolverOptions& opt, double& residual_out,
                int& iterations_out)
{
#ifdef _OPENMP
    if (opt.threads > 0) omp_set_num_threads(opt.threads);
#endif
    std::vector<Level> levels = build_hierarchy(mask);
    levels[0].u = std::move(values);

    const double target = opt.tol / std::max(1.0, opt.residual_safety);
    std::vector<double> history;
    int it = 0;
    for (; it < opt.max_cycles; ++it) {
        if (opt.multigrid)
            vcycle(levels, 0, opt);
        else
            smooth(levels[0], 1, opt.omega_sor);
        // Norm reported as |sum(nb) - 6u|/6 relative to the boundary scale.
        const double res = residual_max(levels[0]) / (6.0 * scale);
        history.push_back(res);
        if (res <= target) {
            ++it;
            break;
        }
    }
    values = std::move(levels[0].u);
    residual_out = history.empty() ? 0.0 : history.back();
    iterations_out = it;
    if (residual_out > opt.tol)
        throw SolveFailure("laplace solver did not reach tol " +
                               std::to_string(opt.tol) + " after " +
                               std::to_string(opt.max_cycles) +
                               (opt.multigrid ? " cycles" : " sweeps"),
                           history);
}

}  // namespace

PotentialBasis solve_basis(const VoxelMask& mask, int electrode_id,
                           const SolverOptions& opt)
{
    if (electrode_id < 0 || electrode_id >= mask.n_electrodes())
        throw std::invalid_argument("solve_basis: unknown electrode id");
    if (opt.tol <= 0) throw std::invalid_argument("solve_basis: tol must be > 0");

    const auto& g = mask.grid;
    std::vector<double> u(g.size(), 0.0);
    const std::uint16_t mine = VoxelMask::electrode_value(electrode_id);
    for (std::size_t n = 0; n < g.size(); ++n)
        if (g[n] == mine) u[n] = 1.0;

    PotentialBasis out;
    out.electrode_id = electrode_id;
    run_solver(mask, u, 1.0, opt, out.residual, out.iterations);
    for (auto& v : u) v = std::clamp(v, 0.0, 1.0);
    out.phi = Grid3<double>({g.nx(), g.ny(), g.nz()}, g.origin(), g.spacing());
    out.phi.data() = std::move(u);
    return out;
}

Grid3<double> solve_dirichlet(const VoxelMask& mask,
                              const std::vector<double>& voltages,
                              const SolverOptions& opt, double* residual_out,
                              int* iterations_out)
{
    if (static_cast<int>(voltages.size()) != mask.n_electrodes())
        throw std::invalid_argument("solve_dirichlet: one voltage per electrode");

    const auto& g = mask.grid;
    std::vector<double> u(g.size(), 0.0);
    double vmax = 0.0, vlo = 0.0, vhi = 0.0;
    for (double v : voltages) {
        vmax = std::max(vmax, std::abs(v));
        vlo = std::min(vlo, v);
        vhi = std::max(vhi, v);
    }
    for (std::size_t n = 0; n < g.size(); ++n)
        if (mask.is_electrode(g[n]))
            u[n] = voltages[g[n] - VoxelMask::first_electrode];

    double res = 0.0;
    int iters = 0;
    const double scale = vmax > 0.0 ? vmax : 1.0;
    run_solver(mask, u, scale, opt, res, iters);
    for (auto& v : u) v = std::clamp(v, vlo, vhi);
    if (residual_out) *residual_out = res;
    if (iterations_out) *iterations_out = iters;
    Grid3<double> out({g.nx(), g.ny(), g.nz()}, g.origin(), g.spacing());
    out.data() = std::move(u);
    return out;
}

Grid3<double> superpose(const std::vector<PotentialBasis>& bases,
                        const std::vector<double>& voltages)
{
    if (bases.empty()) throw std::invalid_argument("superpose: no bases");
    if (bases.size() != voltages.size())
        throw std::invalid_argument("superpose: basis/voltage count mismatch");
    const auto& ref = bases.front().phi;
    Grid3<double> acc({ref.nx(), ref.ny(), ref.nz()}, ref.origin(),
                      ref.spacing());
    for (std::size_t i = 0; i < bases.size(); ++i)
        axpy(acc, voltages[i], bases[i].phi);
    return acc;
}

void axpy(Grid3<double>& y, double a, const Grid3<double>& x)
{
    if (y.size() != x.size())
        throw std::invalid_argument("axpy: grid shape mismatch");
    double* yp = y.data().data();
    const double* xp = x.data().data();
    for (std::size_t n = 0; n < y.size(); ++n) yp[n] += a * xp[n];
}

double laplace_residual_max(const Grid3<double>& phi, const VoxelMask& mask)
{
    const auto& g = mask.grid;
    double worst = 0.0;
    for (int i = 1; i < g.nx() - 1; ++i)
        for (int j = 1; j < g.ny() - 1; ++j)
            for (int k = 1; k < g.nz() - 1; ++k) {
                if (g(i, j, k) != VoxelMask::vacuum) continue;
                const double s = phi(i - 1, j, k) + phi(i + 1, j, k) +
                                 phi(i, j - 1, k) + phi(i, j + 1, k) +
                                 phi(i, j, k - 1) + phi(i, j, k + 1);
                worst = std::max(worst,
                                 std::abs(s - 6.0 * phi(i, j, k)) / 6.0);
            }
    return worst;
}

// ---------------------------------------------------------------------------
// Quadratic-fit sampling

namespace {

// Pseudo-inverse of the weighted quadratic design matrix on the fixed 5^3
// stencil, mapping 125 samples to the 10 monomial coefficients
// [1, x, y, z, x^2, y^2, z^2, xy, xz, yz] in voxel units.
const Eigen::Matrix<double, 10, 125>& fit_operator()
{
    static const Eigen::Matrix<double, 10, 125> P = [] {
        Eigen::Matrix<double, 125, 10> B;
        Eigen::Matrix<double, 125, 1> w;
        int row = 0;
        for (int dx = -2; dx <= 2; ++dx)
            for (int dy = -2; dy <= 2; ++dy)
                for (int dz = -2; dz <= 2; ++dz, ++row) {
                    const double x = dx, y = dy, z = dz;
                    B(row, 0) = 1;
                    B(row, 1) = x;
                    B(row, 2) = y;
                    B(row, 3) = z;
                    B(row, 4) = x * x;
                    B(row, 5) = y * y;
                    B(row, 6) = z * z;
                    B(row, 7) = x * y;
                    B(row, 8) = x * z;
                    B(row, 9) = y * z;
                    w(row) = std::exp(-(x * x + y * y + z * z) / 4.5);
                }
        const Eigen::Matrix<double, 125, 10> WB = w.asDiagonal() * B;
        const Eigen::Matrix<double, 10, 10> N = B.transpose() * WB;
        return Eigen::Matrix<double, 10, 125>(
            N.ldlt().solve(WB.transpose()));
    }();
    return P;
}

FieldSample fit_sample(const Grid3<double>& f, const VoxelMask* mask,
                       const Vec3& r)
{
    const Vec3 gc = f.to_grid(r) - Vec3(0.5, 0.5, 0.5);  // center-lattice coords
    const int ci = static_cast<int>(std::lround(gc.x()));
    const int cj = static_cast<int>(std::lround(gc.y()));
    const int ck = static_cast<int>(std::lround(gc.z()));
    if (ci < 2 || cj < 2 || ck < 2 || ci > f.nx() - 3 || cj > f.ny() - 3 ||
        ck > f.nz() - 3)
        throw std::domain_error("sample: point too near the domain boundary");

    if (mask) {
        const auto cell = mask->grid.cell_of(r);
        if (mask->is_electrode(mask->grid(cell[0], cell[1], cell[2])))
            throw std::domain_error("sample: point inside an electrode");
        for (int dx = -2; dx <= 2; ++dx)
            for (int dy = -2; dy <= 2; ++dy)
                for (int dz = -2; dz <= 2; ++dz)
                    if (mask->is_electrode(
                            mask->grid(ci + dx, cj + dy, ck + dz)))
                        throw std::domain_error(
                            "sample: stencil overlaps an electrode");
    }

    Eigen::Matrix<double, 125, 1> vals;
    int row = 0;
    for (int dx = -2; dx <= 2; ++dx)
        for (int dy = -2; dy <= 2; ++dy)
            for (int dz = -2; dz <= 2; ++dz, ++row)
                vals(row) = f(ci + dx, cj + dy, ck + dz);

    const Eigen::Matrix<double, 10, 1> a = fit_operator() * vals;
    const double h = f.spacing();
    const Vec3 d = gc - Vec3(ci, cj, ck);  // offset inside the cell, voxels

    FieldSample s;
    s.position = r;
    s.value = a(0) + a(1) * d.x() + a(2) * d.y() + a(3) * d.z() +
              a(4) * d.x() * d.x() + a(5) * d.y() * d.y() +
              a(6) * d.z() * d.z() + a(7) * d.x() * d.y() +
              a(8) * d.x() * d.z() + a(9) * d.y() * d.z();
    s.gradient = Vec3(a(1) + 2 * a(4) * d.x() + a(7) * d.y() + a(8) * d.z(),
                      a(2) + 2 * a(5) * d.y() + a(7) * d.x() + a(9) * d.z(),
                      a(3) + 2 * a(6) * d.z() + a(8) * d.x() + a(9) * d.y()) /
                 h;
    s.hessian << 2 * a(4), a(7), a(8), a(7), 2 * a(5), a(9), a(8), a(9),
        2 * a(6);
    s.hessian /= h * h;
    return s;
}

}  // namespace

FieldSample sample(const Grid3<double>& phi, const VoxelMask& mask,
                   const Vec3& r)
{
    return fit_sample(phi, &mask, r);
}

FieldSample sample_unmasked(const Grid3<double>& field, const Vec3& r)
{
    return fit_sample(field, nullptr, r);
}

// ---------------------------------------------------------------------------
// GradientField

GradientField::GradientField(const Grid3<double>& phi)
    : GradientField(phi, Box{phi.origin(),
                             phi.origin() + Vec3(phi.nx(), phi.ny(), phi.nz()) *
                                                phi.spacing()})
{
}

GradientField::GradientField(const Grid3<double>& phi, const Box& crop)
{
    const double h = phi.spacing();
    // Sample nodes are voxel centers strictly inside the shell.
    auto clampi = [](int v, int lo, int hi) { return std::min(std::max(v, lo), hi); };
    const Vec3 glo = phi.to_grid(crop.lo) - Vec3(0.5, 0.5, 0.5);
    const Vec3 ghi = phi.to_grid(crop.hi) - Vec3(0.5, 0.5, 0.5);
    const int ia = clampi((int)std::floor(glo.x()), 1, phi.nx() - 2);
    const int ja = clampi((int)std::floor(glo.y()), 1, phi.ny() - 2);
    const int ka = clampi((int)std::floor(glo.z()), 1, phi.nz() - 2);
    const int ib = clampi((int)std::ceil(ghi.x()), 1, phi.nx() - 2);
    const int jb = clampi((int)std::ceil(ghi.y()), 1, phi.ny() - 2);
    const int kb = clampi((int)std::ceil(ghi.z()), 1, phi.nz() - 2);

    nx_ = ib - ia + 1;
    ny_ = jb - ja + 1;
    nz_ = kb - ka + 1;
    if (nx_ < 2 || ny_ < 2 || nz_ < 2)
        throw std::invalid_argument("gradient field: window too small");
    spacing_ = h;
    origin_ = phi.center(ia, ja, ka);
    support_ = Box{origin_, phi.center(ib, jb, kb)};
    v_.resize(static_cast<std::size_t>(nx_) * ny_ * nz_ * 3);

    const double inv2h = 1.0 / (2.0 * h);
    std::size_t m = 0;
    for (int i = ia; i <= ib; ++i)
        for (int j = ja; j <= jb; ++j)
            for (int k = ka; k <= kb; ++k) {
                v_[m++] = static_cast<float>(
                    (phi(i + 1, j, k) - phi(i - 1, j, k)) * inv2h);
                v_[m++] = static_cast<float>(
                    (phi(i, j + 1, k) - phi(i, j - 1, k)) * inv2h);
                v_[m++] = static_cast<float>(
                    (phi(i, j, k + 1) - phi(i, j, k - 1)) * inv2h);
            }
}

bool GradientField::covers(const Vec3& r) const
{
    return support_.contains(r);
}

Vec3 GradientField::eval(const Vec3& r) const
{
    const double gx = (r.x() - origin_.x()) / spacing_;
    const double gy = (r.y() - origin_.y()) / spacing_;
    const double gz = (r.z() - origin_.z()) / spacing_;
    int i = static_cast<int>(gx), j = static_cast<int>(gy),
        k = static_cast<int>(gz);
    i = std::clamp(i, 0, nx_ - 2);
    j = std::clamp(j, 0, ny_ - 2);
    k = std::clamp(k, 0, nz_ - 2);
    const double fx = std::clamp(gx - i, 0.0, 1.0);
    const double fy = std::clamp(gy - j, 0.0, 1.0);
    const double fz = std::clamp(gz - k, 0.0, 1.0);

    const std::size_t sX = static_cast<std::size_t>(ny_) * nz_ * 3;
    const std::size_t sY = static_cast<std::size_t>(nz_) * 3;
    const std::size_t base =
        (static_cast<std::size_t>(i) * ny_ + j) * nz_ * 3 + k * 3;

    Vec3 out;
    for (int c = 0; c < 3; ++c) {
        const std::size_t b = base + c;
        const double c00 = v_[b] + (v_[b + sX] - v_[b]) * fx;
        const double c10 = v_[b + sY] + (v_[b + sX + sY] - v_[b + sY]) * fx;
        const double c01 = v_[b + 3] + (v_[b + sX + 3] - v_[b + 3]) * fx;
        const double c11 =
            v_[b + sY + 3] + (v_[b + sX + sY + 3] - v_[b + sY + 3]) * fx;
        const double c0 = c00 + (c10 - c00) * fy;
        const double c1 = c01 + (c11 - c01) * fy;
        out[c] = c0 + (c1 - c0) * fz;
    }
    return out;
}

void GradientField::set_combination(
    const std::vector<const GradientField*>& parts,
    const std::vector<double>& weights)
{
    if (parts.empty() || parts.size() != weights.size())
        throw std::invalid_argument("gradient combine: size mismatch");
    const GradientField& ref = *parts.front();
    nx_ = ref.nx_;
    ny_ = ref.ny_;
    nz_ = ref.nz_;
    origin_ = ref.origin_;
    spacing_ = ref.spacing_;
    support_ = ref.support_;
    v_.assign(ref.v_.size(), 0.0f);
    for (std::size_t p = 0; p < parts.size(); ++p) {
        if (parts[p]->v_.size() != v_.size())
            throw std::invalid_argument("gradient combine: window mismatch");
        const float w = static_cast<float>(weights[p]);
        const float* src = parts[p]->v_.data();
        float* dst = v_.data();
        for (std::size_t n = 0; n < v_.size(); ++n) dst[n] += w * src[n];
    }
}

GradientField GradientField::combine(
    const std::vector<const GradientField*>& parts,
    const std::vector<double>& weights)
{
    GradientField out;
    out.set_combination(parts, weights);
    return out;
}

// ---------------------------------------------------------------------------
// ScalarField

ScalarField::ScalarField(const Grid3<double>& f, const Box& crop)
{
    auto clampi = [](int v, int lo, int hi) {
        return std::min(std::max(v, lo), hi);
    };
    const Vec3 glo = f.to_grid(crop.lo) - Vec3(0.5, 0.5, 0.5);
    const Vec3 ghi = f.to_grid(crop.hi) - Vec3(0.5, 0.5, 0.5);
    const int ia = clampi((int)std::floor(glo.x()), 0, f.nx() - 1);
    const int ja = clampi((int)std::floor(glo.y()), 0, f.ny() - 1);
    const int ka = clampi((int)std::floor(glo.z()), 0, f.nz() - 1);
    const int ib = clampi((int)std::ceil(ghi.x()), 0, f.nx() - 1);
    const int jb = clampi((int)std::ceil(ghi.y()), 0, f.ny() - 1);
    const int kb = clampi((int)std::ceil(ghi.z()), 0, f.nz() - 1);
    nx_ = ib - ia + 1;
    ny_ = jb - ja + 1;
    nz_ = kb - ka + 1;
    if (nx_ < 2 || ny_ < 2 || nz_ < 2)
        throw std::invalid_argument("scalar field: window too small");
    spacing_ = f.spacing();
    origin_ = f.center(ia, ja, ka);
    support_ = Box{origin_, f.center(ib, jb, kb)};
    v_.resize(static_cast<std::size_t>(nx_) * ny_ * nz_);
    std::size_t m = 0;
    for (int i = ia; i <= ib; ++i)
        for (int j = ja; j <= jb; ++j)
            for (int k = ka; k <= kb; ++k)
                v_[m++] = static_cast<float>(f(i, j, k));
}

double ScalarField::eval(const Vec3& r) const
{
    const double gx = (r.x() - origin_.x()) / spacing_;
    const double gy = (r.y() - origin_.y()) / spacing_;
    const double gz = (r.z() - origin_.z()) / spacing_;
    int i = static_cast<int>(gx), j = static_cast<int>(gy),
        k = static_cast<int>(gz);
    i = std::clamp(i, 0, nx_ - 2);
    j = std::clamp(j, 0, ny_ - 2);
    k = std::clamp(k, 0, nz_ - 2);
    const double fx = std::clamp(gx - i, 0.0, 1.0);
    const double fy = std::clamp(gy - j, 0.0, 1.0);
    const double fz = std::clamp(gz - k, 0.0, 1.0);
    const std::size_t sX = static_cast<std::size_t>(ny_) * nz_;
    const std::size_t sY = nz_;
    const std::size_t b = (static_cast<std::size_t>(i) * ny_ + j) * nz_ + k;
    const double c00 = v_[b] + (v_[b + sX] - v_[b]) * fx;
    const double c10 = v_[b + sY] + (v_[b + sX + sY] - v_[b + sY]) * fx;
    const double c01 = v_[b + 1] + (v_[b + sX + 1] - v_[b + 1]) * fx;
    const double c11 =
        v_[b + sY + 1] + (v_[b + sX + sY + 1] - v_[b + sY + 1]) * fx;
    const double c0 = c00 + (c10 - c00) * fy;
    const double c1 = c01 + (c11 - c01) * fy;
    return c0 + (c1 - c0) * fz;
}

}  // namespace microtrap
