#include "microtrap/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <queue>

namespace microtrap {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void DriveConfig::validate(int n_electrodes) const
{
    if (v0 < 0) throw std::invalid_argument("drive: V0 must be >= 0");
    if (omega <= 0) throw std::invalid_argument("drive: Omega must be > 0");
    if (!species.valid()) throw std::invalid_argument("drive: bad ion species");
    if (static_cast<int>(dc_voltages.size()) != n_electrodes)
        throw std::invalid_argument("drive: one dc voltage per electrode");
}

TrapFields make_trap_fields(const VoxelMask& mask,
                            const std::vector<PotentialBasis>& bases,
                            const DriveConfig& drive)
{
    drive.validate(mask.n_electrodes());
    if (static_cast<int>(bases.size()) != mask.n_electrodes())
        throw std::invalid_argument("trap fields: one basis per electrode");

    const auto& g = mask.grid;
    TrapFields f;
    f.rf_phi = Grid3<double>({g.nx(), g.ny(), g.nz()}, g.origin(), g.spacing());
    f.dc_phi = f.rf_phi;
    for (int e = 0; e < mask.n_electrodes(); ++e) {
        if (bases[e].electrode_id != e)
            throw std::invalid_argument("trap fields: bases out of order");
        if (mask.labels[e].role == Role::rf) {
            axpy(f.rf_phi, 1.0, bases[e].phi);
            if (drive.dc_voltages[e] != 0.0)
                throw std::invalid_argument(
                    "trap fields: dc voltage on an rf electrode");
        } else if (drive.dc_voltages[e] != 0.0) {
            axpy(f.dc_phi, drive.dc_voltages[e], bases[e].phi);
        }
    }
    return f;
}

Grid3<double> pseudopotential(const VoxelMask& mask, const TrapFields& fields,
                              const DriveConfig& drive)
{
    drive.validate(mask.n_electrodes());
    const auto& g = mask.grid;
    const auto& rf = fields.rf_phi;
    const auto& dc = fields.dc_phi;
    if (rf.size() != g.size() || dc.size() != g.size())
        throw std::invalid_argument("pseudopotential: field/mask mismatch");

    const double q_ion = drive.species.charge;
    const double m = drive.species.mass;
    // A |grad rf|^2 is the ponderomotive energy in joules.
    const double A = q_ion * q_ion * drive.v0 * drive.v0 /
                     (4.0 * m * drive.omega * drive.omega);
    const double inv_e = 1.0 / constants::elementary_charge;
    const double inv2h = 1.0 / (2.0 * g.spacing());

    Grid3<double> u({g.nx(), g.ny(), g.nz()}, g.origin(), g.spacing(), kInf);
    for (int i = 0; i < g.nx(); ++i)
        for (int j = 0; j < g.ny(); ++j)
            for (int k = 0; k < g.nz(); ++k) {
                const auto label = g(i, j, k);
                if (mask.is_electrode(label)) continue;  // stays +inf
                const std::size_t n = g.idx(i, j, k);
                if (label == VoxelMask::boundary) {
                    u[n] = q_ion * dc[n] * inv_e;
                    continue;
                }
                const double gx = (rf(i + 1, j, k) - rf(i - 1, j, k)) * inv2h;
                const double gy = (rf(i, j + 1, k) - rf(i, j - 1, k)) * inv2h;
                const double gz = (rf(i, j, k + 1) - rf(i, j, k - 1)) * inv2h;
                u[n] = (A * (gx * gx + gy * gy + gz * gz) + q_ion * dc[n]) *
                       inv_e;
            }
    return u;
}

Vec3 find_minimum(const Grid3<double>& u, const VoxelMask& mask,
                  double grad_tol_ev_per_m)
{
    const auto& g = mask.grid;
    if (u.size() != g.size())
        throw std::invalid_argument("find_minimum: field/mask mismatch");

    // A trapping well is a local minimum of U standing clear of conductors.
    // The global vacuum argmin is NOT that: static attraction toward biased
    // electrodes makes U lowest inside rf-shielded pockets at their surfaces,
    // where no local minimum exists. Scan for 26-neighborhood minima with a
    // conductor-free margin and keep the deepest.
    std::size_t best = 0;
    double best_v = kInf;
    for (int i = 3; i < g.nx() - 3; ++i)
        for (int j = 3; j < g.ny() - 3; ++j)
            for (int k = 3; k < g.nz() - 3; ++k) {
                const std::size_t n = g.idx(i, j, k);
                if (g[n] != VoxelMask::vacuum) continue;
                const double v = u[n];
                if (v >= best_v) continue;
                bool ok = true;
                for (int di = -1; di <= 1 && ok; ++di)
                    for (int dj = -1; dj <= 1 && ok; ++dj)
                        for (int dk = -1; dk <= 1 && ok; ++dk)
                            if (u(i + di, j + dj, k + dk) < v) ok = false;
                if (!ok) continue;
                for (int di = -3; di <= 3 && ok; ++di)
                    for (int dj = -3; dj <= 3 && ok; ++dj)
                        for (int dk = -3; dk <= 3 && ok; ++dk)
                            if (mask.is_electrode(g(i + di, j + dj, k + dk)))
                                ok = false;
                if (!ok) continue;
                best_v = v;
                best = n;
            }
    if (!std::isfinite(best_v))
        throw UntrappedError(
            "find_minimum: no interior vacuum minimum (untrapped)");

    const int bi = static_cast<int>(best / (g.ny() * g.nz()));
    const int bj = static_cast<int>((best / g.nz()) % g.ny());
    const int bk = static_cast<int>(best % g.nz());

    // Newton refinement on the local quadratic model, falling back to damped
    // descent where the fitted Hessian is not positive definite.
    Vec3 r = g.center(bi, bj, bk);
    const double h = g.spacing();
    for (int pass = 0; pass < 16; ++pass) {
        const auto s = sample_unmasked(u, r);
        if (s.gradient.norm() <= grad_tol_ev_per_m) return r;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s.hessian);
        Vec3 step;
        if (es.eigenvalues().minCoeff() > 0.0) {
            const Vec3 y = es.eigenvectors().transpose() * s.gradient;
            step = -(es.eigenvectors() * y.cwiseQuotient(es.eigenvalues()));
        } else {
            step = -s.gradient * (0.3 * h / s.gradient.norm());
        }
        const double cap = 0.9 * h;
        if (step.norm() > cap) step *= cap / step.norm();
        r += step;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Mathieu characteristic exponent

namespace {

// Value of the characteristic equation whose root in beta is the Floquet
// exponent: f(beta) = a - beta^2 - q^2 [T+(beta) + T-(beta)] with T the
// standard continued fractions over D_n = a - (beta + 2n)^2.
double mathieu_char(double a, double q, double beta)
{
    auto tail = [&](int dir) {
        // Evaluate q^2 / (D_1 - q^2 / (D_2 - ...)) bottom-up.
        const int depth = 24;
        double t = 0.0;
        for (int n = depth; n >= 1; --n) {
            const double d = a - (beta + 2.0 * dir * n) * (beta + 2.0 * dir * n);
            t = q * q / (d - t);
        }
        return t;
    };
    return a - beta * beta - tail(+1) - tail(-1);
}

}  // namespace

MathieuResult mathieu_beta(double a, double q)
{
    if (q == 0.0) {
        if (a < 0.0) return {0.0, false};
        const double b = std::sqrt(a);
        return {b, b > 0.0 && b < 1.0};
    }

    // Bracket the root of the characteristic equation in (0, 1). The
    // function has poles at the continued-fraction denominators; scan on a
    // fine grid and bisect inside the first sign change enclosing the
    // lowest-order estimate.
    const double guess = std::sqrt(std::max(0.0, a + 0.5 * q * q));
    const int n_scan = 4000;
    double lo = -1.0, hi = -1.0;
    double prev_b = 1e-9, prev_f = mathieu_char(a, q, prev_b);
    for (int i = 1; i <= n_scan; ++i) {
        const double b = static_cast<double>(i) / n_scan * (1.0 - 2e-9) + 1e-9;
        const double f = mathieu_char(a, q, b);
        if (std::isfinite(f) && std::isfinite(prev_f) && prev_f * f <= 0.0) {
            lo = prev_b;
            hi = b;
            // Prefer the bracket containing (or nearest) the lowest-order
            // estimate; the first one at or beyond it wins.
            if (b >= guess) break;
        }
        prev_b = b;
        prev_f = f;
    }
    if (lo < 0.0) return {0.0, false};

    double flo = mathieu_char(a, q, lo);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = mathieu_char(a, q, mid);
        if ((flo <= 0.0) == (fm <= 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-12) break;
    }
    const double beta = 0.5 * (lo + hi);
    if (!(beta > 0.0 && beta < 1.0)) return {beta, false};
    // A sign change at a continued-fraction pole is not a root.
    if (std::abs(mathieu_char(a, q, beta)) > 1e-3 * (1.0 + std::abs(a) + q * q))
        return {beta, false};
    return {beta, true};
}

// ---------------------------------------------------------------------------

SecularAnalysis secular_analysis(const VoxelMask& mask,
                                 const TrapFields& fields,
                                 const DriveConfig& drive)
{
    const auto u = pseudopotential(mask, fields, drive);
    SecularAnalysis out;
    out.r0 = find_minimum(u, mask);

    const auto su = sample_unmasked(u, out.r0);
    const auto srf = sample(fields.rf_phi, mask, out.r0);
    const auto sdc = sample(fields.dc_phi, mask, out.r0);
    out.u_min_ev = su.value;

    const double m = drive.species.mass;
    const double q_ion = drive.species.charge;
    const double e = constants::elementary_charge;

    // Total curvature -> secular frequencies (pseudopotential estimate).
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eu(su.hessian * e);  // J/m^2
    if (eu.eigenvalues().minCoeff() <= 0.0)
        throw UntrappedError("secular_analysis: saddle, not minimum");

    // rf quadrupole frame: order by |axis . x| so slot 0 is axial.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> erf(srf.hessian);
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int l, int r) {
        return std::abs(erf.eigenvectors()(0, l)) >
               std::abs(erf.eigenvectors()(0, r));
    });
    // Transverse slots sorted by secular frequency below; compute both first.
    std::array<double, 3> omega_u{};
    {
        // Match each U eigenvector to the nearest rf axis for labeling.
        std::array<int, 3> used{0, 0, 0};
        for (int slot = 0; slot < 3; ++slot) {
            const Eigen::Vector3d axis = erf.eigenvectors().col(order[slot]);
            int best = -1;
            double best_dot = -1.0;
            for (int c = 0; c < 3; ++c) {
                if (used[c]) continue;
                const double d = std::abs(axis.dot(eu.eigenvectors().col(c)));
                if (d > best_dot) {
                    best_dot = d;
                    best = c;
                }
            }
            used[best] = 1;
            omega_u[slot] = std::sqrt(eu.eigenvalues()(best) / m);
        }
    }

    // Keep transverse slots ordered by increasing frequency.
    if (omega_u[1] > omega_u[2]) {
        std::swap(omega_u[1], omega_u[2]);
        std::swap(order[1], order[2]);
    }

    for (int slot = 0; slot < 3; ++slot) {
        const int c = order[slot];
        Eigen::Vector3d axis = erf.eigenvectors().col(c);
        if (axis.x() < 0) axis = -axis;
        out.axes[slot] = axis;
        out.omega[slot] = omega_u[slot];
        const double kappa = erf.eigenvalues()(c);  // 1/m^2
        out.mathieu_q[slot] =
            2.0 * q_ion * drive.v0 * kappa / (m * drive.omega * drive.omega);
        const double dc_curv = axis.dot(sdc.hessian * axis);  // V/m^2
        out.mathieu_a[slot] =
            4.0 * q_ion * dc_curv / (m * drive.omega * drive.omega);
        const auto mb = mathieu_beta(out.mathieu_a[slot], out.mathieu_q[slot]);
        out.beta[slot] = mb.beta;
        out.stable = slot == 0 ? mb.stable : (out.stable && mb.stable);
    }
    out.q_reported =
        std::max(std::abs(out.mathieu_q[1]), std::abs(out.mathieu_q[2]));

    // Tilt of the transverse principal frame out of the x-y chip plane,
    // reported as the frame rotation folded to [0, 45] (axes are lines, so
    // the rotation is defined modulo 90 degrees).
    const Vec3& t1 = out.axes[1];
    const double raw =
        std::asin(std::min(1.0, std::abs(t1.z()) /
                                    std::max(1e-300, t1.norm()))) *
        180.0 / constants::pi;
    out.axis_tilt_deg = std::min(raw, 90.0 - raw);
    return out;
}

std::array<double, 3> floquet_frequencies(const VoxelMask& mask,
                                          const TrapFields& fields,
                                          const DriveConfig& drive,
                                          const Vec3& r0)
{
    const auto srf = sample(fields.rf_phi, mask, r0);
    const auto sdc = sample(fields.dc_phi, mask, r0);
    const double qm = drive.species.charge / drive.species.mass;
    const Eigen::Matrix3d k_dc = qm * sdc.hessian;
    const Eigen::Matrix3d k_rf = qm * drive.v0 * srf.hessian;

    // Monodromy over one rf period by RK4 on the 6x6 fundamental matrix.
    const double period = 2.0 * constants::pi / drive.omega;
    const int n = 2048;
    const double h = period / n;
    using Mat6 = Eigen::Matrix<double, 6, 6>;
    Mat6 m = Mat6::Identity();
    auto deriv = [&](double t, const Mat6& y) -> Mat6 {
        Mat6 d;
        const Eigen::Matrix3d k =
            -(k_dc + std::cos(drive.omega * t) * k_rf);
        d.topRows<3>() = y.bottomRows<3>();
        d.bottomRows<3>() = k * y.topRows<3>();
        return d;
    };
    for (int i = 0; i < n; ++i) {
        const double t = i * h;
        const Mat6 k1 = deriv(t, m);
        const Mat6 k2 = deriv(t + 0.5 * h, m + 0.5 * h * k1);
        const Mat6 k3 = deriv(t + 0.5 * h, m + 0.5 * h * k2);
        const Mat6 k4 = deriv(t + h, m + h * k3);
        m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    Eigen::EigenSolver<Mat6> es(m);
    std::array<double, 3> tunes{};
    int found = 0;
    for (int i = 0; i < 6 && found < 3; ++i) {
        const std::complex<double> lam = es.eigenvalues()(i);
        if (lam.imag() <= 0.0) continue;  // keep one of each conjugate pair
        if (std::abs(std::abs(lam) - 1.0) > 1e-3)
            throw UntrappedError("floquet: unstable multiplier");
        tunes[found++] = std::arg(lam) / period;
    }
    if (found != 3)
        throw UntrappedError("floquet: multipliers degenerate or real");
    std::sort(tunes.begin(), tunes.end());
    return tunes;
}

// ---------------------------------------------------------------------------
// Depth

namespace {

bool touches_edge(const Grid3<std::uint16_t>& g, int i, int j, int k)
{
    return i <= 1 || j <= 1 || k <= 1 || i >= g.nx() - 2 || j >= g.ny() - 2 ||
           k >= g.nz() - 2;
}

// Breadth-first flood of {u <= level} over vacuum from the seed; returns true
// if the flood reaches the domain edge.
bool flood_reaches_edge(const Grid3<double>& u, const VoxelMask& mask,
                        const std::array<int, 3>& seed, double level,
                        std::vector<std::uint8_t>& visited,
                        std::vector<std::int64_t>& stack)
{
    const auto& g = mask.grid;
    std::fill(visited.begin(), visited.end(), 0);
    stack.clear();
    const std::int64_t s0 = static_cast<std::int64_t>(
        g.idx(seed[0], seed[1], seed[2]));
    if (u[s0] > level) return false;
    visited[s0] = 1;
    stack.push_back(s0);
    const std::int64_t sx = static_cast<std::int64_t>(g.ny()) * g.nz();
    const std::int64_t sy = g.nz();
    while (!stack.empty()) {
        const std::int64_t n = stack.back();
        stack.pop_back();
        const int i = static_cast<int>(n / sx);
        const int j = static_cast<int>((n / sy) % g.ny());
        const int k = static_cast<int>(n % g.nz());
        if (touches_edge(g, i, j, k)) return true;
        const std::int64_t nb[6] = {n - sx, n + sx, n - sy,
                                    n + sy, n - 1,  n + 1};
        for (const std::int64_t t : nb) {
            if (visited[t]) continue;
            if (mask.grid[t] != VoxelMask::vacuum) continue;
            if (u[t] > level) continue;
            visited[t] = 1;
            stack.push_back(t);
        }
    }
    return false;
}

}  // namespace

EscapeLevel flood_escape_level(const Grid3<double>& u, const VoxelMask& mask,
                               const std::array<int, 3>& seed, double tol_ev)
{
    const auto& g = mask.grid;
    if (g(seed[0], seed[1], seed[2]) != VoxelMask::vacuum)
        throw std::invalid_argument("flood: seed is not vacuum");

    // The escape level is always one of the grid values, so bisect over the
    // sorted ladder of vacuum potentials. tol_ev > 0 permits an early stop;
    // tol_ev = 0 resolves the exact bottleneck value.
    std::vector<double> ladder;
    ladder.reserve(u.size() / 2);
    for (std::size_t n = 0; n < u.size(); ++n)
        if (mask.grid[n] == VoxelMask::vacuum && std::isfinite(u[n]))
            ladder.push_back(u[n]);
    std::sort(ladder.begin(), ladder.end());

    std::vector<std::uint8_t> visited(g.size());
    std::vector<std::int64_t> stack;
    const double u0 = u[g.idx(seed[0], seed[1], seed[2])];

    EscapeLevel out;
    out.saddle = seed;  // localized by the minimax search instead
    if (flood_reaches_edge(u, mask, seed, u0, visited, stack)) {
        out.escapes = true;  // basin open to the boundary at the seed level
        out.level = u0;
        return out;
    }
    if (!flood_reaches_edge(u, mask, seed, ladder.back(), visited, stack)) {
        out.escapes = false;  // walled in everywhere (synthetic masks)
        out.level = ladder.back();
        return out;
    }

    std::size_t lo = std::lower_bound(ladder.begin(), ladder.end(), u0) -
                     ladder.begin();           // does not escape
    std::size_t hi = ladder.size() - 1;        // escapes
    while (hi - lo > 1 && ladder[hi] - ladder[lo] > tol_ev) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (flood_reaches_edge(u, mask, seed, ladder[mid], visited, stack))
            hi = mid;
        else
            lo = mid;
    }
    out.escapes = true;
    out.level = ladder[hi];
    return out;
}

EscapeLevel minimax_escape_level(const Grid3<double>& u, const VoxelMask& mask,
                                 const std::array<int, 3>& seed)
{
    const auto& g = mask.grid;
    if (g(seed[0], seed[1], seed[2]) != VoxelMask::vacuum)
        throw std::invalid_argument("minimax: seed is not vacuum");

    using Item = std::pair<double, std::int64_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    std::vector<std::uint8_t> visited(g.size(), 0);
    const std::int64_t sx = static_cast<std::int64_t>(g.ny()) * g.nz();
    const std::int64_t sy = g.nz();

    const std::int64_t s0 =
        static_cast<std::int64_t>(g.idx(seed[0], seed[1], seed[2]));
    pq.emplace(u[s0], s0);
    visited[s0] = 1;

    EscapeLevel out;
    double level = -kInf;
    std::int64_t argmax = s0;
    while (!pq.empty()) {
        const auto [val, n] = pq.top();
        pq.pop();
        if (val > level) {
            level = val;
            argmax = n;
        }
        const int i = static_cast<int>(n / sx);
        const int j = static_cast<int>((n / sy) % g.ny());
        const int k = static_cast<int>(n % g.nz());
        if (touches_edge(g, i, j, k)) {
            out.escapes = true;
            out.level = level;
            out.saddle = {static_cast<int>(argmax / sx),
                          static_cast<int>((argmax / sy) % g.ny()),
                          static_cast<int>(argmax % g.nz())};
            return out;
        }
        const std::int64_t nb[6] = {n - sx, n + sx, n - sy,
                                    n + sy, n - 1,  n + 1};
        for (const std::int64_t t : nb) {
            if (visited[t]) continue;
            if (mask.grid[t] != VoxelMask::vacuum) continue;
            if (!std::isfinite(u[t])) continue;
            visited[t] = 1;
            pq.emplace(u[t], t);
        }
    }
    out.escapes = false;
    out.level = level;
    out.saddle = seed;
    return out;
}

DepthResult trap_depth(const Grid3<double>& u, const VoxelMask& mask,
                       const Vec3& r0, double tol_ev)
{
    const auto& g = mask.grid;
    auto seed = g.cell_of(r0);
    if (!g.in_bounds(seed[0], seed[1], seed[2]))
        throw std::invalid_argument("trap_depth: r0 outside the grid");
    // Nudge the seed to the best vacuum voxel in a small neighborhood (r0 may
    // round into a corner cell of the refined minimum).
    {
        double best = kInf;
        std::array<int, 3> best_c = seed;
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj)
                for (int dk = -1; dk <= 1; ++dk) {
                    const int i = seed[0] + di, j = seed[1] + dj,
                              k = seed[2] + dk;
                    if (!g.in_bounds(i, j, k)) continue;
                    if (g(i, j, k) != VoxelMask::vacuum) continue;
                    if (u(i, j, k) < best) {
                        best = u(i, j, k);
                        best_c = {i, j, k};
                    }
                }
        seed = best_c;
    }

    const double u0 = u(seed[0], seed[1], seed[2]);
    const auto flood = flood_escape_level(u, mask, seed, tol_ev);

    DepthResult out;
    if (!flood.escapes || flood.level <= u0) {
        out.depth_ev = 0.0;
        out.saddle = g.center(seed[0], seed[1], seed[2]);
        out.escape_direction = Vec3::Zero();
        return out;
    }
    out.depth_ev = flood.level - u0;

    const auto mm = minimax_escape_level(u, mask, seed);
    const auto& sv = mm.saddle;
    out.saddle = g.center(sv[0], sv[1], sv[2]);
    Vec3 dir = out.saddle - g.center(seed[0], seed[1], seed[2]);
    if (dir.norm() > 0) dir.normalize();
    out.escape_direction = dir;
    out.escape_tilt_deg =
        std::asin(std::min(1.0, std::abs(dir.z()))) * 180.0 / constants::pi;
    return out;
}

}  // namespace microtrap
