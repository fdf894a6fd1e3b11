#include "doctest.h"

#include <cmath>
#include <random>

#include "microtrap/analysis.hpp"
#include "oracles.hpp"

using namespace microtrap;
using constants::elementary_charge;
using constants::pi;

#include "small_trap.hpp"

namespace {
const testtrap::Fixture& small_trap() { return testtrap::fixture(); }
DriveConfig small_drive() { return testtrap::drive(); }
}  // namespace

// ---------------------------------------------------------------------------
// Mathieu

TEST_CASE("mathieu beta matches the Floquet monodromy oracle")
{
    for (double a : {0.0, 0.02, -0.02, 0.1, -0.05}) {
        for (double q : {0.05, 0.2, 0.3, 0.5, 0.62, 0.8}) {
            const double ref = oracle::mathieu_beta(a, q);
            const auto got = mathieu_beta(a, q);
            if (std::isnan(ref)) {
                CHECK_FALSE(got.stable);
            } else {
                REQUIRE(got.stable);
                CHECK(got.beta == doctest::Approx(ref).epsilon(1e-7));
            }
        }
    }
}

TEST_CASE("mathieu beta limits and paper anchors")
{
    CHECK(mathieu_beta(0.0, 0.0).beta == 0.0);
    CHECK_FALSE(mathieu_beta(0.0, 0.0).stable);

    // Lowest-order regime.
    const auto b03 = mathieu_beta(0.0, 0.3);
    CHECK(b03.stable);
    CHECK(b03.beta ==
          doctest::Approx(std::sqrt(0.3 * 0.3 / 2)).epsilon(0.01));

    // q = 0.62 at the paper drive: secular tune between the measured
    // transverse frequencies.
    const auto b62 = mathieu_beta(0.0, 0.62);
    REQUIRE(b62.stable);
    const double f_sec = b62.beta * 15.9e6 / 2.0;
    CHECK(f_sec > 3.3e6);
    CHECK(f_sec < 4.3e6);

    // Beyond the a = 0 stability edge (q ~ 0.908).
    CHECK_FALSE(mathieu_beta(0.0, 0.95).stable);
    CHECK(std::isnan(oracle::mathieu_beta(0.0, 0.95)));

    // Pure static confinement.
    CHECK(mathieu_beta(0.09, 0.0).beta == doctest::Approx(0.3));
}

// ---------------------------------------------------------------------------
// Pseudopotential

TEST_CASE("ideal quadrupole pseudopotential matches the closed form")
{
    const double r0 = 47e-6;
    const auto mask =
        oracle::vacuum_mask({40, 40, 40}, Vec3(-40e-6, -40e-6, -40e-6), 2e-6);
    TrapFields f;
    f.rf_phi = Grid3<double>({40, 40, 40}, mask.grid.origin(), 2e-6);
    f.dc_phi = f.rf_phi;
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 40; ++j)
            for (int k = 0; k < 40; ++k) {
                const Vec3 c = f.rf_phi.center(i, j, k);
                f.rf_phi(i, j, k) =
                    (c.y() * c.y() - c.z() * c.z()) / (2 * r0 * r0);
            }

    DriveConfig d;
    d.v0 = 8.0;
    d.omega = 2 * pi * 15.9e6;
    d.dc_voltages.clear();  // no electrodes in this mask
    const auto u = pseudopotential(mask, f, d);

    const double m = d.species.mass;
    const double r = 30e-6;
    // e V0^2 r^2 / (4 m Omega^2 r0^4), expressed in eV.
    const double expect = elementary_charge * d.v0 * d.v0 * r * r /
                          (4 * m * d.omega * d.omega * r0 * r0 * r0 * r0);
    const auto s = sample_unmasked(u, Vec3(0, r, 0));
    CHECK(s.value == doctest::Approx(expect).epsilon(1e-5));
    CHECK(expect == doctest::Approx(0.2570).epsilon(1e-3));

    // Doubling the drive frequency quarters the ponderomotive term.
    DriveConfig d2 = d;
    d2.omega *= 2;
    const auto u2 = pseudopotential(mask, f, d2);
    CHECK(sample_unmasked(u2, Vec3(0, r, 0)).value ==
          doctest::Approx(expect / 4).epsilon(1e-5));
}

TEST_CASE("zero rf amplitude leaves only the static term")
{
    const auto& t = small_trap();
    auto d = small_drive();
    d.v0 = 0.0;
    const auto fields = make_trap_fields(t.mask, t.bases, d);
    const auto u = pseudopotential(t.mask, fields, d);
    for (std::size_t n = 0; n < u.size(); n += 97) {
        if (t.mask.grid[n] != VoxelMask::vacuum) continue;
        CHECK(u[n] == doctest::Approx(fields.dc_phi[n]).epsilon(1e-12));
    }
}

TEST_CASE("dc voltage on an rf electrode is rejected")
{
    const auto& t = small_trap();
    auto d = small_drive();
    for (int e = 0; e < t.mask.n_electrodes(); ++e)
        if (t.mask.labels[e].role == Role::rf) {
            d.dc_voltages[e] = 0.1;
            break;
        }
    CHECK_THROWS_AS(make_trap_fields(t.mask, t.bases, d),
                    std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Minimum finding

TEST_CASE("find_minimum refines a synthetic bowl to sub-voxel accuracy")
{
    const auto mask =
        oracle::vacuum_mask({40, 40, 40}, Vec3(-40e-6, -40e-6, -40e-6), 2e-6);
    const Vec3 rc(3.3e-6, -5.1e-6, 0.7e-6);
    Grid3<double> u({40, 40, 40}, mask.grid.origin(), 2e-6);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 40; ++j)
            for (int k = 0; k < 40; ++k)
                u(i, j, k) = 3e8 * (u.center(i, j, k) - rc).squaredNorm();
    const Vec3 r0 = find_minimum(u, mask, 1.0);
    CHECK((r0 - rc).norm() < 5e-8);
}

TEST_CASE("dc-only configuration is untrapped (Earnshaw)")
{
    const auto& t = small_trap();
    auto d = small_drive();
    d.v0 = 0.0;
    const auto fields = make_trap_fields(t.mask, t.bases, d);
    const auto u = pseudopotential(t.mask, fields, d);
    CHECK_THROWS_AS(find_minimum(u, t.mask), UntrappedError);
}

TEST_CASE("stray field displaces the minimum by the harmonic response")
{
    const auto& t = small_trap();
    const auto d = small_drive();
    auto fields = make_trap_fields(t.mask, t.bases, d);
    const auto u = pseudopotential(t.mask, fields, d);
    const Vec3 r0 = find_minimum(u, t.mask, 0.02);
    const auto h0 = sample_unmasked(u, r0).hessian;  // eV/m^2

    // Symmetric +-E differencing cancels both the anharmonic quadratic
    // response and the fit-stencil bias of the refinement.
    const double e_y = 500.0;  // V/m
    const auto& g = t.mask.grid;
    auto displaced = [&](double ey) {
        auto shifted = fields;
        for (int i = 0; i < g.nx(); ++i)
            for (int j = 0; j < g.ny(); ++j)
                for (int k = 0; k < g.nz(); ++k)
                    shifted.dc_phi(i, j, k) -= ey * g.center(i, j, k).y();
        const auto u2 = pseudopotential(t.mask, shifted, d);
        return find_minimum(u2, t.mask, 0.02);
    };
    const Vec3 delta = 0.5 * (displaced(e_y) - displaced(-e_y));

    const Vec3 predicted = h0.ldlt().solve(Vec3(0, e_y, 0));
    CHECK((delta - predicted).norm() < 0.15 * predicted.norm());
}

// ---------------------------------------------------------------------------
// Secular analysis

TEST_CASE("ideal quadrupole with a weak static well reproduces closed forms")
{
    const double r0q = 47.4e-6;
    const auto mask =
        oracle::vacuum_mask({50, 50, 50}, Vec3(-50e-6, -50e-6, -50e-6), 2e-6);
    DriveConfig d;
    d.v0 = 8.0;
    d.omega = 2 * pi * 15.9e6;
    d.dc_voltages.clear();

    const double m = d.species.mass;
    // Axial curvature for a 1.0 MHz static well: dc'' = m w^2 / e.
    const double wz = 2 * pi * 1.0e6;
    const double c = m * wz * wz / elementary_charge / 2.0;  // V/m^2 per x^2

    TrapFields f;
    f.rf_phi = Grid3<double>({50, 50, 50}, mask.grid.origin(), 2e-6);
    f.dc_phi = f.rf_phi;
    for (int i = 0; i < 50; ++i)
        for (int j = 0; j < 50; ++j)
            for (int k = 0; k < 50; ++k) {
                const Vec3 p = f.rf_phi.center(i, j, k);
                f.rf_phi(i, j, k) =
                    (p.y() * p.y() - p.z() * p.z()) / (2 * r0q * r0q);
                f.dc_phi(i, j, k) =
                    c * (p.x() * p.x() - 0.45 * p.y() * p.y() -
                         0.55 * p.z() * p.z());
            }

    const auto sa = secular_analysis(mask, f, d);
    REQUIRE(sa.stable);

    const double q_expect = 2 * elementary_charge * d.v0 /
                            (m * d.omega * d.omega * r0q * r0q);
    CHECK(sa.q_reported == doctest::Approx(q_expect).epsilon(1e-3));
    CHECK(sa.q_reported == doctest::Approx(0.62).epsilon(0.01));

    // Secular frequencies: axial from the static well; transverse from the
    // ponderomotive curvature 2 A kappa^2 plus the static defocus.
    CHECK(sa.omega[0] == doctest::Approx(wz).epsilon(1e-3));
    const double a_j = elementary_charge * elementary_charge * d.v0 * d.v0 /
                       (4 * m * d.omega * d.omega);
    const double kappa = 1.0 / (r0q * r0q);
    const double wy =
        std::sqrt((2 * a_j * kappa * kappa -
                   elementary_charge * 0.9 * c) / m);
    const double wzz =
        std::sqrt((2 * a_j * kappa * kappa -
                   elementary_charge * 1.1 * c) / m);
    CHECK(sa.omega[1] == doctest::Approx(std::min(wy, wzz)).epsilon(2e-3));
    CHECK(sa.omega[2] == doctest::Approx(std::max(wy, wzz)).epsilon(2e-3));

    // Principal axes are the grid axes here, so the frame tilt vanishes.
    CHECK(sa.axis_tilt_deg == doctest::Approx(0.0).epsilon(0.5));

    // r0 at the origin.
    CHECK(sa.r0.norm() < 1e-7);
}

TEST_CASE("small trap secular analysis is stable and self-consistent")
{
    const auto& t = small_trap();
    const auto d = small_drive();
    const auto fields = make_trap_fields(t.mask, t.bases, d);
    const auto sa = secular_analysis(t.mask, fields, d);

    REQUIRE(sa.stable);
    // Minimum on the trap axis at the zone (segment 1) center.
    CHECK(std::abs(sa.r0.x()) < 3e-6);
    CHECK(std::abs(sa.r0.y()) < 3e-6);
    CHECK(std::abs(sa.r0.z()) < 3e-6);

    // Axes orthonormal.
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(sa.axes[i].dot(sa.axes[j]) ==
                  doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));

    // omega sorted with the axial slot first by construction.
    CHECK(std::abs(sa.axes[0].x()) > 0.99);
    CHECK(sa.omega[1] <= sa.omega[2]);

    // Pseudopotential frequency vs Mathieu tune on the rf frame, per
    // transverse axis. The exact Floquet tune exceeds sqrt(a + q^2/2) by
    // about 0.23 q^2 (9 percent at q = 0.62), so the agreement bound is the
    // O(q^2) correction envelope rather than a flat 5 percent.
    for (int slot : {1, 2}) {
        const double q = sa.mathieu_q[slot];
        const double a = sa.mathieu_a[slot];
        const double w_rf_frame = std::sqrt(
            (q * q / 8.0) * d.omega * d.omega + (a / 4.0) * d.omega * d.omega);
        const double w_beta = sa.beta[slot] * d.omega / 2.0;
        CHECK(std::abs(w_rf_frame - w_beta) / w_rf_frame <
              std::max(0.05, 0.3 * q * q));
    }

    // Scaling all dc voltages scales the axial frequency as sqrt(alpha).
    // (Scaled down: stronger endcaps would deconfine this trap's soft
    // transverse axis through the static defocus.)
    auto d2 = d;
    for (auto& v : d2.dc_voltages) v *= 0.7;
    const auto f2 = make_trap_fields(t.mask, t.bases, d2);
    const auto sa2 = secular_analysis(t.mask, f2, d2);
    CHECK(sa2.omega[0] ==
          doctest::Approx(sa.omega[0] * std::sqrt(0.7)).epsilon(0.02));
}

TEST_CASE("analysis is invariant under a global potential offset")
{
    const auto& t = small_trap();
    const auto d = small_drive();
    auto fields = make_trap_fields(t.mask, t.bases, d);
    const auto sa = secular_analysis(t.mask, fields, d);
    const auto u = pseudopotential(t.mask, fields, d);
    const auto depth = trap_depth(u, t.mask, sa.r0);

    // Offsetting every conductor (grounded box included) by c volts adds a
    // constant to the potential and nothing else.
    for (auto& v : fields.dc_phi.data()) v += 0.7;
    const auto sa2 = secular_analysis(t.mask, fields, d);
    const auto u2 = pseudopotential(t.mask, fields, d);
    const auto depth2 = trap_depth(u2, t.mask, sa2.r0);

    CHECK((sa2.r0 - sa.r0).norm() < 1e-9);
    for (int i = 0; i < 3; ++i)
        CHECK(sa2.omega[i] == doctest::Approx(sa.omega[i]).epsilon(1e-6));
    CHECK(sa2.q_reported == doctest::Approx(sa.q_reported).epsilon(1e-9));
    CHECK(depth2.depth_ev == doctest::Approx(depth.depth_ev).epsilon(1e-6));
    CHECK(sa2.u_min_ev ==
          doctest::Approx(sa.u_min_ev + 0.7).epsilon(1e-6));
}

// ---------------------------------------------------------------------------
// Depth

TEST_CASE("double-well barrier is recovered to grid resolution")
{
    // U = min(x^2, (x-2)^2 + 0.5) on x in [-1.5, 2] plus a transverse bowl
    // high enough that the only low exits are along x; the left well escapes
    // over the x = 9/8 barrier at U = 81/64 (the left edge sits higher).
    const double unit = 1e-5;
    const int nx = 280, ny = 16, nz = 16;
    const double h = 3.5 * unit / nx;
    const auto mask = oracle::vacuum_mask(
        {nx, ny, nz}, Vec3(-1.5 * unit, -0.5 * ny * h, -0.5 * nz * h), h);
    Grid3<double> u({nx, ny, nz}, mask.grid.origin(), h);
    const double jc = 0.5 * (ny - 1), kc = 0.5 * (nz - 1);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
            for (int k = 0; k < nz; ++k) {
                const double x = u.center(i, j, k).x() / unit;
                const double wall = 6.0 *
                                    ((j - jc) * (j - jc) + (k - kc) * (k - kc)) /
                                    (jc * jc);
                u(i, j, k) =
                    std::min(x * x, (x - 2) * (x - 2) + 0.5) + wall;
            }

    const auto seed = mask.grid.cell_of(Vec3(0, 0, 0));
    const auto flood = flood_escape_level(u, mask, seed, 0.0);
    const auto mm = minimax_escape_level(u, mask, seed);
    REQUIRE(flood.escapes);
    CHECK(flood.level == mm.level);

    const double u0 = u(seed[0], seed[1], seed[2]);
    const double analytic = 81.0 / 64.0;
    CHECK(std::abs((flood.level - u0) - analytic) < 2.25 * (h / unit) + 1e-6);

    // Saddle sits near x = 9/8 on this row.
    CHECK(mm.saddle[0] ==
          doctest::Approx((9.0 / 8.0 + 1.5) * unit / h - 0.5).epsilon(0.02));
}

TEST_CASE("flood fill equals brute-force minimax on random 32-cubed grids")
{
    for (unsigned seed = 0; seed < 8; ++seed) {
        const auto mask =
            oracle::vacuum_mask({32, 32, 32}, Vec3(0, 0, 0), 1e-6);
        Grid3<double> u({32, 32, 32}, Vec3(0, 0, 0), 1e-6);
        // Smooth random landscape: a few seeded Gaussian bumps over a bowl.
        std::mt19937_64 gen(seed * 1234567 + 17);
        auto rnd = [&] {
            return (gen() >> 11) * 0x1.0p-53;
        };
        struct Bump {
            double cx, cy, cz, amp, w;
        };
        std::vector<Bump> bumps;
        for (int b = 0; b < 6; ++b)
            bumps.push_back({rnd() * 32, rnd() * 32, rnd() * 32,
                             (rnd() - 0.3) * 2.0, 3.0 + 6.0 * rnd()});
        for (int i = 0; i < 32; ++i)
            for (int j = 0; j < 32; ++j)
                for (int k = 0; k < 32; ++k) {
                    double v = 0.002 * ((i - 16.0) * (i - 16.0) +
                                        (j - 16.0) * (j - 16.0) +
                                        (k - 16.0) * (k - 16.0));
                    for (const auto& b : bumps) {
                        const double dd = (i - b.cx) * (i - b.cx) +
                                          (j - b.cy) * (j - b.cy) +
                                          (k - b.cz) * (k - b.cz);
                        v += b.amp * std::exp(-dd / (b.w * b.w));
                    }
                    u(i, j, k) = v;
                }

        // Seed at the interior argmin.
        std::array<int, 3> s{16, 16, 16};
        double best = 1e300;
        for (int i = 2; i < 30; ++i)
            for (int j = 2; j < 30; ++j)
                for (int k = 2; k < 30; ++k)
                    if (u(i, j, k) < best) {
                        best = u(i, j, k);
                        s = {i, j, k};
                    }

        const auto flood = flood_escape_level(u, mask, s, 0.0);
        const auto mm = minimax_escape_level(u, mask, s);
        const double brute = oracle::minimax_escape_brute(u, mask, s);
        REQUIRE(flood.escapes);
        CHECK(flood.level == brute);
        CHECK(mm.level == brute);
    }
}

TEST_CASE("rf-only depth scales exactly as V0 squared")
{
    const auto& t = small_trap();
    auto d = small_drive();
    d.dc_voltages.assign(t.mask.n_electrodes(), 0.0);
    const auto fields = make_trap_fields(t.mask, t.bases, d);

    auto depth_at = [&](double v0) {
        auto dd = d;
        dd.v0 = v0;
        const auto u = pseudopotential(t.mask, fields, dd);
        const Vec3 r0 = find_minimum(u, t.mask);
        return trap_depth(u, t.mask, r0, 0.0).depth_ev;
    };

    const double d1 = depth_at(3.0);
    const double d2 = depth_at(6.0);
    CHECK(d1 > 0.0);
    CHECK(d2 == doctest::Approx(4.0 * d1).epsilon(1e-9));

    // Monotone in V0.
    CHECK(depth_at(4.0) >= d1);
    CHECK(d2 >= depth_at(4.0));
}

TEST_CASE("small trap depth result is internally consistent")
{
    const auto& t = small_trap();
    const auto d = small_drive();
    const auto fields = make_trap_fields(t.mask, t.bases, d);
    const auto u = pseudopotential(t.mask, fields, d);
    const Vec3 r0 = find_minimum(u, t.mask);
    const auto res = trap_depth(u, t.mask, r0);

    CHECK(res.depth_ev > 0.0);
    // Saddle potential minus minimum equals the depth (bisection tolerance).
    const auto seed = t.mask.grid.cell_of(r0);
    const auto mm = minimax_escape_level(u, t.mask, seed);
    const double u_saddle =
        u(mm.saddle[0], mm.saddle[1], mm.saddle[2]);
    CHECK(res.depth_ev ==
          doctest::Approx(u_saddle - u(seed[0], seed[1], seed[2]))
              .epsilon(1e-2));
    CHECK(res.escape_direction.norm() == doctest::Approx(1.0));
    CHECK(res.escape_tilt_deg >= 0.0);
    CHECK(res.escape_tilt_deg <= 90.0);
}
