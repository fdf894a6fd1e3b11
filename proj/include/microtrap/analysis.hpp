#pragma once

#include <array>
#include <optional>
#include <vector>

#include "microtrap/constants.hpp"
#include "microtrap/fields.hpp"
#include "microtrap/geometry.hpp"

namespace microtrap {

struct DriveConfig {
    double v0 = 8.0;                           // V, zero to peak
    double omega = 2 * constants::pi * 15.9e6;  // rad/s
    std::vector<double> dc_voltages;  // per electrode id; rf entries stay 0
    IonSpecies species = cd111();

    void validate(int n_electrodes) const;
};

// Combined unit-RF potential (sum of the rf electrode bases) and static
// potential (dc bases weighted by their voltages) on the mask grid.
struct TrapFields {
    Grid3<double> rf_phi;
    Grid3<double> dc_phi;
};

TrapFields make_trap_fields(const VoxelMask& mask,
                            const std::vector<PotentialBasis>& bases,
                            const DriveConfig& drive);

// Time-averaged potential in eV on the grid:
//   U = [Q^2 V0^2 |grad rf_phi|^2 / (4 m Omega^2) + Q dc_phi] / e.
// Conductor voxels carry +infinity (ions cannot pass), the grounded shell the
// static term only.
Grid3<double> pseudopotential(const VoxelMask& mask, const TrapFields& fields,
                              const DriveConfig& drive);

struct UntrappedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Grid argmin over interior vacuum refined by a local quadratic fit (Newton
// steps on the fitted model). Throws UntrappedError when the minimum hugs a
// conductor or the domain boundary.
Vec3 find_minimum(const Grid3<double>& potential_ev, const VoxelMask& mask,
                  double grad_tol_ev_per_m = 5.0);

struct MathieuResult {
    double beta = 0.0;
    bool stable = false;
};

// Characteristic exponent of u'' + [a - 2q cos(2 xi)] u = 0 from the standard
// continued-fraction relation, solved to 1e-9. stable iff a real beta exists
// in (0, 1).
MathieuResult mathieu_beta(double a, double q);

struct SecularAnalysis {
    Vec3 r0 = Vec3::Zero();              // trap minimum (m)
    std::array<double, 3> omega{};       // rad/s: axial, transverse1, transverse2
    std::array<Vec3, 3> axes{};          // rf principal frame, same order
    double axis_tilt_deg = 0.0;          // transverse frame rotation out of the
                                         // chip plane, folded to [0, 45]
    std::array<double, 3> mathieu_q{};
    std::array<double, 3> mathieu_a{};
    std::array<double, 3> beta{};
    double q_reported = 0.0;             // larger transverse |q|
    bool stable = false;
    double u_min_ev = 0.0;               // potential at r0
};

// Secular frequencies come from the eigen-decomposition of the total
// pseudopotential Hessian at r0. Mathieu parameters live on the rf
// quadrupole's own principal frame (the standard linear-trap convention);
// the dc Hessian is projected onto those axes for a_i.
SecularAnalysis secular_analysis(const VoxelMask& mask,
                                 const TrapFields& fields,
                                 const DriveConfig& drive);

// Exact small-oscillation frequencies about r0 from the one-period monodromy
// of the linearized equation of motion
//   m dr'' = -Q [H_dc + V0 cos(Omega t) H_rf] dr,
// with both Hessians sampled at r0. Unlike the per-axis Mathieu treatment
// this keeps the cross-coupling between axes; unlike the pseudopotential
// Hessian it keeps the full drive dependence (the tunes exceed the
// lowest-order estimate by about 0.23 q^2). Returns the three secular
// angular frequencies sorted ascending. Throws UntrappedError on unstable
// multipliers.
std::array<double, 3> floquet_frequencies(const VoxelMask& mask,
                                          const TrapFields& fields,
                                          const DriveConfig& drive,
                                          const Vec3& r0);

struct DepthResult {
    double depth_ev = 0.0;
    Vec3 saddle = Vec3::Zero();
    Vec3 escape_direction = Vec3::Zero();
    double escape_tilt_deg = 0.0;  // out of the chip plane, [0, 90]
};

struct EscapeLevel {
    bool escapes = false;
    double level = 0.0;               // potential value connecting to the edge
    std::array<int, 3> saddle{0, 0, 0};
};

// Lowest level whose open sub-level set connects the seed to the domain edge,
// by bisection with breadth-first floods over vacuum voxels.
EscapeLevel flood_escape_level(const Grid3<double>& potential_ev,
                               const VoxelMask& mask,
                               const std::array<int, 3>& seed,
                               double tol_ev = 1e-4);

// Same quantity from a priority-queue minimax search (exact on the grid);
// also the most practical way to localize the saddle voxel.
EscapeLevel minimax_escape_level(const Grid3<double>& potential_ev,
                                 const VoxelMask& mask,
                                 const std::array<int, 3>& seed);

// Escape barrier from r0's basin: flood-fill bisection for the depth, the
// minimax search for the saddle location. depth 0 when the basin reaches the
// boundary at every level.
DepthResult trap_depth(const Grid3<double>& potential_ev, const VoxelMask& mask,
                       const Vec3& r0, double tol_ev = 1e-4);

}  // namespace microtrap
