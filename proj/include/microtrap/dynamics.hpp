#pragma once

#include <functional>
#include <optional>

#include "microtrap/analysis.hpp"
#include "microtrap/fields.hpp"
#include "microtrap/rng.hpp"

namespace microtrap {

struct IonState {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    double time = 0.0;
};

struct TickleDrive {
    int electrode = -1;
    double amplitude = 0.0;  // V
    double omega = 0.0;      // rad/s
};

struct SimOptions {
    double dt = 0.0;               // s; 0 = rf period / 200
    double gamma = 0.0;            // 1/s, viscous cooling drag
    double noise_force_psd = 0.0;  // N^2/Hz per axis, one-sided
    std::optional<TickleDrive> tickle;
    std::uint64_t rng_seed = 1;
    double duration = 0.0;  // s
    int sample_stride = 0;  // steps between recorded states; 0 = auto

    double resolved_dt(const DriveConfig& drive) const;
};

struct Trajectory {
    double sample_dt = 0.0;
    std::vector<IonState> states;
    std::vector<double> secular_energy;  // J, rf-period moving average
};

struct IonLostError : std::runtime_error {
    IonLostError(const std::string& what, double t)
        : std::runtime_error(what), time(t)
    {
    }
    double time;
};

// Interpolated fields the integrator runs on. potential_ev also serves as the
// collision detector: +inf cells mark conductors.
struct DynamicsFields {
    GradientField rf;                          // grad of unit rf potential
    GradientField dc;                          // grad of the static potential
    std::optional<GradientField> tickle_basis;  // grad of one unit basis
    ScalarField potential_ev;                  // pseudopotential + static
};

// window = nullptr caches the full grid; pass a box to crop (memory and cache
// friendliness for long runs).
DynamicsFields make_dynamics_fields(const VoxelMask& mask,
                                    const TrapFields& fields,
                                    const DriveConfig& drive,
                                    const Grid3<double>* tickle_phi = nullptr,
                                    const Box* window = nullptr);

// Velocity-Verlet integration of
//   m r'' = -Q grad[ dc + V0 rf cos(Omega t) + tickle ] - m gamma r' + F_n(t)
// with the drag and noise applied in a Strang-split kick between half-drifts
// (reduces to plain velocity Verlet for gamma = 0, noise off). Throws
// IonLostError when the ion enters a conductor or leaves the field window.
Trajectory integrate(const DynamicsFields& fields, const DriveConfig& drive,
                     const IonState& state0, const SimOptions& opt);

// Same integrator with the static electric field supplied by a callback
// (shuttling waveforms); rf and the collision field come from `fields`.
Trajectory integrate_custom_static(
    const DynamicsFields& fields, const DriveConfig& drive,
    const IonState& state0, const SimOptions& opt,
    const std::function<Vec3(const Vec3&, double)>& static_efield);

struct TickleSpectrum {
    std::vector<double> frequency;  // Hz
    std::vector<double> response;   // m, rms displacement
    std::vector<double> peaks;      // Hz, refined local maxima
};

// Steady-state rms displacement of the cooled ion versus tickle frequency.
// Requires gamma > 0 so a steady state exists. Peaks are local maxima above
// the noise floor refined by a three-point parabola; an empty peak list means
// nothing rose above the floor.
TickleSpectrum tickle_scan(const DynamicsFields& fields,
                           const DriveConfig& drive, const Vec3& r0,
                           double f_lo, double f_hi, int n_points,
                           const SimOptions& opt);

struct CompensationResult {
    std::vector<double> adjustments;    // V per compensation electrode
    Vec3 residual_field = Vec3::Zero();  // V/m at the null
    double residual_micromotion = 0.0;   // m, worst transverse amplitude
    double condition_number = 0.0;
};

// Least-squares dc adjustments cancelling a stray field at the rf null.
// comp_gradients[i] is grad(phi_i) of compensation electrode i at the null,
// per volt. Throws when the electrode field directions are degenerate.
CompensationResult compensate_micromotion(
    const Vec3& stray_field, const std::vector<Vec3>& comp_gradients,
    const SecularAnalysis& sa, const DriveConfig& drive);

}  // namespace microtrap
