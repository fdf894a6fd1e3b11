#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "microtrap/geometry.hpp"
#include "microtrap/grid.hpp"

namespace microtrap {

struct SolverOptions {
    double tol = 1e-6;      // residual max-norm relative to boundary scale
    int max_cycles = 400;   // multigrid cycles (or SOR sweeps when multigrid off)
    bool multigrid = true;
    double omega_sor = 1.9;  // standalone red-black SOR relaxation factor
    int pre_smooth = 2;
    int post_smooth = 2;
    int coarse_sweeps = 100;
    int threads = 0;  // 0 = library default
    // The residual max-norm under-reports the solution error by the discrete
    // Green-function amplification, so iteration actually targets
    // tol/residual_safety; a solve only fails if even tol was not reached.
    double residual_safety = 64.0;
};

// Dimensionless unit-voltage potential of one electrode: 1 on the electrode,
// 0 on every other conductor and on the grounded box.
struct PotentialBasis {
    int electrode_id = -1;
    Grid3<double> phi;
    double residual = 0.0;
    int iterations = 0;
};

struct SolveFailure : std::runtime_error {
    SolveFailure(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), residual_history(std::move(history))
    {
    }
    std::vector<double> residual_history;
};

PotentialBasis solve_basis(const VoxelMask& mask, int electrode_id,
                           const SolverOptions& opt = {});

// One Dirichlet solve with an arbitrary voltage per electrode (grounded box
// stays at 0). Used directly and as the superposition cross-check.
Grid3<double> solve_dirichlet(const VoxelMask& mask,
                              const std::vector<double>& voltages,
                              const SolverOptions& opt = {},
                              double* residual_out = nullptr,
                              int* iterations_out = nullptr);

// Phi(r) = sum_i V_i phi_i(r). Throws on mismatched sizes or grids.
Grid3<double> superpose(const std::vector<PotentialBasis>& bases,
                        const std::vector<double>& voltages);

// y += a * x (grids must share shape); building block for streaming
// superposition without holding all bases in memory.
void axpy(Grid3<double>& y, double a, const Grid3<double>& x);

// Dimensionless 7-point residual max-norm |sum(nb) - 6 u| / 6 over vacuum.
double laplace_residual_max(const Grid3<double>& phi, const VoxelMask& mask);

struct FieldSample {
    Vec3 position = Vec3::Zero();
    double value = 0.0;                          // V
    Vec3 gradient = Vec3::Zero();                // V/m
    Eigen::Matrix3d hessian = Eigen::Matrix3d::Zero();  // V/m^2
};

// Value, gradient and Hessian from a weighted quadratic least-squares fit
// over the 5^3 voxel neighborhood of r; exact for globally quadratic fields.
// Throws std::domain_error if r sits in an electrode or too near the domain
// boundary, or if the stencil overlaps electrode voxels.
FieldSample sample(const Grid3<double>& phi, const VoxelMask& mask,
                   const Vec3& r);

// Same fit without electrode screening, for synthetic fields in tests and
// for derived (non-harmonic) grids like the pseudopotential.
FieldSample sample_unmasked(const Grid3<double>& field, const Vec3& r);

// Trilinearly interpolated gradient of a solved potential, cached as float
// samples at voxel centers (optionally cropped to a window). This is the fast
// path for trajectory integration.
class GradientField {
  public:
    GradientField() = default;
    GradientField(const Grid3<double>& phi, const Box& crop);
    explicit GradientField(const Grid3<double>& phi);

    Vec3 eval(const Vec3& r) const;  // V/m
    bool covers(const Vec3& r) const;
    const Box& support() const { return support_; }

    // Linear combination with identical windows.
    static GradientField combine(const std::vector<const GradientField*>& parts,
                                 const std::vector<double>& weights);
    void set_combination(const std::vector<const GradientField*>& parts,
                         const std::vector<double>& weights);

  private:
    int nx_ = 0, ny_ = 0, nz_ = 0;
    Vec3 origin_ = Vec3::Zero();  // position of sample node (0,0,0)
    double spacing_ = 0.0;
    Box support_;
    std::vector<float> v_;  // interleaved gx,gy,gz per node

    friend class TransportFieldBlend;
};

// Trilinearly interpolated scalar (e.g. the pseudopotential for energy
// bookkeeping and conductor-collision detection; +inf nodes propagate).
class ScalarField {
  public:
    ScalarField() = default;
    explicit ScalarField(const Grid3<double>& f) : ScalarField(f, everything(f))
    {
    }
    ScalarField(const Grid3<double>& f, const Box& crop);

    double eval(const Vec3& r) const;
    bool covers(const Vec3& r) const { return support_.contains(r); }
    const Box& support() const { return support_; }

  private:
    static Box everything(const Grid3<double>& f)
    {
        return Box{f.origin(), f.origin() + Vec3(f.nx(), f.ny(), f.nz()) *
                                                f.spacing()};
    }
    int nx_ = 0, ny_ = 0, nz_ = 0;
    Vec3 origin_ = Vec3::Zero();
    double spacing_ = 0.0;
    Box support_;
    std::vector<float> v_;
};

}  // namespace microtrap
