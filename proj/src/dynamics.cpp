#include "microtrap/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace microtrap {

double SimOptions::resolved_dt(const DriveConfig& drive) const
{
    const double t_rf = 2.0 * constants::pi / drive.omega;
    if (drive.v0 <= 0.0) {
        if (dt <= 0.0)
            throw std::invalid_argument("sim: dt required when rf is off");
        return dt;
    }
    const double step = dt > 0.0 ? dt : t_rf / 200.0;
    if (step > t_rf / 100.0)
        throw std::invalid_argument("sim: dt must resolve the rf drive "
                                    "(dt <= rf period / 100)");
    return step;
}

DynamicsFields make_dynamics_fields(const VoxelMask& mask,
                                    const TrapFields& fields,
                                    const DriveConfig& drive,
                                    const Grid3<double>* tickle_phi,
                                    const Box* window)
{
    const auto u = pseudopotential(mask, fields, drive);
    const Box everything{
        mask.grid.origin(),
        mask.grid.origin() +
            Vec3(mask.grid.nx(), mask.grid.ny(), mask.grid.nz()) *
                mask.grid.spacing()};
    const Box w = window ? *window : everything;
    DynamicsFields out{GradientField(fields.rf_phi, w),
                       GradientField(fields.dc_phi, w), std::nullopt,
                       ScalarField(u, w)};
    if (tickle_phi) out.tickle_basis.emplace(*tickle_phi, w);
    return out;
}

namespace {

// Samples states on the configured stride. The secular energy uses rf-period
// averaged position and velocity, which removes the micromotion contribution
// that would otherwise double-count the ponderomotive energy.
struct Recorder {
    const ScalarField& u_ev;
    double mass;
    int stride;
    int window;  // steps per rf period
    std::deque<Vec3> ring_r, ring_v;
    Vec3 sum_r = Vec3::Zero(), sum_v = Vec3::Zero();
    Trajectory traj;

    Recorder(const ScalarField& u, double m, const SimOptions& o, double dt,
             long steps, double omega_rf, bool rf_on)
        : u_ev(u), mass(m)
    {
        stride = o.sample_stride > 0
                     ? o.sample_stride
                     : static_cast<int>(std::max<long>(1, steps / 8192));
        window = rf_on ? std::max(1, static_cast<int>(std::lround(
                                         2 * constants::pi / (omega_rf * dt))))
                       : 1;
        traj.sample_dt = stride * dt;
        traj.states.reserve(steps / stride + 2);
        traj.secular_energy.reserve(steps / stride + 2);
    }

    void push(const Vec3& r, const Vec3& v)
    {
        ring_r.push_back(r);
        ring_v.push_back(v);
        sum_r += r;
        sum_v += v;
        if (static_cast<int>(ring_r.size()) > window) {
            sum_r -= ring_r.front();
            sum_v -= ring_v.front();
            ring_r.pop_front();
            ring_v.pop_front();
        }
    }

    void maybe_record(long step, const Vec3& r, const Vec3& v, double t)
    {
        if (step % stride != 0) return;
        traj.states.push_back({r, v, t});
        const Vec3 rbar = sum_r / ring_r.size();
        const Vec3 vbar = sum_v / ring_v.size();
        traj.secular_energy.push_back(
            0.5 * mass * vbar.squaredNorm() +
            constants::elementary_charge * u_ev.eval(rbar));
    }
};

template <class StaticE>
Trajectory run_integrator(const DynamicsFields& f, const DriveConfig& drive,
                          const IonState& s0, const SimOptions& opt,
                          const StaticE& static_efield)
{
    if (opt.duration <= 0.0)
        throw std::invalid_argument("sim: duration must be > 0");
    const double dt = opt.resolved_dt(drive);
    const long n_steps = std::lround(opt.duration / dt);
    const double m = drive.species.mass;
    const double q_ion = drive.species.charge;
    const double qm = q_ion / m;

    const bool tickle_on = opt.tickle.has_value();
    if (tickle_on && !f.tickle_basis)
        throw std::invalid_argument("sim: tickle requested without its basis");
    const double t_amp = tickle_on ? opt.tickle->amplitude : 0.0;
    const double t_omega = tickle_on ? opt.tickle->omega : 0.0;

    Rng rng(opt.rng_seed);
    // Per-axis velocity kick for a one-sided force PSD S_F: var = S_F dt/(2 m^2).
    const double sigma_v =
        opt.noise_force_psd > 0.0
            ? std::sqrt(opt.noise_force_psd * dt / 2.0) / m
            : 0.0;
    const double drag = std::exp(-opt.gamma * dt);

    Vec3 r = s0.position;
    Vec3 v = s0.velocity;
    double t = s0.time;

    auto lost_check = [&](const Vec3& p, double tt) {
        if (!f.potential_ev.covers(p))
            throw IonLostError("ion lost: left the field window", tt);
        if (!std::isfinite(f.potential_ev.eval(p)))
            throw IonLostError("ion lost: hit an electrode", tt);
    };

    auto accel = [&](const Vec3& p, double tt) -> Vec3 {
        Vec3 e = static_efield(p, tt);
        e += f.rf.eval(p) * (drive.v0 * std::cos(drive.omega * tt));
        if (tickle_on)
            e += f.tickle_basis->eval(p) *
                 (t_amp * std::cos(t_omega * tt));
        return e * (-qm);
    };

    Recorder rec(f.potential_ev, m, opt, dt, n_steps, drive.omega,
                 drive.v0 > 0.0);
    lost_check(r, t);
    rec.push(r, v);
    rec.maybe_record(0, r, v, t);

    Vec3 a = accel(r, t);
    for (long step = 1; step <= n_steps; ++step) {
        v += 0.5 * dt * a;
        r += 0.5 * dt * v;
        if (opt.gamma > 0.0) v *= drag;
        if (sigma_v > 0.0)
            v += Vec3(rng.normal(), rng.normal(), rng.normal()) * sigma_v;
        r += 0.5 * dt * v;
        t = s0.time + step * dt;
        lost_check(r, t);
        a = accel(r, t);
        v += 0.5 * dt * a;

        rec.push(r, v);
        rec.maybe_record(step, r, v, t);
    }
    return std::move(rec.traj);
}

}  // namespace

Trajectory integrate(const DynamicsFields& fields, const DriveConfig& drive,
                     const IonState& state0, const SimOptions& opt)
{
    return run_integrator(fields, drive, state0, opt,
                          [&](const Vec3& p, double) { return fields.dc.eval(p); });
}

Trajectory integrate_custom_static(
    const DynamicsFields& fields, const DriveConfig& drive,
    const IonState& state0, const SimOptions& opt,
    const std::function<Vec3(const Vec3&, double)>& static_efield)
{
    return run_integrator(fields, drive, state0, opt, static_efield);
}

TickleSpectrum tickle_scan(const DynamicsFields& fields,
                           const DriveConfig& drive, const Vec3& r0,
                           double f_lo, double f_hi, int n_points,
                           const SimOptions& opt)
{
    if (opt.gamma <= 0.0)
        throw std::invalid_argument("tickle: damping required for steady state");
    if (!opt.tickle || !fields.tickle_basis)
        throw std::invalid_argument("tickle: no tickle drive configured");
    if (n_points < 3 || f_hi <= f_lo)
        throw std::invalid_argument("tickle: bad frequency range");

    // Settle a few damping times, then measure the rms orbit size.
    const double settle = 6.0 / opt.gamma;
    const double measure = 4.0 / opt.gamma;

    TickleSpectrum out;
    out.frequency.resize(n_points);
    out.response.resize(n_points);
    for (int p = 0; p < n_points; ++p) {
        const double freq =
            f_lo + (f_hi - f_lo) * p / static_cast<double>(n_points - 1);
        SimOptions o = opt;
        o.duration = settle + measure;
        o.tickle->omega = 2.0 * constants::pi * freq;
        o.rng_seed = opt.rng_seed;
        const auto traj = integrate(fields, drive, {r0, Vec3::Zero(), 0.0}, o);

        // Mean and rms over the measurement window.
        std::size_t first = 0;
        while (first < traj.states.size() &&
               traj.states[first].time < settle)
            ++first;
        Vec3 mean = Vec3::Zero();
        std::size_t count = 0;
        for (std::size_t i = first; i < traj.states.size(); ++i, ++count)
            mean += traj.states[i].position;
        mean /= std::max<std::size_t>(1, count);
        double acc = 0.0;
        for (std::size_t i = first; i < traj.states.size(); ++i)
            acc += (traj.states[i].position - mean).squaredNorm();
        out.frequency[p] = freq;
        out.response[p] = std::sqrt(acc / std::max<std::size_t>(1, count));
    }

    // Peaks: local maxima well above the scan floor, refined parabolically.
    double floor = 0.0;
    {
        auto sorted = out.response;
        std::sort(sorted.begin(), sorted.end());
        floor = sorted[sorted.size() / 2];
    }
    for (int p = 1; p + 1 < n_points; ++p) {
        const double y0 = out.response[p - 1], y1 = out.response[p],
                     y2 = out.response[p + 1];
        if (y1 <= y0 || y1 < y2) continue;
        if (y1 < 3.0 * floor) continue;
        const double denom = y0 - 2 * y1 + y2;
        const double shift =
            denom != 0.0 ? 0.5 * (y0 - y2) / denom : 0.0;
        const double df = (f_hi - f_lo) / (n_points - 1);
        out.peaks.push_back(out.frequency[p] +
                            std::clamp(shift, -1.0, 1.0) * df);
    }
    return out;
}

CompensationResult compensate_micromotion(
    const Vec3& stray_field, const std::vector<Vec3>& comp_gradients,
    const SecularAnalysis& sa, const DriveConfig& drive)
{
    const int k = static_cast<int>(comp_gradients.size());
    if (k < 2)
        throw std::invalid_argument(
            "compensation: need at least two electrodes");

    // Electrode i at dV adds field -grad(phi_i) dV; cancel the stray field in
    // least squares: min |stray - G dV|.
    Eigen::MatrixXd g(3, k);
    for (int i = 0; i < k; ++i) g.col(i) = comp_gradients[i];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cond = sv(0) / sv(sv.size() - 1);
    if (!(cond < 1e8))
        throw std::runtime_error(
            "compensation: degenerate electrode field directions");

    const Eigen::VectorXd dv = svd.solve(stray_field);
    CompensationResult out;
    out.adjustments.assign(dv.data(), dv.data() + k);
    out.residual_field = stray_field - g * dv;
    out.condition_number = cond;

    // Residual excess micromotion: displacement along each transverse rf
    // axis times q_i / 2.
    const double m = drive.species.mass;
    double worst = 0.0;
    for (int slot : {1, 2}) {
        const double w = sa.omega[slot];
        if (w <= 0.0) continue;
        const double x0 = drive.species.charge *
                          out.residual_field.dot(sa.axes[slot]) / (m * w * w);
        worst = std::max(worst,
                         std::abs(0.5 * sa.mathieu_q[slot] * x0));
    }
    out.residual_micromotion = worst;
    return out;
}

}  // namespace microtrap
