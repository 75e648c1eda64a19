#pragma once

// Yee leapfrog time stepping in normalized units (eps0 = mu0 = c = 1) with a
// convolutional PML and a soft point-dipole current source.
//
// State convention: after n calls to step(), E holds E(n dt) and H holds
// H((n - 1/2) dt).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "phc/errors.hpp"
#include "phc/grid.hpp"
#include "phc/vec.hpp"

namespace phc {

/// Gaussian-modulated sine current pulse at a point.
///
/// The envelope has temporal standard deviation 1/(2 pi frequency_width), so
/// `frequency_width` is the standard deviation of the pulse spectrum. The
/// envelope peaks `cutoff` widths after `start_time` and is switched off
/// `cutoff` widths after the peak.
struct DipoleSource {
    Vec3 position;
    Axis polarization = Axis::x;
    double center_frequency = 0.885;
    double frequency_width = 0.3;
    double cutoff = 6.0;
    double amplitude = 1.0;
    double start_time = 0.0;  ///< the pulse begins here instead of at t = 0

    double envelope_width() const { return 1.0 / (2.0 * std::numbers::pi * frequency_width); }
    double peak_time() const { return cutoff * envelope_width(); }
    double end_time() const { return start_time + 2.0 * peak_time(); }

    double current(double t) const {
        t -= start_time;
        if (t < 0.0 || t > 2.0 * peak_time()) return 0.0;
        const double s = (t - peak_time()) / envelope_width();
        return amplitude * std::sin(2.0 * std::numbers::pi * center_frequency * (t - peak_time())) *
               std::exp(-0.5 * s * s);
    }
};

inline void validate(const DipoleSource& s) {
    if (!(s.center_frequency > 0.0)) throw ConfigError("source center frequency must be positive");
    if (!(s.frequency_width > 0.0)) throw ConfigError("source frequency width must be positive");
    if (!(s.cutoff > 0.0)) throw ConfigError("source cutoff must be positive");
}

/// Probe samples taken once per step; sample n is at time t0 + n dt.
struct ProbeSeries {
    Vec3 position;
    FieldComponent component = FieldComponent::ex;
    double dt = 0.0;
    double t0 = 0.0;
    std::vector<double> values;

    double time(std::size_t n) const { return t0 + static_cast<double>(n) * dt; }

    /// Samples at or after time `t` (t0 adjusted accordingly).
    ProbeSeries after(double t) const {
        ProbeSeries out = *this;
        std::size_t first = 0;
        while (first < values.size() && time(first) < t - 1e-12) ++first;
        out.t0 = time(first);
        out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(first), values.end());
        return out;
    }
};

class Simulation {
public:
    explicit Simulation(std::shared_ptr<const DiscretizedScene> scene)
        : scene_(std::move(scene)), dt_(courant_dt(scene_->spec)) {
        const auto& shape = scene_->shape;
        for (auto& f : e_) f.assign(shape.size, 0.0);
        for (auto& f : h_) f.assign(shape.size, 0.0);
        for (int c = 0; c < 3; ++c) {
            ce_[c].resize(shape.size);
            for (std::size_t i = 0; i < shape.size; ++i) ce_[c][i] = dt_ / (scene_->eps[c][i] * scene_->dx);
        }
        build_pml_blocks();
    }

    const DiscretizedScene& scene() const { return *scene_; }
    double dt() const { return dt_; }
    long steps() const { return steps_; }
    /// Time of the electric field currently held.
    double time() const { return static_cast<double>(steps_) * dt_; }

    std::span<const double> field(FieldComponent c) const {
        const int a = axis_of(c);
        return is_electric(c) ? std::span<const double>(e_[a]) : std::span<const double>(h_[a]);
    }

    /// Mutable access for setting initial conditions.
    std::span<double> field_data(FieldComponent c) {
        const int a = axis_of(c);
        return is_electric(c) ? std::span<double>(e_[a]) : std::span<double>(h_[a]);
    }

    void add_source(const DipoleSource& src) {
        validate(src);
        const FieldComponent c = e_component(index(src.polarization));
        const double dv = scene_->dx * scene_->dx * scene_->dx;
        BoundSource b{src, {}};
        const auto& coef = ce_[index(src.polarization)];
        for (auto [idx, w] : interpolation_weights(c, src.position, true))
            b.taps.emplace_back(idx, w * coef[idx] * scene_->dx / dv);
        if (b.taps.empty()) throw ConfigError("dipole source lies outside the updated region of the grid");
        for (int a = 0; a < 3; ++a)
            if (scene_->in_pml(a, src.position[a])) throw ConfigError("dipole source lies inside the PML");
        sources_.push_back(std::move(b));
    }

    /// One leapfrog cycle: H from curl E, then E from curl H plus sources.
    void step() {
        for (int c = 0; c < 3; ++c) update_main<false>(c);
        for (auto& blk : h_blocks_) apply_pml_block<false>(blk);
        fill_h_ghosts();
        for (int c = 0; c < 3; ++c) update_main<true>(c);
        for (auto& blk : e_blocks_) apply_pml_block<true>(blk);
        const double t_current = (static_cast<double>(steps_) + 0.5) * dt_;
        for (const auto& s : sources_) {
            const double j = s.source.current(t_current);
            if (j == 0.0) continue;
            auto& f = e_[index(s.source.polarization)];
            for (auto [idx, w] : s.taps) f[idx] -= w * j;
        }
        copy_periodic_e();
        ++steps_;
        if (steps_ % kStabilityInterval == 0) check_stability();
    }

    void run(long n) {
        for (long i = 0; i < n; ++i) step();
    }

    /// Trilinear interpolation of component `c` at a point.
    double sample(FieldComponent c, Vec3 p) const {
        const auto& f = field(c);
        double v = 0.0;
        for (auto [idx, w] : interpolation_weights(c, p, false)) v += w * f[idx];
        return v;
    }

    double max_abs_field() const {
        double m = 0.0;
        for (const auto* arr : {&e_[0], &e_[1], &e_[2], &h_[0], &h_[1], &h_[2]})
            for (double v : *arr) m = std::max(m, std::abs(v));
        return m;
    }

    /// Field magnitude beyond which the run is declared unstable.
    static constexpr double kBlowUp = 1e12;
    static constexpr long kStabilityInterval = 64;

    /// Interpolation taps (flat index, weight) of a point on the lattice of
    /// component `c`. With `updated_only` taps on frozen (wall) or mirror-image
    /// positions are dropped; otherwise image taps across a mirror plane are
    /// folded back onto stored samples with the component's parity.
    std::vector<std::pair<std::size_t, double>> interpolation_weights(FieldComponent c, Vec3 p,
                                                                      bool updated_only) const {
        std::array<int, 3> i0{};
        std::array<double, 3> frac{};
        std::array<IndexRange, 3> range{};
        for (int a = 0; a < 3; ++a) {
            const double u = (p[a] - scene_->spec.lower[a]) / scene_->dx - stagger(c, a);
            i0[a] = static_cast<int>(std::floor(u + 1e-9));
            frac[a] = std::max(0.0, u - i0[a]);
            if (frac[a] < 1e-9) frac[a] = 0.0;
            range[a] = updated_only ? scene_->update_range(c, a) : scene_->stored_range(c, a);
        }
        std::vector<std::pair<std::size_t, double>> taps;
        for (int dk = 0; dk < 2; ++dk)
            for (int dj = 0; dj < 2; ++dj)
                for (int di = 0; di < 2; ++di) {
                    const std::array<int, 3> d{di, dj, dk};
                    double w = 1.0;
                    std::array<int, 3> ijk{};
                    bool ok = true;
                    for (int a = 0; a < 3; ++a) {
                        w *= d[a] ? frac[a] : 1.0 - frac[a];
                        ijk[a] = i0[a] + d[a];
                        const Boundary lo = scene_->spec.low[a];
                        if (!updated_only && ijk[a] < 0 && is_mirror(lo)) {
                            ijk[a] = stagger(c, a) == 0.0 ? -ijk[a] : -1 - ijk[a];
                            w *= mirror_parity(c, a, lo);
                        }
                        ok = ok && ijk[a] >= range[a].lo && ijk[a] <= range[a].hi;
                    }
                    if (w != 0.0 && ok) taps.emplace_back(scene_->shape.index(ijk), w);
                }
        return taps;
    }

private:
    struct BoundSource {
        DipoleSource source;
        std::vector<std::pair<std::size_t, double>> taps;  // (index, dt/(eps dV) * weight)
    };

    /// Auxiliary convolution state for one (component, derivative axis, face).
    struct PmlBlock {
        int component = 0;   // 0..2, electric or magnetic per block list
        int axis = 0;        // derivative axis
        int source = 0;      // component differentiated (other field)
        double sign = 1.0;   // +1 for the d_axis term of the curl, -1 for the other
        std::array<IndexRange, 3> range{};
        std::vector<double> b, c;  // recursion coefficients along `axis`
        std::vector<double> psi;
    };

    template <bool Electric>
    void update_main(int c) {
        const int a = (c + 1) % 3, b = (c + 2) % 3;
        const FieldComponent fc = Electric ? e_component(c) : h_component(c);
        const auto& shape = scene_->shape;
        const IndexRange ri = scene_->update_range(fc, 0), rj = scene_->update_range(fc, 1),
                         rk = scene_->update_range(fc, 2);
        const std::ptrdiff_t sa = shape.stride[a], sb = shape.stride[b];
        double* f = Electric ? e_[c].data() : h_[c].data();
        const double* fa = Electric ? h_[a].data() : e_[a].data();
        const double* fb = Electric ? h_[b].data() : e_[b].data();
        const double* coef = ce_[c].data();
        const double ch = dt_ / scene_->dx;
#pragma omp parallel for schedule(static)
        for (int k = rk.lo; k <= rk.hi; ++k)
            for (int j = rj.lo; j <= rj.hi; ++j) {
                const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(shape.index(0, j, k));
                for (int i = ri.lo; i <= ri.hi; ++i) {
                    const std::ptrdiff_t n = row + i;
                    if constexpr (Electric)
                        f[n] += coef[n] * ((fb[n] - fb[n - sa]) - (fa[n] - fa[n - sb]));
                    else
                        f[n] -= ch * ((fb[n + sa] - fb[n]) - (fa[n + sb] - fa[n]));
                }
            }
    }

    template <bool Electric>
    void apply_pml_block(PmlBlock& blk) {
        const auto& shape = scene_->shape;
        const std::ptrdiff_t sd = shape.stride[blk.axis];
        double* f = Electric ? e_[blk.component].data() : h_[blk.component].data();
        const double* g = Electric ? h_[blk.source].data() : e_[blk.source].data();
        const double* coef = ce_[blk.component].data();
        const double ch = dt_ / scene_->dx;
        const auto& r = blk.range;
        const int nx = r[0].size(), ny = r[1].size();
        const int ax = blk.axis;
        const double sign = Electric ? blk.sign : -blk.sign;
#pragma omp parallel for schedule(static)
        for (int k = r[2].lo; k <= r[2].hi; ++k)
            for (int j = r[1].lo; j <= r[1].hi; ++j)
                for (int i = r[0].lo; i <= r[0].hi; ++i) {
                    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(shape.index(i, j, k));
                    const std::size_t p = static_cast<std::size_t>((k - r[2].lo) * ny + (j - r[1].lo)) *
                                              static_cast<std::size_t>(nx) +
                                          static_cast<std::size_t>(i - r[0].lo);
                    const int l = (ax == 0 ? i : (ax == 1 ? j : k)) - r[ax].lo;
                    const double diff = Electric ? g[n] - g[n - sd] : g[n + sd] - g[n];
                    double& psi = blk.psi[p];
                    psi = blk.b[l] * psi + blk.c[l] * diff;
                    f[n] += sign * (Electric ? coef[n] : ch) * psi;
                }
    }

    void build_pml_blocks() {
        const auto& spec = scene_->spec;
        for (int electric = 0; electric < 2; ++electric)
            for (int c = 0; c < 3; ++c)
                for (int t = 1; t <= 2; ++t) {
                    const int axis = (c + t) % 3;
                    if (!spec.has_pml(axis)) continue;
                    const int other = (c + 3 - t) % 3;  // the third axis
                    const FieldComponent fc = electric ? e_component(c) : h_component(c);
                    const IndexRange full = scene_->update_range(fc, axis);
                    // E components sit on nodes along a transverse axis, H on mid-cells.
                    const auto& prof = scene_->pml[axis];
                    const auto& sigma = electric ? prof.sigma_node : prof.sigma_mid;
                    const auto& alpha = electric ? prof.alpha_node : prof.alpha_mid;
                    const double mid = 0.5 * (spec.lower[axis] + spec.upper[axis]);
                    for (int side = 0; side < 2; ++side) {
                        IndexRange sub{0, -1};
                        for (int i = full.lo; i <= full.hi; ++i) {
                            const double coord = scene_->position(fc, {i, i, i})[axis];
                            const bool on_side = side == 0 ? coord < mid : coord >= mid;
                            if (!on_side || sigma[static_cast<std::size_t>(i)] <= 0.0) continue;
                            if (sub.size() == 0) sub = {i, i};
                            else sub.hi = i;
                        }
                        if (sub.size() == 0) continue;
                        PmlBlock blk;
                        blk.component = c;
                        blk.axis = axis;
                        blk.source = other;
                        blk.sign = t == 1 ? 1.0 : -1.0;
                        for (int a = 0; a < 3; ++a) blk.range[a] = scene_->update_range(fc, a);
                        blk.range[axis] = sub;
                        for (int i = sub.lo; i <= sub.hi; ++i) {
                            const double s = sigma[static_cast<std::size_t>(i)];
                            const double al = alpha[static_cast<std::size_t>(i)];
                            const double bb = std::exp(-(s + al) * dt_);
                            blk.b.push_back(bb);
                            blk.c.push_back(s / (s + al) * (bb - 1.0));
                        }
                        blk.psi.assign(static_cast<std::size_t>(blk.range[0].size()) * blk.range[1].size() *
                                           blk.range[2].size(),
                                       0.0);
                        (electric ? e_blocks_ : h_blocks_).push_back(std::move(blk));
                    }
                }
    }

    /// Ghost layer below index 0 of tangential H, read by the E update.
    void fill_h_ghosts() {
        const auto& shape = scene_->shape;
        for (int d = 0; d < 3; ++d) {
            const Boundary lo = scene_->spec.low[d];
            if (lo != Boundary::even_mirror && lo != Boundary::periodic) continue;
            const int u = (d + 1) % 3, v = (d + 2) % 3;
            const double sgn = lo == Boundary::even_mirror ? -1.0 : 1.0;
            const int src = lo == Boundary::even_mirror ? 0 : shape.n[d] - 1;
            for (int t : {u, v}) {
                auto& f = h_[t];
                for (int q = -1; q <= shape.n[v]; ++q)
                    for (int p = -1; p <= shape.n[u]; ++p) {
                        std::array<int, 3> ghost{}, from{};
                        ghost[d] = -1;
                        from[d] = src;
                        ghost[u] = from[u] = p;
                        ghost[v] = from[v] = q;
                        f[shape.index(ghost)] = sgn * f[shape.index(from)];
                    }
            }
        }
    }

    void copy_periodic_e() {
        const auto& shape = scene_->shape;
        for (int d = 0; d < 3; ++d) {
            if (scene_->spec.low[d] != Boundary::periodic) continue;
            const int u = (d + 1) % 3, v = (d + 2) % 3;
            for (int t : {u, v}) {
                auto& f = e_[t];
                for (int q = -1; q <= shape.n[v]; ++q)
                    for (int p = -1; p <= shape.n[u]; ++p) {
                        std::array<int, 3> top{}, bottom{};
                        top[d] = shape.n[d];
                        bottom[d] = 0;
                        top[u] = bottom[u] = p;
                        top[v] = bottom[v] = q;
                        f[shape.index(top)] = f[shape.index(bottom)];
                    }
            }
        }
    }

    void check_stability() const {
        for (const auto* arr : {&e_[0], &e_[1], &e_[2], &h_[0], &h_[1], &h_[2]})
            for (std::size_t i = 0; i < arr->size(); ++i) {
                const double v = (*arr)[i];
                if (!std::isfinite(v) || std::abs(v) > kBlowUp)
                    throw InstabilityError(steps_, i, std::isfinite(v) ? std::abs(v) : std::numeric_limits<double>::infinity());
            }
    }

    std::shared_ptr<const DiscretizedScene> scene_;
    double dt_;
    long steps_ = 0;
    std::array<std::vector<double>, 3> e_, h_, ce_;
    std::vector<PmlBlock> e_blocks_, h_blocks_;
    std::vector<BoundSource> sources_;
};

struct RunResult {
    ProbeSeries probe;
    bool converged = false;
    long steps = 0;
};

/// Settings for run_until_decayed.
struct DecayCriterion {
    double decay_db = 50.0;   ///< drop of probe |E|^2 below its post-source peak
    long max_steps = 200000;
    double window = 0.0;      ///< check interval in time units; 0 = 10 periods of the source
};

/// Add `source`, then step until the probe's squared field over the latest
/// check window has fallen `decay_db` below its maximum since the source
/// switched off, or until `max_steps`. `on_step(sim)` runs after every step.
template <class OnStep>
RunResult run_until_decayed(Simulation& sim, const DipoleSource& source, Vec3 probe_position,
                            const DecayCriterion& crit, OnStep&& on_step) {
    if (!(crit.decay_db > 0.0)) throw ConfigError("decay threshold must be positive");
    if (crit.max_steps < 1) throw ConfigError("max_steps must be positive");
    sim.add_source(source);
    const FieldComponent comp = e_component(index(source.polarization));

    RunResult out;
    out.probe.position = probe_position;
    out.probe.component = comp;
    out.probe.dt = sim.dt();
    out.probe.t0 = sim.time() + sim.dt();

    const double window = crit.window > 0.0 ? crit.window : 10.0 / source.center_frequency;
    const long window_steps = std::max(1L, static_cast<long>(std::ceil(window / sim.dt())));
    const double ratio = std::pow(10.0, -crit.decay_db / 10.0);
    const double t_off = sim.time() + source.end_time();

    double peak = 0.0, window_max = 0.0;
    long in_window = 0;
    for (long n = 0; n < crit.max_steps; ++n) {
        sim.step();
        on_step(static_cast<const Simulation&>(sim));
        const double v = sim.sample(comp, probe_position);
        out.probe.values.push_back(v);
        if (sim.time() <= t_off) continue;
        peak = std::max(peak, v * v);
        window_max = std::max(window_max, v * v);
        if (++in_window == window_steps) {
            if (window_max <= peak * ratio) {
                out.converged = true;
                break;
            }
            window_max = 0.0;
            in_window = 0;
        }
    }
    out.steps = static_cast<long>(out.probe.values.size());
    return out;
}

inline RunResult run_until_decayed(Simulation& sim, const DipoleSource& source, Vec3 probe_position,
                                   const DecayCriterion& crit) {
    return run_until_decayed(sim, source, probe_position, crit, [](const Simulation&) {});
}

}  // namespace phc
