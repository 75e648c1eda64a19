#pragma once

// Frequency-domain flux monitors, energy bookkeeping and field snapshots.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "phc/errors.hpp"
#include "phc/fdtd.hpp"
#include "phc/grid.hpp"
#include "phc/spectrum.hpp"

namespace phc {

/// Axis-aligned rectangle on which flux is collected.
struct FluxRegion {
    Axis normal = Axis::z;
    double position = 0.0;                ///< coordinate of the plane along `normal`
    std::array<double, 2> center{0, 0};   ///< along the two tangential axes (normal+1, normal+2)
    std::array<double, 2> size{1, 1};
    double weight = 1.0;                  ///< +1 counts flow along +normal

    static FluxRegion square_z(double z, double side) { return {Axis::z, z, {0.0, 0.0}, {side, side}, 1.0}; }
};

/// Running DFT of the tangential fields on a FluxRegion.
///
/// Samples sit at the in-plane cell centres of the grid plane nearest to the
/// region; each carries the fraction of its cell area inside the rectangle.
/// E is stamped with its own time n dt and H with (n - 1/2) dt.
class FluxMonitor {
public:
    FluxMonitor(const DiscretizedScene& scene, const FluxRegion& region, std::vector<double> frequencies)
        : region_(region), freqs_(std::move(frequencies)) {
        if (freqs_.empty()) throw ConfigError("flux monitor needs at least one frequency");
        for (std::size_t i = 1; i < freqs_.size(); ++i)
            if (!(freqs_[i] > freqs_[i - 1])) throw ConfigError("monitor frequencies must be strictly increasing");
        const int n = index(region.normal), u = (n + 1) % 3, v = (n + 2) % 3;
        const auto& spec = scene.spec;
        const double dx = scene.dx;
        if (scene.in_pml(n, region.position)) throw ConfigError("flux plane lies inside the PML");
        const int kn = static_cast<int>(std::lround((region.position - spec.lower[n]) / dx));
        if (kn < 1 || kn >= scene.shape.n[n]) throw ConfigError("flux plane lies outside the grid");
        plane_ = spec.lower[n] + kn * dx;

        const auto& sh = scene.shape;
        su_ = sh.stride[u];
        sv_ = sh.stride[v];
        sn_ = sh.stride[n];
        area_ = dx * dx;
        multiplicity_ = 1.0;
        for (int t : {u, v})
            if (is_mirror(spec.low[t])) multiplicity_ *= 2.0;

        for (int q = 0; q < sh.n[v]; ++q)
            for (int p = 0; p < sh.n[u]; ++p) {
                const double cu = spec.lower[u] + p * dx, cv = spec.lower[v] + q * dx;
                const double ou = overlap(cu, cu + dx, region.center[0] - region.size[0] / 2,
                                          region.center[0] + region.size[0] / 2);
                const double ov = overlap(cv, cv + dx, region.center[1] - region.size[1] / 2,
                                          region.center[1] + region.size[1] / 2);
                const double w = ou * ov / (dx * dx);
                if (w <= 1e-9) continue;  // ignore round-off slivers
                if (scene.in_pml(u, cu + dx / 2) || scene.in_pml(v, cv + dx / 2))
                    throw ConfigError("flux region extends into the PML");
                std::array<int, 3> ijk{};
                ijk[n] = kn;
                ijk[u] = p;
                ijk[v] = q;
                base_.push_back(sh.index(ijk));
                weight_.push_back(w);
            }
        if (base_.empty()) throw ConfigError("flux region covers no grid cells");
        comp_u_ = u;
        comp_v_ = v;
        const std::size_t total = freqs_.size() * base_.size();
        for (auto& a : re_) a.assign(total, 0.0);
        for (auto& a : im_) a.assign(total, 0.0);
        scratch_.resize(base_.size());
    }

    const std::vector<double>& frequencies() const { return freqs_; }
    const FluxRegion& region() const { return region_; }
    double plane_position() const { return plane_; }
    std::size_t sample_count() const { return base_.size(); }

    /// Add the current fields of `sim` to the running transforms. Call once
    /// per step, after the step.
    void accumulate(const Simulation& sim) {
        const double dt = sim.dt();
        const double t_e = sim.time();
        const double t_h = t_e - 0.5 * dt;
        const auto eu = sim.field(e_component(comp_u_));
        const auto ev = sim.field(e_component(comp_v_));
        const auto hu = sim.field(h_component(comp_u_));
        const auto hv = sim.field(h_component(comp_v_));
        const std::size_t np = base_.size();
        // 0: E_u, 1: E_v, 2: H_u, 3: H_v, averaged to the cell centre.
        for (std::size_t p = 0; p < np; ++p) {
            const std::ptrdiff_t b = static_cast<std::ptrdiff_t>(base_[p]);
            scratch_[p][0] = 0.5 * (eu[b] + eu[b + sv_]);
            scratch_[p][1] = 0.5 * (ev[b] + ev[b + su_]);
            scratch_[p][2] = 0.25 * (hu[b] + hu[b + su_] + hu[b - sn_] + hu[b + su_ - sn_]);
            scratch_[p][3] = 0.25 * (hv[b] + hv[b + sv_] + hv[b - sn_] + hv[b + sv_ - sn_]);
        }
        for (std::size_t f = 0; f < freqs_.size(); ++f) {
            const double w = 2.0 * std::numbers::pi * freqs_[f];
            const double ce = std::cos(w * t_e) * dt, se = std::sin(w * t_e) * dt;
            const double chh = std::cos(w * t_h) * dt, shh = std::sin(w * t_h) * dt;
            const std::size_t off = f * np;
            double* r0 = re_[0].data() + off; double* i0 = im_[0].data() + off;
            double* r1 = re_[1].data() + off; double* i1 = im_[1].data() + off;
            double* r2 = re_[2].data() + off; double* i2 = im_[2].data() + off;
            double* r3 = re_[3].data() + off; double* i3 = im_[3].data() + off;
            for (std::size_t p = 0; p < np; ++p) {
                const auto& s = scratch_[p];
                r0[p] += ce * s[0]; i0[p] += se * s[0];
                r1[p] += ce * s[1]; i1[p] += se * s[1];
                r2[p] += chh * s[2]; i2[p] += shh * s[2];
                r3[p] += chh * s[3]; i3[p] += shh * s[3];
            }
        }
    }

    /// Transform of tangential component `which` (0: E_u, 1: E_v, 2: H_u, 3: H_v)
    /// at frequency index f and sample p.
    std::complex<double> transform(int which, std::size_t f, std::size_t p) const {
        const std::size_t i = f * base_.size() + p;
        return {re_[which][i], im_[which][i]};
    }

    /// Multiply every accumulated transform by `s`.
    void scale(double s) {
        for (auto& a : re_) for (double& x : a) x *= s;
        for (auto& a : im_) for (double& x : a) x *= s;
    }

    /// Net time-averaged Poynting flux 1/2 Re(E x H*) . n through the region.
    Spectrum flux_spectrum() const {
        Spectrum s;
        s.frequency = freqs_;
        s.value.assign(freqs_.size(), 0.0);
        const std::size_t np = base_.size();
        for (std::size_t f = 0; f < freqs_.size(); ++f) {
            double sum = 0.0;
            for (std::size_t p = 0; p < np; ++p) {
                const std::complex<double> eu = transform(0, f, p), ev = transform(1, f, p);
                const std::complex<double> hu = transform(2, f, p), hv = transform(3, f, p);
                sum += weight_[p] * std::real(eu * std::conj(hv) - ev * std::conj(hu));
            }
            s.value[f] = 0.5 * sum * area_ * multiplicity_ * region_.weight;
        }
        return s;
    }

private:
    static double overlap(double a0, double a1, double b0, double b1) {
        return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
    }

    FluxRegion region_;
    std::vector<double> freqs_;
    double plane_ = 0.0;
    double area_ = 0.0;
    double multiplicity_ = 1.0;
    int comp_u_ = 0, comp_v_ = 1;
    std::ptrdiff_t su_ = 0, sv_ = 0, sn_ = 0;
    std::vector<std::size_t> base_;
    std::vector<double> weight_;
    std::array<std::vector<double>, 4> re_, im_;
    std::vector<std::array<double, 4>> scratch_;
};

/// Electromagnetic energy 1/2 sum(eps |E|^2 + |H|^2) dV over the non-PML
/// interior, including mirror images of a symmetry-reduced box.
///
/// |H|^2 is evaluated as H(t - dt/2) . H(t + dt/2), the latter from one
/// curl step of the current E, which makes the sum an exact invariant of the
/// lossless leapfrog scheme.
inline double total_energy(const Simulation& sim) {
    const auto& sc = sim.scene();
    const auto& sh = sc.shape;
    const double dv = sc.dx * sc.dx * sc.dx;
    const double ch = sim.dt() / sc.dx;
    double total = 0.0;
    for (int f = 0; f < 6; ++f) {
        const FieldComponent c = static_cast<FieldComponent>(f);
        const auto data = sim.field(c);
        const int a = (axis_of(c) + 1) % 3, b = (axis_of(c) + 2) % 3;
        const auto ea = sim.field(e_component(a)), eb = sim.field(e_component(b));
        const std::ptrdiff_t sa = sh.stride[a], sb = sh.stride[b];
        std::array<std::vector<double>, 3> w;  // per-axis sample weights
        for (int a = 0; a < 3; ++a) {
            const IndexRange r = sc.stored_range(c, a);
            w[a].assign(static_cast<std::size_t>(r.size()), 0.0);
            const bool periodic = sc.spec.low[a] == Boundary::periodic;
            for (int i = r.lo; i <= r.hi; ++i) {
                const double x = sc.spec.lower[a] + (i + stagger(c, a)) * sc.dx;
                if (sc.in_pml(a, x)) continue;
                double wt = 1.0;
                if (stagger(c, a) == 0.0 && i == 0 && is_mirror(sc.spec.low[a])) wt = 0.5;
                if (periodic && stagger(c, a) == 0.0 && i == sh.n[a]) wt = 0.0;  // duplicate of i = 0
                w[a][static_cast<std::size_t>(i - r.lo)] = wt;
            }
        }
        const IndexRange ri = sc.stored_range(c, 0), rj = sc.stored_range(c, 1), rk = sc.stored_range(c, 2);
        double part = 0.0;
        for (int k = rk.lo; k <= rk.hi; ++k) {
            const double wk = w[2][static_cast<std::size_t>(k - rk.lo)];
            if (wk == 0.0) continue;
            for (int j = rj.lo; j <= rj.hi; ++j) {
                const double wjk = wk * w[1][static_cast<std::size_t>(j - rj.lo)];
                if (wjk == 0.0) continue;
                for (int i = ri.lo; i <= ri.hi; ++i) {
                    const std::size_t n = sh.index(i, j, k);
                    const double wt = wjk * w[0][static_cast<std::size_t>(i - ri.lo)];
                    if (is_electric(c)) {
                        part += wt * sc.eps[axis_of(c)][n] * data[n] * data[n];
                    } else {
                        const auto m = static_cast<std::ptrdiff_t>(n);
                        const double next = data[n] - ch * ((eb[m + sa] - eb[m]) - (ea[m + sb] - ea[m]));
                        part += wt * data[n] * next;
                    }
                }
            }
        }
        total += part;
    }
    return 0.5 * total * dv * sc.mirror_multiplicity();
}

/// Raw samples of one component on a grid plane.
struct Snapshot {
    FieldComponent component = FieldComponent::ex;
    std::uint32_t rows = 0;  ///< along the first in-plane axis
    std::uint32_t cols = 0;  ///< along the second in-plane axis
    std::vector<double> data;  ///< row-major

    double at(std::uint32_t r, std::uint32_t c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

/// In-plane axes of a plane normal to `normal`, in increasing axis order.
inline std::array<int, 2> in_plane_axes(Axis normal) {
    switch (normal) {
        case Axis::x: return {1, 2};
        case Axis::y: return {0, 2};
        default: return {0, 1};
    }
}

/// Slice of `component` on the grid plane of that component nearest to
/// `offset` along `normal`. Rows follow the first in-plane axis.
inline Snapshot snapshot(const Simulation& sim, FieldComponent component, Axis normal, double offset) {
    const auto& sc = sim.scene();
    const int n = index(normal);
    const auto [u, v] = in_plane_axes(normal);
    const IndexRange rn = sc.stored_range(component, n);
    // Ties resolve upward so a plane midway between samples picks the same one
    // in full and mirror-reduced boxes.
    const int kn = static_cast<int>(std::floor((offset - sc.spec.lower[n]) / sc.dx - stagger(component, n) + 0.5 + 1e-9));
    if (kn < rn.lo || kn > rn.hi) throw ConfigError("snapshot plane lies outside the grid");
    const IndexRange ru = sc.stored_range(component, u), rv = sc.stored_range(component, v);
    Snapshot s;
    s.component = component;
    s.rows = static_cast<std::uint32_t>(ru.size());
    s.cols = static_cast<std::uint32_t>(rv.size());
    s.data.resize(static_cast<std::size_t>(s.rows) * s.cols);
    const auto f = sim.field(component);
    for (int p = ru.lo; p <= ru.hi; ++p)
        for (int q = rv.lo; q <= rv.hi; ++q) {
            std::array<int, 3> ijk{};
            ijk[n] = kn;
            ijk[u] = p;
            ijk[v] = q;
            s.data[static_cast<std::size_t>(p - ru.lo) * s.cols + static_cast<std::size_t>(q - rv.lo)] =
                f[sc.shape.index(ijk)];
        }
    return s;
}

/// Expand a snapshot of a symmetry-reduced box to the full symmetric plane.
/// Rows/columns along mirrored axes are reflected about the origin.
inline Snapshot unfold(const Snapshot& s, const DiscretizedScene& sc, Axis normal) {
    const auto axes = in_plane_axes(normal);
    Snapshot cur = s;
    for (int dir = 0; dir < 2; ++dir) {
        const int a = axes[dir];
        const Boundary b = sc.spec.low[a];
        if (!is_mirror(b)) continue;
        const double parity = mirror_parity(s.component, a, b);
        const bool node = stagger(s.component, a) == 0.0;  // sample on the plane itself
        const std::uint32_t n = dir == 0 ? cur.rows : cur.cols;
        const std::uint32_t mirrored = node ? n - 1 : n;
        Snapshot out = cur;
        if (dir == 0) out.rows = n + mirrored; else out.cols = n + mirrored;
        out.data.assign(static_cast<std::size_t>(out.rows) * out.cols, 0.0);
        for (std::uint32_t r = 0; r < out.rows; ++r)
            for (std::uint32_t c = 0; c < out.cols; ++c) {
                const std::uint32_t t = dir == 0 ? r : c;
                double value;
                std::uint32_t src;
                double sign = 1.0;
                if (t >= mirrored) src = t - mirrored;
                else {
                    src = node ? mirrored - t : mirrored - 1 - t;
                    sign = parity;
                }
                value = dir == 0 ? cur.at(src, c) : cur.at(r, src);
                out.data[static_cast<std::size_t>(r) * out.cols + c] = sign * value;
            }
        cur = std::move(out);
    }
    return cur;
}

namespace detail {

inline void put_le(std::ostream& os, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_le(std::istream& is, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        const int c = is.get();
        if (c == std::char_traits<char>::eof()) throw ConfigError("truncated snapshot file");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

}  // namespace detail

inline constexpr std::uint16_t kSnapshotVersion = 1;

/// "FSNP", u16 version, u8 component, u32 rows, u32 cols, rows*cols f64;
/// all little-endian.
inline void write_snapshot(const Snapshot& s, std::ostream& os) {
    os.write("FSNP", 4);
    detail::put_le(os, kSnapshotVersion, 2);
    detail::put_le(os, static_cast<std::uint64_t>(static_cast<int>(s.component)), 1);
    detail::put_le(os, s.rows, 4);
    detail::put_le(os, s.cols, 4);
    for (double v : s.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        detail::put_le(os, bits, 8);
    }
}

inline void write_snapshot(const Snapshot& s, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path);
    write_snapshot(s, os);
}

inline Snapshot read_snapshot(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "FSNP", 4) != 0) throw ConfigError("not a snapshot file");
    if (detail::get_le(is, 2) != kSnapshotVersion) throw ConfigError("unsupported snapshot version");
    Snapshot s;
    const auto comp = detail::get_le(is, 1);
    if (comp > 5) throw ConfigError("bad snapshot component id");
    s.component = static_cast<FieldComponent>(comp);
    s.rows = static_cast<std::uint32_t>(detail::get_le(is, 4));
    s.cols = static_cast<std::uint32_t>(detail::get_le(is, 4));
    s.data.resize(static_cast<std::size_t>(s.rows) * s.cols);
    for (double& v : s.data) {
        const std::uint64_t bits = detail::get_le(is, 8);
        std::memcpy(&v, &bits, sizeof v);
    }
    return s;
}

inline Snapshot read_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + path);
    return read_snapshot(is);
}

}  // namespace phc
