#pragma once

// 2D plane-wave expansion for infinite rod lattices.
//
// Wavevectors are in units of 2 pi / a and frequencies in c / a, so a free
// photon has f = |k + G| / n. The inverse-permittivity ("Ho") method is used:
// the Toeplitz matrix eps(G - G') is inverted and the resulting eta(G, G')
// enters the kernels
//
//   TM (E along the rods):  |k+G| |k+G'| eta(G, G')
//   TE (H along the rods):  (k+G).(k+G') eta(G, G')
//
// whose eigenvalues are f^2.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "phc/errors.hpp"
#include "phc/geometry.hpp"
#include "phc/vec.hpp"

namespace phc {

enum class Polarization { tm, te };

inline std::string to_string(Polarization p) { return p == Polarization::tm ? "TM" : "TE"; }

/// Reciprocal primitive vectors (units of 2 pi / a) of a lattice with
/// a1 = (1, 0) and a2 = second_basis(type).
inline std::pair<Vec2, Vec2> reciprocal_basis(LatticeType t) {
    if (t == LatticeType::square) return {{1.0, 0.0}, {0.0, 1.0}};
    return {{1.0, -1.0 / std::numbers::sqrt3}, {0.0, 2.0 / std::numbers::sqrt3}};
}

/// Fraction of the unit cell covered by one rod.
inline double filling_fraction(LatticeType t, double radius) {
    const double cell = t == LatticeType::triangular ? std::numbers::sqrt3 / 2.0 : 1.0;
    return std::numbers::pi * radius * radius / cell;
}

/// Fourier coefficient of eps(r) for a rod of radius r centred in each cell.
/// `g` is in units of 2 pi / a.
inline std::complex<double> epsilon_fourier(LatticeType t, double radius, double eps_rod, double eps_bg, Vec2 g) {
    const double f = filling_fraction(t, radius);
    const double gn = 2.0 * std::numbers::pi * norm(g);
    if (gn < 1e-12) return f * eps_rod + (1.0 - f) * eps_bg;
    const double x = gn * radius;
    return (eps_rod - eps_bg) * 2.0 * f * std::cyl_bessel_j(1.0, x) / x;
}

inline std::complex<double> epsilon_fourier(const RodLattice& lat, double eps_bg, Vec2 g) {
    return epsilon_fourier(lat.type, lat.rod_radius, lat.rod_material.permittivity(), eps_bg, g);
}

struct KPoint {
    std::string label;
    Vec2 k;
};

/// Piecewise-linear path through labelled high-symmetry points.
struct KPath {
    std::vector<KPoint> corners;
    int samples_per_segment = 16;

    /// Sampled wavevectors, corners included once each.
    std::vector<Vec2> points() const {
        if (corners.size() < 2) throw ConfigError("k-path needs at least two points");
        if (samples_per_segment < 1) throw ConfigError("k-path needs at least one sample per segment");
        std::vector<Vec2> out;
        for (std::size_t s = 0; s + 1 < corners.size(); ++s) {
            const Vec2 a = corners[s].k, b = corners[s + 1].k;
            if (a == b) throw ConfigError("consecutive k-path points must differ");
            for (int i = 0; i < samples_per_segment; ++i) {
                const double t = static_cast<double>(i) / samples_per_segment;
                out.push_back(a + t * (b - a));
            }
        }
        out.push_back(corners.back().k);
        return out;
    }

    /// Gamma-M-K-Gamma for triangular lattices, Gamma-X-M-Gamma for square.
    static KPath irreducible(LatticeType t, int samples = 16) {
        if (t == LatticeType::triangular)
            return {{{"Gamma", {0, 0}}, {"M", {0, 1.0 / std::numbers::sqrt3}}, {"K", {1.0 / 3.0, 1.0 / std::numbers::sqrt3}}, {"Gamma", {0, 0}}},
                    samples};
        return {{{"Gamma", {0, 0}}, {"X", {0.5, 0}}, {"M", {0.5, 0.5}}, {"Gamma", {0, 0}}}, samples};
    }
};

struct BandStructure {
    Polarization polarization = Polarization::tm;
    std::vector<Vec2> k;                        ///< units of 2 pi / a
    std::vector<std::vector<double>> frequency; ///< [k][band], ascending, c / a
    std::size_t plane_waves = 0;

    std::size_t bands() const { return frequency.empty() ? 0 : frequency.front().size(); }
};

/// Reciprocal vectors ordered by length; the first `count` are kept and the
/// last shell is completed so the set keeps the lattice point symmetry.
inline std::vector<Vec2> reciprocal_vectors(LatticeType t, std::size_t count) {
    if (count < 1) throw ConfigError("need at least one plane wave");
    const auto [b1, b2] = reciprocal_basis(t);
    const double bmin = std::min(norm(b1), norm(b2));
    // Generous radius: the count in a disc scales with its area.
    const double area = std::abs(b1.x * b2.y - b1.y * b2.x);
    const double radius = std::sqrt(2.0 * static_cast<double>(count) * area / std::numbers::pi) + 2.0 * bmin;
    const int span = static_cast<int>(std::ceil(radius / (bmin * 0.5))) + 2;
    std::vector<Vec2> g;
    for (int m = -span; m <= span; ++m)
        for (int n = -span; n <= span; ++n) {
            const Vec2 v = static_cast<double>(m) * b1 + static_cast<double>(n) * b2;
            if (norm(v) <= radius) g.push_back(v);
        }
    std::stable_sort(g.begin(), g.end(), [](Vec2 a, Vec2 b) {
        const double na = norm(a), nb = norm(b);
        if (std::abs(na - nb) > 1e-9) return na < nb;
        return std::atan2(a.y, a.x) < std::atan2(b.y, b.x);
    });
    std::size_t keep = std::min(count, g.size());
    while (keep < g.size() && std::abs(norm(g[keep]) - norm(g[keep - 1])) < 1e-9) ++keep;
    g.resize(keep);
    return g;
}

namespace detail {

/// eta = inverse of the eps(G - G') Toeplitz matrix.
inline Eigen::MatrixXd inverse_epsilon_matrix(const RodLattice& lat, double eps_bg, const std::vector<Vec2>& g) {
    const Eigen::Index n = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd eps(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            eps(i, j) = epsilon_fourier(lat, eps_bg, g[static_cast<std::size_t>(i)] - g[static_cast<std::size_t>(j)]).real();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(eps);
    const auto& d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !(d.cwiseAbs().minCoeff() > 1e-13 * dmax))
        throw NumericalError("permittivity Fourier matrix is numerically singular");
    return ldlt.solve(Eigen::MatrixXd::Identity(n, n));
}

}  // namespace detail

/// Symmetric kernel whose eigenvalues are the squared frequencies at `k`.
inline Eigen::MatrixXd pwe_kernel(const Eigen::MatrixXd& eta, const std::vector<Vec2>& g, Vec2 k, Polarization pol) {
    const Eigen::Index n = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec2 ki = k + g[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j) {
            const Vec2 kj = k + g[static_cast<std::size_t>(j)];
            const double geo = pol == Polarization::tm ? norm(ki) * norm(kj) : dot(ki, kj);
            m(i, j) = geo * eta(i, j);
        }
    }
    return m;
}

struct PweOptions {
    std::size_t plane_waves = 271;
    std::size_t bands = 8;
    double eps_background = 1.0;
};

/// Band frequencies along the sampled wavevectors.
inline BandStructure band_structure(const RodLattice& lat, const std::vector<Vec2>& kpoints, Polarization pol,
                                    const PweOptions& opt = {}) {
    if (!(lat.rod_radius > 0.0 && lat.rod_radius < 0.5)) throw ConfigError("rod radius must lie in (0, 0.5)");
    const auto g = reciprocal_vectors(lat.type, opt.plane_waves);
    if (opt.bands < 1 || opt.bands > g.size()) throw ConfigError("band count must be between 1 and the plane-wave count");
    const Eigen::MatrixXd eta = detail::inverse_epsilon_matrix(lat, opt.eps_background, g);
    BandStructure bs;
    bs.polarization = pol;
    bs.k = kpoints;
    bs.plane_waves = g.size();
    bs.frequency.assign(kpoints.size(), {});
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(kpoints.size()); ++q) {
        const Eigen::MatrixXd m = pwe_kernel(eta, g, kpoints[static_cast<std::size_t>(q)], pol);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        std::vector<double> f(opt.bands);
        for (std::size_t b = 0; b < opt.bands; ++b)
            f[b] = std::sqrt(std::max(0.0, es.eigenvalues()(static_cast<Eigen::Index>(b))));
        bs.frequency[static_cast<std::size_t>(q)] = std::move(f);
    }
    return bs;
}

inline BandStructure band_structure(const RodLattice& lat, const KPath& path, Polarization pol, const PweOptions& opt = {}) {
    return band_structure(lat, path.points(), pol, opt);
}

struct GapReport {
    Polarization polarization = Polarization::tm;
    std::size_t below = 1;       ///< gap lies between bands `below` and `below + 1` (1-based)
    double f_lower = 0.0;        ///< max over k of band `below`
    double f_upper = 0.0;        ///< min over k of band `below + 1`
    bool exists = false;

    double width() const { return f_upper - f_lower; }
    double gap_midgap_ratio() const { return exists ? 2.0 * width() / (f_upper + f_lower) : 0.0; }
    /// Normalized wavelength edges (short, long) = (1/f_upper, 1/f_lower).
    double lambda_short() const { return 1.0 / f_upper; }
    double lambda_long() const { return 1.0 / f_lower; }
};

/// Gap between band `below` and the next one (1-based).
inline GapReport find_gap(const BandStructure& bands, std::size_t below) {
    if (below < 1 || below >= bands.bands()) throw ConfigError("gap band index out of range");
    GapReport r;
    r.polarization = bands.polarization;
    r.below = below;
    r.f_lower = 0.0;
    r.f_upper = std::numeric_limits<double>::infinity();
    for (const auto& f : bands.frequency) {
        r.f_lower = std::max(r.f_lower, f[below - 1]);
        r.f_upper = std::min(r.f_upper, f[below]);
    }
    r.exists = r.f_upper > r.f_lower;
    return r;
}

/// Every complete gap among the computed bands.
inline std::vector<GapReport> find_gaps(const BandStructure& bands) {
    std::vector<GapReport> out;
    for (std::size_t b = 1; b < bands.bands(); ++b) {
        GapReport r = find_gap(bands, b);
        if (r.exists) out.push_back(r);
    }
    return out;
}

}  // namespace phc
