#pragma once

// Resonance extraction from ringdown signals and extraction-ratio spectra.
//
// harmonic_inversion fits the signal to a sum of damped complex exponentials
//
//     x(t) = sum_k a_k exp((-kappa_k + 2 pi i f_k) t),   t = 0 at the first sample
//
// restricted to a frequency band. The band is isolated by mixing its centre
// to zero frequency and low-pass filtering with a windowed-sinc FIR, which
// leaves every exponential an exponential. The filtered signal is decimated
// and handed to a total-least-squares matrix pencil; amplitudes are solved by
// least squares and then referred back through the filter response.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "phc/errors.hpp"
#include "phc/spectrum.hpp"

namespace phc {

struct ResonanceMode {
    double frequency = 0.0;   ///< c/a
    double decay = 0.0;       ///< amplitude decay rate kappa, field ~ exp(-kappa t)
    double amplitude = 0.0;   ///< |a_k| of the complex exponential term
    double phase = 0.0;       ///< arg(a_k), radians
    double error = 0.0;       ///< relative disagreement between two pencil sizes

    /// pi f / kappa; +infinity for an undamped mode.
    double q() const;
};

/// Q = omega / (2 kappa) = pi f / kappa. Infinity when kappa <= 0.
inline double q_factor(const ResonanceMode& m) {
    if (!(m.decay > 0.0)) return std::numeric_limits<double>::infinity();
    return std::numbers::pi * m.frequency / m.decay;
}

inline double ResonanceMode::q() const { return q_factor(*this); }

/// Amplitude decay rate giving quality factor `q` at frequency `f`.
inline double decay_for_q(double f, double q) { return std::numbers::pi * f / q; }

struct HarminvOptions {
    double f_min = 0.5;
    double f_max = 1.0;
    std::size_t max_modes = 10;
    double singular_cutoff = 1e-8;    ///< relative singular-value truncation
    double amplitude_floor = 1e-3;    ///< relative to the strongest in-band mode
    double max_error = 1e-2;          ///< reject modes whose pencil estimates disagree more
    double growth_tolerance = 1e-6;   ///< kappa may be this negative before a mode counts as growing
    std::size_t max_samples = 1200;   ///< cap on the decimated series length
};

struct HarminvResult {
    std::vector<ResonanceMode> modes;  ///< sorted by amplitude, strongest first
    bool rank_deficient = false;       ///< fewer genuine modes than max_modes
    std::size_t model_order = 0;
    std::size_t decimation = 1;
};

namespace detail {

using cplx = std::complex<double>;

/// Matrix-pencil poles of a uniformly sampled sequence.
inline std::vector<cplx> pencil_poles(const Eigen::VectorXcd& x, std::size_t pencil, double cutoff,
                                      std::size_t max_order) {
    const Eigen::Index n = x.size();
    const Eigen::Index p = static_cast<Eigen::Index>(pencil);
    const Eigen::Index rows = n - p;
    Eigen::MatrixXcd y(rows, p + 1);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c <= p; ++c) y(r, c) = x(r + c);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(y, Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return {};
    Eigen::Index m = 0;
    while (m < s.size() && s(m) > cutoff * s(0)) ++m;
    m = std::min<Eigen::Index>({m, p, static_cast<Eigen::Index>(max_order)});
    if (m == 0) return {};
    const Eigen::MatrixXcd v = svd.matrixV().leftCols(m);
    const Eigen::MatrixXcd v1h = v.topRows(p).adjoint();     // m x p
    const Eigen::MatrixXcd v2h = v.bottomRows(p).adjoint();  // m x p
    // v2h = T v1h with T similar to diag(z); T = v2h pinv(v1h).
    const Eigen::MatrixXcd t = v1h.transpose().colPivHouseholderQr().solve(v2h.transpose()).transpose();
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(t, false);
    std::vector<cplx> z(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    return z;
}

/// Least-squares amplitudes c_k with x_m ~ sum_k c_k z_k^m.
inline Eigen::VectorXcd fit_amplitudes(const Eigen::VectorXcd& x, const std::vector<cplx>& z) {
    const Eigen::Index n = x.size(), m = static_cast<Eigen::Index>(z.size());
    Eigen::MatrixXcd vand(n, m);
    for (Eigen::Index k = 0; k < m; ++k) {
        cplx p = 1.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            vand(r, k) = p;
            p *= z[static_cast<std::size_t>(k)];
        }
    }
    return vand.colPivHouseholderQr().solve(x);
}

/// Blackman-Harris windowed-sinc low-pass taps (unit DC gain).
inline std::vector<double> lowpass_taps(std::size_t length, double cutoff, double dt) {
    std::vector<double> h(length);
    const double mid = 0.5 * static_cast<double>(length - 1);
    double sum = 0.0;
    for (std::size_t l = 0; l < length; ++l) {
        const double x = static_cast<double>(l) - mid;
        const double arg = 2.0 * cutoff * dt * x;
        const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
        const double ph = 2.0 * std::numbers::pi * static_cast<double>(l) / static_cast<double>(length - 1);
        const double w = 0.35875 - 0.48829 * std::cos(ph) + 0.14128 * std::cos(2 * ph) - 0.01168 * std::cos(3 * ph);
        h[l] = w * sinc;
        sum += h[l];
    }
    for (double& v : h) v /= sum;
    return h;
}

}  // namespace detail

/// Fit the in-band damped exponentials of `samples` (spacing dt). Real input
/// is treated as a complex sequence with zero imaginary part.
inline HarminvResult harmonic_inversion(std::span<const std::complex<double>> samples, double dt,
                                        const HarminvOptions& opt) {
    using detail::cplx;
    const std::size_t n = samples.size();
    if (n < 200) throw ConfigError("harmonic inversion needs at least 200 samples");
    if (!(dt > 0.0)) throw ConfigError("sample spacing must be positive");
    if (!(opt.f_min < opt.f_max)) throw ConfigError("f_min must be below f_max");
    if (opt.max_modes < 1) throw ConfigError("max_modes must be positive");
    const double nyquist = 0.5 / dt;
    if (std::abs(opt.f_min) >= nyquist || std::abs(opt.f_max) >= nyquist)
        throw ConfigError("frequency band exceeds the Nyquist frequency");

    const double fc = 0.5 * (opt.f_min + opt.f_max);
    const double half_band = 0.5 * (opt.f_max - opt.f_min);

    // Mix the band centre to zero.
    std::vector<cplx> mixed(n);
    for (std::size_t i = 0; i < n; ++i)
        mixed[i] = samples[i] * std::polar(1.0, -2.0 * std::numbers::pi * fc * static_cast<double>(i) * dt);

    // Decimate so the output rate is >= 4 x half-band: the filter passes
    // |f| <= 2 B and anything in the transition band aliases outside the band.
    std::size_t decim = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(1.0 / (dt * 4.0 * half_band))));
    std::vector<double> taps;
    std::size_t taps_len = 1;
    for (; decim > 1; decim /= 2) {
        taps_len = static_cast<std::size_t>(std::ceil(4.0 / (half_band * dt))) | 1U;
        if (n > taps_len && (n - taps_len) / decim >= 64) break;
    }
    if (decim > 1) taps = detail::lowpass_taps(taps_len, 2.0 * half_band, dt);
    else taps_len = 1;

    // Filtered, decimated sequence: y_m = sum_l h_l u_{first + m D - l}.
    const std::size_t first = taps_len - 1;
    std::size_t count = (n - 1 - first) / decim + 1;
    count = std::min(count, opt.max_samples);
    Eigen::VectorXcd y(static_cast<Eigen::Index>(count));
    for (std::size_t m = 0; m < count; ++m) {
        const std::size_t at = first + m * decim;
        if (taps.empty()) {
            y(static_cast<Eigen::Index>(m)) = mixed[at];
            continue;
        }
        cplx acc = 0.0;
        for (std::size_t l = 0; l < taps_len; ++l) acc += taps[l] * mixed[at - l];
        y(static_cast<Eigen::Index>(m)) = acc;
    }
    if (count < 3 * opt.max_modes + 3) throw ConfigError("series too short for the requested number of modes");

    const double step = dt * static_cast<double>(decim);
    const std::size_t max_order = count / 3;
    auto poles = detail::pencil_poles(y, count / 3, opt.singular_cutoff, max_order);
    auto check = detail::pencil_poles(y, count / 2, opt.singular_cutoff, max_order);

    HarminvResult result;
    result.model_order = poles.size();
    result.decimation = decim;
    if (poles.empty()) {
        result.rank_deficient = true;
        return result;
    }
    const Eigen::VectorXcd amp = detail::fit_amplitudes(y, poles);

    std::vector<ResonanceMode> modes;
    for (std::size_t k = 0; k < poles.size(); ++k) {
        const cplx z = poles[k];
        if (std::abs(z) == 0.0) continue;
        ResonanceMode mode;
        const cplx s = std::log(z) / step;  // -kappa + 2 pi i (f - fc)
        mode.frequency = fc + s.imag() / (2.0 * std::numbers::pi);
        mode.decay = -s.real();
        // Below the growth tolerance a decay rate is indistinguishable from zero.
        if (std::abs(mode.decay) <= opt.growth_tolerance) mode.decay = 0.0;
        // Per-sample pole of the undecimated mixed signal and the filter gain there.
        const cplx z1 = std::exp(s * dt);
        cplx gain = 1.0;
        if (!taps.empty()) {
            gain = 0.0;
            cplx zl = 1.0;
            const cplx zinv = 1.0 / z1;
            for (std::size_t l = 0; l < taps_len; ++l) {
                gain += taps[l] * zl;
                zl *= zinv;
            }
        }
        // y_0 = a z1^first H(z1); mixing is removed by construction of s.
        const cplx a = amp(static_cast<Eigen::Index>(k)) / (std::pow(z1, static_cast<double>(first)) * gain);
        // Amplitude and phase refer to the first input sample.
        mode.amplitude = std::abs(a);
        mode.phase = std::arg(a);
        double err = std::numeric_limits<double>::infinity();
        for (const cplx& c : check) err = std::min(err, std::abs(c - z) / std::abs(z));
        mode.error = err;
        modes.push_back(mode);
    }

    double strongest = 0.0;
    for (const auto& m : modes)
        if (m.frequency >= opt.f_min && m.frequency <= opt.f_max) strongest = std::max(strongest, m.amplitude);
    std::vector<ResonanceMode> kept;
    for (const auto& m : modes) {
        if (m.frequency < opt.f_min || m.frequency > opt.f_max) continue;
        if (m.decay < -opt.growth_tolerance) continue;
        if (m.amplitude < opt.amplitude_floor * strongest) continue;
        if (m.error > opt.max_error) continue;
        kept.push_back(m);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.amplitude > b.amplitude; });
    if (kept.size() > opt.max_modes) kept.resize(opt.max_modes);
    result.rank_deficient = kept.size() < opt.max_modes;
    result.modes = std::move(kept);
    return result;
}

inline HarminvResult harmonic_inversion(std::span<const double> samples, double dt, const HarminvOptions& opt) {
    std::vector<std::complex<double>> c(samples.begin(), samples.end());
    return harmonic_inversion(std::span<const std::complex<double>>(c), dt, opt);
}

/// Pointwise cavity/reference ratio and its peak inside the analysis band.
struct ExtractionResult {
    Spectrum ratio;            ///< NaN where the reference is below the floor
    double eta_peak = 0.0;
    double lambda_peak = 0.0;  ///< normalized wavelength of the peak
    double f_peak = 0.0;
    double band_lo = 0.0, band_hi = 0.0;  ///< frequency band searched
};

/// eta(f) = cavity(f) / reference(f), masked where the reference falls below
/// `relative_floor` times its own peak. The peak is searched over
/// [band_lo, band_hi] (whole grid when the band is empty).
inline ExtractionResult extraction_ratio(const Spectrum& cavity, const Spectrum& reference,
                                         double relative_floor = 1e-6, double band_lo = 0.0,
                                         double band_hi = std::numeric_limits<double>::infinity()) {
    if (cavity.frequency != reference.frequency)
        throw ConfigError("cavity and reference spectra use different frequency grids");
    if (!(relative_floor > 0.0)) throw ConfigError("extraction floor must be positive");
    if (cavity.size() == 0) throw ConfigError("empty spectra");
    ExtractionResult r;
    r.ratio.frequency = cavity.frequency;
    r.ratio.value.assign(cavity.size(), std::numeric_limits<double>::quiet_NaN());
    r.band_lo = band_lo;
    r.band_hi = band_hi;
    const double floor = relative_floor * reference.max();
    bool found = false;
    for (std::size_t i = 0; i < cavity.size(); ++i) {
        if (!(reference.value[i] >= floor) || reference.value[i] <= 0.0) continue;
        const double eta = cavity.value[i] / reference.value[i];
        r.ratio.value[i] = eta;
        const double f = cavity.frequency[i];
        if (f < band_lo || f > band_hi) continue;
        if (!found || eta > r.eta_peak) {
            r.eta_peak = eta;
            r.f_peak = f;
            found = true;
        }
    }
    if (!found) throw NumericalError("no unmasked samples inside the analysis band");
    r.lambda_peak = 1.0 / r.f_peak;
    return r;
}

}  // namespace phc
