#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <memory>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "phc/monitors.hpp"

namespace {

using namespace phc;
using cplx = std::complex<double>;

std::shared_ptr<const DiscretizedScene> make_scene(const SceneGeometry& s, const GridSpec& g) {
    return std::make_shared<const DiscretizedScene>(discretize(s, g));
}

GridSpec box(Vec3 lo, Vec3 hi, int resolution, Boundary b = Boundary::pml) {
    GridSpec g;
    g.resolution = resolution;
    g.lower = lo;
    g.upper = hi;
    g.pml_thickness = 0.5;
    g.low = {b, b, b};
    g.high = {b, b, b};
    return g;
}

const SceneGeometry kVacuum = uniform_scene(Material::air());

// Oracle: dt * sum_{n=1}^{N} cos(w0 n dt) exp(i w n dt) via closed-form geometric sums.
cplx cosine_dft(double w0, double w, double dt, int n) {
    auto geo = [&](double theta) -> cplx {
        if (std::abs(theta) < 1e-15) return static_cast<double>(n);
        const cplx z = std::polar(1.0, theta);
        return z * (1.0 - std::pow(z, n)) / (1.0 - z);
    };
    return 0.5 * dt * (geo((w + w0) * dt) + geo((w - w0) * dt));
}

// Overwrite the whole grid with uniform Ex = a cos(w t), Hy = a cos(w (t - dt/2)).
void impose_plane_wave(Simulation& sim, double amp, double w) {
    const double te = sim.time(), th = te - 0.5 * sim.dt();
    for (double& v : sim.field_data(FieldComponent::ex)) v = amp * std::cos(w * te);
    for (double& v : sim.field_data(FieldComponent::hy)) v = amp * std::cos(w * th);
}

// Closed box of six flux planes of half-side h around the origin.
std::vector<FluxMonitor> closed_box(const DiscretizedScene& sc, double h, const std::vector<double>& f) {
    std::vector<FluxMonitor> out;
    for (Axis n : {Axis::x, Axis::y, Axis::z})
        for (double sgn : {-1.0, 1.0}) out.emplace_back(sc, FluxRegion{n, sgn * h, {0, 0}, {2 * h, 2 * h}, sgn}, f);
    return out;
}

}  // namespace

TEST(FluxMonitor, ZeroFieldsGiveZeroAccumulators) {
    auto sc = make_scene(kVacuum, box({-1, -1, -1}, {1, 1, 1}, 8));
    Simulation sim(sc);
    FluxMonitor mon(*sc, FluxRegion::square_z(0.25, 0.5), linspace(0.5, 1.0, 5));
    for (int n = 0; n < 100; ++n) {
        sim.step();
        mon.accumulate(sim);
    }
    for (std::size_t f = 0; f < 5; ++f)
        for (std::size_t p = 0; p < mon.sample_count(); ++p)
            for (int w = 0; w < 4; ++w) EXPECT_EQ(mon.transform(w, f, p), cplx(0.0));
    for (double v : mon.flux_spectrum().value) EXPECT_EQ(v, 0.0);
}

TEST(FluxMonitor, DftMatchesGeometricSumOracle) {
    auto sc = make_scene(kVacuum, box({-1, -1, -1}, {1, 1, 1}, 8, Boundary::pec));
    Simulation sim(sc);
    const double f0 = 0.8, w0 = 2.0 * std::numbers::pi * f0;
    // An integer number of beat periods between f0 and f1 = f0 + 0.2.
    const int beat_steps = static_cast<int>(std::lround(1.0 / (0.2 * sim.dt())));
    FluxMonitor mon(*sc, FluxRegion::square_z(0.0, 0.5), {f0, 1.0});
    std::vector<double> grow;
    const int n_total = 20 * beat_steps;
    for (int n = 1; n <= n_total; ++n) {
        sim.step();
        impose_plane_wave(sim, 1.0, w0);
        mon.accumulate(sim);
        if (n % beat_steps == 0) grow.push_back(std::abs(mon.transform(0, 0, 0)));
    }
    const cplx expected_on = cosine_dft(w0, w0, sim.dt(), n_total);
    const cplx expected_off = cosine_dft(w0, 2.0 * std::numbers::pi * 1.0, sim.dt(), n_total);
    EXPECT_NEAR(std::abs(mon.transform(0, 0, 0) - expected_on), 0.0, 1e-9 * std::abs(expected_on));
    EXPECT_NEAR(std::abs(mon.transform(0, 1, 0) - expected_off), 0.0, 1e-9 * std::abs(expected_on));
    // On resonance the magnitude grows linearly; off resonance it stays bounded.
    for (std::size_t k = 1; k < grow.size(); ++k)
        EXPECT_NEAR(grow[k] / grow[0], static_cast<double>(k + 1), 0.02 * (k + 1));
    EXPECT_LT(std::abs(mon.transform(0, 1, 0)), 0.01 * std::abs(mon.transform(0, 0, 0)));
}

TEST(FluxMonitor, PlaneWaveFluxIsHalfAmplitudeSquaredTimesArea) {
    auto sc = make_scene(kVacuum, box({-2, -2, -1}, {2, 2, 1}, 8, Boundary::pec));
    Simulation sim(sc);
    const double f0 = 0.75, w0 = 2.0 * std::numbers::pi * f0, e0 = 1.7;
    // Off-grid rectangle: fractional cell weights must integrate the exact area.
    const FluxRegion region{Axis::z, 0.1, {0.03, -0.11}, {1.37, 0.93}, 1.0};
    FluxMonitor mon(*sc, region, {f0});
    const int n_total = 40000;
    for (int n = 1; n <= n_total; ++n) {
        sim.step();
        impose_plane_wave(sim, e0, w0);
        mon.accumulate(sim);
    }
    // A steady tone accumulates (T/2) x its phasor.
    const double half_t = 0.5 * n_total * sim.dt();
    const double flux = mon.flux_spectrum().value[0] / (half_t * half_t);
    const double area = 1.37 * 0.93;
    EXPECT_NEAR(flux, 0.5 * e0 * e0 * area, 1e-3 * 0.5 * e0 * e0 * area);
    mon.scale(2.0);
    EXPECT_NEAR(mon.flux_spectrum().value[0] / (half_t * half_t), 4.0 * flux, 1e-12 * flux);
}

TEST(FluxMonitor, ProbeDftMatchesOfflineFft) {
    auto sc = make_scene(kVacuum, box({-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}, 10));
    Simulation sim(sc);
    sim.add_source({{0, 0, 0}, Axis::x});
    const double dx = sc->dx;
    // One-cell region: a single sample at the centre of cell (p, q) of the plane.
    const int p = 17, q = 13, kz = 20;
    const double cx = sc->spec.lower.x + (p + 0.5) * dx, cy = sc->spec.lower.y + (q + 0.5) * dx;
    const double zp = sc->spec.lower.z + kz * dx;
    const int n_total = 2048;
    const double df = 1.0 / (n_total * sim.dt());
    std::vector<double> freqs;
    std::vector<int> bins;
    for (int k = 1; k * df < 1.2; k += 5) {
        if (k * df < 0.5) continue;
        freqs.push_back(k * df);
        bins.push_back(k);
    }
    FluxMonitor mon(*sc, FluxRegion{Axis::z, zp, {cx, cy}, {dx, dx}, 1.0}, freqs);
    ASSERT_EQ(mon.sample_count(), 1U);
    std::vector<double> rec;
    const std::size_t b = sc->shape.index(p, q, kz);
    const auto sy = static_cast<std::size_t>(sc->shape.stride[1]);
    for (int n = 0; n < n_total; ++n) {
        sim.step();
        mon.accumulate(sim);
        const auto ex = sim.field(FieldComponent::ex);
        rec.push_back(0.5 * (ex[b] + ex[b + sy]));
    }
    Eigen::FFT<double> fft;
    std::vector<cplx> spec;
    fft.fwd(spec, rec);
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        // Sample m of the record is stamped t = (m + 1) dt; the monitor uses exp(+i w t).
        const int k = bins[i];
        const cplx offline =
            sim.dt() * std::conj(spec[static_cast<std::size_t>(k)]) * std::polar(1.0, 2.0 * std::numbers::pi * k / n_total);
        const cplx online = mon.transform(0, i, 0);
        EXPECT_NEAR(std::abs(online - offline), 0.0, 1e-3 * std::abs(offline)) << "f = " << freqs[i];
    }
}

TEST(FluxMonitor, ClosedBoxFluxIndependentOfBoxSize) {
    auto sc = make_scene(kVacuum, box({-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}, 12));
    Simulation sim(sc);
    DipoleSource src{{0, 0, 0}, Axis::z};
    sim.add_source(src);
    const auto freqs = linspace(0.4, 1.4, 41);
    auto small = closed_box(*sc, 0.5, freqs), large = closed_box(*sc, 0.75, freqs);
    while (sim.time() < src.end_time() + 12.0) {
        sim.step();
        for (auto& m : small) m.accumulate(sim);
        for (auto& m : large) m.accumulate(sim);
    }
    auto total = [](const std::vector<FluxMonitor>& ms) {
        double sum = 0.0;
        for (const auto& m : ms)
            for (double v : m.flux_spectrum().value) sum += v;
        return sum;
    };
    const double a = total(small), b = total(large);
    EXPECT_GT(a, 0.0);
    EXPECT_NEAR(a / b, 1.0, 0.02);
}

TEST(FluxMonitor, SourceScalingScalesFluxQuadratically) {
    auto sc = make_scene(kVacuum, box({-1, -1, -1}, {1, 1, 1}, 10));
    auto run = [&](double amp) {
        Simulation sim(sc);
        DipoleSource src{{0, 0, -0.2}, Axis::y};
        src.amplitude = amp;
        sim.add_source(src);
        FluxMonitor mon(*sc, FluxRegion::square_z(0.3, 0.8), linspace(0.5, 1.0, 11));
        for (int n = 0; n < 600; ++n) {
            sim.step();
            mon.accumulate(sim);
        }
        return mon.flux_spectrum();
    };
    const auto one = run(1.0), two = run(2.0), three = run(3.0);
    for (std::size_t i = 0; i < one.size(); ++i) {
        EXPECT_EQ(two.value[i], 4.0 * one.value[i]);
        EXPECT_NEAR(three.value[i], 9.0 * one.value[i], 1e-12 * std::abs(one.value[i]));
    }
}

TEST(FluxMonitor, SpectrumInvariantUnderTimeOriginShift) {
    auto sc = make_scene(kVacuum, box({-1, -1, -1}, {1, 1, 1}, 10));
    auto run = [&](int idle) {
        Simulation sim(sc);
        DipoleSource src{{0, 0, -0.2}, Axis::x};
        src.start_time = idle * sim.dt();
        sim.add_source(src);
        FluxMonitor mon(*sc, FluxRegion::square_z(0.3, 0.8), linspace(0.5, 1.0, 11));
        for (int n = 0; n < 700 + idle; ++n) {
            sim.step();
            mon.accumulate(sim);
        }
        return mon.flux_spectrum();
    };
    const auto a = run(0), b = run(137);
    double peak = 0.0;
    for (double v : a.value) peak = std::max(peak, std::abs(v));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.value[i], b.value[i], 1e-9 * peak);
}

TEST(FluxMonitor, MirrorReducedFluxMatchesFullDomain) {
    const auto scene = h1_cavity_scene(0.165, 0.75, 1);
    GridSpec full = box({-2, -2, -1}, {2, 2, 2}, 12);
    GridSpec quarter = full;
    quarter.lower.x = quarter.lower.y = 0.0;
    quarter.low[0] = Boundary::odd_mirror;
    quarter.low[1] = Boundary::even_mirror;
    auto run = [&](const GridSpec& g) {
        auto sc = make_scene(scene, g);
        Simulation sim(sc);
        sim.add_source({{0, 0, 0.375}, Axis::x});
        FluxMonitor mon(*sc, FluxRegion::square_z(1.25, 2.2), linspace(0.6, 1.1, 6));
        for (int n = 0; n < 500; ++n) {
            sim.step();
            mon.accumulate(sim);
        }
        return mon.flux_spectrum();
    };
    const auto a = run(full), b = run(quarter);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b.value[i], a.value[i], 1e-9 * std::abs(a.value[i]));
}

TEST(FluxMonitor, RejectsBadConfiguration) {
    auto sc = make_scene(kVacuum, box({-1, -1, -1}, {1, 1, 1}, 8));
    EXPECT_THROW(FluxMonitor(*sc, FluxRegion::square_z(0.8, 0.5), {0.5}), ConfigError);
    EXPECT_THROW(FluxMonitor(*sc, FluxRegion::square_z(0.0, 1.8), {0.5}), ConfigError);
    EXPECT_THROW(FluxMonitor(*sc, FluxRegion::square_z(0.0, 0.5), {0.6, 0.5}), ConfigError);
    EXPECT_THROW(FluxMonitor(*sc, FluxRegion::square_z(0.0, 0.5), {}), ConfigError);
}

TEST(TotalEnergy, ZeroAndUniformFields) {
    auto sc = make_scene(kVacuum, box({0, 0, 0}, {1.5, 1.0, 0.75}, 8, Boundary::periodic));
    Simulation sim(sc);
    EXPECT_EQ(total_energy(sim), 0.0);
    for (double& v : sim.field_data(FieldComponent::ex)) v = 1.0;
    EXPECT_NEAR(total_energy(sim), 0.5 * 1.5 * 1.0 * 0.75, 1e-12);
}

TEST(TotalEnergy, UniformFieldInDielectricCountsPermittivity) {
    auto sc = make_scene(uniform_scene(Material{"glass", 1.5}), box({0, 0, 0}, {1, 1, 1}, 8, Boundary::periodic));
    Simulation sim(sc);
    for (double& v : sim.field_data(FieldComponent::ez)) v = 2.0;
    EXPECT_NEAR(total_energy(sim), 0.5 * 2.25 * 4.0, 1e-12);
}

TEST(Snapshot, ZeroStateAndShape) {
    auto sc = make_scene(kVacuum, box({-1, -1, -1}, {1, 1, 1}, 8));
    Simulation sim(sc);
    const auto s = snapshot(sim, FieldComponent::ex, Axis::z, 0.0);
    EXPECT_EQ(s.rows, 16U);  // Ex is mid-cell along x
    EXPECT_EQ(s.cols, 17U);  // and on nodes along y
    for (double v : s.data) EXPECT_EQ(v, 0.0);
    const auto t = snapshot(sim, FieldComponent::ey, Axis::y, 0.0);
    EXPECT_EQ(t.rows, 17U);  // x
    EXPECT_EQ(t.cols, 17U);  // z
    EXPECT_THROW(snapshot(sim, FieldComponent::ex, Axis::z, 3.0), ConfigError);
}

TEST(Snapshot, UnfoldedQuarterMatchesFullDomain) {
    const auto scene = h1_cavity_scene(0.165, 0.75, 1);
    GridSpec full = box({-2, -2, -1}, {2, 2, 1.75}, 12);
    GridSpec quarter = full;
    quarter.lower.x = quarter.lower.y = 0.0;
    quarter.low[0] = Boundary::odd_mirror;
    quarter.low[1] = Boundary::even_mirror;
    auto sf = make_scene(scene, full), sq = make_scene(scene, quarter);
    Simulation a(sf), b(sq);
    a.add_source({{0, 0, 0.375}, Axis::x});
    b.add_source({{0, 0, 0.375}, Axis::x});
    a.run(250);
    b.run(250);
    for (int c = 0; c < 6; ++c) {
        const auto fc = static_cast<FieldComponent>(c);
        for (Axis normal : {Axis::z, Axis::x, Axis::y}) {
            // Planes through the interior of the quarter, or on the mirror plane itself.
            const double offset = normal == Axis::z ? 0.375 : 0.0;
            const auto ref = snapshot(a, fc, normal, offset);
            const auto got = unfold(snapshot(b, fc, normal, offset), *sq, normal);
            ASSERT_EQ(got.rows, ref.rows) << c;
            ASSERT_EQ(got.cols, ref.cols) << c;
            double peak = 0.0, diff = 0.0;
            for (std::size_t i = 0; i < ref.data.size(); ++i) {
                peak = std::max(peak, std::abs(ref.data[i]));
                diff = std::max(diff, std::abs(ref.data[i] - got.data[i]));
            }
            // Planes where a component vanishes by symmetry hold round-off in the full box.
            EXPECT_LE(diff, 1e-10 * std::max(peak, a.max_abs_field())) << "component " << c << " normal "
                                                                        << index(normal);
        }
    }
}

TEST(SnapshotFile, ByteExactLayout) {
    const Snapshot s{FieldComponent::ey, 2, 1, {1.0, -2.0}};
    std::ostringstream os;
    write_snapshot(s, os);
    const std::string bytes = os.str();
    const unsigned char expected[] = {'F', 'S', 'N', 'P', 1, 0, 1, 2, 0, 0, 0, 1, 0, 0, 0,
                                      0, 0, 0, 0, 0, 0, 0xF0, 0x3F,   // 1.0
                                      0, 0, 0, 0, 0, 0, 0, 0xC0};     // -2.0
    ASSERT_EQ(bytes.size(), sizeof expected);
    EXPECT_EQ(std::memcmp(bytes.data(), expected, sizeof expected), 0);
}

TEST(SnapshotFile, RoundTripAndRejects) {
    Snapshot s{FieldComponent::hz, 3, 4, {}};
    for (int i = 0; i < 12; ++i) s.data.push_back(std::sin(i) * 1e-7 + i);
    std::stringstream io;
    write_snapshot(s, io);
    const auto back = read_snapshot(io);
    EXPECT_EQ(back.component, s.component);
    EXPECT_EQ(back.rows, 3U);
    EXPECT_EQ(back.cols, 4U);
    EXPECT_EQ(back.data, s.data);

    std::istringstream bad_magic("FSNX");
    EXPECT_THROW(read_snapshot(bad_magic), ConfigError);
    std::string v2 = io.str();
    v2[4] = 2;
    std::istringstream bad_version(v2);
    EXPECT_THROW(read_snapshot(bad_version), ConfigError);
    std::istringstream truncated(io.str().substr(0, 30));
    EXPECT_THROW(read_snapshot(truncated), ConfigError);
}

TEST(SpectrumCsv, HeaderAndRoundTrip) {
    Spectrum s{{0.5, 0.75, 1.0}, {1.0 / 3.0, 2e-17, 5.0}};
    std::stringstream io;
    write_spectrum_csv(s, io);
    std::string header;
    std::getline(io, header);
    EXPECT_EQ(header, "freq_c_per_a,lambda_per_a,flux");
    std::string row;
    std::getline(io, row);
    EXPECT_EQ(row, "0.5,2,0.33333333333333331");
    io.clear();
    io.seekg(0);
    const auto back = read_spectrum_csv(io);
    EXPECT_EQ(back.frequency, s.frequency);
    EXPECT_EQ(back.value, s.value);
    std::istringstream bad("freq,flux\n");
    EXPECT_THROW(read_spectrum_csv(bad), ConfigError);
}
