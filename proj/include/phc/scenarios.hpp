#pragma once

// End-to-end experiments on the H1 rod cavity: configuration, domain sizing,
// cavity and reference runs, parameter sweeps and the cap-slab study.
//
// Every run uses the two vertical mirror planes through the cavity axis when
// `grid.symmetry` is on: the dipole sits on the axis, so only the quarter
// x >= 0, y >= 0 is simulated and results are unfolded afterwards.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <future>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "phc/analysis.hpp"
#include "phc/errors.hpp"
#include "phc/fdtd.hpp"
#include "phc/geometry.hpp"
#include "phc/grid.hpp"
#include "phc/monitors.hpp"
#include "phc/pwe.hpp"
#include "phc/spectrum.hpp"

namespace phc {

/// Where the collection plane height is measured from.
enum class MonitorReference { rod_top, substrate };

struct ScenarioConfig {
    // Scene.
    LatticeType lattice_type = LatticeType::triangular;
    double radius = 0.165;
    double rod_height = 2.3;
    int rings = 5;
    double rod_index = 3.9;
    bool defect = true;  ///< remove the centre rod
    double substrate_index = 3.9;
    double background_index = 1.0;
    bool sil = false;
    double sil_index = 1.5;
    double sil_thickness = 2.0;
    double sil_gap = 0.0;

    // Grid.
    int resolution = 16;
    double pml_thickness = 1.0;
    double courant_factor = 0.5;
    double lateral_padding = 0.75;  ///< air between the outermost rod footprint bound and the PML
    double bottom_padding = 1.0;    ///< substrate between z = -padding and the bottom PML
    double top_padding = 0.5;       ///< air between the flux plane and the top PML
    bool symmetry = true;

    // Source.
    Axis polarization = Axis::x;
    std::optional<double> dipole_z;  ///< default: half the rod height
    double center_frequency = 0.885;
    double frequency_width = 0.3;
    double cutoff = 6.0;
    double amplitude = 1.0;

    // Collection plane.
    double monitor_height = 3.5;
    MonitorReference monitor_reference = MonitorReference::rod_top;
    double monitor_area = 23.0;
    double monitor_fmin = 0.55;
    double monitor_fmax = 1.0;
    int monitor_samples = 201;

    // Analysis.
    double analysis_fmin = 0.5814;  ///< 1 / 1.72
    double analysis_fmax = 0.9346;  ///< 1 / 1.07
    int max_modes = 5;
    double extraction_floor = 1e-6;

    // Run control.
    double decay_db = 50.0;
    long max_steps = 200000;
    int workers = 1;

    // Reference run: dipole this many cells above the bare substrate.
    int reference_offset_cells = 1;

    // Dipole-height sweep uses its own rod height.
    double z_sweep_rod_height = 2.26;

    // Band structure.
    int plane_waves = 271;
    int bands = 8;
    int k_samples = 16;

    // Physical units.
    double emission_wavelength_nm = 660.0;

    std::string output_dir = "out";

    double source_z() const { return dipole_z.value_or(rod_height / 2.0); }
    double monitor_z() const {
        return monitor_reference == MonitorReference::rod_top ? rod_height + monitor_height : monitor_height;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& key, const std::string& v, std::size_t line) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || !std::isfinite(x)) throw ConfigError("'" + key + "' expects a number, got '" + v + "'", line);
    return x;
}

inline long parse_integer(const std::string& key, const std::string& v, std::size_t line) {
    std::size_t used = 0;
    long x = 0;
    try {
        x = std::stol(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size()) throw ConfigError("'" + key + "' expects an integer, got '" + v + "'", line);
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v, std::size_t line) {
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError("'" + key + "' expects true or false, got '" + v + "'", line);
}

inline Axis parse_axis(const std::string& key, const std::string& v, std::size_t line) {
    if (v == "x") return Axis::x;
    if (v == "y") return Axis::y;
    if (v == "z") return Axis::z;
    throw ConfigError("'" + key + "' expects x, y or z, got '" + v + "'", line);
}

struct Setter {
    std::function<void(ScenarioConfig&, const std::string& key, const std::string& value, std::size_t line)> apply;
    const char* help;
};

inline void require(bool ok, const std::string& key, const std::string& what, std::size_t line) {
    if (!ok) throw ConfigError("'" + key + "' " + what, line);
}

/// Every accepted key with its parser; range checks that need no other key live here.
inline const std::map<std::string, Setter>& config_keys() {
    using C = ScenarioConfig;
    using S = const std::string&;
    auto positive = [](double ScenarioConfig::*field) {
        return [field](C& c, S k, S v, std::size_t l) {
            const double x = parse_number(k, v, l);
            require(x > 0.0, k, "must be positive", l);
            c.*field = x;
        };
    };
    auto non_negative = [](double ScenarioConfig::*field) {
        return [field](C& c, S k, S v, std::size_t l) {
            const double x = parse_number(k, v, l);
            require(x >= 0.0, k, "must be non-negative", l);
            c.*field = x;
        };
    };
    auto index = [](double ScenarioConfig::*field) {
        return [field](C& c, S k, S v, std::size_t l) {
            const double x = parse_number(k, v, l);
            require(x >= 1.0, k, "refractive index must be >= 1", l);
            c.*field = x;
        };
    };
    auto flag = [](bool ScenarioConfig::*field) {
        return [field](C& c, S k, S v, std::size_t l) { c.*field = parse_bool(k, v, l); };
    };
    auto count = [](int ScenarioConfig::*field, long lo) {
        return [field, lo](C& c, S k, S v, std::size_t l) {
            const long x = parse_integer(k, v, l);
            require(x >= lo && x <= 1000000, k, "must be an integer >= " + std::to_string(lo), l);
            c.*field = static_cast<int>(x);
        };
    };
    static const std::map<std::string, Setter> keys = {
        {"lattice.type",
         {[](C& c, S k, S v, std::size_t l) {
              if (v == "triangular") c.lattice_type = LatticeType::triangular;
              else if (v == "square") c.lattice_type = LatticeType::square;
              else throw ConfigError("'" + k + "' expects triangular or square, got '" + v + "'", l);
          },
          "triangular | square"}},
        {"lattice.radius",
         {[](C& c, S k, S v, std::size_t l) {
              const double x = parse_number(k, v, l);
              require(x > 0.0 && x < 0.5, k, "must lie in (0, 0.5) lattice constants (rods would overlap)", l);
              c.radius = x;
          },
          "rod radius"}},
        {"lattice.height", {positive(&C::rod_height), "rod height"}},
        {"lattice.rings", {count(&C::rings, 1), "complete rod shells around the cavity"}},
        {"lattice.index", {index(&C::rod_index), "rod refractive index"}},
        {"lattice.defect", {flag(&C::defect), "remove the centre rod"}},
        {"substrate.index", {index(&C::substrate_index), "substrate refractive index"}},
        {"background.index", {index(&C::background_index), "background refractive index"}},
        {"sil.enabled", {flag(&C::sil), "cap the rods with a dielectric slab"}},
        {"sil.index", {index(&C::sil_index), "cap slab refractive index"}},
        {"sil.thickness", {positive(&C::sil_thickness), "cap slab thickness"}},
        {"sil.gap", {non_negative(&C::sil_gap), "gap between rod tops and slab"}},
        {"grid.resolution", {count(&C::resolution, 8), "cells per lattice constant"}},
        {"grid.pml", {positive(&C::pml_thickness), "PML thickness"}},
        {"grid.courant",
         {[](C& c, S k, S v, std::size_t l) {
              const double x = parse_number(k, v, l);
              require(x > 0.0 && x < 1.0, k, "must lie in (0, 1)", l);
              c.courant_factor = x;
          },
          "fraction of the 3D Courant limit"}},
        {"grid.lateral_padding", {non_negative(&C::lateral_padding), "air beside the lattice"}},
        {"grid.bottom_padding", {non_negative(&C::bottom_padding), "substrate above the bottom PML"}},
        {"grid.top_padding", {non_negative(&C::top_padding), "air above the flux plane"}},
        {"grid.symmetry", {flag(&C::symmetry), "simulate one quarter using the mirror planes"}},
        {"source.polarization",
         {[](C& c, S k, S v, std::size_t l) { c.polarization = parse_axis(k, v, l); }, "x | y | z"}},
        {"source.z",
         {[](C& c, S k, S v, std::size_t l) { c.dipole_z = parse_number(k, v, l); }, "dipole height (default h/2)"}},
        {"source.frequency", {positive(&C::center_frequency), "pulse centre frequency"}},
        {"source.width", {positive(&C::frequency_width), "pulse spectral width"}},
        {"source.cutoff", {positive(&C::cutoff), "pulse truncation in widths"}},
        {"source.amplitude",
         {[](C& c, S k, S v, std::size_t l) { c.amplitude = parse_number(k, v, l); }, "current amplitude"}},
        {"monitor.height", {positive(&C::monitor_height), "flux plane height"}},
        {"monitor.reference",
         {[](C& c, S k, S v, std::size_t l) {
              if (v == "rod_top") c.monitor_reference = MonitorReference::rod_top;
              else if (v == "substrate") c.monitor_reference = MonitorReference::substrate;
              else throw ConfigError("'" + k + "' expects rod_top or substrate, got '" + v + "'", l);
          },
          "rod_top | substrate"}},
        {"monitor.area", {positive(&C::monitor_area), "flux square area"}},
        {"monitor.fmin", {positive(&C::monitor_fmin), "lowest monitored frequency"}},
        {"monitor.fmax", {positive(&C::monitor_fmax), "highest monitored frequency"}},
        {"monitor.samples", {count(&C::monitor_samples, 2), "monitored frequencies"}},
        {"analysis.fmin", {positive(&C::analysis_fmin), "analysis band low edge"}},
        {"analysis.fmax", {positive(&C::analysis_fmax), "analysis band high edge"}},
        {"analysis.max_modes", {count(&C::max_modes, 1), "harmonic inversion modes"}},
        {"analysis.floor", {positive(&C::extraction_floor), "reference mask, relative to its peak"}},
        {"run.decay_db", {positive(&C::decay_db), "probe decay that ends a run"}},
        {"run.max_steps",
         {[](C& c, S k, S v, std::size_t l) {
              const long x = parse_integer(k, v, l);
              require(x >= 1, k, "must be positive", l);
              c.max_steps = x;
          },
          "step cap per run"}},
        {"run.workers", {count(&C::workers, 1), "concurrent sweep rows"}},
        {"reference.offset_cells", {count(&C::reference_offset_cells, 1), "reference dipole height in cells"}},
        {"sweep.z_rod_height", {positive(&C::z_sweep_rod_height), "rod height for the dipole-height sweep"}},
        {"pwe.plane_waves", {count(&C::plane_waves, 1), "plane waves"}},
        {"pwe.bands", {count(&C::bands, 1), "bands"}},
        {"pwe.k_samples", {count(&C::k_samples, 1), "samples per k-path segment"}},
        {"units.wavelength_nm", {positive(&C::emission_wavelength_nm), "emission wavelength for unit conversion"}},
        {"output.dir",
         {[](C& c, S, S v, std::size_t) { c.output_dir = v; }, "output directory"}},
    };
    return keys;
}

}  // namespace detail

/// Checks that involve several keys. `lines` maps keys to their config line.
inline void validate(const ScenarioConfig& c, const std::map<std::string, std::size_t>& lines = {}) {
    auto line_of = [&](const char* key) {
        const auto it = lines.find(key);
        return it == lines.end() ? std::size_t{0} : it->second;
    };
    if (!(c.radius > 0.0 && c.radius < 0.5))
        throw ConfigError("lattice.radius must lie in (0, 0.5) lattice constants", line_of("lattice.radius"));
    const double z = c.source_z();
    if (!(z >= 0.0 && z <= c.rod_height))
        throw ConfigError("source.z must lie within the rods, in [0, lattice.height]", line_of("source.z"));
    if (!(c.monitor_fmin < c.monitor_fmax)) throw ConfigError("monitor.fmin must be below monitor.fmax", line_of("monitor.fmax"));
    if (!(c.analysis_fmin < c.analysis_fmax))
        throw ConfigError("analysis.fmin must be below analysis.fmax", line_of("analysis.fmax"));
    if (!(c.monitor_z() > c.rod_height))
        throw ConfigError("the flux plane must lie above the rod tops", line_of("monitor.height"));
    if (!(c.monitor_z() > z)) throw ConfigError("the flux plane must lie above the dipole", line_of("monitor.height"));
    if (c.sil && c.rod_height + c.sil_gap + c.sil_thickness >= c.monitor_z())
        throw ConfigError("the cap slab must end below the flux plane", line_of("sil.thickness"));
    if (c.bands > c.plane_waves) throw ConfigError("pwe.bands must not exceed pwe.plane_waves", line_of("pwe.bands"));
}

/// Parse `key = value` lines. `#` starts a comment; unknown keys, repeated
/// keys, malformed values and violated invariants are reported with their
/// line number. Unset keys keep their defaults.
inline ScenarioConfig parse_config(std::istream& in) {
    ScenarioConfig c;
    std::map<std::string, std::size_t> lines;
    const auto& keys = detail::config_keys();
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", lineno);
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("missing key before '='", lineno);
        if (value.empty()) throw ConfigError("missing value for '" + key + "'", lineno);
        const auto it = keys.find(key);
        if (it == keys.end()) throw ConfigError("unknown key '" + key + "'", lineno);
        if (lines.contains(key))
            throw ConfigError("'" + key + "' already set on line " + std::to_string(lines[key]), lineno);
        it->second.apply(c, key, value, lineno);
        lines[key] = lineno;
    }
    validate(c, lines);
    return c;
}

inline ScenarioConfig parse_config(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

/// Documented keys with their help text, in sorted order.
inline std::vector<std::pair<std::string, std::string>> config_key_help() {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [k, s] : detail::config_keys()) out.emplace_back(k, s.help);
    return out;
}

/// Config text that parse_config maps back to `c` (every key, full precision).
inline std::string to_config_text(const ScenarioConfig& c) {
    std::ostringstream os;
    auto num = [&](const char* k, double v) { os << k << " = " << format_double(v) << '\n'; };
    auto integer = [&](const char* k, long v) { os << k << " = " << v << '\n'; };
    auto flag = [&](const char* k, bool v) { os << k << " = " << (v ? "true" : "false") << '\n'; };
    const char* axes = "xyz";
    os << "lattice.type = " << (c.lattice_type == LatticeType::triangular ? "triangular" : "square") << '\n';
    num("lattice.radius", c.radius);
    num("lattice.height", c.rod_height);
    integer("lattice.rings", c.rings);
    num("lattice.index", c.rod_index);
    flag("lattice.defect", c.defect);
    num("substrate.index", c.substrate_index);
    num("background.index", c.background_index);
    flag("sil.enabled", c.sil);
    num("sil.index", c.sil_index);
    num("sil.thickness", c.sil_thickness);
    num("sil.gap", c.sil_gap);
    integer("grid.resolution", c.resolution);
    num("grid.pml", c.pml_thickness);
    num("grid.courant", c.courant_factor);
    num("grid.lateral_padding", c.lateral_padding);
    num("grid.bottom_padding", c.bottom_padding);
    num("grid.top_padding", c.top_padding);
    flag("grid.symmetry", c.symmetry);
    os << "source.polarization = " << axes[index(c.polarization)] << '\n';
    if (c.dipole_z) num("source.z", *c.dipole_z);
    num("source.frequency", c.center_frequency);
    num("source.width", c.frequency_width);
    num("source.cutoff", c.cutoff);
    num("source.amplitude", c.amplitude);
    num("monitor.height", c.monitor_height);
    os << "monitor.reference = " << (c.monitor_reference == MonitorReference::rod_top ? "rod_top" : "substrate") << '\n';
    num("monitor.area", c.monitor_area);
    num("monitor.fmin", c.monitor_fmin);
    num("monitor.fmax", c.monitor_fmax);
    integer("monitor.samples", c.monitor_samples);
    num("analysis.fmin", c.analysis_fmin);
    num("analysis.fmax", c.analysis_fmax);
    integer("analysis.max_modes", c.max_modes);
    num("analysis.floor", c.extraction_floor);
    num("run.decay_db", c.decay_db);
    integer("run.max_steps", c.max_steps);
    integer("run.workers", c.workers);
    integer("reference.offset_cells", c.reference_offset_cells);
    num("sweep.z_rod_height", c.z_sweep_rod_height);
    integer("pwe.plane_waves", c.plane_waves);
    integer("pwe.bands", c.bands);
    integer("pwe.k_samples", c.k_samples);
    num("units.wavelength_nm", c.emission_wavelength_nm);
    os << "output.dir = " << c.output_dir << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Scenes and domains.

inline SceneGeometry cavity_scene(const ScenarioConfig& c, double substrate_depth) {
    SceneGeometry s;
    RodLattice lat;
    lat.type = c.lattice_type;
    lat.rod_radius = c.radius;
    lat.rod_height = c.rod_height;
    lat.rod_material = {"rod", c.rod_index};
    lat.rings = c.rings;
    lat.defects.clear();
    if (c.defect) lat.defects.insert({0, 0});
    s.lattice = lat;
    s.substrate = {{"substrate", c.substrate_index}, substrate_depth};
    s.background = {"background", c.background_index};
    if (c.sil) s.sil = SilSlab{{"sil", c.sil_index}, c.sil_thickness, c.sil_gap};
    validate(s);
    return s;
}

/// Bare substrate with the same materials and no cap slab.
inline SceneGeometry reference_scene(const ScenarioConfig& c, double substrate_depth) {
    SceneGeometry s = cavity_scene(c, substrate_depth);
    s.lattice.reset();
    s.sil.reset();
    return s;
}

inline double snap_up(double v, int resolution) { return std::ceil(v * resolution - 1e-9) / resolution; }

/// Boundary pair on the low x and y faces for a dipole on the cavity axis.
inline std::array<Boundary, 2> mirror_boundaries(Axis polarization) {
    switch (polarization) {
        case Axis::x: return {Boundary::odd_mirror, Boundary::even_mirror};
        case Axis::y: return {Boundary::even_mirror, Boundary::odd_mirror};
        case Axis::z: break;
    }
    return {Boundary::even_mirror, Boundary::even_mirror};
}

/// Simulation box shared by the cavity and reference runs of a config. The
/// lateral size is bounded with the largest admissible rod radius, so it does
/// not depend on `radius` and radius-sweep rows share one grid. The substrate
/// runs through the bottom PML.
inline GridSpec scenario_grid(const ScenarioConfig& c) {
    RodLattice lat;
    lat.type = c.lattice_type;
    lat.rings = c.rings;
    lat.defects.clear();
    double rx = 0.0, ry = 0.0;
    for (const Vec2 p : lattice_sites(lat)) {
        rx = std::max(rx, std::abs(p.x));
        ry = std::max(ry, std::abs(p.y));
    }
    const double half_side = std::sqrt(c.monitor_area) / 2.0;
    const double hx = std::max(rx + 0.5, half_side) + c.lateral_padding + c.pml_thickness;
    const double hy = std::max(ry + 0.5, half_side) + c.lateral_padding + c.pml_thickness;

    GridSpec g;
    g.resolution = c.resolution;
    g.pml_thickness = c.pml_thickness;
    g.courant_factor = c.courant_factor;
    g.lower = {-snap_up(hx, c.resolution), -snap_up(hy, c.resolution),
               -snap_up(c.bottom_padding + c.pml_thickness, c.resolution)};
    g.upper = {snap_up(hx, c.resolution), snap_up(hy, c.resolution),
               snap_up(c.monitor_z() + c.top_padding + c.pml_thickness, c.resolution)};
    if (c.symmetry) {
        const auto m = mirror_boundaries(c.polarization);
        g.lower.x = 0.0;
        g.lower.y = 0.0;
        g.low[0] = m[0];
        g.low[1] = m[1];
    }
    validate(g);
    return g;
}

inline double substrate_depth(const GridSpec& g) { return -g.lower.z + 1.0; }

inline DipoleSource scenario_source(const ScenarioConfig& c, double z) {
    DipoleSource s;
    s.position = {0.0, 0.0, z};
    s.polarization = c.polarization;
    s.center_frequency = c.center_frequency;
    s.frequency_width = c.frequency_width;
    s.cutoff = c.cutoff;
    s.amplitude = c.amplitude;
    validate(s);
    return s;
}

/// Low-symmetry probe offset from the cavity axis, away from nodal planes.
inline Vec3 probe_position(double z) { return {0.123, 0.217, z}; }

inline FluxRegion collection_region(const ScenarioConfig& c) {
    return FluxRegion::square_z(c.monitor_z(), std::sqrt(c.monitor_area));
}

inline HarminvOptions harminv_options(const ScenarioConfig& c) {
    HarminvOptions o;
    o.f_min = c.analysis_fmin;
    o.f_max = c.analysis_fmax;
    o.max_modes = static_cast<std::size_t>(c.max_modes);
    return o;
}

// ---------------------------------------------------------------------------
// Runs.

struct NamedSnapshot {
    std::string name;
    Axis normal = Axis::z;
    double offset = 0.0;
    Snapshot data;  ///< unfolded to the full domain
};

struct RunInfo {
    long steps = 0;
    bool converged = false;
    double dt = 0.0;
    std::size_t cells = 0;
    GridSpec grid;
    double monitor_z = 0.0;
    double source_z = 0.0;
};

struct CavityResult {
    Spectrum flux;
    HarminvResult harminv;
    ProbeSeries probe;  ///< full series, t0 at the first step
    std::vector<NamedSnapshot> snapshots;
    RunInfo info;
};

struct ReferenceResult {
    Spectrum flux;
    RunInfo info;
};

/// Strongest mode inside [f_lo, f_hi], if any.
inline std::optional<ResonanceMode> dominant_mode(const std::vector<ResonanceMode>& modes, double f_lo, double f_hi) {
    std::optional<ResonanceMode> best;
    for (const auto& m : modes)
        if (m.frequency >= f_lo && m.frequency <= f_hi && (!best || m.amplitude > best->amplitude)) best = m;
    return best;
}

namespace detail {

struct RunOutput {
    Spectrum flux;
    RunResult run;
    RunInfo info;
    std::shared_ptr<const DiscretizedScene> scene;
    std::unique_ptr<Simulation> sim;
};

inline RunOutput simulate(const ScenarioConfig& c, const SceneGeometry& scene, const GridSpec& g, double source_z) {
    RunOutput out;
    out.scene = std::make_shared<const DiscretizedScene>(discretize(scene, g));
    out.sim = std::make_unique<Simulation>(out.scene);
    FluxMonitor monitor(*out.scene, collection_region(c),
                        linspace(c.monitor_fmin, c.monitor_fmax, static_cast<std::size_t>(c.monitor_samples)));
    DecayCriterion crit;
    crit.decay_db = c.decay_db;
    crit.max_steps = c.max_steps;
    out.run = run_until_decayed(*out.sim, scenario_source(c, source_z), probe_position(source_z), crit,
                                [&](const Simulation& s) { monitor.accumulate(s); });
    out.flux = monitor.flux_spectrum();
    out.info.steps = out.run.steps;
    out.info.converged = out.run.converged;
    out.info.dt = out.sim->dt();
    out.info.cells = out.scene->shape.cell_count();
    out.info.grid = g;
    out.info.monitor_z = monitor.plane_position();
    out.info.source_z = source_z;
    return out;
}

/// Snapshots of the field left in `sim`, each taken at the step within one
/// source period where its norm is largest (avoids an instantaneous zero).
inline std::vector<NamedSnapshot> mode_snapshots(Simulation& sim, const ScenarioConfig& c, double z_mid) {
    struct Want {
        const char* name;
        FieldComponent comp;
        Axis normal;
        double offset;
    };
    const Vec3 probe = probe_position(z_mid);
    const std::vector<Want> wants = {
        {"ex_midplane", FieldComponent::ex, Axis::z, z_mid},
        {"ey_midplane", FieldComponent::ey, Axis::z, z_mid},
        {"ey_cross_section", FieldComponent::ey, Axis::y, probe.y},
    };
    std::vector<NamedSnapshot> best(wants.size());
    std::vector<double> norm2(wants.size(), -1.0);
    const long period = std::max(1L, static_cast<long>(std::ceil(1.0 / (c.center_frequency * sim.dt()))));
    for (long n = 0; n <= period; ++n) {
        if (n > 0) sim.step();
        for (std::size_t w = 0; w < wants.size(); ++w) {
            Snapshot s = snapshot(sim, wants[w].comp, wants[w].normal, wants[w].offset);
            double sum = 0.0;
            for (double v : s.data) sum += v * v;
            if (sum > norm2[w]) {
                norm2[w] = sum;
                best[w] = {wants[w].name, wants[w].normal, wants[w].offset, std::move(s)};
            }
        }
    }
    for (auto& b : best) b.data = unfold(b.data, sim.scene(), b.normal);
    return best;
}

}  // namespace detail

/// Cavity run: flux spectrum through the collection square, harmonic
/// inversion of the probe ringdown after the pulse, and mode snapshots.
inline CavityResult run_cavity_scenario(const ScenarioConfig& c) {
    validate(c);
    const GridSpec g = scenario_grid(c);
    auto out = detail::simulate(c, cavity_scene(c, substrate_depth(g)), g, c.source_z());
    CavityResult r;
    r.flux = std::move(out.flux);
    r.info = out.info;
    r.probe = out.run.probe;
    const ProbeSeries ring = r.probe.after(r.probe.t0 + scenario_source(c, c.source_z()).end_time());
    if (ring.values.size() < 200)
        throw NumericalError("ringdown too short for harmonic inversion (" + std::to_string(ring.values.size()) +
                             " samples); raise run.max_steps");
    r.harminv = harmonic_inversion(std::span<const double>(ring.values), ring.dt, harminv_options(c));
    r.snapshots = detail::mode_snapshots(*out.sim, c, c.source_z());
    return r;
}

/// Reference run: the same box, source and monitor over the bare substrate,
/// with the dipole `reference_offset_cells` cells above its surface.
inline ReferenceResult run_reference_scenario(const ScenarioConfig& c) {
    validate(c);
    const GridSpec g = scenario_grid(c);
    const double z = c.reference_offset_cells * g.dx();
    auto out = detail::simulate(c, reference_scene(c, substrate_depth(g)), g, z);
    return {std::move(out.flux), out.info};
}

// ---------------------------------------------------------------------------
// Sweeps.

struct SweepRow {
    double value = 0.0;
    bool ok = false;
    std::string error;
    Spectrum flux;
    std::vector<ResonanceMode> modes;
    std::optional<ResonanceMode> mode;  ///< dominant in-band mode
    double eta_peak = 0.0;
    double lambda_peak = 0.0;
    double peak_flux = 0.0;  ///< largest collected flux inside the analysis band
    RunInfo info;
};

struct SweepTable {
    std::string parameter;
    Spectrum reference;
    RunInfo reference_info;
    std::vector<SweepRow> rows;
};

/// Fill the extraction fields of `row` from its spectrum and the reference.
inline void evaluate_row(SweepRow& row, const Spectrum& reference, const ScenarioConfig& c) {
    const auto ex = extraction_ratio(row.flux, reference, c.extraction_floor, c.analysis_fmin, c.analysis_fmax);
    row.eta_peak = ex.eta_peak;
    row.lambda_peak = ex.lambda_peak;
    row.peak_flux = 0.0;
    for (std::size_t i = 0; i < row.flux.size(); ++i)
        if (row.flux.frequency[i] >= c.analysis_fmin && row.flux.frequency[i] <= c.analysis_fmax)
            row.peak_flux = std::max(row.peak_flux, row.flux.value[i]);
    row.mode = dominant_mode(row.modes, c.analysis_fmin, c.analysis_fmax);
}

namespace detail {

/// Run `configs` as independent jobs, at most `workers` at a time, against
/// one reference run of `base`. Failed rows are recorded and skipped.
inline SweepTable run_sweep(const std::string& parameter, const ScenarioConfig& base,
                            const std::vector<std::pair<double, ScenarioConfig>>& configs,
                            const std::function<void(const SweepRow&)>& on_row) {
    SweepTable t;
    t.parameter = parameter;
    const auto ref = run_reference_scenario(base);
    t.reference = ref.flux;
    t.reference_info = ref.info;
    auto job = [&](double value, const ScenarioConfig& c) {
        SweepRow row;
        row.value = value;
        try {
            auto r = run_cavity_scenario(c);
            row.flux = std::move(r.flux);
            row.modes = r.harminv.modes;
            row.info = r.info;
            evaluate_row(row, t.reference, c);
            row.ok = true;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        return row;
    };
    const std::size_t workers = static_cast<std::size_t>(std::max(1, base.workers));
    for (std::size_t first = 0; first < configs.size(); first += workers) {
        std::vector<std::future<SweepRow>> batch;
        for (std::size_t i = first; i < std::min(configs.size(), first + workers); ++i)
            batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, job, configs[i].first,
                                       std::cref(configs[i].second)));
        for (auto& f : batch) {
            t.rows.push_back(f.get());
            if (on_row) on_row(t.rows.back());
        }
    }
    return t;
}

}  // namespace detail

/// One cavity run per radius against a shared reference.
inline SweepTable sweep_radius(const ScenarioConfig& base, const std::vector<double>& radii,
                               const std::function<void(const SweepRow&)>& on_row = {}) {
    if (radii.empty()) throw ConfigError("radius sweep needs at least one value");
    std::vector<std::pair<double, ScenarioConfig>> configs;
    for (double r : radii) {
        if (!(r > 0.0 && r < 0.5)) throw ConfigError("sweep radius " + format_double(r) + " must lie in (0, 0.5)");
        ScenarioConfig c = base;
        c.radius = r;
        configs.emplace_back(r, c);
    }
    validate(base);
    return detail::run_sweep("radius", base, configs, on_row);
}

/// One cavity run per dipole height, with the rods set to the sweep height.
inline SweepTable sweep_dipole_z(const ScenarioConfig& base, const std::vector<double>& z_values,
                                 const std::function<void(const SweepRow&)>& on_row = {}) {
    if (z_values.empty()) throw ConfigError("dipole-height sweep needs at least one value");
    ScenarioConfig b = base;
    b.rod_height = base.z_sweep_rod_height;
    b.dipole_z.reset();
    validate(b);
    std::vector<std::pair<double, ScenarioConfig>> configs;
    for (double z : z_values) {
        if (!(z >= 0.0 && z <= b.rod_height))
            throw ConfigError("sweep height " + format_double(z) + " must lie in [0, " + format_double(b.rod_height) + "]");
        ScenarioConfig c = b;
        c.dipole_z = z;
        configs.emplace_back(z, c);
    }
    return detail::run_sweep("dipole_z", b, configs, on_row);
}

// ---------------------------------------------------------------------------
// Cap-slab study and units.

struct SilStudy {
    CavityResult bare;
    CavityResult capped;
    std::optional<ResonanceMode> bare_mode, capped_mode;
    double q_ratio = std::numeric_limits<double>::quiet_NaN();
};

/// Q of the dominant mode with and without the cap slab.
inline SilStudy run_sil_study(const ScenarioConfig& base) {
    ScenarioConfig bare = base, capped = base;
    bare.sil = false;
    capped.sil = true;
    SilStudy s;
    s.bare = run_cavity_scenario(bare);
    s.capped = run_cavity_scenario(capped);
    s.bare_mode = dominant_mode(s.bare.harminv.modes, base.analysis_fmin, base.analysis_fmax);
    s.capped_mode = dominant_mode(s.capped.harminv.modes, base.analysis_fmin, base.analysis_fmax);
    if (s.bare_mode && s.capped_mode) s.q_ratio = s.capped_mode->q() / s.bare_mode->q();
    return s;
}

struct PhysicalUnits {
    double lattice_constant_nm = 0.0;
    double radius_nm = 0.0;
    double rod_height_nm = 0.0;
};

/// Lattice constant that places a mode of normalized wavelength
/// `mode_wavelength` (units of the lattice constant) at `emission_nm`.
inline PhysicalUnits physical_units(double mode_wavelength, double emission_nm, double radius, double rod_height) {
    if (!(mode_wavelength > 0.0) || !(emission_nm > 0.0)) throw ConfigError("wavelengths must be positive");
    PhysicalUnits u;
    u.lattice_constant_nm = emission_nm / mode_wavelength;
    u.radius_nm = radius * u.lattice_constant_nm;
    u.rod_height_nm = rod_height * u.lattice_constant_nm;
    return u;
}

// ---------------------------------------------------------------------------
// Band structure.

struct BandsResult {
    BandStructure tm, te;
    std::vector<GapReport> gaps;  ///< every complete gap, TM first
};

inline BandsResult run_bands(const ScenarioConfig& c) {
    RodLattice lat;
    lat.type = c.lattice_type;
    lat.rod_radius = c.radius;
    lat.rod_material = {"rod", c.rod_index};
    PweOptions o;
    o.plane_waves = static_cast<std::size_t>(c.plane_waves);
    o.bands = static_cast<std::size_t>(c.bands);
    o.eps_background = c.background_index * c.background_index;
    const KPath path = KPath::irreducible(c.lattice_type, c.k_samples);
    BandsResult r;
    r.tm = band_structure(lat, path, Polarization::tm, o);
    r.te = band_structure(lat, path, Polarization::te, o);
    for (const auto* b : {&r.tm, &r.te})
        for (const auto& g : find_gaps(*b)) r.gaps.push_back(g);
    return r;
}

}  // namespace phc
