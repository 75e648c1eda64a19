#include "phc/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace phc::io {

namespace {

using nlohmann::json;

/// JSON number, or null when not finite (JSON has no infinity).
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path);
    return os;
}

void write_json(const json& j, const std::string& path) { open_out(path) << j.dump(2) << '\n'; }

std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

const char* axis_name(Axis a) { return a == Axis::x ? "x" : a == Axis::y ? "y" : "z"; }

const char* boundary_name(Boundary b) {
    switch (b) {
        case Boundary::pml: return "pml";
        case Boundary::pec: return "pec";
        case Boundary::periodic: return "periodic";
        case Boundary::even_mirror: return "even_mirror";
        case Boundary::odd_mirror: return "odd_mirror";
    }
    return "?";
}

json mode_json(const ResonanceMode& m) {
    return {{"frequency", m.frequency}, {"decay", m.decay},         {"Q", number(m.q())},
            {"amplitude", m.amplitude}, {"phase", m.phase},         {"error", m.error}};
}

json run_info_json(const RunInfo& info) {
    json lo = json::array(), hi = json::array(), low = json::array();
    for (int a = 0; a < 3; ++a) {
        lo.push_back(info.grid.lower[a]);
        hi.push_back(info.grid.upper[a]);
        low.push_back(boundary_name(info.grid.low[a]));
    }
    return {{"steps", info.steps},
            {"converged", info.converged},
            {"dt", info.dt},
            {"cells", info.cells},
            {"resolution", info.grid.resolution},
            {"lower", lo},
            {"upper", hi},
            {"low_boundaries", low},
            {"monitor_z", info.monitor_z},
            {"source_z", info.source_z}};
}

json config_json(const ScenarioConfig& c) {
    return {{"lattice_type", c.lattice_type == LatticeType::triangular ? "triangular" : "square"},
            {"radius", c.radius},
            {"rod_height", c.rod_height},
            {"rings", c.rings},
            {"rod_index", c.rod_index},
            {"defect", c.defect},
            {"substrate_index", c.substrate_index},
            {"sil", c.sil},
            {"sil_index", c.sil_index},
            {"polarization", axis_name(c.polarization)},
            {"source_z", c.source_z()},
            {"center_frequency", c.center_frequency},
            {"frequency_width", c.frequency_width},
            {"monitor_z", c.monitor_z()},
            {"monitor_area", c.monitor_area},
            {"decay_db", c.decay_db}};
}

std::string value_label(double v) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << v;
    return os.str();
}

}  // namespace

void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw ConfigError("cannot create directory " + dir);
}

std::string harminv_json(const std::vector<ResonanceMode>& modes) {
    json j = json::array();
    for (const auto& m : modes) j.push_back(mode_json(m));
    return j.dump(2);
}

void write_harminv_json(const std::vector<ResonanceMode>& modes, const std::string& path) {
    open_out(path) << harminv_json(modes) << '\n';
}

void write_probe_csv(const ProbeSeries& p, const std::string& path) {
    auto os = open_out(path);
    os << "t,value\n";
    for (std::size_t i = 0; i < p.values.size(); ++i) os << format_double(p.time(i)) << ',' << format_double(p.values[i]) << '\n';
}

ProbeSeries read_probe_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read " + path);
    std::vector<double> t;
    ProbeSeries p;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError("expected two comma-separated columns", lineno);
        const std::string a = line.substr(0, comma), b = line.substr(comma + 1);
        double x = 0.0, y = 0.0;
        std::size_t ua = 0, ub = 0;
        try {
            x = std::stod(a, &ua);
            y = std::stod(b, &ub);
        } catch (const std::exception&) {
            ua = ub = 0;
        }
        if (ua != a.size() || ub != b.size()) {
            if (lineno == 1 && t.empty()) continue;  // header
            throw ConfigError("non-numeric value in time series", lineno);
        }
        t.push_back(x);
        p.values.push_back(y);
    }
    if (t.size() < 2) throw ConfigError("time series needs at least two samples");
    p.t0 = t.front();
    p.dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    if (!(p.dt > 0.0)) throw ConfigError("time column must increase");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (std::abs((t[i] - t[i - 1]) - p.dt) > 1e-6 * p.dt)
            throw ConfigError("time column is not uniformly spaced", i + 1);
    return p;
}

void write_extraction(const ExtractionResult& r, const std::string& dir) {
    ensure_directory(dir);
    write_json({{"eta_peak", r.eta_peak},
                {"lambda_peak", r.lambda_peak},
                {"band", {number(r.band_lo), number(r.band_hi)}}},
               join(dir, "extraction.json"));
    write_spectrum_csv(r.ratio, join(dir, "ratio.csv"), "ratio");
}

void write_bands_csv(const BandStructure& b, const std::string& path) {
    auto os = open_out(path);
    os << "k_index,k_x,k_y";
    for (std::size_t n = 1; n <= b.bands(); ++n) os << ",band_" << n;
    os << '\n';
    for (std::size_t q = 0; q < b.k.size(); ++q) {
        os << q << ',' << format_double(b.k[q].x) << ',' << format_double(b.k[q].y);
        for (double f : b.frequency[q]) os << ',' << format_double(f);
        os << '\n';
    }
}

void write_gap_report(const std::vector<GapReport>& gaps, const std::string& path) {
    json j = json::array();
    for (const auto& g : gaps)
        j.push_back({{"polarization", to_string(g.polarization)},
                     {"below_band", g.below},
                     {"f_lower", g.f_lower},
                     {"f_upper", g.f_upper},
                     {"gap_midgap_ratio", g.gap_midgap_ratio()},
                     {"lambda_short", g.lambda_short()},
                     {"lambda_long", g.lambda_long()}});
    write_json(j, path);
}

void emit_cavity(const CavityResult& r, const ScenarioConfig& c, const std::string& dir) {
    ensure_directory(dir);
    write_spectrum_csv(r.flux, join(dir, "flux.csv"));
    write_harminv_json(r.harminv.modes, join(dir, "harminv.json"));
    write_probe_csv(r.probe, join(dir, "probe.csv"));
    const auto dom = dominant_mode(r.harminv.modes, c.analysis_fmin, c.analysis_fmax);
    json j = {{"config", config_json(c)}, {"run", run_info_json(r.info)}, {"rank_deficient", r.harminv.rank_deficient}};
    j["dominant_mode"] = dom ? mode_json(*dom) : json(nullptr);
    j["dominant_wavelength"] = dom ? json(1.0 / dom->frequency) : json(nullptr);
    write_json(j, join(dir, "run.json"));
    const std::string snaps = join(dir, "snapshots");
    ensure_directory(snaps);
    for (const auto& s : r.snapshots) write_snapshot(s.data, join(snaps, s.name + ".fsnp"));
}

void emit_reference(const ReferenceResult& r, const ScenarioConfig& c, const std::string& dir) {
    ensure_directory(dir);
    write_spectrum_csv(r.flux, join(dir, "flux.csv"));
    write_json({{"config", config_json(c)}, {"run", run_info_json(r.info)}}, join(dir, "run.json"));
}

void emit_sweep(const SweepTable& t, const std::string& dir) {
    ensure_directory(dir);
    ensure_directory(join(dir, "reference"));
    write_spectrum_csv(t.reference, join(join(dir, "reference"), "flux.csv"));
    auto os = open_out(join(dir, "sweep.csv"));
    os << t.parameter << ",status,eta_peak,lambda_peak,peak_flux,mode_frequency,mode_wavelength,mode_q\n";
    json rows = json::array();
    for (const auto& r : t.rows) {
        const double f = r.mode ? r.mode->frequency : std::nan("");
        const double q = r.mode ? r.mode->q() : std::nan("");
        os << format_double(r.value) << ',' << (r.ok ? "ok" : "failed") << ',' << format_double(r.eta_peak) << ','
           << format_double(r.lambda_peak) << ',' << format_double(r.peak_flux) << ',' << format_double(f) << ','
           << format_double(r.mode ? 1.0 / f : std::nan("")) << ',' << format_double(q) << '\n';
        json row = {{"value", r.value}, {"ok", r.ok}};
        if (!r.ok) {
            row["error"] = r.error;
        } else {
            const std::string rd = join(join(dir, "rows"), value_label(r.value));
            ensure_directory(rd);
            write_spectrum_csv(r.flux, join(rd, "flux.csv"));
            json modes = json::array();
            for (const auto& m : r.modes) modes.push_back(mode_json(m));
            row["eta_peak"] = r.eta_peak;
            row["lambda_peak"] = r.lambda_peak;
            row["peak_flux"] = r.peak_flux;
            row["modes"] = modes;
            row["dominant_mode"] = r.mode ? mode_json(*r.mode) : json(nullptr);
            row["run"] = run_info_json(r.info);
        }
        rows.push_back(row);
    }
    write_json({{"parameter", t.parameter}, {"reference_run", run_info_json(t.reference_info)}, {"rows", rows}},
               join(dir, "sweep.json"));
}

void emit_bands(const BandsResult& r, const std::string& dir) {
    ensure_directory(dir);
    write_bands_csv(r.tm, join(dir, "bands_tm.csv"));
    write_bands_csv(r.te, join(dir, "bands_te.csv"));
    write_gap_report(r.gaps, join(dir, "gaps.json"));
}

}  // namespace phc::io
