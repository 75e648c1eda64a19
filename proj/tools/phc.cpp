// Command-line driver for the photonic-crystal cavity toolkit.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "phc/io.hpp"
#include "phc/scenarios.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

phc::ScenarioConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw phc::ConfigError("cannot read config file " + path);
    try {
        return phc::parse_config(is);
    } catch (const phc::ConfigError& e) {
        throw phc::ConfigError(path + ": " + e.what());
    }
}

std::string pick_dir(const std::string& flag, const phc::ScenarioConfig& c) { return flag.empty() ? c.output_dir : flag; }

void report_run(const phc::RunInfo& info) {
    std::cerr << "steps " << info.steps << ", cells " << info.cells << (info.converged ? "" : " (did not reach the decay threshold)")
              << '\n';
}

int cmd_bands(const std::string& config, const std::string& out) {
    const auto c = load_config(config);
    const auto r = phc::run_bands(c);
    const std::string dir = pick_dir(out, c);
    phc::io::emit_bands(r, dir);
    for (const auto& g : r.gaps)
        std::cout << to_string(g.polarization) << " gap " << g.below << "-" << g.below + 1 << ": f " << g.f_lower << " - "
                  << g.f_upper << ", lambda " << g.lambda_short() << " - " << g.lambda_long() << '\n';
    return 0;
}

int cmd_run(const std::string& config, const std::string& out) {
    const auto c = load_config(config);
    const auto r = phc::run_cavity_scenario(c);
    phc::io::emit_cavity(r, c, pick_dir(out, c));
    report_run(r.info);
    if (const auto m = phc::dominant_mode(r.harminv.modes, c.analysis_fmin, c.analysis_fmax))
        std::cout << "dominant mode: f " << m->frequency << ", lambda " << 1.0 / m->frequency << ", Q " << m->q() << '\n';
    else
        std::cout << "no resonance inside the analysis band\n";
    return 0;
}

int cmd_reference(const std::string& config, const std::string& out) {
    const auto c = load_config(config);
    const auto r = phc::run_reference_scenario(c);
    phc::io::emit_reference(r, c, pick_dir(out, c));
    report_run(r.info);
    return 0;
}

int cmd_sweep(const std::string& kind, const std::string& config, const std::vector<double>& values,
              const std::string& out) {
    const auto c = load_config(config);
    auto progress = [](const phc::SweepRow& row) {
        if (row.ok)
            std::cerr << "value " << row.value << ": eta " << row.eta_peak << ", peak flux " << row.peak_flux << '\n';
        else
            std::cerr << "value " << row.value << " failed: " << row.error << '\n';
    };
    const auto t = kind == "radius" ? phc::sweep_radius(c, values, progress) : phc::sweep_dipole_z(c, values, progress);
    phc::io::emit_sweep(t, pick_dir(out, c));
    bool any = false;
    for (const auto& row : t.rows) any = any || row.ok;
    if (!any) throw phc::NumericalError("every sweep row failed");
    return 0;
}

int cmd_harminv(const std::string& csv, double fmin, double fmax, std::size_t max_modes, const std::string& out) {
    const auto p = phc::io::read_probe_csv(csv);
    phc::HarminvOptions o;
    o.f_min = fmin;
    o.f_max = fmax;
    o.max_modes = max_modes;
    const auto r = phc::harmonic_inversion(std::span<const double>(p.values), p.dt, o);
    if (r.rank_deficient) std::cerr << "fewer genuine modes than requested (" << r.modes.size() << ")\n";
    if (out.empty())
        std::cout << phc::io::harminv_json(r.modes) << '\n';
    else
        phc::io::write_harminv_json(r.modes, out);
    return 0;
}

int cmd_compare(const std::string& cavity, const std::string& reference, double fmin, double fmax, double floor,
                const std::string& out) {
    const auto cav = phc::read_spectrum_csv(cavity + "/flux.csv");
    const auto ref = phc::read_spectrum_csv(reference + "/flux.csv");
    const auto r = phc::extraction_ratio(cav, ref, floor, fmin, fmax);
    phc::io::write_extraction(r, out.empty() ? cavity : out);
    std::cout << "eta_peak " << r.eta_peak << " at lambda " << r.lambda_peak << '\n';
    return 0;
}

int cmd_sil(const std::string& config, const std::string& out) {
    const auto c = load_config(config);
    const auto s = phc::run_sil_study(c);
    const std::string dir = pick_dir(out, c);
    auto bare = c, capped = c;
    bare.sil = false;
    capped.sil = true;
    phc::io::emit_cavity(s.bare, bare, dir + "/bare");
    phc::io::emit_cavity(s.capped, capped, dir + "/capped");
    std::cout << "Q ratio (capped / bare): " << s.q_ratio << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rod photonic-crystal H1 cavity toolkit"};
    app.require_subcommand(1);
    std::string config, out, csv, kind, cavity_dir, reference_dir;
    std::vector<double> values;
    double fmin = 0.5814, fmax = 0.9346, floor = 1e-6;
    std::size_t max_modes = 5;

    auto* bands = app.add_subcommand("bands", "band structure and gaps of the rod lattice");
    auto* run = app.add_subcommand("run", "cavity run: flux spectrum, resonances, snapshots");
    auto* reference = app.add_subcommand("reference", "dipole over the bare substrate");
    auto* sil = app.add_subcommand("sil", "Q with and without the cap slab");
    for (auto* s : {bands, run, reference, sil}) {
        s->add_option("config", config, "config file")->required()->check(CLI::ExistingFile);
        s->add_option("-o,--out", out, "output directory (default: output.dir)");
    }
    auto* sweep = app.add_subcommand("sweep", "radius or dipole-height sweep");
    sweep->add_option("kind", kind, "radius | dipole-z")->required()->check(CLI::IsMember({"radius", "dipole-z"}));
    sweep->add_option("config", config, "config file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--values", values, "swept values")->required()->expected(1, -1);
    sweep->add_option("-o,--out", out, "output directory (default: output.dir)");

    auto* harminv = app.add_subcommand("harminv", "resonances of a two-column time series");
    harminv->add_option("csv", csv, "t,value CSV")->required()->check(CLI::ExistingFile);
    harminv->add_option("--fmin", fmin, "band low edge")->required();
    harminv->add_option("--fmax", fmax, "band high edge")->required();
    harminv->add_option("--max-modes", max_modes, "modes to report")->capture_default_str();
    harminv->add_option("-o,--out", out, "JSON output file (default: stdout)");

    auto* compare = app.add_subcommand("compare", "extraction ratio of a cavity run over a reference run");
    compare->add_option("cavity", cavity_dir, "cavity output directory")->required()->check(CLI::ExistingDirectory);
    compare->add_option("reference", reference_dir, "reference output directory")->required()->check(CLI::ExistingDirectory);
    compare->add_option("--fmin", fmin, "analysis band low edge")->capture_default_str();
    compare->add_option("--fmax", fmax, "analysis band high edge")->capture_default_str();
    compare->add_option("--floor", floor, "mask below this fraction of the reference peak")->capture_default_str();
    compare->add_option("-o,--out", out, "output directory (default: the cavity directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (*bands) return cmd_bands(config, out);
        if (*run) return cmd_run(config, out);
        if (*reference) return cmd_reference(config, out);
        if (*sil) return cmd_sil(config, out);
        if (*sweep) return cmd_sweep(kind, config, values, out);
        if (*harminv) return cmd_harminv(csv, fmin, fmax, max_modes, out);
        if (*compare) return cmd_compare(cavity_dir, reference_dir, fmin, fmax, floor, out);
    } catch (const phc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const phc::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
