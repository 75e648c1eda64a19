#pragma once

// File outputs of the scenarios: CSV spectra and tables, JSON reports and
// FSNP snapshots. Implemented in src/io.cpp (the only JSON user).

#include <string>
#include <vector>

#include "phc/analysis.hpp"
#include "phc/fdtd.hpp"
#include "phc/pwe.hpp"
#include "phc/scenarios.hpp"

namespace phc::io {

/// JSON list of {frequency, decay, Q, amplitude, phase, error}; Q is null
/// for an undamped mode.
std::string harminv_json(const std::vector<ResonanceMode>& modes);
void write_harminv_json(const std::vector<ResonanceMode>& modes, const std::string& path);

/// Two-column CSV "t,value".
void write_probe_csv(const ProbeSeries& p, const std::string& path);
/// Reads "t,value" rows (an optional non-numeric header is skipped); the
/// time column must be uniformly spaced.
ProbeSeries read_probe_csv(const std::string& path);

/// extraction.json {eta_peak, lambda_peak, band} and ratio.csv in `dir`.
void write_extraction(const ExtractionResult& r, const std::string& dir);

/// k_index,k_x,k_y,band_1..band_n.
void write_bands_csv(const BandStructure& b, const std::string& path);
void write_gap_report(const std::vector<GapReport>& gaps, const std::string& path);

/// flux.csv, harminv.json, probe.csv, run.json and snapshots/*.fsnp.
void emit_cavity(const CavityResult& r, const ScenarioConfig& c, const std::string& dir);
/// flux.csv and run.json.
void emit_reference(const ReferenceResult& r, const ScenarioConfig& c, const std::string& dir);
/// sweep.csv, sweep.json, reference/flux.csv and one flux.csv per row.
void emit_sweep(const SweepTable& t, const std::string& dir);
/// bands_tm.csv, bands_te.csv and gaps.json.
void emit_bands(const BandsResult& r, const std::string& dir);

/// Create `dir` (and parents); ConfigError when impossible.
void ensure_directory(const std::string& dir);

}  // namespace phc::io
