#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "phc/errors.hpp"

namespace phc {

/// Scalar quantity sampled on a frequency grid (frequency in c/a).
struct Spectrum {
    std::vector<double> frequency;
    std::vector<double> value;

    std::size_t size() const { return frequency.size(); }

    /// Normalized wavelength (units of the lattice constant) of sample i.
    double wavelength(std::size_t i) const { return 1.0 / frequency[i]; }

    std::size_t argmax() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < value.size(); ++i)
            if (value[i] > value[best]) best = i;
        return best;
    }

    double max() const { return value.empty() ? 0.0 : *std::max_element(value.begin(), value.end()); }
};

/// `count` evenly spaced frequencies over [f_lo, f_hi].
inline std::vector<double> linspace(double f_lo, double f_hi, std::size_t count) {
    if (count < 2) throw ConfigError("need at least two frequency samples");
    if (!(f_hi > f_lo)) throw ConfigError("frequency range must be increasing");
    std::vector<double> f(count);
    for (std::size_t i = 0; i < count; ++i)
        f[i] = f_lo + (f_hi - f_lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return f;
}

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

/// `value_name` labels the third column ("flux" for flux spectra).
inline void write_spectrum_csv(const Spectrum& s, std::ostream& os, const std::string& value_name = "flux") {
    os << "freq_c_per_a,lambda_per_a," << value_name << '\n';
    for (std::size_t i = 0; i < s.size(); ++i)
        os << format_double(s.frequency[i]) << ',' << format_double(s.wavelength(i)) << ','
           << format_double(s.value[i]) << '\n';
}

inline void write_spectrum_csv(const Spectrum& s, const std::string& path, const std::string& value_name = "flux") {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path);
    write_spectrum_csv(s, os, value_name);
}

inline Spectrum read_spectrum_csv(std::istream& is) {
    Spectrum s;
    std::string line;
    if (!std::getline(is, line) || line.rfind("freq_c_per_a", 0) != 0)
        throw ConfigError("spectrum CSV must start with the header freq_c_per_a,lambda_per_a,flux");
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string a, b, c;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c))
            throw ConfigError("malformed spectrum row", lineno);
        try {
            s.frequency.push_back(std::stod(a));
            s.value.push_back(std::stod(c));
        } catch (const std::exception&) {
            throw ConfigError("non-numeric spectrum value", lineno);
        }
    }
    return s;
}

inline Spectrum read_spectrum_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read " + path);
    return read_spectrum_csv(is);
}

}  // namespace phc
