#pragma once

// Dielectric scene of a rod-type photonic crystal: a finite triangular or
// square lattice of circular rods standing on a substrate (z < 0), with
// optional defects and an optional dielectric cap slab above the rods.
//
// All lengths are in units of the lattice constant.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "phc/errors.hpp"
#include "phc/vec.hpp"

namespace phc {

struct Material {
    std::string name = "air";
    double refractive_index = 1.0;

    double permittivity() const { return refractive_index * refractive_index; }

    static Material air() { return {"air", 1.0}; }
    static Material silicon() { return {"silicon", 3.9}; }
    static Material glass() { return {"glass", 1.5}; }
};

inline void validate(const Material& m) {
    if (!(m.refractive_index >= 1.0) || !std::isfinite(m.refractive_index))
        throw ConfigError("material '" + m.name + "': refractive index must be >= 1");
}

enum class LatticeType { triangular, square };

/// Integer lattice coordinate (i, j): position = i*a1 + j*a2.
struct LatticeSite {
    int i = 0;
    int j = 0;
    friend auto operator<=>(const LatticeSite&, const LatticeSite&) = default;
};

struct RodLattice {
    LatticeType type = LatticeType::triangular;
    double rod_radius = 0.165;
    double rod_height = 2.3;
    Material rod_material = Material::silicon();
    int rings = 5;
    std::set<LatticeSite> defects = {{0, 0}};
};

/// Second primitive vector; the first is always (1, 0).
inline Vec2 second_basis(LatticeType t) {
    return t == LatticeType::triangular ? Vec2{0.5, std::numbers::sqrt3 / 2.0} : Vec2{0.0, 1.0};
}

inline Vec2 site_position(LatticeType t, LatticeSite s) {
    const Vec2 a2 = second_basis(t);
    return {s.i + s.j * a2.x, s.j * a2.y};
}

/// Shell index of a site: hexagonal distance for triangular lattices,
/// Chebyshev distance for square ones.
inline int shell_of(LatticeType t, LatticeSite s) {
    if (t == LatticeType::triangular)
        return std::max({std::abs(s.i), std::abs(s.j), std::abs(s.i + s.j)});
    return std::max(std::abs(s.i), std::abs(s.j));
}

inline void validate(const RodLattice& lat) {
    if (!(lat.rod_radius > 0.0 && lat.rod_radius < 0.5))
        throw ConfigError("rod radius must lie in (0, 0.5) lattice constants (rods would overlap)");
    if (!(lat.rod_height > 0.0)) throw ConfigError("rod height must be positive");
    if (lat.rings < 1) throw ConfigError("lattice needs at least one ring of rods");
    validate(lat.rod_material);
    for (const auto& d : lat.defects)
        if (shell_of(lat.type, d) > lat.rings)
            throw ConfigError("defect (" + std::to_string(d.i) + "," + std::to_string(d.j) +
                              ") lies outside the lattice rings");
}

/// Centers of all rods present: every site within `rings` shells, minus defects.
inline std::vector<Vec2> lattice_sites(const RodLattice& lat) {
    validate(lat);
    std::vector<Vec2> out;
    const int n = lat.type == LatticeType::triangular ? 2 * lat.rings : lat.rings;
    for (int j = -n; j <= n; ++j)
        for (int i = -n; i <= n; ++i) {
            const LatticeSite s{i, j};
            if (shell_of(lat.type, s) <= lat.rings && !lat.defects.contains(s))
                out.push_back(site_position(lat.type, s));
        }
    return out;
}

struct Substrate {
    Material material = Material::silicon();
    double thickness = 1.0;  ///< occupies z in [-thickness, 0]
};

/// Dielectric cap resting `gap` above the rod tops.
struct SilSlab {
    Material material = Material::glass();
    double thickness = 2.0;
    double gap = 0.0;
};

struct SceneGeometry {
    std::optional<RodLattice> lattice = RodLattice{};
    Substrate substrate;
    Material background = Material::air();
    std::optional<SilSlab> sil;

    /// Height of the rod tops (0 when there are no rods).
    double rod_top() const { return lattice ? lattice->rod_height : 0.0; }
};

inline void validate(const SceneGeometry& s) {
    if (s.lattice) validate(*s.lattice);
    validate(s.substrate.material);
    validate(s.background);
    if (!(s.substrate.thickness > 0.0)) throw ConfigError("substrate thickness must be positive");
    if (s.sil) {
        validate(s.sil->material);
        if (!(s.sil->thickness > 0.0)) throw ConfigError("SIL thickness must be positive");
        if (!(s.sil->gap >= 0.0)) throw ConfigError("SIL gap must be non-negative");
    }
}

/// The standard H1 scene: triangular lattice, centre rod removed, silicon
/// rods on a silicon substrate in air.
inline SceneGeometry h1_cavity_scene(double radius = 0.165, double height = 2.3, int rings = 5) {
    SceneGeometry s;
    s.lattice = RodLattice{LatticeType::triangular, radius, height, Material::silicon(), rings, {{0, 0}}};
    return s;
}

/// Homogeneous medium everywhere (no rods, substrate of the same material).
inline SceneGeometry uniform_scene(const Material& m) {
    SceneGeometry s;
    s.lattice.reset();
    s.substrate = {m, 1.0};
    s.background = m;
    return s;
}

namespace detail {

/// True when (x, y) lies in the closed disc of some present rod.
inline bool inside_rod_footprint(const RodLattice& lat, double x, double y) {
    const Vec2 a2 = second_basis(lat.type);
    const int j0 = static_cast<int>(std::lround(y / a2.y));
    const double r2 = lat.rod_radius * lat.rod_radius;
    for (int j = j0 - 1; j <= j0 + 1; ++j) {
        const int i0 = static_cast<int>(std::lround(x - j * a2.x));
        for (int i = i0 - 1; i <= i0 + 1; ++i) {
            const LatticeSite s{i, j};
            const Vec2 c = site_position(lat.type, s);
            const double dx = x - c.x, dy = y - c.y;
            if (dx * dx + dy * dy <= r2 && shell_of(lat.type, s) <= lat.rings &&
                !lat.defects.contains(s))
                return true;
        }
    }
    return false;
}

}  // namespace detail

/// Permittivity at a point. Priority: rod > SIL > substrate > background.
/// Region boundaries are closed (a point on a rod surface is rod).
inline double epsilon_at(const SceneGeometry& scene, Vec3 p) {
    if (scene.lattice && p.z >= 0.0 && p.z <= scene.lattice->rod_height &&
        detail::inside_rod_footprint(*scene.lattice, p.x, p.y))
        return scene.lattice->rod_material.permittivity();
    if (scene.sil) {
        const double z0 = scene.rod_top() + scene.sil->gap;
        if (p.z >= z0 && p.z <= z0 + scene.sil->thickness) return scene.sil->material.permittivity();
    }
    if (p.z <= 0.0 && p.z >= -scene.substrate.thickness) return scene.substrate.material.permittivity();
    return scene.background.permittivity();
}

/// Copy of `scene` with a SIL slab of index `n_sil` resting on the rod tops.
inline SceneGeometry add_sil_slab(const SceneGeometry& scene, double n_sil, double thickness,
                                  double gap = 0.0) {
    if (!(n_sil >= 1.0)) throw ConfigError("SIL refractive index must be >= 1");
    if (!(thickness > 0.0)) throw ConfigError("SIL thickness must be positive");
    if (!(gap >= 0.0)) throw ConfigError("SIL gap must be non-negative");
    SceneGeometry out = scene;
    out.sil = SilSlab{{"sil", n_sil}, thickness, gap};
    return out;
}

inline SceneGeometry with_defect(SceneGeometry scene, LatticeSite site) {
    if (scene.lattice) scene.lattice->defects.insert(site);
    return scene;
}

inline SceneGeometry without_defect(SceneGeometry scene, LatticeSite site) {
    if (scene.lattice) scene.lattice->defects.erase(site);
    return scene;
}

}  // namespace phc
