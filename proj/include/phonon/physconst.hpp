#pragma once

// Trap-parameter calculator: ion spacing, trilinear phonon coupling and
// Lamb-Dicke parameter for a three-ion linear crystal. SI units throughout.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace phonon::physconst {

// CODATA 2018 recommended values.
inline constexpr double elementary_charge = 1.602176634e-19;    // C (exact)
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double hbar = 1.054571817e-34;                  // J s
inline constexpr double atomic_mass_unit = 1.66053906660e-27;    // kg

/// 40Ca+ mass, 39.962590863 u.
inline constexpr double calcium40_mass = 39.962590863 * atomic_mass_unit;

inline double hz_to_angular(double hz) { return 2.0 * std::numbers::pi * hz; }

struct TrapConfig {
  double ion_mass = calcium40_mass;
  double charge = elementary_charge;
  double omega_z = hz_to_angular(1.0e6);
  double omega_a = hz_to_angular(1.41e6);
  double omega_b = hz_to_angular(0.70e6);
  double omega_c = hz_to_angular(0.69e6);
  double k_x = std::numbers::sqrt2 * 2.0 * std::numbers::pi / 355e-9;  // orthogonal 355 nm Raman beams
  double mode_amplitude = 1.0 / std::numbers::sqrt2;                  // rocking-mode amplitude on an edge ion

  void validate() const {
    if (!(ion_mass > 0.0)) throw std::invalid_argument("ion mass must be positive");
    if (!(omega_z > 0.0 && omega_a > 0.0 && omega_b > 0.0 && omega_c > 0.0))
      throw std::invalid_argument("trap and mode frequencies must be positive");
    if (charge < 0.0 || k_x < 0.0) throw std::invalid_argument("charge and wave number must be non-negative");
  }
};

/// Neighbour distance z0 = (5 e^2 / (16 pi eps0 m omega_z^2))^{1/3}.
inline double ion_spacing(const TrapConfig& cfg) {
  cfg.validate();
  return std::cbrt(5.0 * cfg.charge * cfg.charge /
                   (16.0 * std::numbers::pi * vacuum_permittivity * cfg.ion_mass * cfg.omega_z * cfg.omega_z));
}

/// xi = (9 omega_z^2 / (5 z0)) sqrt(hbar / (m omega_a omega_b omega_c)), rad/s.
inline double trilinear_coupling(const TrapConfig& cfg) {
  const double z0 = ion_spacing(cfg);
  return 9.0 * cfg.omega_z * cfg.omega_z / (5.0 * z0) *
         std::sqrt(hbar / (cfg.ion_mass * cfg.omega_a * cfg.omega_b * cfg.omega_c));
}

/// eta_b = k_x sqrt(hbar / (2 m omega_b)) M_{1,b}
inline double lamb_dicke(const TrapConfig& cfg) {
  cfg.validate();
  return cfg.k_x * std::sqrt(hbar / (2.0 * cfg.ion_mass * cfg.omega_b)) * cfg.mode_amplitude;
}

/// Zero-point spread sqrt(hbar / (2 m omega)).
inline double zero_point_spread(double mass, double omega) {
  if (!(mass > 0.0 && omega > 0.0)) throw std::invalid_argument("mass and frequency must be positive");
  return std::sqrt(hbar / (2.0 * mass * omega));
}

/// Detuning omega = omega_a - omega_b - omega_c of the trilinear resonance.
/// Throws when |omega| exceeds max_ratio times the smallest mode frequency.
inline double resonance_detuning(double omega_a, double omega_b, double omega_c, double max_ratio = 0.1) {
  const double detuning = omega_a - omega_b - omega_c;
  const double smallest = std::min({omega_a, omega_b, omega_c});
  if (!(smallest > 0.0)) throw std::invalid_argument("mode frequencies must be positive");
  if (std::abs(detuning) > max_ratio * smallest)
    throw std::domain_error("mode frequencies are far from the trilinear resonance");
  return detuning;
}

}  // namespace phonon::physconst
