#pragma once

namespace mset::constants {

inline constexpr double q = 1.602176634e-19;        // C
inline constexpr double k_boltzmann = 1.380649e-23; // J/K
inline constexpr double epsilon_0 = 8.8541878128e-14; // F/cm
inline constexpr double cm_per_um = 1e-4;

}  // namespace mset::constants
