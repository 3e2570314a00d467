#pragma once
#include <string_view>

namespace pwrse {

// Internal calculations use relativistic units hbar = c = m_e = 1.
// Energies cross the API boundary in eV via mec2_eV.
namespace consts {

constexpr double alpha = 1.0 / 137.035999;
constexpr double mec2_eV = 510998.95;

// Stamped into cache keys and output headers; bump on any change above.
constexpr std::string_view constants_version = "phys-v1";

} // namespace consts
} // namespace pwrse
