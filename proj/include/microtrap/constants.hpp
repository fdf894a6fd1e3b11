#pragma once

#include <string>

namespace microtrap {

// CODATA 2018 values.
namespace constants {
inline constexpr double elementary_charge = 1.602176634e-19;   // C
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double hbar = 1.054571817e-34;                // J s
inline constexpr double boltzmann = 1.380649e-23;              // J/K
inline constexpr double pi = 3.14159265358979323846;
}  // namespace constants

struct IonSpecies {
    double mass = 0.0;    // kg
    double charge = 0.0;  // C
    std::string name;

    bool valid() const { return mass > 0.0 && charge != 0.0; }
};

// Single 111Cd+ ion; mass taken as 111 u.
inline IonSpecies cd111()
{
    return IonSpecies{111.0 * constants::atomic_mass_unit,
                      constants::elementary_charge, "Cd-111+"};
}

}  // namespace microtrap
