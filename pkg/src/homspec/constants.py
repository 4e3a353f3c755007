"""Physical constants and Rb line data.

All values are SI (meters, seconds, kelvin, radians).  Wavelengths cross the
API boundary in nanometers only inside the CLI layer; everything below it
works in meters.
"""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA values used throughout the package."""

    c: float = 299792458.0  # speed of light [m/s]
    k_b: float = 1.380649e-23  # Boltzmann constant [J/K]
    hbar: float = 1.054571817e-34  # reduced Planck constant [J s]
    eps0: float = 8.8541878128e-12  # vacuum permittivity [F/m]


@dataclass(frozen=True)
class RbProperties:
    """Rb D1-line parameters for the two-level dispersion model.

    ``dipole_moment`` is the effective far-detuned dipole moment of the D1
    transition.  Hyperfine structure, isotope mixtures and pressure
    broadening are outside the model.
    """

    dipole_moment: float = 1.4646e-29  # effective D1 dipole moment [C m]
    mass: float = 1.443e-25  # atomic mass [kg]
    d1_wavelength: float = 795e-9  # D1 resonance wavelength [m]

    @property
    def omega0(self) -> float:
        """D1 angular frequency, derived exactly as 2*pi*c/lambda [rad/s]."""
        return 2.0 * math.pi * CODATA.c / self.d1_wavelength


CODATA = PhysicalConstants()
RB87 = RbProperties()

TORR_TO_PASCAL = 133.322  # pressure unit conversion [Pa/Torr]
