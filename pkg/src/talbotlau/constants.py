"""Physical constants (CODATA 2018 exact/recommended values), SI units."""

PLANCK = 6.62607015e-34  # J s
HBAR = PLANCK / (2.0 * 3.141592653589793)
AMU = 1.66053906660e-27  # kg
BOLTZMANN = 1.380649e-23  # J / K
STANDARD_GRAVITY = 9.81  # m / s^2, value used for the beamline geometry

MEV_NM3 = 1.602176634e-22 * 1e-27  # 1 meV nm^3 expressed in J m^3
