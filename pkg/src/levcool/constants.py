"""Physical constants (CODATA, via scipy) used throughout the package."""

from scipy import constants as _c

K_B = _c.k
HBAR = _c.hbar
MU_0 = _c.mu_0
FLUX_QUANTUM = 2.067833848e-15  # Wb, h/2e
STANDARD_GRAVITY = 9.81  # m/s^2, default; override per call where relevant
