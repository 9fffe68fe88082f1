"""Numerical modeling of the 0-pi superconducting qubit.

Modules:
    circuit       -- capacitance-network quantization to mode energies
    hamiltonian   -- two-mode Hamiltonian assembly, diagonalization, labels
    spectroscopy  -- transition sweeps, matrix elements, dressed spectra
    tightbinding  -- Bloch/Wannier band analysis and interference elements
    raman         -- Lambda-system analytics and Lindblad pulse dynamics
    fitting       -- multivariate spectrum fit
    plots         -- figure rendering for run outputs
    cli           -- command-line front end
"""

__version__ = "0.1.0"

from .circuit import CapacitanceNetwork, ModeEnergies, quantize
from .hamiltonian import (
    BasisConfig,
    DEVICE_PARAMS,
    Spectrum,
    ZeroPiParams,
    solve,
)

__all__ = [
    "BasisConfig",
    "CapacitanceNetwork",
    "DEVICE_PARAMS",
    "ModeEnergies",
    "Spectrum",
    "ZeroPiParams",
    "quantize",
    "solve",
    "__version__",
]
