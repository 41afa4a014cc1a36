"""Drifting Kramers-Kronig potentials on a tight-binding lattice."""

from .lattice import (
    DispersionSolution,
    LatticeSpec,
    critical_velocity,
    elastic_roots_for,
    energy,
    find_elastic_roots,
    find_elastic_roots_mirrored,
    group_velocity,
)
from .potentials import KKPotential, FunctionPotential, TabulatedPotential, kk_residual, spectrum
from .dynamics import FieldState, IntegratorConfig, evolve, free_propagate, gaussian_packet
from .scattering import (
    ExperimentSpec,
    Packet,
    ScatteringReport,
    invisibility_distance,
    reflected_fraction,
    run_experiment,
    scan_invisibility,
)
from .born import BornAmplitudes, born_amplitudes, born_phi, connection_check, displaced_spectrum

__version__ = "0.1.0"
