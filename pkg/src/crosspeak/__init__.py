"""crosspeak: cross-relaxation resonance prediction and PL-scan analysis
for spin defects in diamond."""

from .catalog import load_catalog, load_species
from .spin import (
    LabeledTransition,
    MagneticField,
    ManifoldRule,
    NuclearSpin,
    Orientation,
    SpinSpecies,
    TrackingWarning,
    build_hamiltonian,
    eigensystem,
    spin_operators,
    track_levels,
    transitions,
)

__version__ = "0.1.0"

__all__ = [
    "LabeledTransition",
    "MagneticField",
    "ManifoldRule",
    "NuclearSpin",
    "Orientation",
    "SpinSpecies",
    "TrackingWarning",
    "build_hamiltonian",
    "eigensystem",
    "load_catalog",
    "load_species",
    "spin_operators",
    "track_levels",
    "transitions",
    "__version__",
]
