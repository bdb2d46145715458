"""Quantum-classical correspondence of phase-space structure in a chaotic
two-degree-of-freedom oscillator.

Modules: :mod:`~qccphase.hamiltonian` (model family and derivatives),
:mod:`~qccphase.classical` (Liouville ensembles), :mod:`~qccphase.quantum`
(split-operator wave packets), :mod:`~qccphase.expansion` (stability-tensor
expansion and break time) and :mod:`~qccphase.lab` (experiments and CLI).
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
