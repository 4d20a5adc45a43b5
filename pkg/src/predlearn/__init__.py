"""Predicate learning by intersective comparison and oscillatory binding.

Submodules: ``network`` (data model), ``dynamics`` (step kernels),
``oscillation`` (runs and burst analysis), ``learner``, ``codec``,
``mapping`` and ``experiment``.
"""
from .dynamics import available_backends, default_backend, step, step_inhibitors
from .errors import PredlearnError, SimulationError, ValidationError
from .network import (Bank, DynamicsParams, Kind, Layer, Network, NetworkSpec, build_network,
                      load_network, save_network)
from .oscillation import (FiringTrace, detect_phase_sets, export_raster, extract_bursts,
                          pairwise_lag, run)

__version__ = "0.1.0"
