"""Duality toolkit for the open diffusive contact process, its generalization and lattice SIR."""
from .lattice import Configuration, DcpParams, GdcpParams, SirParams, config_of, index_of
from .generators import (DualConfiguration, SirDualState, SparseGenerator, build_dcp, build_dual,
                         build_gdcp, build_sir_dual, fast_stirring_chain)

__version__ = "0.1.0"

__all__ = [
    "Configuration", "DcpParams", "GdcpParams", "SirParams", "config_of", "index_of",
    "DualConfiguration", "SirDualState", "SparseGenerator", "build_dcp", "build_dual",
    "build_gdcp", "build_sir_dual", "fast_stirring_chain", "__version__",
]
