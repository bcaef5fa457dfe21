"""Random walk on the half-plane oriented lattice: exact oracles, Fourier
Green functions, Monte Carlo and Martin kernels."""

__version__ = "0.1.0"

from .lattice import DEFAULT_KERNEL, Kernel, SignRule, Table, Vertex  # noqa: E402
from .spectral import PhiVariant  # noqa: E402

__all__ = ["DEFAULT_KERNEL", "Kernel", "PhiVariant", "SignRule", "Table", "Vertex", "__version__"]
