"""snode-lab: structured-matrix S-nodes, coefficient chains, Weyl-function
families, matrix balls, and entropy asymptotics."""

from . import (  # noqa: F401
    asymptotics,
    densities,
    errors,
    hankel,
    matcore,
    quadrature,
    sampling,
    snode,
    toeplitz,
)

__version__ = "0.1.0"
