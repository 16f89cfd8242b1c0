"""Seeded random generators for specs, contractions, and parameter pairs.

Used by the property sweeps in the test suite and by the CLI scenarios;
every function takes an explicit ``numpy.random.Generator`` so runs are
reproducible from a recorded seed.
"""

from __future__ import annotations

import numpy as np

from .hankel import HankelSpec
from .snode import ParamPair
from .toeplitz import ToeplitzSpec


def random_complex(rng: np.random.Generator, shape, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_hermitian(rng: np.random.Generator, p: int, scale: float = 1.0) -> np.ndarray:
    M = random_complex(rng, (p, p), scale)
    return (M + M.conj().T) / 2.0


def random_hpd(rng: np.random.Generator, p: int, scale: float = 1.0) -> np.ndarray:
    M = random_complex(rng, (p, p), scale)
    return M @ M.conj().T + scale * 0.05 * np.eye(p)


def random_toeplitz_spec(
    rng: np.random.Generator, p: int, n: int, off_scale: float = 0.25
) -> ToeplitzSpec:
    """A positive-definite spec: identity-dominant s_0, decaying off blocks."""
    s0 = np.eye(p, dtype=complex) + random_hermitian(rng, p, 0.1)
    offs = [random_complex(rng, (p, p), off_scale / (n * (k + 1))) for k in range(n - 1)]
    nu = random_hermitian(rng, p, 0.3)
    return ToeplitzSpec(p=p, n=n, s=(s0, *offs), nu=nu)


def random_hankel_spec(rng: np.random.Generator, p: int, n: int) -> HankelSpec:
    """Moments of a random discrete matrix measure with n + 2 mass points.

    With more distinct points than the order and positive-definite weights,
    the assembled block Hankel matrix is positive definite.
    """
    count = n + 2
    points = np.sort(rng.uniform(-2.0, 2.0, size=count))
    weights = [random_hpd(rng, p, 0.6) for _ in range(count)]
    blocks = []
    for k in range(2 * n - 1):
        Hk = np.zeros((p, p), dtype=complex)
        for t, W in zip(points, weights):
            Hk = Hk + (t**k) * W
        blocks.append((Hk + Hk.conj().T) / 2.0)
    return HankelSpec(p=p, n=n, H=tuple(blocks))


def random_contraction(rng: np.random.Generator, p: int, max_norm: float = 0.85) -> np.ndarray:
    """A p x p matrix with spectral norm uniformly below ``max_norm``."""
    M = random_complex(rng, (p, p))
    top = np.linalg.norm(M, 2)
    target = max_norm * rng.uniform(0.1, 1.0)
    return (target / top) * M


def random_constant_pair(rng: np.random.Generator, p: int) -> ParamPair:
    """A strictly nondegenerate constant pair: R = I, Q = P + iK with P > 0."""
    P = random_hpd(rng, p, 0.8)
    K = random_hermitian(rng, p, 0.8)
    return ParamPair.constant(np.eye(p, dtype=complex), P + 1j * K)


def random_upper_points(
    rng: np.random.Generator, count: int, re_span: float = 3.0, im_range=(0.3, 2.5)
) -> np.ndarray:
    return rng.uniform(-re_span, re_span, count) + 1j * rng.uniform(*im_range, count)
