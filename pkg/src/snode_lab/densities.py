"""Matrix-valued densities on the real line, with support and log-det metadata.

A :class:`DensityFn` wraps a vectorized callable t -> stack of p x p PSD
matrices.  The optional ``log_det`` closure avoids underflow when the
density decays fast (for example exp(-sqrt|t|) at t ~ 1e19); entropy-type
integrals use it instead of log(det(values)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class DensityFn:
    """A p x p matrix density t -> P(t) >= 0 plus integration metadata.

    ``support`` is the closed interval outside of which the density is
    exactly zero; (-inf, inf) for full-line densities.  ``log_det`` returns
    ln det P(t) (elementwise over a t array), -inf where P vanishes.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    p: int = 1
    support: tuple[float, float] = (-np.inf, np.inf)
    params: dict = field(default_factory=dict)
    log_det: Callable[[np.ndarray], np.ndarray] | None = None
    breaks: tuple = ()  # interior points where the density is not smooth

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.asarray(self.fn(t))

    @property
    def bounded_support(self) -> bool:
        return np.isfinite(self.support[0]) and np.isfinite(self.support[1])

    def log_det_at(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.log_det is not None:
            return np.asarray(self.log_det(t), dtype=float)
        vals = self(t)
        dets = np.linalg.det(vals).real
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(dets > 0.0, np.log(np.maximum(dets, 1e-300)), -np.inf)
        return out


def _as_stack(scalars: np.ndarray) -> np.ndarray:
    return scalars[:, None, None].astype(complex)


def uniform_density(a: float = -1.0, b: float = 1.0) -> DensityFn:
    """Constant 1/(b-a) on [a, b], zero outside."""
    height = 1.0 / (b - a)

    def fn(t):
        inside = (t >= a) & (t <= b)
        return _as_stack(np.where(inside, height, 0.0))

    def log_det(t):
        inside = (t >= a) & (t <= b)
        return np.where(inside, np.log(height), -np.inf)

    return DensityFn("uniform", fn, support=(a, b), params={"a": a, "b": b}, log_det=log_det)


def cauchy_density(scale: float = 1.0) -> DensityFn:
    """scale / (pi (t^2 + scale^2)); the standard case is scale = 1."""

    def fn(t):
        return _as_stack(scale / (np.pi * (t * t + scale * scale)))

    def log_det(t):
        return np.log(scale / np.pi) - np.log(t * t + scale * scale)

    return DensityFn("cauchy", fn, params={"scale": scale}, log_det=log_det)


def exp_sqrt_density() -> DensityFn:
    """exp(-sqrt|t|)/4; even moments are (4m+1)!."""

    def fn(t):
        return _as_stack(np.exp(-np.sqrt(np.abs(t))) / 4.0)

    def log_det(t):
        return -np.sqrt(np.abs(t)) - np.log(4.0)

    return DensityFn("exp_sqrt", fn, log_det=log_det, breaks=(0.0,))


def table_density(ts, values) -> DensityFn:
    """Piecewise-linear scalar density through sampled (t, value) pairs, zero outside."""
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.ndim != 1 or ts.shape != values.shape:
        raise ValueError("table density needs matching 1-d grids")
    if np.any(values < 0.0):
        raise ValueError("table density values must be nonnegative")

    def fn(t):
        return _as_stack(np.interp(t, ts, values, left=0.0, right=0.0))

    return DensityFn(
        "table", fn, support=(float(ts[0]), float(ts[-1])), params={"n": int(ts.size)}
    )


_BY_NAME = {
    "uniform": uniform_density,
    "cauchy": cauchy_density,
    "exp_sqrt": exp_sqrt_density,
}


def density_by_name(name: str, params: dict | None = None) -> DensityFn:
    """Construct a named density; ``table`` expects {"t": [...], "v": [...]}."""
    params = dict(params or {})
    if name == "table":
        return table_density(params["t"], params["v"])
    try:
        maker = _BY_NAME[name]
    except KeyError:
        raise KeyError(f"unknown density {name!r}; available: {sorted(_BY_NAME)} + ['table']")
    return maker(**params)
