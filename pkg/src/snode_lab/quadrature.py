"""Quadrature helpers for moment and entropy-type integrals over the line.

Two engines, both built on Gauss-Legendre nodes after the substitution
t = tan(theta):

* :func:`integrate_line` uses a single panel in theta.  Right for smooth
  integrands (moment integrals of decaying densities).
* :func:`integrate_line_graded` splits theta into dyadic panels that
  accumulate at +-pi/2.  Right for integrands whose t-form grows like
  ln|t| or |t|^a (a < 1) near infinity, for example weighted log-density
  integrals.

Every caller is expected to run the doubled-node agreement check via
:func:`integrate_with_check`.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import QuadratureNotConverged


@lru_cache(maxsize=64)
def _gl_nodes(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gauss_legendre(a: float, b: float, n: int):
    """Gauss-Legendre nodes and weights on the interval (a, b)."""
    x, w = _gl_nodes(n)
    half = (b - a) / 2.0
    return a + half * (x + 1.0), half * w


def integrate_interval(fn, a: float, b: float, n: int):
    """GL integral of a vectorized scalar- or matrix-valued fn over (a, b)."""
    t, w = gauss_legendre(a, b, n)
    vals = np.asarray(fn(t))
    if vals.ndim == 1:
        return np.sum(w * vals)
    return np.einsum("i,i...->...", w, vals)


def integrate_line(fn, n: int):
    """Integral of fn over the whole line via t = tan(theta), single GL panel.

    ``fn`` must accept a 1-d array of t values and return values whose
    leading axis matches; the product fn(t) * (1 + t^2) has to stay bounded
    and smooth in theta for the panel to converge.
    """
    theta, w = gauss_legendre(-np.pi / 2.0, np.pi / 2.0, n)
    t = np.tan(theta)
    vals = np.asarray(fn(t))
    jac = 1.0 + t * t
    if vals.ndim == 1:
        return np.sum(w * jac * vals)
    return np.einsum("i,i...->...", w * jac, vals)


def _dyadic_edges(width: float, levels: int):
    """Offsets 0 < ... < width/2 < width accumulating geometrically at 0."""
    out = [width]
    d = width
    for _ in range(levels):
        d /= 2.0
        out.append(d)
    out.append(0.0)
    return out[::-1]  # ascending, starting at 0


def integrate_line_graded(fn, n: int = 24, levels: int = 54, breaks=()):
    """Integral of fn over the line; graded tan-substitution composite GL.

    The theta axis (-pi/2, pi/2) is cut at the images of ``breaks`` (points
    where fn is not smooth, for example a |t|^(1/2) cusp) and panels shrink
    dyadically toward every cut and toward +-pi/2.  Integrable endpoint
    growth of fn(tan(theta)) * sec(theta)^2 (log- or sqrt-type) and interior
    cusps are then resolved to near machine precision.  Near the infinite
    ends, points are parametrized by the distance delta from the endpoint
    and evaluated as t = +-1/tan(delta) to avoid cancellation.
    """
    total = None

    def add_panel(tvals, wvals):
        nonlocal total
        vals = np.asarray(fn(tvals))
        jac = wvals * (1.0 + tvals * tvals)
        piece = np.sum(jac * vals) if vals.ndim == 1 else np.einsum("i,i...->...", jac, vals)
        total = piece if total is None else total + piece

    cuts = sorted({float(np.arctan(b)) for b in breaks})
    anchors = [-np.pi / 2.0, *cuts, np.pi / 2.0]

    for left, right in zip(anchors[:-1], anchors[1:]):
        mid = (left + right) / 2.0
        half = (right - left) / 2.0
        for anchor, sign in ((left, 1.0), (right, -1.0)):
            at_infinity = abs(abs(anchor) - np.pi / 2.0) < 1e-15
            offsets = _dyadic_edges(half, levels)
            for lo, hi in zip(offsets[:-1], offsets[1:]):
                delta, w = gauss_legendre(lo, hi, n)
                if at_infinity:
                    # theta = anchor + sign*delta; tan(theta) = +-1/tan(delta)
                    t = np.sign(anchor) / np.tan(delta)
                else:
                    t = np.tan(anchor + sign * delta)
                add_panel(t, w)

    return total


def integrate_with_check(integrator, fn, n: int, rel_tol: float, what: str = "integral"):
    """Run ``integrator(fn, n)`` and again at 2n; accept on relative agreement.

    Raises :class:`QuadratureNotConverged` when the doubled-node drift
    exceeds ``rel_tol`` relative to 1 + |value|.
    """
    coarse = integrator(fn, n)
    fine = integrator(fn, 2 * n)
    drift = np.max(np.abs(np.asarray(fine) - np.asarray(coarse)))
    scale = 1.0 + np.max(np.abs(np.asarray(fine)))
    if drift > rel_tol * scale:
        raise QuadratureNotConverged(
            f"{what}: doubled-node drift {drift:.3e} exceeds {rel_tol:.1e} * {scale:.3e}"
        )
    return fine
