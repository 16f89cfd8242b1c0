"""Block Hankel S-nodes for the truncated power-moment problem.

A spec (p, n, H_0..H_{2n-2}) assembles H(n) = {H_{i+j-2}}.  The node uses
the block down-shift A, Phi2 = [I; 0; ...; 0] and
Phi1 = -i (0, H_0, ..., H_{n-2})^T, the unique column making the identity
A H - H A* = i Pi J Pi* hold.

The factorization chain produces p x 2p coefficients omega_k with

    omega_k J omega_k* = 0,   i omega_k J omega_{k-1}* = t_{k+1} > 0,
    omega_0 = [0  t_1],

and elementary factors w_{k+1}(lam) = I + (i/lam) J omega_k* t_{k+1}^{-1} omega_k
whose product recovers the node's transfer matrix.

Moment recovery runs two independent routes for a Weyl function phi of the
node: large-|z| expansion coefficients of -phi on an upper semicircle, and
quadrature of t^k against the boundary density of phi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matcore, quadrature, serialization
from .densities import DensityFn
from .errors import (
    DimensionMismatch,
    ExtractionNotConverged,
    IndexOutOfRange,
    NotPositiveDefinite,
    PoleAtLambda,
)
from .snode import ParamPair, SNode, node_frame, stieltjes_density, weyl_values


@dataclass(frozen=True)
class HankelSpec:
    """Block size p, block order n, and the 2n-1 Hermitian moment blocks."""

    p: int
    n: int
    H: tuple

    def __post_init__(self):
        blocks = tuple(matcore.as_matrix(b) for b in self.H)
        if len(blocks) != 2 * self.n - 1:
            raise DimensionMismatch(f"need {2 * self.n - 1} blocks H_0..H_{2 * self.n - 2}")
        for b in blocks:
            if b.shape != (self.p, self.p):
                raise DimensionMismatch(f"every block must be {self.p} x {self.p}")
            matcore.assert_hermitian(b)
            b.setflags(write=False)
        object.__setattr__(self, "H", blocks)

    def matrix(self) -> np.ndarray:
        p, n = self.p, self.n
        out = np.zeros((n * p, n * p), dtype=complex)
        for i in range(n):
            for j in range(n):
                out[i * p : (i + 1) * p, j * p : (j + 1) * p] = self.H[i + j]
        return out

    def leading(self, k: int) -> "HankelSpec":
        if not 1 <= k <= self.n:
            raise IndexOutOfRange(f"leading order {k} outside 1..{self.n}")
        return HankelSpec(p=self.p, n=k, H=self.H[: 2 * k - 1])

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "n": self.n,
            "H": [serialization.matrix_to_json(b) for b in self.H],
        }

    @classmethod
    def from_json(cls, data: dict) -> "HankelSpec":
        return cls(
            p=int(data["p"]),
            n=int(data["n"]),
            H=tuple(serialization.matrix_from_json(b) for b in data["H"]),
        )


def build_hankel_node(spec: HankelSpec) -> SNode:
    p, n = spec.p, spec.n
    Ip = np.eye(p, dtype=complex)
    A = np.zeros((n * p, n * p), dtype=complex)
    for i in range(1, n):
        A[i * p : (i + 1) * p, (i - 1) * p : i * p] = Ip
    Phi2 = np.zeros((n * p, p), dtype=complex)
    Phi2[:p] = Ip
    Phi1 = np.zeros((n * p, p), dtype=complex)
    for i in range(1, n):
        Phi1[i * p : (i + 1) * p] = -1j * spec.H[i - 1]
    return SNode(p=p, A=A, S=spec.matrix(), Phi1=Phi1, Phi2=Phi2)


@dataclass(frozen=True)
class OmegaChain:
    """Coefficients omega_k (p x 2p) and the positive blocks t_1..t_n."""

    p: int
    omega: tuple
    t: tuple

    def __len__(self) -> int:
        return len(self.omega)


def hankel_chain(spec: HankelSpec) -> OmegaChain:
    """omega_k = P_2(k+1) H(k+1)^{-1} Pi(k+1) and t_r = (H(r)^{-1})_{rr} block.

    Raises :class:`NotPositiveDefinite` at the first order whose leading
    block fails.
    """
    p, n = spec.p, spec.n
    node = build_hankel_node(spec)
    Pi = node.Pi
    omegas, ts = [], []
    for r in range(1, n + 1):
        Hr = node.S[: r * p, : r * p]
        try:
            pd = matcore.cholesky_pd(Hr)
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite("leading Hankel block not positive definite", order=r) from exc
        sol = pd.solve(Pi[: r * p, :])
        omegas.append(sol[(r - 1) * p :, :])
        unit = np.zeros((r * p, p), dtype=complex)
        unit[(r - 1) * p :, :] = np.eye(p)
        ts.append(matcore.hermitian_part(pd.solve(unit)[(r - 1) * p :, :]))
    return OmegaChain(p=p, omega=tuple(omegas), t=tuple(ts))


def hankel_factors(spec: HankelSpec, lam: complex) -> list[np.ndarray]:
    """Elementary factors w_{k+1}(lam) = I + (i/lam) J omega_k* t_{k+1}^{-1} omega_k."""
    if abs(lam) < 1e-12:
        raise PoleAtLambda("every factor has its pole at lam = 0")
    chain = hankel_chain(spec)
    p = spec.p
    J = matcore.exchange_J(p)
    I2 = np.eye(2 * p, dtype=complex)
    out = []
    for k in range(len(chain)):
        Q = chain.omega[k].conj().T @ matcore.cholesky_pd(chain.t[k]).solve(chain.omega[k])
        out.append(I2 + (1j / lam) * J @ Q)
    return out


def moments_from_density(density: DensityFn, k: int, quad: int = 2048) -> np.ndarray:
    """H_k = integral t^k P(t) dt with a doubled-node convergence check.

    Densities with bounded support integrate on the support interval;
    full-line densities via the tan substitution (graded panels around any
    declared non-smooth points and toward the infinite ends).
    """

    def integrand(ts):
        return ts[:, None, None] ** k * density(ts)

    if density.bounded_support:
        a, b = density.support

        def on_interval(fn, n):
            return quadrature.integrate_interval(fn, a, b, n)

        value = quadrature.integrate_with_check(
            on_interval, integrand, quad, 1e-8, what=f"moment {k}"
        )
    else:

        def on_line(fn, n):
            return quadrature.integrate_line_graded(fn, n, breaks=density.breaks)

        value = quadrature.integrate_with_check(
            on_line, integrand, max(24, quad // 64), 1e-8, what=f"moment {k}"
        )
    return matcore.hermitian_part(value)


def weyl_density(node_or_frame, pair: ParamPair, eps: float = 0.0) -> DensityFn:
    """Boundary density of the Weyl function of a node (or frame) and pair.

    Constant pairs evaluate directly on the axis (the frames in use are
    J-unitary there) and carry an exact log-determinant,

        ln det mu'(t) = ln det(R*Q + Q*R) - p ln(2 pi) - 2 ln|det F(t)|,

    with F(t) = Frm21(t) R + Frm22(t) Q, which stays numerically meaningful
    at any |t| (the direct imaginary part does not).  Function pairs sample
    at t + i*eps with a small ladder.
    """
    from .snode import as_frame, lft

    frm = as_frame(node_or_frame)
    p = frm.p

    if pair.is_constant:
        R, Q = pair.constant_value
        jform = (R.conj().T @ Q + Q.conj().T @ R) / (2.0 * np.pi)
        log_num = float(np.linalg.slogdet(jform)[1])

        def denominators(ts):
            frames = frm.batch(np.asarray(ts, dtype=complex))
            return frames[:, p:, :p] @ R + frames[:, p:, p:] @ Q

        def fn(ts):
            ts = np.asarray(ts, dtype=float)
            F = denominators(ts)
            Finv = np.linalg.inv(F)
            return np.swapaxes(Finv, 1, 2).conj() @ jform @ Finv

        def log_det(ts):
            ts = np.asarray(ts, dtype=float)
            return log_num - 2.0 * np.linalg.slogdet(denominators(ts))[1]

        breaks = _denominator_break_points(frm, denominators)
        return DensityFn("weyl", fn, p=p, log_det=log_det, breaks=breaks)

    def phi(z):
        return lft(frm, pair, z)

    e = eps if eps > 0.0 else None

    def fn(ts):
        ts = np.asarray(ts, dtype=float)
        return np.stack([stieltjes_density(phi, float(t), eps=e) for t in ts])

    return DensityFn("weyl", fn, p=p)


def _denominator_break_points(frm, denominators) -> tuple:
    """Real parts of the near-axis zeros of det F, F the LFT denominator.

    The frame metadata clears the rational denominators of det F into a
    polynomial, whose roots close to the axis locate the narrow Lorentzian
    features of the boundary density.
    """
    if frm.pole_clear is None or frm.clear_degree is None:
        return ()
    deg = frm.clear_degree
    span = 3.0 + deg
    fit_ts = np.cos(np.pi * (np.arange(deg + 3) + 0.5) / (deg + 3)) * span
    qvals = np.linalg.det(denominators(fit_ts)) * np.asarray(frm.pole_clear(fit_ts))
    poly = np.polynomial.Polynomial.fit(fit_ts, qvals, deg)
    roots = poly.roots()
    return tuple(
        sorted({float(r.real) for r in roots if abs(r.imag) < 2.0 and abs(r) < 1e6})
    )


def _laurent_fit(phi_vals: np.ndarray, zs: np.ndarray, radius: float, n_terms: int) -> np.ndarray:
    """Least-squares expansion -phi(z) ~ sum c_k z^{-(k+1)} on |z| = radius.

    Returns c_0..c_{n_terms-1} (matrix-valued), fitting each entry with the
    normalized basis (radius/z)^{k+1}.
    """
    m, p, _ = phi_vals.shape
    powers = np.arange(1, n_terms + 1)
    basis = (radius / zs)[:, None] ** powers[None, :]
    target = -phi_vals.reshape(m, p * p)
    coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
    scale = radius ** powers.astype(float)
    return (coef * scale[:, None]).reshape(n_terms, p, p)


@dataclass(frozen=True)
class MomentReport:
    """Two-route moment recovery plus the top-order inequality certificate."""

    orders: tuple
    laurent: tuple          # from the large-|z| expansion of -phi
    measure: tuple          # from quadrature of t^k against the density
    reference: tuple        # the input blocks H_k being certified
    tail_order: int
    tail_integral: np.ndarray
    tail_reference: np.ndarray

    def max_error(self) -> float:
        worst = 0.0
        for lau, mea, ref in zip(self.laurent, self.measure, self.reference):
            scale = 1.0 + float(np.max(np.abs(ref)))
            worst = max(worst, float(np.max(np.abs(lau - ref))) / scale)
            worst = max(worst, float(np.max(np.abs(mea - ref))) / scale)
        return worst

    def tail_slack(self) -> float:
        """Largest eigenvalue of (integral t^m dmu - H_m) at m = 2n-2; <= 0 up
        to tolerance certifies the inequality."""
        gap = matcore.hermitian_part(self.tail_integral - self.tail_reference)
        return float(np.linalg.eigvalsh(gap)[-1])


def recover_moments(
    spec: HankelSpec,
    pair: ParamPair,
    orders=None,
    quad: int = 2048,
    nuisance: int = 6,
) -> MomentReport:
    """Recover H_k (k <= 2n-3) from the Weyl function of the node and certify
    integral t^{2n-2} dmu <= H_{2n-2}.

    The expansion route evaluates phi on upper semicircles |z| = R and 2R
    (R = 50 (1 + max |H|)), fits coefficients of z^{-1}..z^{-(2n-2)} plus
    ``nuisance`` higher-order columns that absorb the tail, and accepts only
    when the two radii agree to 1e-5.  The measure route integrates t^k
    against the boundary density.
    """
    p, n = spec.p, spec.n
    node = build_hankel_node(spec)
    max_known = 2 * n - 3
    if orders is None:
        orders = tuple(range(max_known + 1))
    orders = tuple(int(k) for k in orders)
    if any(k < 0 or k > max_known for k in orders):
        raise IndexOutOfRange(f"recoverable orders are 0..{max_known}")

    scale = max(float(np.max(np.abs(b))) for b in spec.H)
    radius = 50.0 * (1.0 + scale)
    theta = np.linspace(0.1 * np.pi, 0.9 * np.pi, 96)
    n_terms = (2 * n - 2) + nuisance

    def fit_at(R: float) -> np.ndarray:
        zs = R * np.exp(1j * theta)
        vals = (
            weyl_values(node, pair, zs)
            if pair.is_constant
            else np.stack([_phi_general(node, pair, z) for z in zs])
        )
        return _laurent_fit(vals, zs, R, n_terms)

    fit1 = fit_at(radius)
    fit2 = fit_at(2.0 * radius)
    laurent = []
    for k in range(max_known + 1):
        drift = float(np.max(np.abs(fit1[k] - fit2[k])))
        if drift > 1e-5 * (1.0 + float(np.max(np.abs(fit2[k])))):
            raise ExtractionNotConverged(
                f"expansion coefficient {k} drifts {drift:.3e} between radii"
            )
        laurent.append(matcore.hermitian_part(fit2[k]))

    density = weyl_density(node, pair)
    measure = [moments_from_density(density, k, quad) for k in range(max_known + 1)]
    tail_order = 2 * n - 2
    tail = moments_from_density(density, tail_order, quad)
    return MomentReport(
        orders=orders,
        laurent=tuple(laurent[k] for k in orders),
        measure=tuple(measure[k] for k in orders),
        reference=tuple(spec.H[k] for k in orders),
        tail_order=tail_order,
        tail_integral=tail,
        tail_reference=spec.H[tail_order],
    )


def _phi_general(node: SNode, pair: ParamPair, z: complex) -> np.ndarray:
    from .snode import lft

    return lft(node_frame(node), pair, z)
