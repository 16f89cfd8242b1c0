"""Nested node sequences, monotone rho trajectories, frame factorization
across nesting, entropy/outer-function integrals, the entropy bound with
its equality case, the order-by-order convergence harness, and the two
appendix-style numerical lemmas (strict determinant growth, limit of
log-determinant integrals).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import matcore, quadrature
from .densities import DensityFn
from .errors import (
    DimensionMismatch,
    NotConverged,
    QuadratureNotConverged,
    SingularF,
    SingularOnGrid,
    SzegoViolated,
    Unsupported,
)
from .hankel import HankelSpec, build_hankel_node, moments_from_density, weyl_density
from .snode import (
    ParamPair,
    SNode,
    as_frame,
    extremal_pair,
    frame,
    rho,
    rho_from_frame,
)
from .toeplitz import ToeplitzSpec, build_toeplitz_node


# ---------------------------------------------------------------------------
# nested sequences


@dataclass(frozen=True)
class NodeSequence:
    """S-nodes embedded as leading principal compressions of each other.

    ``nodes[i]`` lives on the leading ``orders[i]`` * p rows of the largest
    node; the projectors are index ranges, nothing more.
    """

    nodes: tuple
    orders: tuple

    def __post_init__(self):
        if len(self.nodes) != len(self.orders):
            raise DimensionMismatch("nodes and orders must align")
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "orders", tuple(int(k) for k in self.orders))

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def p(self) -> int:
        return self.nodes[0].p


def toeplitz_family(spec: ToeplitzSpec, orders=None) -> NodeSequence:
    orders = tuple(range(1, spec.n + 1)) if orders is None else tuple(orders)
    return NodeSequence(
        nodes=tuple(build_toeplitz_node(spec.leading(k)) for k in orders), orders=orders
    )


def hankel_family(spec: HankelSpec, orders=None) -> NodeSequence:
    orders = tuple(range(1, spec.n + 1)) if orders is None else tuple(orders)
    return NodeSequence(
        nodes=tuple(build_hankel_node(spec.leading(k)) for k in orders), orders=orders
    )


def hankel_family_from_density(
    density: DensityFn, max_order: int, quad: int = 2048
) -> tuple[NodeSequence, HankelSpec]:
    """Moment blocks of ``density`` up to order 2*max_order - 2, as a family."""
    blocks = tuple(
        moments_from_density(density, k, quad) for k in range(2 * max_order - 1)
    )
    spec = HankelSpec(p=density.p, n=max_order, H=blocks)
    return hankel_family(spec), spec


def nested_embed_check(seq: NodeSequence) -> float:
    """Max residual of the four compression identities over all pairs r > k."""
    worst = 0.0
    p = seq.p
    for ik, k in enumerate(seq.orders):
        for ir in range(ik + 1, len(seq)):
            big = seq.nodes[ir]
            small = seq.nodes[ik]
            mk = k * p
            worst = max(worst, float(np.max(np.abs(big.A[:mk, :mk] - small.A))))
            worst = max(worst, float(np.max(np.abs(big.S[:mk, :mk] - small.S))))
            worst = max(worst, float(np.max(np.abs(big.Pi[:mk, :] - small.Pi))))
            worst = max(worst, float(np.max(np.abs(big.A[:mk, mk:]))))
    return worst


@dataclass(frozen=True)
class RhoTrajectory:
    z: complex
    orders: tuple
    values: tuple           # rho_k(z, conj z), positive definite
    reversed_values: tuple  # rho_k(conj z, z), negative definite

    def monotone_margin(self) -> float:
        """min over k of min eig(rho_{k+1} - rho_k); >= -tol certifies growth."""
        worst = np.inf
        for a, b in zip(self.values, self.values[1:]):
            worst = min(worst, matcore.min_eig_hermitian(b - a))
        return float(worst)

    def reversed_margin(self) -> float:
        """min over k of min eig(-rho_{k+1}(zbar,z) + rho_k(zbar,z))."""
        worst = np.inf
        for a, b in zip(self.reversed_values, self.reversed_values[1:]):
            worst = min(worst, matcore.min_eig_hermitian(a - b))
        return float(worst)


def rho_trajectory(seq: NodeSequence, z: complex) -> RhoTrajectory:
    vals = tuple(rho(node, z, "z,zbar") for node in seq.nodes)
    revs = tuple(rho(node, z, "zbar,z") for node in seq.nodes)
    return RhoTrajectory(z=complex(z), orders=seq.orders, values=vals, reversed_values=revs)


@dataclass(frozen=True)
class QuotientFrame:
    """Frame of the complementary node between two nesting levels."""

    value: np.ndarray
    product_residual: float
    j_expansion_min_eig: float


def quotient_node(seq: NodeSequence, ik: int, ir: int) -> SNode:
    """The node {A22, T22^{-1}, T22^{-1} Pcomp Gamma} carried by the
    complement of level ik inside level ir (indices into the sequence)."""
    p = seq.p
    big = seq.nodes[ir]
    mk = seq.orders[ik] * p
    Sinv = matcore.inv_hpd(big.S)
    T22 = matcore.hermitian_part(Sinv[mk:, mk:])
    S_breve = matcore.inv_hpd(T22)
    Gamma = Sinv @ big.Pi
    Pi_breve = S_breve @ Gamma[mk:, :]
    A22 = big.A[mk:, mk:]
    return SNode(p=p, A=A22, S=S_breve, Phi1=Pi_breve[:, :p], Phi2=Pi_breve[:, p:])


def frame_quotient(seq: NodeSequence, ik: int, ir: int, z: complex) -> QuotientFrame:
    """Frame of the quotient node plus the factorization and J-expansion checks.

    The product identity Frm(S_r, z) = Frm(S_k, z) Frm_breve(z) holds
    exactly; the J-form expands, Frm_breve J Frm_breve* >= J, for z in the
    upper half-plane.
    """
    p = seq.p
    if ik == ir:
        eye = np.eye(2 * p, dtype=complex)
        return QuotientFrame(value=eye, product_residual=0.0, j_expansion_min_eig=0.0)
    if ik > ir:
        raise DimensionMismatch("need level k nested inside level r")
    breve = frame(quotient_node(seq, ik, ir), z)
    big = frame(seq.nodes[ir], z)
    small = frame(seq.nodes[ik], z)
    residual = matcore.frobenius(big - small @ breve) / (1.0 + matcore.frobenius(big))
    J = matcore.exchange_J(p)
    defect = matcore.min_eig_hermitian(breve @ J @ breve.conj().T - J)
    return QuotientFrame(value=breve, product_residual=residual, j_expansion_min_eig=defect)


# ---------------------------------------------------------------------------
# entropy integrals and the outer modulus


def entropy_integral(
    P: DensityFn,
    f: Callable[[np.ndarray], np.ndarray] | None = None,
    a: float = -np.inf,
    b: float = np.inf,
    quad: int = 24,
    rel_tol: float = 1e-7,
) -> float:
    """integral_a^b f(t) ln det P(t) dt/(1+t^2); -inf when det P vanishes
    on a set of positive measure inside (a, b).

    ``f`` must be continuous, bounded and positive (identity weight by
    default).  Uses the tan substitution with Gauss-Legendre panels graded
    toward the infinite ends, so log- and sqrt-type growth of ln det P is
    integrated accurately; the doubled-node agreement check guards the rest.
    """
    weight = (lambda t: np.ones_like(t)) if f is None else f

    lo, hi = P.support
    if a < lo - 1e-12 or b > hi + 1e-12:
        # the density is exactly zero on a positive-measure part of (a, b)
        return -np.inf

    def integrand(ts):
        ld = P.log_det_at(ts)
        if np.any(~np.isfinite(ld)):
            raise _VanishingDensity()
        return weight(ts) * ld / (1.0 + ts * ts)

    try:
        if np.isinf(a) and np.isinf(b):
            value = quadrature.integrate_with_check(
                lambda fn, n: quadrature.integrate_line_graded(fn, n, breaks=P.breaks),
                integrand,
                quad,
                rel_tol,
                what="entropy integral",
            )
        elif np.isfinite(a) and np.isfinite(b):
            value = quadrature.integrate_with_check(
                lambda fn, n: quadrature.integrate_interval(fn, a, b, n),
                integrand,
                max(quad, 512),
                rel_tol,
                what="entropy integral",
            )
        else:
            raise ValueError("the range must be the full line or a finite interval")
    except _VanishingDensity:
        return -np.inf
    return float(value)


class _VanishingDensity(Exception):
    pass


def poisson_weight(lam: complex) -> Callable[[np.ndarray], np.ndarray]:
    """t -> Im(lam) / |t - lam|^2 (integrates to pi over the line)."""
    im = float(np.imag(lam))

    def w(ts):
        return im / np.abs(ts - lam) ** 2

    return w


def outer_modulus(P: DensityFn, lam: complex, quad: int = 24, rel_tol: float = 1e-7) -> float:
    """|det G(lam)| = exp[(1/2pi) integral Im(lam) ln det P(t) / |t-lam|^2 dt]
    for the outer spectral factor G of P.

    Verifies the Poisson normalization integral Im(lam)/|t-lam|^2 dt = pi to
    1e-9 on the same grid, and raises :class:`SzegoViolated` when the
    log-det integral diverges to -inf.
    """
    if np.imag(lam) <= 0.0:
        raise ValueError("lam must lie in the open upper half-plane")
    w = poisson_weight(lam)

    norm = quadrature.integrate_with_check(
        lambda fn, n: quadrature.integrate_line_graded(fn, n),
        lambda ts: w(ts),
        quad,
        1e-10,
        what="poisson normalization",
    )
    if abs(norm - np.pi) > 1e-9:
        raise QuadratureNotConverged(f"poisson normalization {norm!r} != pi")

    def integrand(ts):
        ld = P.log_det_at(ts)
        if np.any(~np.isfinite(ld)):
            raise _VanishingDensity()
        return w(ts) * ld

    try:
        value = quadrature.integrate_with_check(
            lambda fn, n: quadrature.integrate_line_graded(fn, n, breaks=P.breaks),
            integrand,
            quad,
            rel_tol,
            what="outer modulus integral",
        )
    except _VanishingDensity:
        raise SzegoViolated("density vanishes on a set of positive measure")
    if not np.isfinite(value):
        raise SzegoViolated("log-determinant integral diverges")
    return float(np.exp(value / (2.0 * np.pi)))


def gmu_extremal(node_or_frame, lam: complex, z: complex) -> np.ndarray:
    """Outer factor of the extremal-pair density:
    G(z) = (2 pi)^{-1/2} rho(lam, conj lam)^{1/2} F(z)^{-1} with
    F(z) = Frm21(z) R + Frm22(z) Q for the extremal pair at lam.

    On the real axis G(t)* G(t) equals the boundary density mu'(t)."""
    frm = as_frame(node_or_frame)
    pair = extremal_pair(frm, lam)
    R, Q = pair.constant_value
    p = frm.p
    _, _, F21, F22 = frm.blocks(z)
    F = F21 @ R + F22 @ Q
    sv = np.linalg.svd(F, compute_uv=False)
    if sv[-1] <= 1e-13 * max(sv[0], 1.0):
        raise SingularF(f"F(z) singular at z = {z}")
    rho_half = matcore.sqrtm_hpd(rho_from_frame(frm, lam))
    return (2.0 * np.pi) ** (-0.5) * rho_half @ np.linalg.inv(F)


def extremal_density(node_or_frame, lam: complex) -> DensityFn:
    """Boundary density of the extremal pair at lam, via G(t)* G(t)."""
    frm = as_frame(node_or_frame)
    pair = extremal_pair(frm, lam)
    R, Q = pair.constant_value
    p = frm.p
    rho_mat = rho_from_frame(frm, lam)

    def fn(ts):
        ts = np.asarray(ts, dtype=float)
        frames = frm.batch(ts.astype(complex))
        F = frames[:, p:, :p] @ R + frames[:, p:, p:] @ Q
        Finv = np.linalg.inv(F)
        out = np.swapaxes(Finv, 1, 2).conj() @ rho_mat @ Finv / (2.0 * np.pi)
        return out

    return DensityFn("extremal", fn, p=p)


@dataclass(frozen=True)
class EntropyBound:
    """lhs = 2 pi G(lam)* G(lam) against rhs = rho(lam, conj lam)^{-1}."""

    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def slack(self) -> float:
        """min eig(rhs - lhs); >= -tol certifies the bound, ~0 the equality."""
        return matcore.min_eig_hermitian(self.rhs - self.lhs)


def entropy_bound_check(
    node_or_frame, pair: ParamPair, lam: complex, quad: int = 24
) -> EntropyBound:
    """Check 2 pi G(lam)* G(lam) <= rho(lam, conj lam)^{-1} for the measure
    generated by ``pair``.

    The frame must be holomorphic across the closed upper half-plane for
    the outer-function representation behind the bound (Hankel nodes and
    coefficient-chain frames qualify; the generic frame of a Toeplitz node
    does not, since its A* resolvent has an upper-half-plane pole).
    Scalar families go through the outer-modulus quadrature of the pair's
    boundary density; for p > 1 only the extremal pair is supported (its
    outer factor is available in closed form)."""
    frm = as_frame(node_or_frame)
    rhs = matcore.inv_hpd(rho_from_frame(frm, lam))
    p = frm.p
    if p == 1:
        density = weyl_density(frm, pair)
        modulus = outer_modulus(density, lam, quad=quad)
        lhs = np.array([[2.0 * np.pi * modulus**2]], dtype=complex)
        return EntropyBound(lhs=lhs, rhs=rhs)
    ext = extremal_pair(frm, lam)
    R, Q = pair.constant_value if pair.is_constant else (None, None)
    Re, Qe = ext.constant_value
    if R is None or np.max(np.abs(R - Re)) + np.max(np.abs(Q - Qe)) > 1e-9 * (
        1.0 + float(np.max(np.abs(Re)))
    ):
        raise Unsupported("matrix case is supported for the extremal pair only")
    G = gmu_extremal(frm, lam, lam)
    lhs = matcore.hermitian_part(2.0 * np.pi * G.conj().T @ G)
    return EntropyBound(lhs=lhs, rhs=rhs)


# ---------------------------------------------------------------------------
# convergence harness


@dataclass(frozen=True)
class TrajectoryReport:
    lam: complex
    orders: tuple
    rho: tuple               # rho_k(lam, conj lam), nondecreasing in PSD order
    rho_inv: tuple           # their inverses, nonincreasing in PSD order
    det_rho_inv: tuple
    conds: tuple             # condition numbers of the S blocks
    target: float | None     # det(2 pi G* G) when the reference admits it (p = 1)
    szego_finite: bool

    @property
    def gaps(self) -> tuple:
        if self.target is None:
            return tuple(None for _ in self.det_rho_inv)
        return tuple(d - self.target for d in self.det_rho_inv)

    def psd_nonincreasing_margin(self) -> float:
        worst = np.inf
        for a, b in zip(self.rho_inv, self.rho_inv[1:]):
            worst = min(worst, matcore.min_eig_hermitian(a - b))
        return float(worst)

    def psd_nondecreasing_margin(self) -> float:
        worst = np.inf
        for a, b in zip(self.rho, self.rho[1:]):
            worst = min(worst, matcore.min_eig_hermitian(b - a))
        return float(worst)

    def det_positive(self) -> bool:
        return all(d > 0.0 for d in self.det_rho_inv)

    def gap_strictly_decreasing(self) -> bool:
        gaps = self.gaps
        if any(g is None for g in gaps):
            return False
        return all(b < a for a, b in zip(gaps, gaps[1:]))


def convergence_run(
    seq: NodeSequence,
    lam: complex,
    reference: DensityFn | None = None,
    quad: int = 24,
) -> TrajectoryReport:
    """Order-by-order trajectory of rho_k(lam, conj lam)^{-1} with condition
    numbers, and (scalar case, finite log-det integral) the outer-factor
    target 2 pi |G(lam)|^2 it decreases toward."""
    rhos = []
    rho_inv = []
    dets = []
    conds = []
    for node in seq.nodes:
        r = rho(node, lam, "z,zbar")
        rinv = matcore.inv_hpd(r)
        rhos.append(r)
        rho_inv.append(rinv)
        dets.append(float(np.prod(np.linalg.eigvalsh(rinv))))
        conds.append(float(np.linalg.cond(node.S)))
    target = None
    szego_finite = False
    if reference is not None:
        szego = entropy_integral(reference, quad=quad)
        szego_finite = bool(np.isfinite(szego))
        if szego_finite and seq.p == 1:
            modulus = outer_modulus(reference, lam, quad=quad)
            target = float(2.0 * np.pi * modulus**2)
    return TrajectoryReport(
        lam=complex(lam),
        orders=seq.orders,
        rho=tuple(rhos),
        rho_inv=tuple(rho_inv),
        det_rho_inv=tuple(dets),
        conds=tuple(conds),
        target=target,
        szego_finite=szego_finite,
    )


# ---------------------------------------------------------------------------
# appendix-style numerical lemmas


def det_strict_lemma(A, B, tol: float | None = None) -> bool:
    """det(A + B) > det(A) strictly for A > 0, B >= 0, B != 0; equality at B = 0."""
    A = matcore.as_matrix(A)
    B = matcore.as_matrix(B)
    if tol is None:
        tol = matcore.default_tol(A)
    det_a = matcore.cholesky_pd(A).det()
    det_ab = matcore.cholesky_pd(A + B).det()
    if float(np.max(np.abs(B))) <= tol:
        return abs(det_ab - det_a) <= 1e-10 * (1.0 + det_a)
    return det_ab > det_a * (1.0 + 1e-12)


def minkowski_det_margin(B1, B2) -> float:
    """det(B1 + B2)^{1/p} - det(B1)^{1/p} - det(B2)^{1/p}; >= 0 for PSD inputs."""
    B1 = matcore.as_matrix(B1)
    B2 = matcore.as_matrix(B2)
    p = B1.shape[0]

    def root_det(M):
        w = np.clip(np.linalg.eigvalsh(matcore.hermitian_part(M)), 0.0, None)
        return float(np.prod(w)) ** (1.0 / p)

    return root_det(B1 + B2) - root_det(B1) - root_det(B2)


@dataclass(frozen=True)
class ResolventGrowth:
    radii: tuple
    ring_sup: tuple       # sup of ||(I - zA)^{-1}|| on each sampled ring
    running_sup: tuple    # cumulative sup up to each radius
    log_ratio: tuple      # log(running_sup) / r^kappa, a grid lower bound
    kappa: float

    @property
    def appears_bounded(self) -> bool:
        lr = np.asarray(self.log_ratio)
        if lr.size < 2:
            return True
        still_growing = lr[-1] > lr[-2] + 1e-9 and int(np.argmax(lr)) == lr.size - 1
        return not still_growing


def resolvent_growth(
    node: SNode, r_grid, angles: int = 64, kappa: float = 0.5
) -> ResolventGrowth:
    """Sampled growth of ||(I - zA)^{-1}|| on rings |z| = r.

    The sup over a finite grid is a lower bound of the true sup; the
    boundedness verdict for log M(r)/r^kappa is a diagnostic, nothing more.
    Raises :class:`SingularOnGrid` (with the offending point) when a sampled
    z makes I - zA singular.
    """
    A = node.A
    m = A.shape[0]
    thetas = 2.0 * np.pi * np.arange(angles) / angles
    ring_sup = []
    running = []
    best = 0.0
    for r in r_grid:
        worst = 0.0
        for th in thetas:
            z = r * np.exp(1j * th)
            M = np.eye(m) - z * A
            sv = np.linalg.svd(M, compute_uv=False)
            if sv[-1] <= 1e-12 * max(sv[0], 1.0):
                raise SingularOnGrid(z)
            worst = max(worst, 1.0 / float(sv[-1]))
        ring_sup.append(worst)
        best = max(best, worst)
        running.append(best)
    log_ratio = tuple(float(np.log(mv) / r**kappa) for mv, r in zip(running, r_grid))
    return ResolventGrowth(
        radii=tuple(float(r) for r in r_grid),
        ring_sup=tuple(ring_sup),
        running_sup=tuple(running),
        log_ratio=log_ratio,
        kappa=kappa,
    )


@dataclass(frozen=True)
class LimitInequalityReport:
    ks: tuple
    integrals: tuple
    limsup_estimate: float
    extrapolated: float | None
    rhs: float
    inequality_ok: bool
    equality_gap: float | None


def limit_inequality_demo(
    p_seq: Callable[[int], DensityFn],
    f: Callable[[np.ndarray], np.ndarray] | None,
    a: float,
    b: float,
    ks=(64, 128, 256, 512, 1024),
    grid_cells: int = 100,
    slack: float = 1e-3,
) -> LimitInequalityReport:
    """Weighted log-det integrals of an oscillating density family against
    the integral of its weak limit.

    Computes I_k = integral_a^b f ln det P_k dt/(1+t^2) along the schedule,
    identifies the weak-limit density by differencing the cumulative
    integrals of the last P_k, and checks
    limsup I_k <= integral f ln det (weak limit) + slack.
    """
    weight = (lambda t: np.ones_like(t)) if f is None else f
    ks = tuple(int(k) for k in ks)

    def weighted_logdet(P: DensityFn, k: int) -> float:
        # composite GL fine enough for oscillation at frequency ~ k
        panels = max(64, int(4 * k * (b - a) / (2.0 * np.pi)))
        edges = np.linspace(a, b, panels + 1)
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            t, w = quadrature.gauss_legendre(lo, hi, 8)
            ld = P.log_det_at(t)
            if np.any(~np.isfinite(ld)):
                return -np.inf
            total += float(np.sum(w * weight(t) * ld / (1.0 + t * t)))
        return total

    integrals = tuple(weighted_logdet(p_seq(k), k) for k in ks)
    finite = [v for v in integrals if np.isfinite(v)]
    limsup_estimate = max(integrals[-3:]) if len(integrals) >= 3 else max(integrals)

    # weak limit on the grid from the cumulative integrals of the last member;
    # sub-panels per cell resolve the fastest oscillation in the family
    P_last = p_seq(ks[-1])
    edges = np.linspace(a, b, grid_cells + 1)
    mids = (edges[:-1] + edges[1:]) / 2.0
    sub = max(1, int(np.ceil(ks[-1] * (b - a) / grid_cells / 4.0)))
    cell_avgs = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        cell = None
        for slo, shi in zip(np.linspace(lo, hi, sub + 1)[:-1], np.linspace(lo, hi, sub + 1)[1:]):
            t, w = quadrature.gauss_legendre(slo, shi, 8)
            piece = np.einsum("i,i...->...", w / (1.0 + t * t), P_last(t))
            cell = piece if cell is None else cell + piece
        dxi = np.arctan(hi) - np.arctan(lo)
        cell_avgs.append(cell / dxi)
    rhs = 0.0
    for mid, lo, hi, avg in zip(mids, edges[:-1], edges[1:], cell_avgs):
        det = float(np.real(np.linalg.det(avg)))
        if det <= 1e-300:
            rhs = -np.inf
            break
        rhs += float(weight(np.array([mid]))[0]) * np.log(det) * (
            np.arctan(hi) - np.arctan(lo)
        )

    if np.isfinite(rhs):
        inequality_ok = limsup_estimate <= rhs + slack
    else:
        # a vanishing weak limit forces the left side to diverge as well;
        # the inequality then holds by convention
        inequality_ok = True

    extrapolated = None
    equality_gap = None
    if len(finite) >= 2 and np.isfinite(integrals[-1]) and np.isfinite(integrals[-2]):
        extrapolated = 2.0 * integrals[-1] - integrals[-2]
        if np.isfinite(rhs):
            equality_gap = rhs - extrapolated
    return LimitInequalityReport(
        ks=ks,
        integrals=integrals,
        limsup_estimate=float(limsup_estimate),
        extrapolated=extrapolated,
        rhs=float(rhs) if np.isfinite(rhs) else -np.inf,
        inequality_ok=bool(inequality_ok),
        equality_gap=equality_gap,
    )
