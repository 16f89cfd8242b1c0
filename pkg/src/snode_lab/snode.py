"""Finite symmetric S-nodes {A, S, Pi}: identity verification, transfer
matrices and frames, the rho characteristic, property-J parameter pairs,
linear-fractional Weyl functions, Herglotz data extraction, interpolation
residuals, and the Weyl matrix ball.

Conventions used throughout:

* the node identity is  A S - S A* = i Pi J Pi*,  Pi = [Phi1 Phi2],
  J = [[0, I], [I, 0]];
* the transfer matrix is  w_A(lam) = I - i J Pi* S^{-1} (A - lam I)^{-1} Pi;
* the frame is  Frm(z) = w_A(1/conj(z))*, evaluated in the equivalent
  pole-free form  I - i z Pi* (I - z A*)^{-1} S^{-1} Pi J;
* a Weyl function is  phi = i (F11 R + F12 Q)(F21 R + F22 Q)^{-1}  for a
  nonsingular pair {R, Q} with R*R + Q*Q > 0 and R*Q + Q*R >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import matcore, quadrature, serialization
from .errors import (
    DimensionMismatch,
    InvalidPair,
    NotConverged,
    NotInUpperHalfPlane,
    SingularDenominator,
    SingularResolvent,
    Unsupported,
)

_SINGULAR_RCOND = 1e-13


@dataclass(frozen=True)
class SNode:
    """The triple {A, S, Pi = [Phi1 Phi2]} with block size p.

    ``S`` is Hermitian; positive definiteness is required by most
    operations and checked where it is used.
    """

    p: int
    A: np.ndarray
    S: np.ndarray
    Phi1: np.ndarray
    Phi2: np.ndarray

    def __post_init__(self):
        A = matcore.as_matrix(self.A)
        S = matcore.as_matrix(self.S)
        Phi1 = np.asarray(self.Phi1, dtype=complex)
        Phi2 = np.asarray(self.Phi2, dtype=complex)
        m = A.shape[0]
        if A.shape != (m, m) or S.shape != (m, m):
            raise DimensionMismatch("A and S must be square of equal size")
        if Phi1.shape != (m, self.p) or Phi2.shape != (m, self.p):
            raise DimensionMismatch(f"Phi1/Phi2 must have shape {(m, self.p)}")
        for name, arr in (("A", A), ("S", S), ("Phi1", Phi1), ("Phi2", Phi2)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def Pi(self) -> np.ndarray:
        return np.hstack([self.Phi1, self.Phi2])

    @property
    def J(self) -> np.ndarray:
        return matcore.exchange_J(self.p)


def identity_residual(node: SNode) -> float:
    """Frobenius norm of A S - S A* - i Pi J Pi*."""
    Pi = node.Pi
    gap = node.A @ node.S - node.S @ node.A.conj().T - 1j * Pi @ node.J @ Pi.conj().T
    return matcore.frobenius(gap)


def verify_identity(node: SNode) -> float:
    """Relative identity residual ||A S - S A* - i Pi J Pi*|| / (1 + ||S||)."""
    return identity_residual(node) / (1.0 + matcore.frobenius(node.S))


def _solve_checked(M: np.ndarray, rhs: np.ndarray, z: complex) -> np.ndarray:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= _SINGULAR_RCOND * sv[0]:
        raise SingularResolvent(z)
    return np.linalg.solve(M, rhs)


def transfer_matrix(node: SNode, lam: complex) -> np.ndarray:
    """w_A(lam) = I - i J Pi* S^{-1} (A - lam I)^{-1} Pi."""
    m, p = node.m, node.p
    Pi = node.Pi
    resolvent = _solve_checked(node.A - lam * np.eye(m), Pi, lam)
    Sinv_res = matcore.cholesky_pd(node.S).solve(resolvent)
    return np.eye(2 * p, dtype=complex) - 1j * node.J @ Pi.conj().T @ Sinv_res


def frame(node: SNode, z: complex) -> np.ndarray:
    """Frame value  I - i z Pi* (I - z A*)^{-1} S^{-1} Pi J  (equals w_A(1/conj z)*)."""
    m, p = node.m, node.p
    Pi = node.Pi
    SinvPi = matcore.cholesky_pd(node.S).solve(Pi)
    X = _solve_checked(np.eye(m) - z * node.A.conj().T, SinvPi, z)
    return np.eye(2 * p, dtype=complex) - 1j * z * Pi.conj().T @ X @ node.J


def frame_batch(node: SNode, zs) -> np.ndarray:
    """Frame values at a 1-d array of points, shape (len(zs), 2p, 2p)."""
    zs = np.asarray(zs, dtype=complex).ravel()
    m, p = node.m, node.p
    Pi = node.Pi
    SinvPi = matcore.cholesky_pd(node.S).solve(Pi)
    lhs = np.eye(m) - zs[:, None, None] * node.A.conj().T
    X = np.linalg.solve(lhs, np.broadcast_to(SinvPi, (zs.size, m, 2 * p)))
    out = np.eye(2 * p, dtype=complex) - 1j * zs[:, None, None] * (
        Pi.conj().T @ X @ node.J
    )
    return out


@dataclass(frozen=True)
class Frame:
    """Evaluation closure z -> 2p x 2p frame matrix with block accessors.

    ``batch_fn`` (optional) evaluates a 1-d array of points at once.
    ``pole_clear``/``clear_degree`` (optional) describe the rational
    structure of the lower frame blocks: multiplying det(F21 R + F22 Q) by
    ``pole_clear(t)`` yields a polynomial in t of degree at most
    ``clear_degree``, which lets density code locate its spikes exactly.
    """

    p: int
    fn: Callable[[complex], np.ndarray]
    batch_fn: Callable | None = None
    pole_clear: Callable | None = None
    clear_degree: int | None = None

    def __call__(self, z: complex) -> np.ndarray:
        return self.fn(z)

    def blocks(self, z: complex):
        return matcore.blocks2x2(self.fn(z), self.p)

    def batch(self, zs) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex).ravel()
        if self.batch_fn is not None:
            return np.asarray(self.batch_fn(zs))
        return np.stack([np.asarray(self.fn(z)) for z in zs])


def node_frame(node: SNode) -> Frame:
    m, p = node.m, node.p

    def pole_clear(ts):
        lhs = np.eye(m) - np.asarray(ts, dtype=complex)[:, None, None] * node.A.conj().T
        return np.linalg.det(lhs) ** p

    return Frame(
        p=p,
        fn=lambda z: frame(node, z),
        batch_fn=lambda zs: frame_batch(node, zs),
        pole_clear=pole_clear,
        clear_degree=p * (m + 1),
    )


def rho_from_frame(frm: Frame, z: complex) -> np.ndarray:
    """rho(z, conj z) recovered from the frame blocks alone:
    F21(z) F22(z)* + F22(z) F21(z)*."""
    _, _, F21, F22 = frm.blocks(z)
    return matcore.hermitian_part(F21 @ F22.conj().T + F22 @ F21.conj().T)


def as_frame(node_or_frame) -> Frame:
    if isinstance(node_or_frame, Frame):
        return node_or_frame
    return node_frame(node_or_frame)


def rho(node: SNode, z: complex, orientation: str = "z,zbar") -> np.ndarray:
    """The characteristic  i(conj z - z) Phi2* (I - z A*)^{-1} S^{-1} (I - conj(z) A)^{-1} Phi2.

    ``orientation="z,zbar"`` gives the positive-definite value for z in the
    upper half-plane; ``"zbar,z"`` evaluates the same formula at conj(z)
    and is negative definite there.
    """
    if orientation not in ("z,zbar", "zbar,z"):
        raise ValueError("orientation must be 'z,zbar' or 'zbar,z'")
    if np.imag(z) <= 0.0:
        raise NotInUpperHalfPlane(f"z = {z} must lie in the open upper half-plane")
    w = z if orientation == "z,zbar" else np.conj(z)
    V = _solve_checked(np.eye(node.m) - np.conj(w) * node.A, node.Phi2, w)
    M = V.conj().T @ matcore.cholesky_pd(node.S).solve(V)
    out = 1j * (np.conj(w) - w) * M
    return matcore.hermitian_part(out)


@dataclass(frozen=True)
class ParamPair:
    """A parameter pair {R(z), Q(z)}; constant matrices are the common case."""

    p: int
    r_fn: Callable[[complex], np.ndarray]
    q_fn: Callable[[complex], np.ndarray]
    constant_value: tuple[np.ndarray, np.ndarray] | None = None

    @classmethod
    def constant(cls, R, Q) -> "ParamPair":
        R = matcore.as_matrix(R)
        Q = matcore.as_matrix(Q)
        if R.shape != Q.shape or R.shape[0] != R.shape[1]:
            raise DimensionMismatch("R and Q must be square and equal-sized")
        R.setflags(write=False)
        Q.setflags(write=False)
        return cls(
            p=R.shape[0], r_fn=lambda z: R, q_fn=lambda z: Q, constant_value=(R, Q)
        )

    @classmethod
    def from_functions(cls, p: int, r_fn, q_fn) -> "ParamPair":
        return cls(p=p, r_fn=r_fn, q_fn=q_fn)

    @property
    def is_constant(self) -> bool:
        return self.constant_value is not None

    def at(self, z: complex):
        return np.asarray(self.r_fn(z), dtype=complex), np.asarray(self.q_fn(z), dtype=complex)


def pair_defect(pair: ParamPair, z: complex) -> tuple[float, float]:
    """(smallest eig of R*R + Q*Q, smallest eig of R*Q + Q*R) at z."""
    R, Q = pair.at(z)
    gram = R.conj().T @ R + Q.conj().T @ Q
    jform = R.conj().T @ Q + Q.conj().T @ R
    return matcore.min_eig_hermitian(gram), matcore.min_eig_hermitian(jform)


def default_pair_grid() -> np.ndarray:
    """32 validation points on the lines Im z = 0.5 and Im z = 2."""
    xs = np.linspace(-4.0, 4.0, 16)
    return np.concatenate([xs + 0.5j, xs + 2.0j])


def validate_pair(pair: ParamPair, grid=None, tol: float = 1e-9) -> None:
    """Check the nonsingular property-J conditions; raise InvalidPair on failure.

    Constant pairs are checked once; function pairs on the grid, skipping
    points where evaluation fails (isolated singularities are allowed).
    """
    if pair.is_constant:
        points = [1j]
    else:
        points = list(default_pair_grid() if grid is None else np.asarray(grid))
    checked = 0
    for z in points:
        try:
            g, jf = pair_defect(pair, z)
        except np.linalg.LinAlgError:
            continue
        if not np.isfinite(g) or not np.isfinite(jf):
            continue
        checked += 1
        if g <= tol:
            raise InvalidPair(f"R*R + Q*Q not positive definite at z = {z} (min eig {g:.3e})")
        if jf < -tol:
            raise InvalidPair(f"property-J fails at z = {z} (min eig {jf:.3e})")
    if checked == 0:
        raise InvalidPair("pair could not be evaluated at any validation point")


def lft(frm, pair: ParamPair, z: complex) -> np.ndarray:
    """phi(z) = i (F11 R + F12 Q)(F21 R + F22 Q)^{-1} for the frame ``frm``.

    ``frm`` may be a :class:`Frame` or any callable z -> 2p x 2p matrix.
    """
    R, Q = pair.at(z)
    gram = R.conj().T @ R + Q.conj().T @ Q
    if matcore.min_eig_hermitian(gram) <= 1e-12 * (1.0 + matcore.spectral_norm(gram)):
        raise InvalidPair(f"degenerate pair at z = {z}")
    F = np.asarray(frm(z), dtype=complex)
    p = R.shape[0]
    F11, F12, F21, F22 = matcore.blocks2x2(F, p)
    num = F11 @ R + F12 @ Q
    den = F21 @ R + F22 @ Q
    sv = np.linalg.svd(den, compute_uv=False)
    if sv[-1] <= _SINGULAR_RCOND * max(sv[0], 1.0):
        raise SingularDenominator(z)
    return 1j * num @ np.linalg.inv(den)


def weyl_function(frm, pair: ParamPair) -> Callable[[complex], np.ndarray]:
    """Closure z -> phi(z) for a fixed frame and pair."""
    return lambda z: lft(frm, pair, z)


def weyl_values(node: SNode, pair: ParamPair, zs) -> np.ndarray:
    """Vectorized phi over a 1-d array of points (constant pairs only)."""
    if not pair.is_constant:
        raise InvalidPair("batch evaluation requires a constant pair")
    R, Q = pair.constant_value
    zs = np.asarray(zs, dtype=complex).ravel()
    F = frame_batch(node, zs)
    p = node.p
    num = F[:, :p, :p] @ R + F[:, :p, p:] @ Q
    den = F[:, p:, :p] @ R + F[:, p:, p:] @ Q
    # num @ den^{-1} via solve on the plain transposes
    x = np.linalg.solve(np.swapaxes(den, 1, 2), np.swapaxes(num, 1, 2))
    return 1j * np.swapaxes(x, 1, 2)


def stieltjes_density(phi, t: float, eps: float | None = None, rel_tol: float = 1e-6) -> np.ndarray:
    """Boundary density  mu'(t) ~ (phi(t + i eps) - phi(t + i eps)*) / (2 pi i).

    Each stage Richardson-extrapolates the O(eps) term from eps and eps/2.
    With the default ``eps=None`` the ladder 1e-4, 1e-5, 1e-6 runs until two
    consecutive stages agree to ``rel_tol`` relative; an explicit ``eps``
    runs that single stage and accepts on its own extrapolation drift.
    Raises :class:`NotConverged` on drift or when the result is not PSD
    within 1e-9.
    """

    def imag_part(e):
        v = np.asarray(phi(t + 1j * e), dtype=complex)
        return (v - v.conj().T) / (2j * np.pi)

    def stage(e):
        return 2.0 * imag_part(e / 2.0) - imag_part(e)

    if eps is not None:
        v1 = imag_part(eps)
        extrap = 2.0 * imag_part(eps / 2.0) - v1
        scale = 1.0 + float(np.max(np.abs(extrap)))
        if float(np.max(np.abs(extrap - v1))) > 1e3 * rel_tol * scale:
            raise NotConverged(f"stieltjes density unstable at t = {t}")
    else:
        ladder = (1e-4, 1e-5, 1e-6)
        values = [stage(e) for e in ladder]
        extrap = values[-1]
        scale = 1.0 + float(np.max(np.abs(extrap)))
        drifts = [
            float(np.max(np.abs(b - a))) for a, b in zip(values, values[1:])
        ]
        if min(drifts) > rel_tol * scale:
            raise NotConverged(
                f"stieltjes density unstable at t = {t}: ladder drifts {drifts}"
            )
    out = matcore.hermitian_part(extrap)
    low = matcore.min_eig_hermitian(out)
    if low < -1e-9 * scale:
        raise NotConverged(f"density not PSD at t = {t} (min eig {low:.3e})")
    return out


def herglotz_params(phi, eta: float = 2.5e3, rel_tol: float = 1e-6):
    """Estimate (gamma, theta) of the representation
    phi(z) = gamma z + theta + integral (1 + t z)/((t - z)(1 + t^2)) dmu.

    gamma is the limit of Im phi(i eta)/eta, Richardson-extrapolated in
    1/eta and cross-checked at two scales; theta is Re phi(i).
    """

    def gamma_hat(e):
        v = np.asarray(phi(1j * e), dtype=complex)
        return (v - v.conj().T) / (2j * e)

    def extrapolated(e):
        return 2.0 * gamma_hat(2.0 * e) - gamma_hat(e)

    g1 = extrapolated(eta)
    g2 = extrapolated(2.0 * eta)
    scale = 1.0 + float(np.max(np.abs(g2)))
    drift = float(np.max(np.abs(g2 - g1)))
    if drift > rel_tol * scale:
        raise NotConverged("gamma estimate unstable along the imaginary ray")
    gamma = matcore.hermitian_part(g2)
    # clip the small negative eigenvalues left by extrapolation residue
    w, V = np.linalg.eigh(gamma)
    if w.size and w[0] < -max(1e-8 * scale, 5.0 * drift):
        raise NotConverged(f"gamma estimate has negative eigenvalue {w[0]:.3e}")
    gamma = (V * np.clip(w, 0.0, None)) @ V.conj().T
    v = np.asarray(phi(1j), dtype=complex)
    theta = matcore.hermitian_part(v)
    return gamma, theta


def interp_residual(node: SNode, gamma, theta, density, quad: int = 2048):
    """Rebuild (S, Phi1) from interpolation data and report both residuals.

    Given gamma >= 0, theta = theta*, and a density mu'(t) (vectorized
    callable t -> stack of p x p PSD matrices), forms

        S~    = integral (I - tA)^{-1} Phi2 mu'(t) Phi2* (I - tA*)^{-1} dt + F F*,
        Phi1~ = -i integral (A (I - tA)^{-1} + t/(1+t^2) I) Phi2 mu'(t) dt
                + i (Phi2 theta + F gamma^{1/2}),

    where A F = Phi2 gamma^{1/2}, and returns (||S - S~||, ||Phi1 - Phi1~||).
    Requires A invertible; raises :class:`Unsupported` otherwise.
    """
    m, p = node.m, node.p
    sv = np.linalg.svd(node.A, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1.0):
        raise Unsupported("A has (numerically) a zero eigenvalue")
    gamma = matcore.hermitian_part(np.asarray(gamma, dtype=complex))
    theta = matcore.hermitian_part(np.asarray(theta, dtype=complex))
    gamma_half = matcore.sqrtm_psd(gamma)
    F = np.linalg.solve(node.A, node.Phi2 @ gamma_half)

    def pieces(ts):
        ts = np.asarray(ts, dtype=float)
        mu = np.asarray(density(ts), dtype=complex)
        lhs = np.eye(m) - ts[:, None, None] * node.A
        V = np.linalg.solve(lhs, np.broadcast_to(node.Phi2, (ts.size, m, p)))
        Vmu = V @ mu
        s_terms = Vmu @ np.swapaxes(V, 1, 2).conj()
        tail = (ts / (1.0 + ts * ts))[:, None, None] * np.broadcast_to(
            node.Phi2, (ts.size, m, p)
        )
        phi_terms = -1j * ((node.A @ V + tail) @ mu)
        return np.concatenate(
            [s_terms.reshape(ts.size, -1), phi_terms.reshape(ts.size, -1)], axis=1
        )

    flat = quadrature.integrate_with_check(
        quadrature.integrate_line, pieces, quad, 1e-8, what="interpolation integrals"
    )
    S_mu = flat[: m * m].reshape(m, m)
    Phi1_mu = flat[m * m :].reshape(m, p)
    S_tilde = S_mu + F @ F.conj().T
    Phi1_tilde = Phi1_mu + 1j * (node.Phi2 @ theta + F @ gamma_half)
    return (
        matcore.frobenius(node.S - S_tilde),
        matcore.frobenius(node.Phi1 - Phi1_tilde),
    )


@dataclass(frozen=True)
class MatrixBall:
    """Weyl disk at a point: {center - L u Rr : ||u|| <= 1} with L, Rr HPD."""

    z: complex
    center: np.ndarray
    left_radius: np.ndarray
    right_radius: np.ndarray
    aleph: np.ndarray
    rho_value: np.ndarray      # rho(z, conj z) > 0
    rho_reversed: np.ndarray   # rho(conj z, z) < 0

    @property
    def p(self) -> int:
        return self.center.shape[0]

    def to_json(self) -> dict:
        return {
            "z": serialization.complex_to_json(self.z),
            "center": serialization.matrix_to_json(self.center),
            "left_radius": serialization.matrix_to_json(self.left_radius),
            "right_radius": serialization.matrix_to_json(self.right_radius),
            "rho": serialization.matrix_to_json(self.rho_value),
            "rho_bar": serialization.matrix_to_json(self.rho_reversed),
        }


def matrix_ball(node: SNode, z: complex) -> MatrixBall:
    """The value set of all Weyl functions at z, as a matrix ball.

    The coefficient matrix is aleph = (Frm^{-1})* J Frm^{-1} with
    Frm^{-1} = J Frm(conj z)* J; the center is i (-rho(conj z, z))^{-1}
    aleph_12, and the radii are the inverse Hermitian square roots of
    -rho(conj z, z) and rho(z, conj z).
    """
    J = node.J
    F_bar = frame(node, np.conj(z))
    finv = J @ F_bar.conj().T @ J
    aleph = finv.conj().T @ J @ finv
    rho_val = rho(node, z, "z,zbar")
    rho_rev = rho(node, z, "zbar,z")
    p = node.p
    a12 = aleph[:p, p:]
    neg_rev = matcore.hermitian_part(-rho_rev)
    center = 1j * matcore.inv_hpd(neg_rev) @ a12
    left = matcore.sqrtm_hpd(matcore.inv_hpd(neg_rev))
    right = matcore.sqrtm_hpd(matcore.inv_hpd(rho_val))
    return MatrixBall(
        z=complex(z),
        center=center,
        left_radius=left,
        right_radius=right,
        aleph=aleph,
        rho_value=rho_val,
        rho_reversed=rho_rev,
    )


def ball_membership(ball: MatrixBall, value) -> tuple[np.ndarray, float]:
    """Contraction u with value = center - L u Rr, and its spectral norm.

    u = (-rho_rev)^{-1/2} (rho_rev value + i aleph_12) rho^{1/2}.
    """
    value = matcore.as_matrix(value)
    p = ball.p
    a12 = ball.aleph[:p, p:]
    neg_rev_half_inv = matcore.sqrtm_hpd(matcore.inv_hpd(matcore.hermitian_part(-ball.rho_reversed)))
    rho_half = matcore.sqrtm_hpd(matcore.hermitian_part(ball.rho_value))
    u = neg_rev_half_inv @ (ball.rho_reversed @ value + 1j * a12) @ rho_half
    return u, matcore.spectral_norm(u)


def ball_value(ball: MatrixBall, u) -> np.ndarray:
    """Point of the ball for a given contraction: center - L u Rr."""
    u = matcore.as_matrix(u)
    return ball.center - ball.left_radius @ u @ ball.right_radius


def extremal_pair(node_or_frame, lam: complex) -> ParamPair:
    """The constant pair R = Frm22(lam)*, Q = Frm21(lam)*.

    It is the unique parameter achieving entropy equality at lam and
    satisfies R*Q + Q*R = rho(lam, conj lam) > 0.
    """
    frm = as_frame(node_or_frame)
    _, _, F21, F22 = frm.blocks(lam)
    return ParamPair.constant(F22.conj().T, F21.conj().T)


def node_to_json(node: SNode) -> dict:
    return {
        "p": node.p,
        "A": serialization.matrix_to_json(node.A),
        "S": serialization.matrix_to_json(node.S),
        "Phi1": serialization.matrix_to_json(node.Phi1),
        "Phi2": serialization.matrix_to_json(node.Phi2),
    }


def node_from_json(data: dict) -> SNode:
    return SNode(
        p=int(data["p"]),
        A=serialization.matrix_from_json(data["A"]),
        S=serialization.matrix_from_json(data["S"]),
        Phi1=serialization.matrix_from_json(data["Phi1"]),
        Phi2=serialization.matrix_from_json(data["Phi2"]),
    )
