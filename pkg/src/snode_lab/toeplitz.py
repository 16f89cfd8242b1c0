"""Block Toeplitz S-nodes and their coefficient machinery.

A spec (p, n, s_0..s_{1-n}, nu) assembles the Hermitian block Toeplitz
matrix S(n) = {s_{j-i}} with s_k = s_{-k}*.  The module provides:

* the node {A, S, Pi} satisfying A S - S A* = i Pi J Pi*, where A is block
  lower triangular with i/2 on the diagonal and i below;
* the factorization chain t_k, X_k, Y_k and the derived positive
  coefficients C_k (C_k j C_k = j) with their strict contractions rho_k;
* the fundamental solution W_k(z) of the one-step recursion
  W_{k+1} = (I + i z j C_k) W_k and the frames built from it;
* Taylor-series recovery of the blocks from a Weyl function, and the
  head/tail composition check for split coefficient sequences.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import matcore, serialization
from .errors import (
    DimensionMismatch,
    EvaluationFailure,
    IndexOutOfRange,
    NotContractive,
    NotPositiveDefinite,
    PoleAtLambda,
    PoleAtZ,
    QuadratureNotConverged,
)
from .snode import Frame, ParamPair, SNode, lft, transfer_matrix


@lru_cache(maxsize=16)
def unitary_K(p: int) -> np.ndarray:
    """(1/sqrt 2) [[I, -I], [I, I]]; unitary with K* J K = diag(I, -I)."""
    Ip = np.eye(p, dtype=complex)
    return matcore.block([[Ip, -Ip], [Ip, Ip]]) / np.sqrt(2.0)


@dataclass(frozen=True)
class ToeplitzSpec:
    """Block size p, block order n, blocks s_0, s_{-1}, ..., s_{1-n}, and the
    Hermitian normalizer nu."""

    p: int
    n: int
    s: tuple
    nu: np.ndarray

    def __post_init__(self):
        blocks = tuple(matcore.as_matrix(b) for b in self.s)
        if len(blocks) != self.n:
            raise DimensionMismatch(f"need {self.n} blocks s_0..s_{1 - self.n}, got {len(blocks)}")
        for b in blocks:
            if b.shape != (self.p, self.p):
                raise DimensionMismatch(f"every block must be {self.p} x {self.p}")
        nu = matcore.as_matrix(self.nu)
        if nu.shape != (self.p, self.p):
            raise DimensionMismatch(f"nu must be {self.p} x {self.p}")
        matcore.assert_hermitian(blocks[0])
        matcore.assert_hermitian(nu)
        for b in blocks:
            b.setflags(write=False)
        nu.setflags(write=False)
        object.__setattr__(self, "s", blocks)
        object.__setattr__(self, "nu", nu)

    def matrix(self) -> np.ndarray:
        """Assemble S(n) = {s_{j-i}} with s_k = s_{-k}* for k > 0."""
        p, n = self.p, self.n
        S = np.zeros((n * p, n * p), dtype=complex)
        for i in range(n):
            for j in range(n):
                k = j - i
                blockij = self.s[-k] if k <= 0 else self.s[k].conj().T
                S[i * p : (i + 1) * p, j * p : (j + 1) * p] = blockij
        return S

    def leading(self, k: int) -> "ToeplitzSpec":
        if not 1 <= k <= self.n:
            raise IndexOutOfRange(f"leading order {k} outside 1..{self.n}")
        return ToeplitzSpec(p=self.p, n=k, s=self.s[:k], nu=self.nu)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "n": self.n,
            "s": [serialization.matrix_to_json(b) for b in self.s],
            "nu": serialization.matrix_to_json(self.nu),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ToeplitzSpec":
        return cls(
            p=int(data["p"]),
            n=int(data["n"]),
            s=tuple(serialization.matrix_from_json(b) for b in data["s"]),
            nu=serialization.matrix_from_json(data["nu"]),
        )


def build_toeplitz_node(spec: ToeplitzSpec) -> SNode:
    """The node {A, S(n), [Phi1 Phi2]}: A lower triangular (i/2 on the
    diagonal, i below), Phi1 a column of identities, Phi2 the running sums
    s_0/2 + s_{-1} + ... + i Phi1 nu."""
    p, n = spec.p, spec.n
    Ip = np.eye(p, dtype=complex)
    A = np.zeros((n * p, n * p), dtype=complex)
    for i in range(n):
        for j in range(n):
            if i == j:
                A[i * p : (i + 1) * p, j * p : (j + 1) * p] = 0.5j * Ip
            elif i > j:
                A[i * p : (i + 1) * p, j * p : (j + 1) * p] = 1j * Ip
    Phi1 = np.vstack([Ip] * n)
    partial = np.zeros((n * p, p), dtype=complex)
    running = spec.s[0] / 2.0
    for i in range(n):
        if i > 0:
            running = running + spec.s[i]
        partial[i * p : (i + 1) * p] = running
    Phi2 = partial + 1j * Phi1 @ spec.nu
    return SNode(p=p, A=A, S=spec.matrix(), Phi1=Phi1, Phi2=Phi2)


@dataclass(frozen=True)
class DiracChain:
    """Coefficients C_k > 0 with C_k j C_k = j, their contractions rho_k,
    and (when derived from a spec) the per-step data t_k, X_k, Y_k."""

    p: int
    C: tuple
    rho: tuple
    t: tuple | None = None
    X: tuple | None = None
    Y: tuple | None = None

    def __len__(self) -> int:
        return len(self.C)

    def shifted(self, n: int) -> "DiracChain":
        """The tail chain starting at coefficient n."""
        if not 0 <= n <= len(self):
            raise IndexOutOfRange(f"shift {n} outside 0..{len(self)}")
        return DiracChain(p=self.p, C=self.C[n:], rho=self.rho[n:])

    def head(self, n: int) -> "DiracChain":
        if not 0 <= n <= len(self):
            raise IndexOutOfRange(f"head {n} outside 0..{len(self)}")
        return DiracChain(p=self.p, C=self.C[:n], rho=self.rho[:n])


def halmos(rho: np.ndarray) -> np.ndarray:
    """Positive extension C of a strict contraction rho:

        C = diag((I - rho rho*)^{-1/2}, (I - rho* rho)^{-1/2}) [[I, rho], [rho*, I]]

    satisfying C > 0 and C j C = j."""
    rho = matcore.as_matrix(rho)
    p = rho.shape[0]
    if rho.shape != (p, p):
        raise DimensionMismatch("rho must be square")
    if matcore.spectral_norm(rho) >= 1.0 - 1e-12:
        raise NotContractive(f"spectral norm {matcore.spectral_norm(rho):.6f} not < 1")
    Ip = np.eye(p, dtype=complex)
    D1 = matcore.sqrtm_hpd(matcore.inv_hpd(Ip - rho @ rho.conj().T))
    D2 = matcore.sqrtm_hpd(matcore.inv_hpd(Ip - rho.conj().T @ rho))
    F = matcore.block([[Ip, rho], [rho.conj().T, Ip]])
    D = matcore.block([[D1, np.zeros((p, p))], [np.zeros((p, p)), D2]])
    return matcore.hermitian_part(D @ F)


def contraction_from_dirac(C: np.ndarray) -> np.ndarray:
    """Left inverse of :func:`halmos`: rho = (C_11)^{-1} C_12."""
    C = matcore.as_matrix(C)
    p = C.shape[0] // 2
    return np.linalg.solve(C[:p, :p], C[:p, p:])


def chain_from_contractions(rhos) -> DiracChain:
    """Build a chain directly from contractions via their positive extensions."""
    rhos = tuple(matcore.as_matrix(r) for r in rhos)
    if not rhos:
        raise DimensionMismatch("need at least block size; pass p via a nonempty list")
    p = rhos[0].shape[0]
    C = tuple(halmos(r) for r in rhos)
    return DiracChain(p=p, C=C, rho=rhos)


def empty_chain(p: int) -> DiracChain:
    return DiracChain(p=p, C=(), rho=())


def toeplitz_chain(spec: ToeplitzSpec) -> DiracChain:
    """Factorization data of a positive-definite spec.

    For each order k: t_k and [X_k Y_k] are the bottom block row of
    S(k)^{-1} applied to the unit block column and to [Phi1(k) Phi2(k)];
    then C_k = 2 K* beta(k)* beta(k) K - j with
    beta(k) = t_{k+1}^{-1/2} [X_{k+1} Y_{k+1}], and rho_k = (C_11)^{-1} C_12.

    Raises :class:`NotPositiveDefinite` at the first failing order.
    """
    p, n = spec.p, spec.n
    node = build_toeplitz_node(spec)
    S = node.S
    Pi = node.Pi
    K = unitary_K(p)
    j = matcore.signature_j(p)
    ts, Xs, Ys = [], [], []
    for k in range(1, n + 1):
        Sk = S[: k * p, : k * p]
        try:
            pd = matcore.cholesky_pd(Sk)
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite("leading Toeplitz block not positive definite", order=k) from exc
        sol = pd.solve(Pi[: k * p, :])
        XY = sol[(k - 1) * p :, :]
        Xs.append(XY[:, :p])
        Ys.append(XY[:, p:])
        unit = np.zeros((k * p, p), dtype=complex)
        unit[(k - 1) * p :, :] = np.eye(p)
        ts.append(matcore.hermitian_part(pd.solve(unit)[(k - 1) * p :, :]))
    Cs, rhos = [], []
    for k in range(n):
        t_half = matcore.sqrtm_hpd(ts[k])
        beta = np.linalg.solve(t_half, np.hstack([Xs[k], Ys[k]]))
        C = matcore.hermitian_part(2.0 * K.conj().T @ beta.conj().T @ beta @ K - j)
        Cs.append(C)
        rhos.append(contraction_from_dirac(C))
    return DiracChain(p=p, C=tuple(Cs), rho=tuple(rhos), t=tuple(ts), X=tuple(Xs), Y=tuple(Ys))


def factorize_transfer(spec: ToeplitzSpec, lam: complex) -> list[np.ndarray]:
    """Elementary factors w_k(lam) = I - i (i/2 - lam)^{-1} J [X_k; Y_k]* t_k^{-1} [X_k Y_k].

    Their product w_n ... w_1 equals the node's transfer matrix at lam.
    """
    if abs(0.5j - lam) < 1e-12:
        raise PoleAtLambda("every factor has its pole at lam = i/2")
    chain = toeplitz_chain(spec)
    p = spec.p
    J = matcore.exchange_J(p)
    I2 = np.eye(2 * p, dtype=complex)
    factors = []
    for t, X, Y in zip(chain.t, chain.X, chain.Y):
        XY = np.hstack([X, Y])
        middle = matcore.cholesky_pd(t).solve(XY)
        factors.append(I2 - 1j / (0.5j - lam) * J @ XY.conj().T @ middle)
    return factors


def dirac_fundamental(chain: DiracChain, z: complex, k: int) -> np.ndarray:
    """W_k(z) from W_0 = I and W_{m+1}(z) = (I + i z j C_m) W_m(z)."""
    if not 0 <= k <= len(chain):
        raise IndexOutOfRange(f"step {k} outside 0..{len(chain)}")
    p = chain.p
    j = matcore.signature_j(p)
    W = np.eye(2 * p, dtype=complex)
    for m in range(k):
        W = (np.eye(2 * p, dtype=complex) + 1j * z * j @ chain.C[m]) @ W
    return W


def dirac_fundamental_batch(chain: DiracChain, zs, k: int) -> np.ndarray:
    """W_k at a 1-d array of points, shape (len(zs), 2p, 2p)."""
    if not 0 <= k <= len(chain):
        raise IndexOutOfRange(f"step {k} outside 0..{len(chain)}")
    zs = np.asarray(zs, dtype=complex).ravel()
    p = chain.p
    j = matcore.signature_j(p)
    W = np.broadcast_to(np.eye(2 * p, dtype=complex), (zs.size, 2 * p, 2 * p)).copy()
    for m in range(k):
        step = np.eye(2 * p, dtype=complex) + 1j * zs[:, None, None] * (j @ chain.C[m])
        W = step @ W
    return W


def frame_toeplitz(chain: DiracChain, n: int, z: complex) -> np.ndarray:
    """Frame value (1 - i z/2)^{-n} J j K W_n(-conj(z)/2)* K* j J; identity at n = 0."""
    if not 0 <= n <= len(chain):
        raise IndexOutOfRange(f"order {n} outside 0..{len(chain)}")
    p = chain.p
    if n == 0:
        return np.eye(2 * p, dtype=complex)
    pref = 1.0 - 0.5j * z
    if abs(pref) < 1e-12:
        raise PoleAtZ("frame prefactor vanishes at z = -2i")
    J = matcore.exchange_J(p)
    j = matcore.signature_j(p)
    K = unitary_K(p)
    W = dirac_fundamental(chain, -np.conj(z) / 2.0, n)
    return pref ** (-n) * (J @ j @ K) @ W.conj().T @ (K.conj().T @ j @ J)


def frame_toeplitz_batch(chain: DiracChain, n: int, zs) -> np.ndarray:
    zs = np.asarray(zs, dtype=complex).ravel()
    p = chain.p
    if n == 0:
        return np.broadcast_to(np.eye(2 * p, dtype=complex), (zs.size, 2 * p, 2 * p)).copy()
    pref = 1.0 - 0.5j * zs
    if np.any(np.abs(pref) < 1e-12):
        raise PoleAtZ("frame prefactor vanishes at z = -2i")
    J = matcore.exchange_J(p)
    j = matcore.signature_j(p)
    K = unitary_K(p)
    W = dirac_fundamental_batch(chain, -np.conj(zs) / 2.0, n)
    left = J @ j @ K
    right = K.conj().T @ j @ J
    return pref[:, None, None] ** (-n) * (left @ np.swapaxes(W, 1, 2).conj() @ right)


def dirac_frame(chain: DiracChain, n: int | None = None) -> Frame:
    """Frame closure for the first n coefficients (all of them by default).

    Holomorphic in the closed upper half-plane (the only pole is at -2i),
    which is what the entropy machinery requires on the Toeplitz side.
    """
    order = len(chain) if n is None else n
    p = chain.p
    return Frame(
        p=p,
        fn=lambda z: frame_toeplitz(chain, order, z),
        batch_fn=lambda zs: frame_toeplitz_batch(chain, order, zs),
        pole_clear=lambda ts: (1.0 - 0.5j * np.asarray(ts, dtype=complex)) ** (order * p),
        clear_degree=p * (order + 1),
    )


def frame_from_spec(spec: ToeplitzSpec, z: complex) -> np.ndarray:
    """Same frame computed directly from the assembled matrices:
    J j w_A(n, -1/conj(z))* j J, with the transfer matrix of the built node."""
    p = spec.p
    if abs(z) < 1e-14:
        return np.eye(2 * p, dtype=complex)
    if abs(1.0 - 0.5j * z) < 1e-12:
        raise PoleAtZ("frame prefactor vanishes at z = -2i")
    node = build_toeplitz_node(spec)
    w = transfer_matrix(node, -1.0 / np.conj(z))
    J = matcore.exchange_J(p)
    j = matcore.signature_j(p)
    return (J @ j) @ w.conj().T @ (j @ J)


def spec_frame(spec: ToeplitzSpec) -> Frame:
    return Frame(p=spec.p, fn=lambda z: frame_from_spec(spec, z))


def _cayley_to_plane(zeta: np.ndarray) -> np.ndarray:
    """ zeta in the unit disk -> z = 2i (1 - zeta)/(1 + zeta) in the half-plane."""
    return 2j * (1.0 - zeta) / (1.0 + zeta)


def taylor_recover(phi, count: int, radius: float = 0.5, nodes: int = 256) -> list[np.ndarray]:
    """First ``count`` Taylor coefficients at 0 of g(zeta) = -i phi(2i (1-zeta)/(1+zeta)).

    Coefficient 0 is s_0/2 + i nu and coefficients 1..n-1 reproduce the
    generating blocks s_{-k}.  Uses the trapezoid rule on |zeta| = radius
    (spectrally accurate for analytic integrands) and accepts only when the
    doubled-node rerun agrees to 1e-8.
    """
    if not 0.0 < radius < 1.0:
        raise ValueError("radius must lie in (0, 1)")

    def coefficients(N: int) -> np.ndarray:
        zeta = radius * np.exp(2j * np.pi * np.arange(N) / N)
        zs = _cayley_to_plane(zeta)
        try:
            samples = np.stack([np.asarray(phi(z), dtype=complex) for z in zs])
        except np.linalg.LinAlgError as exc:
            raise EvaluationFailure(f"phi not evaluable on the recovery circle: {exc}") from exc
        if not np.all(np.isfinite(samples)):
            raise EvaluationFailure("phi returned non-finite values on the recovery circle")
        g = -1j * samples
        powers = zeta[:, None] ** (-np.arange(count))[None, :]
        return np.einsum("mk,mij->kij", powers, g) / N

    coarse = coefficients(nodes)
    fine = coefficients(2 * nodes)
    drift = float(np.max(np.abs(fine - coarse)))
    if drift > 1e-8 * (1.0 + float(np.max(np.abs(fine)))):
        raise QuadratureNotConverged(f"taylor coefficients drift {drift:.3e} on node doubling")
    return [fine[k] for k in range(count)]


def khrushchev_check(rhos, n: int, pair: ParamPair, zgrid) -> float:
    """Max residual over the grid of the head/tail composition identity.

    phi is the Weyl function of the full chain with the given pair,
    phi~ the Weyl function of the tail chain (coefficients n, n+1, ...)
    with the same pair, and the identity states

        phi(z) = i (F11 (-i phi~) + F12)(F21 (-i phi~) + F22)^{-1}

    with F the frame of the head chain (first n coefficients).
    """
    chain = chain_from_contractions(rhos) if not isinstance(rhos, DiracChain) else rhos
    if not 0 <= n <= len(chain):
        raise IndexOutOfRange(f"split {n} outside 0..{len(chain)}")
    full = dirac_frame(chain)
    tail = dirac_frame(chain.shifted(n))
    head = dirac_frame(chain.head(n), n)
    Ip = np.eye(chain.p, dtype=complex)
    tail_as_pair = ParamPair.from_functions(
        chain.p,
        r_fn=lambda z: -1j * lft(tail, pair, z),
        q_fn=lambda z: Ip,
    )
    worst = 0.0
    for z in np.asarray(zgrid, dtype=complex).ravel():
        phi_full = lft(full, pair, z)
        composed = lft(head, tail_as_pair, z)
        worst = max(worst, matcore.frobenius(phi_full - composed))
    return worst
