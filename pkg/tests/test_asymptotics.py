import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from snode_lab import asymptotics, densities, hankel, sampling, snode, toeplitz
from snode_lab.errors import SingularOnGrid, SzegoViolated


@pytest.fixture(scope="module")
def uniform_family():
    seq, spec = asymptotics.hankel_family_from_density(densities.uniform_density(), 6)
    return seq, spec


@pytest.fixture(scope="module")
def toeplitz_family_fixture():
    rng = np.random.default_rng(42)
    spec = sampling.random_toeplitz_spec(rng, p=2, n=6)
    return asymptotics.toeplitz_family(spec), spec


def test_nested_embed_toeplitz(toeplitz_family_fixture):
    seq, _ = toeplitz_family_fixture
    assert asymptotics.nested_embed_check(seq) <= 1e-14


def test_nested_embed_hankel(uniform_family):
    seq, _ = uniform_family
    assert asymptotics.nested_embed_check(seq) <= 1e-14


def test_nested_embed_detects_permutation(uniform_family, rng):
    seq, spec = uniform_family
    # swap two moment blocks in the middle node only
    blocks = list(spec.leading(3).H)
    blocks[1], blocks[2] = blocks[2], blocks[1]
    broken = hankel.build_hankel_node(hankel.HankelSpec(p=1, n=3, H=tuple(blocks)))
    nodes = list(seq.nodes)
    nodes[2] = broken
    bad = asymptotics.NodeSequence(nodes=tuple(nodes), orders=seq.orders)
    assert asymptotics.nested_embed_check(bad) > 0.1


def test_rho_trajectory_monotone_hankel(uniform_family):
    seq, _ = uniform_family
    for z in [1j, 0.5 + 0.7j, -1.3 + 1.6j]:
        traj = asymptotics.rho_trajectory(seq, z)
        assert traj.monotone_margin() >= -1e-9
        assert traj.reversed_margin() >= -1e-9


def test_rho_trajectory_monotone_toeplitz(toeplitz_family_fixture):
    seq, _ = toeplitz_family_fixture
    for z in [1j, 1.1 + 0.6j]:
        traj = asymptotics.rho_trajectory(seq, z)
        assert traj.monotone_margin() >= -1e-9
        assert traj.reversed_margin() >= -1e-9


def test_rho_trajectory_identity_symbol(rng):
    # scalar spec with identity Toeplitz matrix: s_0 = 1, no off blocks
    spec = toeplitz.ToeplitzSpec(
        p=1, n=5, s=(np.array([[1.0]]),) + tuple(np.zeros((1, 1)) for _ in range(4)),
        nu=np.zeros((1, 1)),
    )
    seq = asymptotics.toeplitz_family(spec)
    traj = asymptotics.rho_trajectory(seq, 1j)
    assert traj.monotone_margin() >= -1e-12


def test_rho_trajectory_single_node(hankel_unit):
    _, node = hankel_unit
    seq = asymptotics.NodeSequence(nodes=(node,), orders=(1,))
    traj = asymptotics.rho_trajectory(seq, 1j)
    assert traj.monotone_margin() == np.inf


def test_frame_quotient_identity_at_equal_levels(uniform_family):
    seq, _ = uniform_family
    q = asymptotics.frame_quotient(seq, 2, 2, 1.3j)
    assert_allclose(q.value, np.eye(2), atol=0)


def test_frame_quotient_product_and_j_expansion(uniform_family, rng):
    seq, _ = uniform_family
    q = asymptotics.frame_quotient(seq, 1, 2, 2j)
    assert q.product_residual <= 1e-9
    for _ in range(10):
        z = complex(rng.uniform(-2, 2), rng.uniform(0.3, 2.0))
        q = asymptotics.frame_quotient(seq, int(rng.integers(0, 3)), int(rng.integers(3, 6)), z)
        assert q.product_residual <= 1e-9
        assert q.j_expansion_min_eig >= -1e-9


def test_quotient_node_is_a_node(uniform_family):
    seq, _ = uniform_family
    node = asymptotics.quotient_node(seq, 1, 4)
    assert snode.verify_identity(node) <= 1e-10


def test_solution_sets_nest_into_smaller_balls(uniform_family, rng):
    # a Weyl value of a deeper node lies in the ball of every shallower one
    seq, _ = uniform_family
    z = 0.4 + 1.1j
    ball_small = snode.matrix_ball(seq.nodes[1], z)
    frm_big = snode.node_frame(seq.nodes[4])
    for _ in range(10):
        pair = sampling.random_constant_pair(rng, 1)
        value = snode.lft(frm_big, pair, z)
        _, norm_u = snode.ball_membership(ball_small, value)
        assert norm_u <= 1 + 1e-8


def test_entropy_integral_examples():
    one = densities.DensityFn(
        "one", lambda t: np.ones_like(t)[:, None, None].astype(complex),
        log_det=lambda t: np.zeros_like(t),
    )
    assert abs(asymptotics.entropy_integral(one)) <= 1e-12
    cauchy = densities.cauchy_density()
    want = -np.pi * np.log(4 * np.pi)
    assert asymptotics.entropy_integral(cauchy) == pytest.approx(want, abs=1e-9)
    assert asymptotics.entropy_integral(densities.uniform_density()) == -np.inf


def test_entropy_integral_with_weight():
    # constant log-density e against the weight 1/(1+t^2): value is pi/2
    const_e = densities.DensityFn(
        "e", lambda t: np.e * np.ones_like(t)[:, None, None].astype(complex),
        log_det=lambda t: np.ones_like(t),
    )
    value = asymptotics.entropy_integral(const_e, f=lambda t: 1.0 / (1.0 + t * t))
    assert value == pytest.approx(np.pi / 2, abs=1e-10)


def test_entropy_integral_vanishing_table_patch():
    ts = np.linspace(-2, 2, 401)
    vals = np.where((ts >= 0) & (ts <= 1), 0.0, 1.0)
    patchy = densities.table_density(ts, vals)
    assert asymptotics.entropy_integral(patchy, a=-2.0, b=2.0) == -np.inf


def test_outer_modulus_examples():
    one = densities.DensityFn(
        "one", lambda t: np.ones_like(t)[:, None, None].astype(complex),
        log_det=lambda t: np.zeros_like(t),
    )
    assert asymptotics.outer_modulus(one, 0.3 + 1.7j) == pytest.approx(1.0, abs=1e-10)
    cauchy = densities.cauchy_density()
    assert asymptotics.outer_modulus(cauchy, 1j) == pytest.approx(
        1 / (2 * np.sqrt(np.pi)), abs=1e-9
    )


def test_outer_modulus_szego_violation():
    with pytest.raises(SzegoViolated):
        asymptotics.outer_modulus(densities.uniform_density(), 1j)


def test_poisson_normalization_random_points(rng):
    from snode_lab.quadrature import integrate_line_graded

    for _ in range(10):
        lam = complex(rng.uniform(-4, 4), rng.uniform(0.2, 3.0))
        value = integrate_line_graded(asymptotics.poisson_weight(lam), 24)
        assert abs(value - np.pi) <= 1e-9


def test_outer_modulus_agrees_with_extremal_factor(hankel_unit):
    _, node = hankel_unit
    dens = asymptotics.extremal_density(node, 1j)
    lam = 0.4 + 0.9j
    om = asymptotics.outer_modulus(dens, lam)
    G = asymptotics.gmu_extremal(node, 1j, lam)
    assert om == pytest.approx(abs(G[0, 0]), abs=1e-6)


def test_gmu_extremal_hand_values(hankel_unit):
    _, node = hankel_unit
    G = asymptotics.gmu_extremal(node, 1j, 1j)
    assert G[0, 0] == pytest.approx(1 / (2 * np.sqrt(np.pi)), abs=1e-12)
    assert 2 * np.pi * abs(G[0, 0]) ** 2 == pytest.approx(0.5, abs=1e-12)


def test_gmu_boundary_factorization(hankel_unit, rng):
    _, node = hankel_unit
    dens = asymptotics.extremal_density(node, 1j)
    for t in rng.uniform(-6, 6, 20):
        G = asymptotics.gmu_extremal(node, 1j, float(t))
        gap = G.conj().T @ G - dens(np.array([t]))[0]
        assert np.max(np.abs(gap)) <= 1e-9


def test_entropy_bound_equality_at_extremal(hankel_unit):
    _, node = hankel_unit
    bound = asymptotics.entropy_bound_check(node, snode.extremal_pair(node, 1j), 1j)
    assert abs(bound.slack) <= 1e-6


def test_entropy_bound_witness_strict(hankel_unit):
    _, node = hankel_unit
    witness = snode.ParamPair.constant(np.array([[1.0]]), np.array([[4.0]]))
    bound = asymptotics.entropy_bound_check(node, witness, 1j)
    assert bound.lhs[0, 0].real == pytest.approx(0.32, abs=1e-6)
    assert bound.slack >= 1e-3


def test_entropy_bound_random_pairs_on_chain_frame(rng):
    spec = sampling.random_toeplitz_spec(rng, p=1, n=2)
    frm = toeplitz.dirac_frame(toeplitz.toeplitz_chain(spec))
    lam = 0.4 + 1.3j
    ext = snode.extremal_pair(frm, lam)
    assert abs(asymptotics.entropy_bound_check(frm, ext, lam).slack) <= 1e-6
    for _ in range(10):
        pair = sampling.random_constant_pair(rng, 1)
        bound = asymptotics.entropy_bound_check(frm, pair, lam)
        assert bound.slack >= -1e-6


def test_convergence_run_exp_sqrt_trend():
    es = densities.exp_sqrt_density()
    seq, _ = asymptotics.hankel_family_from_density(es, 4)
    report = asymptotics.convergence_run(seq, 1j, reference=es)
    assert report.szego_finite
    assert report.target == pytest.approx(2 * np.pi * (np.exp(-np.sqrt(2)) / 4), rel=1e-6)
    assert report.det_positive()
    assert report.psd_nonincreasing_margin() >= -1e-9
    assert report.psd_nondecreasing_margin() >= -1e-9
    assert report.gap_strictly_decreasing()
    assert all(g > 0 for g in report.gaps)


def test_convergence_run_uniform_flags_szego(uniform_family):
    seq, _ = uniform_family
    report = asymptotics.convergence_run(seq, 1j, reference=densities.uniform_density())
    assert not report.szego_finite
    assert report.target is None
    assert report.psd_nonincreasing_margin() >= -1e-9


def test_convergence_run_constant_sequence(hankel_unit):
    _, node = hankel_unit
    seq = asymptotics.NodeSequence(nodes=(node, node, node), orders=(1, 1, 1))
    report = asymptotics.convergence_run(seq, 1j)
    assert max(report.det_rho_inv) - min(report.det_rho_inv) <= 1e-14


def test_det_strict_lemma_examples():
    assert asymptotics.det_strict_lemma(np.eye(2), np.diag([1.0, 0.0]))
    assert asymptotics.det_strict_lemma(np.eye(2), np.zeros((2, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_det_strict_lemma_random(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 5))
    A = sampling.random_hpd(rng, p)
    v = sampling.random_complex(rng, (p, 1))
    assert asymptotics.det_strict_lemma(A, v @ v.conj().T)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_minkowski_superadditivity_random(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 5))
    B1 = sampling.random_hpd(rng, p)
    B2 = sampling.random_hpd(rng, p)
    assert asymptotics.minkowski_det_margin(B1, B2) >= -1e-10


def test_resolvent_growth_zero_matrix():
    node = snode.SNode(p=1, A=np.zeros((1, 1)), S=np.eye(1), Phi1=np.zeros((1, 1)), Phi2=np.eye(1))
    report = asymptotics.resolvent_growth(node, [0.5, 1, 2, 4])
    assert all(v == pytest.approx(1.0) for v in report.running_sup)
    assert report.appears_bounded


def test_resolvent_growth_nilpotent_bounded(hankel_102):
    _, node = hankel_102
    report = asymptotics.resolvent_growth(node, [0.5, 1, 2, 4, 8, 16, 32, 64])
    assert report.appears_bounded


def test_resolvent_growth_detects_toeplitz_pole(toeplitz_unit):
    _, node = toeplitz_unit
    with pytest.raises(SingularOnGrid) as err:
        asymptotics.resolvent_growth(node, [1.0, 2.0, 3.0])
    assert err.value.z == pytest.approx(-2j, abs=1e-9)


def _oscillating_family(k):
    def fn(t):
        return (1.0 + np.sin(k * t) / 2.0)[:, None, None].astype(complex)

    def log_det(t):
        return np.log(1.0 + np.sin(k * t) / 2.0)

    return densities.DensityFn("osc", fn, support=(-5.0, 5.0), log_det=log_det)


def test_limit_inequality_oscillating_matches_period_average():
    report = asymptotics.limit_inequality_demo(_oscillating_family, None, -5.0, 5.0)
    oracle = np.log((1 + np.sqrt(0.75)) / 2) * 2 * np.arctan(5.0)
    assert report.inequality_ok
    assert report.limsup_estimate <= report.rhs + 1e-3
    assert report.extrapolated == pytest.approx(oracle, abs=1e-3)
    # the gap is genuinely strict
    assert report.rhs - report.limsup_estimate > 0.1


def test_limit_inequality_constant_sequence_equality():
    cauchy = densities.cauchy_density()
    bounded = densities.DensityFn(
        "c5", lambda t: cauchy(t), support=(-5.0, 5.0), log_det=cauchy.log_det
    )
    report = asymptotics.limit_inequality_demo(lambda k: bounded, None, -5.0, 5.0)
    assert report.inequality_ok
    assert abs(report.equality_gap) <= 1e-3


def test_limit_inequality_vanishing_convention():
    def family(k):
        def fn(t):
            vals = np.where((t >= 0) & (t <= 1), np.exp(-float(k)), 1.0)
            return vals[:, None, None].astype(complex)

        def log_det(t):
            return np.where((t >= 0) & (t <= 1), -float(k), 0.0)

        return densities.DensityFn("van", fn, support=(-5.0, 5.0), log_det=log_det)

    report = asymptotics.limit_inequality_demo(family, None, -5.0, 5.0)
    assert report.rhs == -np.inf
    assert report.inequality_ok
