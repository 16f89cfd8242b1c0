"""Command-line driver: loads specs/scenarios, runs verification suites and
asymptotic experiments, writes JSON reports and plot-ready CSV.

Commands: verify-toeplitz, verify-hankel, khrushchev, ball, entropy,
asymptotics, demo-appendixB.  Every check row in a report carries the tag
it verifies, the measured value, its tolerance, and pass/fail; the process
exits 0 only when every check passes, 1 on a failed check, 2 on bad input.
All randomness comes from one seeded 64-bit generator (PCG64) recorded in
the report, so identical scenario + seed produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import asymptotics, densities, hankel, matcore, sampling, serialization, snode, toeplitz
from .errors import SnodeLabError


@dataclass
class Scenario:
    command: str
    spec_path: str | None = None
    out_dir: str = "."
    seed: int = 0
    grid: int = 30
    quad: int = 2048
    fmt: str = "json"
    params: dict = field(default_factory=dict)


def bundled_spec_path(name: str) -> Path:
    return Path(str(resources.files("snode_lab").joinpath("data", name)))


def _fmt17(x: float) -> str:
    return format(float(x), ".17g")


def _check(name: str, tag: str, value: float, tol: float, passed: bool | None = None) -> dict:
    value = float(value)
    ok = bool(value <= tol) if passed is None else bool(passed)
    return {"name": name, "tag": tag, "value": value, "tol": float(tol), "passed": ok}


def _load_json(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BadInput(f"cannot read {path}: {exc}") from exc


class BadInput(Exception):
    pass


def _load_spec(path, cls):
    data = _load_json(path)
    try:
        return cls.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise BadInput(f"malformed spec {path}: {exc!r}") from exc


def _complexify(value) -> complex:
    if isinstance(value, (list, tuple)):
        return serialization.complex_from_json(value)
    return complex(value)


# ---------------------------------------------------------------------------
# command handlers; each returns a list of check rows plus extra report data


def _run_verify_toeplitz(sc: Scenario, rng: np.random.Generator):
    spec_path = sc.spec_path or bundled_spec_path("toeplitz_n1.json")
    spec = _load_spec(spec_path, toeplitz.ToeplitzSpec)
    node = toeplitz.build_toeplitz_node(spec)
    checks = []
    extra = {"spec": spec.to_json()}

    res = snode.identity_residual(node)
    checks.append(_check("node identity residual", "c1", res, 1e-12 * (1.0 + matcore.frobenius(node.S))))

    chain = toeplitz.toeplitz_chain(spec)
    j = matcore.signature_j(spec.p)
    cjc = max(matcore.frobenius(C @ j @ C - j) for C in chain.C)
    checks.append(_check("coefficient j-unitarity", "c11", cjc, 1e-9))
    cpos = min(matcore.min_eig_hermitian(C) for C in chain.C)
    checks.append(_check("coefficient positivity", "c11", -cpos, 0.0, passed=cpos > 0))
    rho_norm = max(matcore.spectral_norm(r) for r in chain.rho)
    checks.append(_check("contraction norms", "c20", rho_norm, 1.0 - 1e-12, passed=rho_norm < 1.0))
    tmin = min(matcore.min_eig_hermitian(t) for t in chain.t)
    checks.append(_check("step matrices positive", "c8", -tmin, 0.0, passed=tmin > 0))
    extra["rho"] = [serialization.matrix_to_json(r) for r in chain.rho]

    worst = 0.0
    for _ in range(20):
        lam = complex(rng.uniform(-3, 3), rng.uniform(0.4, 3.0))
        factors = toeplitz.factorize_transfer(spec, lam)
        prod = np.eye(2 * spec.p, dtype=complex)
        for w in factors:
            prod = w @ prod
        direct = snode.transfer_matrix(node, lam)
        worst = max(worst, matcore.frobenius(prod - direct) / (1.0 + matcore.frobenius(direct)))
    checks.append(_check("factor product vs transfer matrix", "c5", worst, 1e-9))

    worst = 0.0
    for _ in range(5):
        z = complex(rng.uniform(-1.5, 1.5), rng.uniform(0.3, 1.5))
        W = toeplitz.dirac_fundamental(chain, z, spec.n)
        K = toeplitz.unitary_K(spec.p)
        via = (1.0 - 1j * z) ** spec.n * K.conj().T @ snode.transfer_matrix(
            node, 1.0 / (2.0 * z)
        ) @ K
        worst = max(worst, matcore.frobenius(W - via) / (1.0 + matcore.frobenius(via)))
    checks.append(_check("recursion vs transfer matrix", "c9", worst, 1e-9))

    split = spec.n // 2
    worst = 0.0
    for _ in range(min(sc.grid, 20)):
        z = complex(rng.uniform(-2, 2), rng.uniform(0.3, 2.0))
        full = toeplitz.frame_toeplitz(chain, spec.n, z)
        head = toeplitz.frame_toeplitz(chain.head(split), split, z)
        tail = toeplitz.frame_toeplitz(chain.shifted(split), spec.n - split, z)
        worst = max(worst, matcore.frobenius(full - head @ tail))
    checks.append(_check("frame composition", "c30", worst, 1e-10))
    return checks, extra


def _run_verify_hankel(sc: Scenario, rng: np.random.Generator):
    spec_path = sc.spec_path or bundled_spec_path("hankel_n1.json")
    spec = _load_spec(spec_path, hankel.HankelSpec)
    node = hankel.build_hankel_node(spec)
    checks = []
    extra = {"spec": spec.to_json()}

    res = snode.identity_residual(node)
    checks.append(_check("node identity residual", "H2", res, 1e-12 * (1.0 + matcore.frobenius(node.S))))

    chain = hankel.hankel_chain(spec)
    J = matcore.exchange_J(spec.p)
    self_null = max(matcore.frobenius(w @ J @ w.conj().T) for w in chain.omega)
    checks.append(_check("omega self-annihilation", "H17", self_null, 1e-10))
    step = 0.0
    for k in range(1, len(chain)):
        step = max(
            step,
            matcore.frobenius(
                1j * chain.omega[k] @ J @ chain.omega[k - 1].conj().T - chain.t[k]
            ),
        )
    checks.append(_check("omega step products", "H17", step, 1e-9))
    w0 = matcore.frobenius(
        chain.omega[0] - np.hstack([np.zeros((spec.p, spec.p)), chain.t[0]])
    )
    checks.append(_check("omega start", "H17", w0, 1e-10))

    worst = 0.0
    for _ in range(20):
        lam = complex(rng.uniform(-3, 3), rng.uniform(0.4, 3.0) * rng.choice([-1.0, 1.0]))
        factors = hankel.hankel_factors(spec, lam)
        prod = np.eye(2 * spec.p, dtype=complex)
        for w in factors:
            prod = w @ prod
        direct = snode.transfer_matrix(node, lam)
        worst = max(worst, matcore.frobenius(prod - direct) / (1.0 + matcore.frobenius(direct)))
    checks.append(_check("factor product vs transfer matrix", "H13-", worst, 1e-9))

    worst = 0.0
    for _ in range(5):
        z = complex(rng.uniform(-2, 2), rng.uniform(0.3, 2.0))
        via = snode.transfer_matrix(node, 1.0 / np.conj(z)).conj().T
        worst = max(worst, matcore.frobenius(via - snode.frame(node, z)))
    checks.append(_check("frame convention", "H7", worst, 1e-12))
    return checks, extra


def _run_khrushchev(sc: Scenario, rng: np.random.Generator):
    p = int(sc.params.get("p", 1))
    length = int(sc.params.get("length", 6))
    count = int(sc.params.get("count", 3))
    checks = []
    pair = snode.ParamPair.constant(np.eye(p, dtype=complex), np.eye(p, dtype=complex))
    zgrid = sampling.random_upper_points(rng, sc.grid)
    worst_overall = 0.0
    for _ in range(count):
        rhos = [sampling.random_contraction(rng, p) for _ in range(length)]
        for split in range(length + 1):
            worst_overall = max(
                worst_overall, toeplitz.khrushchev_check(rhos, split, pair, zgrid)
            )
    checks.append(_check("head/tail composition residual", "c26", worst_overall, 1e-8))
    return checks, {"length": length, "count": count, "p": p}


def _run_ball(sc: Scenario, rng: np.random.Generator):
    spec_path = sc.spec_path or bundled_spec_path("hankel_n1.json")
    spec = _load_spec(spec_path, hankel.HankelSpec)
    node = hankel.build_hankel_node(spec)
    z = _complexify(sc.params.get("z", [0.0, 1.0]))
    ball = snode.matrix_ball(node, z)
    checks = []

    a11 = ball.aleph[: node.p, : node.p]
    checks.append(
        _check("corner block equals reversed rho", "B5", matcore.frobenius(a11 - ball.rho_reversed), 1e-10)
    )
    p = node.p
    a12 = ball.aleph[:p, p:]
    a21 = ball.aleph[p:, :p]
    a22 = ball.aleph[p:, p:]
    schur = a22 - a21 @ np.linalg.solve(a11, a12)
    checks.append(
        _check(
            "schur complement equals rho inverse",
            "B7",
            matcore.frobenius(schur - matcore.inv_hpd(ball.rho_value)),
            1e-9,
        )
    )
    frm = snode.node_frame(node)
    worst_norm = 0.0
    worst_round = 0.0
    for _ in range(sc.grid):
        pair = sampling.random_constant_pair(rng, p)
        value = snode.lft(frm, pair, z)
        u, norm_u = snode.ball_membership(ball, value)
        worst_norm = max(worst_norm, norm_u)
        worst_round = max(worst_round, matcore.frobenius(snode.ball_value(ball, u) - value))
    checks.append(_check("membership contraction norms", "B9", worst_norm, 1.0 + 1e-8))
    checks.append(_check("membership round trip", "B0", worst_round, 1e-10))
    return checks, {"ball": ball.to_json()}


def _run_entropy(sc: Scenario, rng: np.random.Generator):
    spec_path = sc.spec_path or bundled_spec_path("hankel_n1.json")
    spec = _load_spec(spec_path, hankel.HankelSpec)
    node = hankel.build_hankel_node(spec)
    lam = _complexify(sc.params.get("lambda", [0.0, 1.0]))
    checks = []

    ext = snode.extremal_pair(node, lam)
    bound = asymptotics.entropy_bound_check(node, ext, lam)
    checks.append(_check("equality at the extremal pair", "B31", abs(bound.slack), 1e-6))

    from .quadrature import integrate_line_graded

    norm = integrate_line_graded(asymptotics.poisson_weight(lam), 24)
    checks.append(_check("poisson normalization", "As33", abs(norm - np.pi), 1e-9))

    if node.p == 1:
        witness = snode.ParamPair.constant(
            np.eye(1, dtype=complex), 4.0 * np.eye(1, dtype=complex)
        )
        wslack = asymptotics.entropy_bound_check(node, witness, lam).slack
        checks.append(
            _check("strict slack at the witness pair", "B13!", wslack, 1e-3, passed=wslack > 1e-3)
        )
        worst = -np.inf
        for _ in range(int(sc.params.get("pairs", 10))):
            pair = sampling.random_constant_pair(rng, 1)
            slack = asymptotics.entropy_bound_check(node, pair, lam).slack
            worst = max(worst, -slack)
        checks.append(_check("entropy bound over random pairs", "B13!", worst, 1e-6))
    return checks, {"lambda": serialization.complex_to_json(lam)}


def _run_asymptotics(sc: Scenario, rng: np.random.Generator):
    family = sc.params.get("family", "hankel")
    lam = _complexify(sc.params.get("lambda", [0.0, 1.0]))
    max_order = int(sc.params.get("max_order", 4))
    checks = []
    if family == "hankel":
        dens_cfg = sc.params.get("density", {"name": "exp_sqrt"})
        if isinstance(dens_cfg, str):
            dens_cfg = {"name": dens_cfg}
        density = densities.density_by_name(dens_cfg["name"], dens_cfg.get("params"))
        seq, spec = asymptotics.hankel_family_from_density(density, max_order, quad=sc.quad)
        reference = density
    elif family == "toeplitz":
        if sc.spec_path is None:
            raise BadInput("toeplitz family needs --spec")
        spec = _load_spec(sc.spec_path, toeplitz.ToeplitzSpec)
        seq = asymptotics.toeplitz_family(spec, range(1, min(max_order, spec.n) + 1))
        reference = None
    else:
        raise BadInput(f"unknown family {family!r}")

    embed = asymptotics.nested_embed_check(seq)
    checks.append(_check("nesting compressions", "As1", embed, 1e-12))
    traj = asymptotics.rho_trajectory(seq, lam)
    checks.append(_check("monotone growth margin", "R2", -traj.monotone_margin(), 1e-9))
    report = asymptotics.convergence_run(seq, lam, reference=reference, quad=24)
    checks.append(
        _check("inverse determinants positive", "As8+", 0.0, 1.0, passed=report.det_positive())
    )
    if report.target is not None:
        checks.append(
            _check(
                "gap to the outer-factor target shrinks",
                "As9",
                0.0,
                1.0,
                passed=report.gap_strictly_decreasing(),
            )
        )
    rows = _trajectory_rows(report)
    extra = {
        "lambda": serialization.complex_to_json(lam),
        "orders": list(report.orders),
        "target": report.target,
        "szego_finite": report.szego_finite,
        "trajectory": rows,
    }
    return checks, extra


def _trajectory_rows(report: asymptotics.TrajectoryReport) -> list[dict]:
    rows = []
    for i, k in enumerate(report.orders):
        rows.append(
            {
                "k": int(k),
                "rho_inv": serialization.matrix_to_json(report.rho_inv[i]),
                "det_rho_inv": float(report.det_rho_inv[i]),
                "target": report.target,
                "gap": None if report.target is None else float(report.det_rho_inv[i] - report.target),
                "cond": float(report.conds[i]),
            }
        )
    return rows


def export_csv(rows: list[dict], path: Path, p: int) -> None:
    """Trajectory CSV: k, Re/Im of every rho^{-1} entry, det, target, gap, cond.

    Numbers carry 17 significant digits; identical rows always format to
    identical bytes.
    """
    header = ["k"]
    for i in range(p):
        for jj in range(p):
            header.append(f"rho_inv_re_{i + 1}{jj + 1}")
            header.append(f"rho_inv_im_{i + 1}{jj + 1}")
    header += ["det_rho_inv", "target", "gap", "cond"]
    lines = [",".join(header)]
    for row in rows:
        cells = [str(int(row["k"]))]
        mat = row["rho_inv"]
        for i in range(p):
            for jj in range(p):
                cells.append(_fmt17(mat[i][jj][0]))
                cells.append(_fmt17(mat[i][jj][1]))
        cells.append(_fmt17(row["det_rho_inv"]))
        cells.append("" if row["target"] is None else _fmt17(row["target"]))
        cells.append("" if row["gap"] is None else _fmt17(row["gap"]))
        cells.append(_fmt17(row["cond"]))
        lines.append(",".join(cells))
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        from .errors import IoError

        raise IoError(f"cannot write {path}: {exc}") from exc


def _run_demo_appendix_b(sc: Scenario, rng: np.random.Generator):
    checks = []

    def oscillating(k: int) -> densities.DensityFn:
        def fn(t):
            return (1.0 + np.sin(k * t) / 2.0)[:, None, None].astype(complex)

        def log_det(t):
            return np.log(1.0 + np.sin(k * t) / 2.0)

        return densities.DensityFn("oscillating", fn, support=(-5.0, 5.0), log_det=log_det)

    report = asymptotics.limit_inequality_demo(oscillating, None, -5.0, 5.0)
    checks.append(
        _check(
            "limit inequality holds",
            "Ap3",
            report.limsup_estimate - report.rhs,
            1e-3,
        )
    )
    # period-average oracle: mean of ln(1 + sin/2) equals ln((1 + sqrt(3/4))/2)
    c0 = float(np.log((1.0 + np.sqrt(0.75)) / 2.0))
    oracle = c0 * 2.0 * np.arctan(5.0)
    checks.append(
        _check(
            "oscillation limit matches the period average",
            "Ap3",
            abs((report.extrapolated or np.nan) - oracle),
            1e-3,
        )
    )

    sweeps = int(sc.params.get("sweep", 1000))
    mink_fail = 0
    det_fail = 0
    for _ in range(sweeps):
        p = int(rng.integers(1, 4))
        B1 = sampling.random_hpd(rng, p)
        B2 = sampling.random_hpd(rng, p)
        if asymptotics.minkowski_det_margin(B1, B2) < -1e-10:
            mink_fail += 1
        A = sampling.random_hpd(rng, p)
        B = sampling.random_complex(rng, (p, 1))
        if not asymptotics.det_strict_lemma(A, B @ B.conj().T):
            det_fail += 1
    checks.append(_check("determinant superadditivity failures", "Ap21", mink_fail, 0.0, passed=mink_fail == 0))
    checks.append(_check("strict determinant growth failures", "LaDet", det_fail, 0.0, passed=det_fail == 0))
    extra = {
        "integrals": list(report.integrals),
        "limsup": report.limsup_estimate,
        "extrapolated": report.extrapolated,
        "rhs": report.rhs,
        "oracle": oracle,
    }
    return checks, extra


_HANDLERS = {
    "verify-toeplitz": _run_verify_toeplitz,
    "verify-hankel": _run_verify_hankel,
    "khrushchev": _run_khrushchev,
    "ball": _run_ball,
    "entropy": _run_entropy,
    "asymptotics": _run_asymptotics,
    "demo-appendixB": _run_demo_appendix_b,
}


def run_scenario(sc: Scenario) -> tuple[int, Path]:
    """Execute a scenario; returns (exit code, report path)."""
    if sc.command not in _HANDLERS:
        raise BadInput(f"unknown command {sc.command!r}")
    if sc.spec_path is not None and not Path(sc.spec_path).exists():
        raise BadInput(f"spec file {sc.spec_path} does not exist")
    if sc.grid < 1 or sc.quad < 8:
        raise BadInput("grid must be >= 1 and quad >= 8")
    if sc.seed < 0:
        raise BadInput("seed must be a nonnegative integer")
    out_dir = Path(sc.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(sc.seed)
    try:
        checks, extra = _HANDLERS[sc.command](sc, rng)
    except SnodeLabError as exc:
        raise BadInput(f"{sc.command}: {exc}") from exc
    report = {
        "command": sc.command,
        "seed": int(sc.seed),
        "rng": "PCG64",
        "grid": int(sc.grid),
        "quad": int(sc.quad),
        "tolerance_scale": matcore.tolerance_scale(),
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    report.update(extra)
    report_path = out_dir / f"report_{sc.command}.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if not report["passed"]:
        failing = ", ".join(f"{c['tag']} ({c['name']})" for c in checks if not c["passed"])
        print(f"{sc.command}: failed checks: {failing}", file=sys.stderr)
    if sc.command == "asymptotics" and sc.fmt == "csv":
        p = len(report["trajectory"][0]["rho_inv"]) if report["trajectory"] else 1
        export_csv(report["trajectory"], out_dir / "trajectory.csv", p)
    if sc.command == "ball":
        (out_dir / "ball.json").write_text(
            json.dumps(report["ball"], indent=2, sort_keys=True) + "\n"
        )
    return (0 if report["passed"] else 1), report_path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snode-lab",
        description="verification suites and experiments for structured-matrix nodes",
    )
    parser.add_argument("command", nargs="?", choices=sorted(_HANDLERS), help="pipeline to run")
    parser.add_argument("--spec", dest="spec", help="input spec JSON")
    parser.add_argument("--scenario", dest="scenario", help="scenario JSON")
    parser.add_argument("--out", dest="out", default=None, help="output directory (default .)")
    parser.add_argument("--seed", type=int, default=None, help="sweep seed (default 0)")
    parser.add_argument("--grid", type=int, default=None, help="grid points for sweeps (default 30)")
    parser.add_argument("--quad", type=int, default=None, help="quadrature nodes (default 2048)")
    fmt = parser.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv")
    parser.set_defaults(fmt=None)
    return parser


def scenario_from_args(args) -> Scenario:
    """Resolve the effective scenario: flags beat the scenario file, which
    beats the built-in defaults."""
    data: dict = {}
    params: dict = {}
    if args.scenario:
        data = _load_json(args.scenario)
        params = {
            k: v
            for k, v in data.items()
            if k not in {"command", "spec", "seed", "grid", "quad", "out", "format"}
        }

    def pick(flag_value, key, fallback):
        if flag_value is not None:
            return flag_value
        return data.get(key, fallback)

    command = args.command or data.get("command")
    if command is None:
        raise BadInput("no command given (positional argument or scenario file)")
    return Scenario(
        command=command,
        spec_path=pick(args.spec, "spec", None),
        out_dir=pick(args.out, "out", "."),
        seed=int(pick(args.seed, "seed", 0)),
        grid=int(pick(args.grid, "grid", 30)),
        quad=int(pick(args.quad, "quad", 2048)),
        fmt=pick(args.fmt, "format", "json"),
        params=params,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = scenario_from_args(args)
        code, report_path = run_scenario(sc)
    except BadInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{sc.command}: {'ok' if code == 0 else 'FAILED'} ({report_path})")
    return code


if __name__ == "__main__":
    sys.exit(main())
