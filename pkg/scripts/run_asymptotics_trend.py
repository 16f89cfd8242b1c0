"""Order-by-order trajectory experiment for a scalar moment family.

Builds the nested moment matrices of a named density, tracks the inverse
characteristic at lambda together with its outer-factor target, and writes
the plot-ready CSV next to a printed summary.

Usage: python3 scripts/run_asymptotics_trend.py [density] [max_order] [out.csv]
"""

import sys
from pathlib import Path

from snode_lab import asymptotics, densities
from snode_lab.cli import _trajectory_rows, export_csv


def main(argv):
    name = argv[0] if argv else "exp_sqrt"
    max_order = int(argv[1]) if len(argv) > 1 else 4
    out = Path(argv[2]) if len(argv) > 2 else Path("trajectory.csv")
    lam = 1j

    density = densities.density_by_name(name)
    seq, spec = asymptotics.hankel_family_from_density(density, max_order)
    report = asymptotics.convergence_run(seq, lam, reference=density)

    print(f"density={name}  lambda={lam}  orders={report.orders}")
    print(f"szego finite: {report.szego_finite}  target: {report.target}")
    for k, det, cond, gap in zip(report.orders, report.det_rho_inv, report.conds, report.gaps):
        gap_txt = "-" if gap is None else f"{gap:.8f}"
        print(f"  n={k}: det rho^-1 = {det:.10f}  gap = {gap_txt}  cond = {cond:.3e}")
    if report.target is not None:
        print(f"gap strictly decreasing: {report.gap_strictly_decreasing()}")

    export_csv(_trajectory_rows(report), out, seq.p)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
