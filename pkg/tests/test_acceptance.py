"""End-to-end acceptance checks.

`run all` is executed twice through the CLI with the shipped default config.
Each criterion is then recomputed from the written CSV tables with the
tolerances pinned below, independently of the tolerances stored in the
config.  One PASS/FAIL line per criterion is printed to the terminal.
"""

import csv
import filecmp
import json
import math
from pathlib import Path

import numpy as np
import pytest

from tubekernels import cli

ROOT = Path(__file__).resolve().parents[1]
CONFIG = ROOT / "configs" / "default.toml"

LAMBDA_TOP = 400.0
TOL_SYMPLECTIC = 1e-10
N_SYMPLECTIC = 100
TOL_GAUSS_ENGINE = 1e-8
N_GAUSS = 50
TOL_A_CHI = 1e-10
TOL_REPRODUCING = 1e-6
TOL_DIAG_RATIO = 0.05
DIAG_RESIDUAL_ORDER = (-0.8, -0.3)
TOL_TRANSVERSE = 0.10
TAU = 0.5
TOL_NEAR_GRAPH = 0.10
N_NEAR_GRAPH = 10
MAX_DECAY_ORDER = -5.0
MIN_CONTROL_ORDER = -1.0
TOL_QSYMBOL = 0.02
TOL_WEYL_EXPONENT = 0.1
TOL_WEYL_COEFFICIENT = 0.15
TOL_HUSIMI = 0.15

RUNTIME_LIMITS = {"symplectic-check": 5.0, "gaussian-check": 30.0, "scaling": 120.0, "weyl": 300.0}


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("acceptance")
    codes = []
    for name in ("first", "second"):
        codes.append(cli.main(["run", "all", str(CONFIG), "-o", str(base / name)]))
    return base / "first", base / "second", codes


def table(run_dir: Path, experiment: str, name: str) -> dict[str, np.ndarray]:
    with open(run_dir / experiment / f"{name}.csv") as fh:
        rows = list(csv.reader(fh))
    cols = {}
    for j, c in enumerate(rows[0]):
        vals = [r[j] for r in rows[1:]]
        try:
            cols[c] = np.array([float(v) for v in vals])
        except ValueError:
            cols[c] = np.array(vals)
    return cols


def report(run_dir: Path, experiment: str) -> dict:
    return json.loads((run_dir / experiment / "report.json").read_text())


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def verdict(capsys, number: int, title: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail}")
    assert ok, detail


def within_runtime(run_dir: Path, experiment: str) -> bool:
    return report(run_dir, experiment)["runtime_s"] < RUNTIME_LIMITS[experiment]


def test_criterion_01_symplectic_identities(runs, capsys):
    first = runs[0]
    t = table(first, "symplectic-check", "matrices")
    ok = (len(t["index"]) == N_SYMPLECTIC and np.all(t["n"] <= 4)
          and np.max(t["reassembly_err"]) <= TOL_SYMPLECTIC
          and np.min(t["min_P_growth"]) >= 1 - TOL_SYMPLECTIC
          and np.max(t["psi_I_err"]) <= TOL_SYMPLECTIC
          and within_runtime(first, "symplectic-check"))
    detail = (f"{int(t['pass'].sum())}/{len(t['pass'])} matrices, max reassembly {np.max(t['reassembly_err']):.2e}, "
              f"min |Pz|/|z| {np.min(t['min_P_growth']):.4f}, max |Psi_I - psi2| {np.max(t['psi_I_err']):.2e}")
    verdict(capsys, 1, "symplectic identities", ok, detail)


def test_criterion_02_gaussian_engine(runs, capsys):
    first = runs[0]
    eng = table(first, "gaussian-check", "engine")
    ach = table(first, "gaussian-check", "a_chi")
    ok = (len(eng["m"]) == N_GAUSS and np.max(eng["m"]) <= 6
          and np.max(eng["rel_err"]) <= TOL_GAUSS_ENGINE
          and set(ach["d"].astype(int)) == {2, 3, 4}
          and np.max(ach["rel_err_vs_pi_pow"]) <= TOL_A_CHI
          and within_runtime(first, "gaussian-check"))
    detail = (f"max engine error {np.max(eng['rel_err']):.2e} over {len(eng['m'])} instances, "
              f"max a_chi error {np.max(ach['rel_err_vs_pi_pow']):.2e}")
    verdict(capsys, 2, "gaussian engine", ok, detail)


def test_criterion_03_reproducing_identity(runs, capsys):
    first = runs[0]
    t = table(first, "gaussian-check", "reproducing")
    rel = np.abs(t["quadrature"] - t["closed_form"]) / t["closed_form"]
    ok = set(t["matrix"]) == {"shear", "rotation"} and np.max(rel) <= TOL_REPRODUCING \
        and within_runtime(first, "gaussian-check")
    verdict(capsys, 3, "reproducing identity", ok, f"max modulus mismatch {np.max(rel):.2e}")


def test_criterion_04_diagonal_scaling(runs, capsys):
    first = runs[0]
    t = table(first, "scaling", "diagonal")
    resid = np.abs(t["ratio"] - 1)
    top = float(t["ratio"][t["lambda"] == LAMBDA_TOP][0])
    order = loglog_slope(t["lambda"], resid)
    lo, hi = DIAG_RESIDUAL_ORDER
    ok = (abs(top - 1) <= TOL_DIAG_RATIO and bool(np.all(np.diff(resid) < 0)) and lo <= order <= hi
          and within_runtime(first, "scaling"))
    detail = f"ratio at 400 = {top:.5f}, |ratio-1| decreasing = {bool(np.all(np.diff(resid) < 0))}, " \
             f"residual order {order:.3f} (window [{lo}, {hi}])"
    verdict(capsys, 4, "diagonal scaling law", ok, detail)


def test_criterion_05_transverse_decay(runs, capsys):
    t = table(runs[0], "scaling", "transverse")
    slope = float(np.polyfit(t["v_t_sq"], t["log_ratio"], 1)[0])
    target = -2 / TAU
    ok = abs(slope - target) <= TOL_TRANSVERSE * abs(target)
    verdict(capsys, 5, "transverse gaussian decay", ok, f"slope {slope:.4f} vs {target}")


def test_criterion_06_near_graph(runs, capsys):
    t = table(runs[0], "scaling", "near_graph")
    ratios = t["ratio"]
    ok = len(ratios) == N_NEAR_GRAPH and bool(np.all(np.abs(ratios - 1) <= TOL_NEAR_GRAPH))
    verdict(capsys, 6, "near-graph shear", ok, f"ratios in [{ratios.min():.4f}, {ratios.max():.4f}]")


def test_criterion_07_rapid_decay(runs, capsys):
    t = table(runs[0], "rapid-decay", "rapid_decay")
    mods = np.hypot(t["re"], t["im"])
    orders = {}
    for C in np.unique(t["C"]):
        sel = t["C"] == C
        orders[float(C)] = loglog_slope(t["lambda"][sel], mods[sel])
    ok = orders[1.0] <= MAX_DECAY_ORDER and orders[0.0] >= MIN_CONTROL_ORDER
    detail = ", ".join(f"C={C:g}: {o:.2f}" for C, o in orders.items())
    verdict(capsys, 7, "rapid decay off the locus", ok, detail)


def test_criterion_08_qsymbol(runs, capsys):
    t = table(runs[0], "qsymbol", "qsymbol")
    sel = t["d"] == 2
    k, norm = t["k_norm"][sel], t["normalized"][sel]
    resid = np.abs(norm - 1)
    top = float(norm[k == 200.0][0])
    ok = list(k) == [50.0, 100.0, 200.0] and abs(top - 1) <= TOL_QSYMBOL and bool(np.all(np.diff(resid) < 0))
    verdict(capsys, 8, "q symbol", ok, f"normalized ratio at |k|=200 {top:.5f}, residuals {np.round(resid, 5)}")


def test_criterion_09_weyl(runs, capsys):
    first = runs[0]
    t = table(first, "weyl", "weyl")
    slope = loglog_slope(t["lambda"], t["weyl_sum"])
    ratio = float(t["ratio"][-1])
    ok = (abs(slope - 1.0) <= TOL_WEYL_EXPONENT and abs(ratio - 1) <= TOL_WEYL_COEFFICIENT
          and within_runtime(first, "weyl"))
    detail = f"exponent {slope:.4f}, coefficient ratio {ratio:.4f} (halved-density ratio {t['ratio_halved_density'][-1]:.4f})"
    verdict(capsys, 9, "poisson weyl law", ok, detail)


def test_criterion_10_husimi(runs, capsys):
    t = table(runs[0], "husimi", "husimi")
    parts, ok = [], True
    for dG in (0, 1):
        sel = (t["d"] == 2) & (t["d_G"] == dG)
        slope = loglog_slope(t["mu"][sel], t["sup"][sel])
        target = 2 - 1 - dG / 2
        ok &= abs(slope - target) <= TOL_HUSIMI
        parts.append(f"d_G={dG}: {slope:.3f} vs {target}")
    verdict(capsys, 10, "husimi sup exponent", bool(ok), ", ".join(parts))


def test_criterion_11_determinism(runs, capsys):
    first, second, codes = runs
    csvs = sorted(p.relative_to(first) for p in first.rglob("*.csv"))
    same = [filecmp.cmp(first / p, second / p, shallow=False) for p in csvs]
    ok = len(csvs) > 0 and all(same) and codes[0] == codes[1]
    verdict(capsys, 11, "determinism", ok, f"{sum(same)}/{len(csvs)} CSV files byte-identical")


def test_exit_code_reflects_criteria(runs):
    first, _, codes = runs
    failed = any(not report(first, p.name)["passed"] for p in first.iterdir())
    assert codes[0] == (cli.EXIT_FAIL if failed else cli.EXIT_OK)
    assert math.isfinite(report(first, "weyl")["runtime_s"])
