"""Acceptance criteria, one test each. A PASS/FAIL line per criterion is
printed in the terminal summary (``pytest tests/test_acceptance.py``)."""

import os
import subprocess
import sys
import time

import numpy as np
import pytest

from complobs import cli
from complobs.measurements import (
    helstrom_binary,
    optimize_min_error,
    p_guess_with,
    p_secure,
    pgm,
    qubit_grid_oracle,
)
from complobs.numerics import LabeledOperator
from complobs.recovery import build_u1, build_u2, build_u3
from complobs.scenarios import counterexample_state, phase_damping_state
from complobs.states import (
    Ensemble,
    basis_state,
    ensemble_for_observable,
    haar_random_state,
    phi_d,
    product,
    random_density,
    stream,
    z_extension,
)
from complobs.theorems import analyze, max_entangled_overlap, theorem1_certificate

from conftest import record_criterion, trine

SWEEP_DIMS = [(2, 2, 2), (2, 4, 2), (3, 3, 3)]
SWEEP_SIZE = 1000
SWEEP_SEED = 2024
TOL = 1e-6


@pytest.fixture(scope="module")
def sweep():
    """Full analysis of every sweep state, reduced to the numbers the
    criteria need."""
    out = {k: [] for k in ("thm1", "thm2", "dual_z", "dual_x", "iso", "zext", "ov_z", "ov_x", "gap")}
    seconds = {}
    for dims in SWEEP_DIMS:
        start = time.perf_counter()
        for i in range(SWEEP_SIZE):
            psi = haar_random_state(dims, SWEEP_SEED, i)
            a = analyze(psi, tol=TOL)
            zr, xr = a.thm1.detail["guess_z"], a.thm1.detail["guess_x"]
            out["thm1"].append(a.thm1.bound + TOL - a.thm1.achieved_distance)
            out["thm2"].append(a.thm2.bound + TOL - a.thm2.achieved_distance)
            out["dual_z"].append(a.duality.margin_z)
            out["dual_x"].append(a.duality.margin_x)
            out["gap"].append(max(zr.gap, xr.gap))
            maps = (build_u1(zr.measurement), build_u2(xr.measurement), build_u3(dims[0]), a.thm1.detail["recovery"])
            out["iso"].append(max(m.isometry_error() for m in maps))
            ens = ensemble_for_observable(z_extension(psi), "Z", ["C", "B"])
            out["zext"].append(abs(optimize_min_error(ens).achieved - 1))
            out["ov_z"].append(a.overlap_z - a.thm1.detail["p_guess_z"])
            out["ov_x"].append(a.overlap_x - a.thm1.detail["p_guess_x"])
        seconds[dims] = time.perf_counter() - start
    return {k: np.array(v) for k, v in out.items()}, seconds


def test_criterion_1_first_bound_on_random_states(sweep):
    data, seconds = sweep
    total = sum(seconds.values())
    ok = bool(np.all(data["thm1"] >= 0)) and total < 300
    record_criterion(
        1, ok, f"{len(data['thm1'])} states, min slack {data['thm1'].min():.3e}, sweep time {total:.0f}s"
    )
    assert ok


def test_criterion_2_second_bound_on_random_states(sweep):
    data, _ = sweep
    ok = bool(np.all(data["thm2"] >= 0))
    record_criterion(2, ok, f"{len(data['thm2'])} states, min slack {data['thm2'].min():.3e}")
    assert ok


def test_criterion_3_exact_recovery():
    errors = {}
    for d in range(2, 6):
        psi = product(phi_d(d), basis_state("R", 2, 0))
        errors[d] = theorem1_certificate(psi).achieved_distance
    ok = all(e < 1e-10 for e in errors.values())
    record_criterion(3, ok, "distances " + ", ".join(f"d={d}: {e:.1e}" for d, e in errors.items()))
    assert ok


def test_criterion_4_counterexample():
    psi = counterexample_state()
    sz = p_secure(psi, "Z", ["R"]).value
    sx = p_secure(psi, "X", ["R"]).value
    best_overlap = max_entangled_overlap(psi.marginal(["A", "B"]))
    sx_cr = p_secure(z_extension(psi), "X", ["C", "R"]).value
    dual = analyze(psi).duality
    ok = (
        abs(sz - 1) < 1e-10
        and abs(sx - 1) < 1e-10
        and best_overlap <= 0.5 + 1e-8
        and sx_cr < 1 - 0.01
        and dual.passes
    )
    record_criterion(
        4,
        ok,
        f"p_secure(Z|R)={sz:.12f} p_secure(X|R)={sx:.12f} max overlap {best_overlap:.10f} "
        f"p_secure(X|CR)={sx_cr:.6f} duality margin {dual.margin:.2e}",
    )
    assert ok


def test_criterion_5_phase_damping():
    worst = {"guess": 0.0, "secure": 0.0, "slack": np.inf}
    for lam in [0.0, 0.25, 0.5, 0.75, 1.0]:
        a = analyze(phase_damping_state(lam))
        worst["guess"] = max(worst["guess"], abs(a.duality.p_guess_x_bc - (1 + lam) / 2))
        worst["secure"] = max(worst["secure"], abs(a.p_secure_z - np.sqrt((1 + lam**2) / 2)))
        worst["slack"] = min(worst["slack"], np.sqrt(1 - lam) - a.thm1.achieved_distance)
    # at lambda = 1 the bound is exactly zero, so allow rounding noise only
    ok = worst["guess"] < 1e-6 and worst["secure"] < 1e-6 and worst["slack"] >= -1e-12
    record_criterion(
        5,
        ok,
        f"max guess error {worst['guess']:.1e}, max secure error {worst['secure']:.1e}, "
        f"min slack to sqrt(1-lambda) {worst['slack']:.2e}",
    )
    assert ok


def _binary_ensemble(index):
    rng = stream(99, index)
    d = int(rng.integers(2, 5))
    rank = int(rng.integers(1, d + 1))
    w = rng.dirichlet([1.0, 1.0])
    members = tuple(LabeledOperator(random_density(d, rng, rank), (("B", d),)) for _ in range(2))
    return Ensemble(w, members)


def test_criterion_6_solver_soundness():
    diff = gap = 0.0
    pgm_ok = True
    for i in range(500):
        ens = _binary_ensemble(i)
        opt = optimize_min_error(ens)
        hel = helstrom_binary(ens).achieved
        diff = max(diff, abs(opt.achieved - hel))
        gap = max(gap, opt.gap)
        pgm_ok &= p_guess_with(pgm(ens), ens) >= hel**2 - 1e-12
    trine_opt = optimize_min_error(trine()).achieved
    trine_grid = qubit_grid_oracle(trine())
    trine_err = max(abs(trine_opt - 2 / 3), abs(trine_opt - trine_grid))
    ok = diff < 1e-8 and gap < 1e-6 and pgm_ok and trine_err < 1e-6
    record_criterion(
        6,
        ok,
        f"max |opt - Helstrom| {diff:.1e}, max gap {gap:.1e}, PGM >= Helstrom^2: {pgm_ok}, "
        f"trine {trine_opt:.10f} vs grid {trine_grid:.10f}",
    )
    assert ok


def test_criterion_7_duality_margins(sweep):
    data, _ = sweep
    mz, mx = data["dual_z"].min(), data["dual_x"].min()
    ok = mz >= -TOL and mx >= -TOL
    record_criterion(7, ok, f"{len(data['dual_z'])} states, min margin Z {mz:.3e}, X {mx:.3e}")
    assert ok


def test_criterion_8_structural_invariants(sweep):
    data, _ = sweep
    iso, zext = data["iso"].max(), data["zext"].max()
    oz, ox = data["ov_z"].min(), data["ov_x"].min()
    ok = iso < 1e-10 and zext < 1e-10 and oz >= -1e-12 and ox >= -1e-12
    record_criterion(
        8,
        ok,
        f"max isometry error {iso:.1e}, max |p_guess(Z|BC) - 1| {zext:.1e}, "
        f"min overlap slack Z {oz:.1e} X {ox:.1e}",
    )
    assert ok


def test_criterion_9_cli_determinism(tmp_path, monkeypatch, capsys):
    outputs, codes = [], []
    env = dict(os.environ)
    for i in range(2):
        path = tmp_path / f"run{i}.csv"
        argv = [sys.executable, "-m", "complobs", "verify-thm1", "--dims", "2,2,2"]
        argv += ["--trials", "20", "--seed", "5", "--out", str(path)]
        env["PYTHONHASHSEED"] = str(i)
        codes.append(subprocess.run(argv, env=env, capture_output=True).returncode)
        outputs.append(path.read_bytes())
    identical = outputs[0] == outputs[1] and codes == [0, 0]

    real = cli.analyze

    def violating(psi, tol, **kw):
        a = real(psi, tol=tol, **kw)
        a.thm1.achieved_distance = a.thm1.bound + 0.5
        a.thm1.holds = False
        return a

    monkeypatch.setattr(cli, "analyze", violating)
    code = cli.main(["verify-thm1", "--trials", "3", "--seed", "5"])
    capsys.readouterr()
    ok = identical and code == cli.EXIT_VIOLATION
    record_criterion(9, ok, f"byte-identical repeat: {identical}, exit code with holds=false rows: {code}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
