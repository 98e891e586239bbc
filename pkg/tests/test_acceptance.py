"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed as they are produced and again in the terminal
summary. Thresholds live in the constants below and are not tuned to the
results; a criterion that the implementation does not meet fails here.
"""

import time

import numpy as np
import pytest

from cdeinv import (
    DomainViolation,
    IntegratorConfig,
    ObservationGrid,
    SignatureConfig,
    evaluate,
    flow,
    flow_with_sensitivity,
    from_slopes,
    make_cev,
    make_cir,
    make_constant,
    path_error,
    propagate,
    slope_error,
    slopes,
    uniformity_ratio,
    validate,
)
from cdeinv import newton, signature
from cdeinv.experiment import ExperimentSpec, invert, load_preset, preset_names, run_experiment, simulate
from cdeinv.fields import VectorFieldModel

from conftest import ACCEPTANCE, CEV_PARAMS, CIR_PARAMS

# criterion 1: closed-form oracle
C1_SIG_PATH_TOL = 1e-6
C1_SIG_ITERATIONS = 5
C1_QUAD_NODES = 64
C1_NEWTON_SLOPE_TOL = 1e-10
C1_NEWTON_SWEEPS = 50
C1_RUNTIME = 5.0
# criterion 2: sensitivity against central differences
C2_FD_STEP = 1e-5
C2_REL_TOL = 1e-4
C2_PROBES = 20
C2_RUNTIME = 2.0
# criterion 3: telescoping identity, tolerance grows linearly in k
C3_TOL_PER_K = 1e-12
# criterion 4: CIR comparison over 10 seeds
SEEDS = [1 + 100 * i for i in range(10)]
C4_SNAPSHOTS = (1, 2, 3, 300)
C4_CONVERGENCE_MIN_RUNS = 9
C4_SIG_UNIFORMITY_MAX = 3.0
C4_NEWTON_UNIFORMITY_MIN = 2.0
C4_UNIFORMITY_MIN_RUNS = 8
C4_RUNTIME = 600.0
# criterion 5: growth from N=25 to N=50
C5_SHORT_N = 25
C5_SIG_GROWTH_MAX = 2.0
C5_NEWTON_GROWTH_MIN = 1.5
C5_MIN_RUNS = 8
C5_RUNTIME = 600.0
# criterion 6: CEV desk scale
C6_SNAPSHOTS = (1, 2, 10, 100)
C6_RUNTIME = 600.0
# criterion 7: metric consistency
C7_PAIRS = 100
C7_DENSE_POINTS = 10_000
C7_TOL = 1e-12
# criterion 9: "exactly" for the constant field, read as exact up to roundoff:
# at most this many ulps of the path magnitude per interval
C9_ULPS_PER_INTERVAL = 8


def record(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE[number] = line
    print(line)


def count(flags) -> int:
    return int(sum(bool(f) for f in flags))


def telescoping_defect(model, obs, trace, integ_cfg, nodes) -> float:
    """max over iterations and k of |delta * sum_{j<=k} dc_j - delta * r_k| / k.

    The corrections r are recomputed from the recorded iterates, independently
    of the update that produced the next iterate.
    """
    worst = 0.0
    k = np.arange(1, obs.n_intervals + 1)
    for (n0, c0), (n1, c1) in zip(
        zip(trace.iterations, trace.slope_history), zip(trace.iterations[1:], trace.slope_history[1:])
    ):
        if n1 != n0 + 1:
            continue
        knots = propagate(model, obs.initial_value, c0, obs.delta, integ_cfg).knots
        r = np.array(
            [signature.tree_correction(model, knots[j], obs.values[j], obs.delta, nodes) for j in k]
        )
        lhs = obs.delta * np.cumsum(c1 - c0, axis=0)
        defect = np.max(np.abs(lhs - obs.delta * r), axis=1) / k
        worst = max(worst, float(defect.max()))
    return worst


# shared runs ------------------------------------------------------------------


@pytest.fixture(scope="module")
def geometric_run():
    spec = load_preset("geometric")
    t0 = time.perf_counter()
    sim = simulate(spec)
    model = spec.build_model()
    sig_cfg = SignatureConfig(
        quadrature_nodes=C1_QUAD_NODES, max_iterations=C1_SIG_ITERATIONS, slope_change_tolerance=0.0
    )
    sig = signature.reconstruct(model, sim.observations, sig_cfg, spec.integrator)
    nr = newton.reconstruct(model, sim.observations, C1_NEWTON_SWEEPS, spec.newton, spec.integrator)
    runtime = time.perf_counter() - t0
    return dict(spec=spec, sim=sim, model=model, sig=sig, newton=nr, sig_cfg=sig_cfg, runtime=runtime)


def _comparison_runs(preset: str):
    base = load_preset(preset)
    runs = []
    t0 = time.perf_counter()
    for seed in SEEDS:
        spec = base.replace(seed=seed)
        sim = simulate(spec)
        runs.append(dict(spec=spec, sim=sim, results=invert(spec, sim.observations, sim.control)))
    return runs, time.perf_counter() - t0


@pytest.fixture(scope="module")
def cir_runs():
    return _comparison_runs("cir")


@pytest.fixture(scope="module")
def cev_runs():
    return _comparison_runs("cev_desk")


def comparative_checks(runs, snapshots):
    n_mid, n_last = snapshots[-2], snapshots[-1]
    converge, sig_uniform, newton_growing, failures = [], [], [], []
    for run in runs:
        res = run["results"]
        failures += [f"{m}@seed{run['sim'].seed_used}" for m, r in res.items() if r.failed]
        # Newton reports unconverged intervals as flags rather than failures
        failures += [f"newton@seed{run['sim'].seed_used} interval {k} flagged" for k in res["newton"].trace.flags]
        sig, nr = res["signature"].reports, res["newton"].reports
        converge.append(sig[n_last].sup_error < sig[n_mid].sup_error)
        sig_uniform.append(uniformity_ratio(sig[n_last]) <= C4_SIG_UNIFORMITY_MAX)
        newton_growing.append(uniformity_ratio(nr[n_last]) >= C4_NEWTON_UNIFORMITY_MIN)
    return count(converge), count(sig_uniform), count(newton_growing), failures


# criteria ---------------------------------------------------------------------


def test_criterion_1_closed_form_oracle(geometric_run):
    obs = geometric_run["sim"].observations
    y = obs.values[:, 0]
    oracle = np.log(y[1:] / y[:-1]) / obs.delta
    oracle_path = from_slopes([0.0], obs.delta, oracle)
    sig_err = path_error(oracle_path, geometric_run["sig"].path_at(C1_SIG_ITERATIONS)).sup_error
    nr_err = float(np.max(np.abs(geometric_run["newton"].slopes_at(C1_NEWTON_SWEEPS)[:, 0] - oracle)))
    runtime = geometric_run["runtime"]
    passed = sig_err < C1_SIG_PATH_TOL and nr_err < C1_NEWTON_SLOPE_TOL and runtime < C1_RUNTIME
    record(
        1,
        "geometric closed-form oracle",
        passed,
        f"signature sup error at n={C1_SIG_ITERATIONS}: {sig_err:.2e} < {C1_SIG_PATH_TOL:g}; "
        f"Newton slope error at n={C1_NEWTON_SWEEPS}: {nr_err:.2e} < {C1_NEWTON_SLOPE_TOL:g}; "
        f"runtime {runtime:.2f}s < {C1_RUNTIME:g}s",
    )
    assert passed, ACCEPTANCE[1]


def test_criterion_2_sensitivity():
    rng = np.random.default_rng(2)
    cfg = IntegratorConfig("rk4", 50)
    cases = [
        (make_cir(**CIR_PARAMS), 0.1, lambda: rng.uniform(0.01, 0.1)),
        (make_cev(**CEV_PARAMS), 0.01, lambda: rng.uniform(0.5, 2.0)),
    ]
    worst = 0.0
    t0 = time.perf_counter()
    for model, delta, draw_y in cases:
        for _ in range(C2_PROBES):
            y, c = np.array([draw_y()]), np.array([rng.uniform(-3.0, 3.0)])
            g = flow_with_sensitivity(model, y, c, delta, cfg).sensitivity[0, 0]
            plus = flow(model, y, c + C2_FD_STEP, delta, cfg).terminal_value[0]
            minus = flow(model, y, c - C2_FD_STEP, delta, cfg).terminal_value[0]
            fd = (plus - minus) / (2 * C2_FD_STEP)
            worst = max(worst, abs(g - fd) / abs(fd))
    runtime = time.perf_counter() - t0
    passed = worst < C2_REL_TOL and runtime < C2_RUNTIME
    record(
        2,
        "sensitivity vs central differences (CIR, CEV)",
        passed,
        f"worst relative error over {2 * C2_PROBES} probes {worst:.2e} < {C2_REL_TOL:g}; "
        f"runtime {runtime:.2f}s < {C2_RUNTIME:g}s",
    )
    assert passed, ACCEPTANCE[2]


def test_criterion_3_telescoping(geometric_run, cir_runs):
    defects = [
        telescoping_defect(
            geometric_run["model"],
            geometric_run["sim"].observations,
            geometric_run["sig"],
            geometric_run["spec"].integrator,
            C1_QUAD_NODES,
        )
    ]
    runs, _ = cir_runs
    for run in runs:
        spec = run["spec"]
        defects.append(
            telescoping_defect(
                spec.build_model(),
                run["sim"].observations,
                run["results"]["signature"].trace,
                spec.integrator,
                spec.signature.quadrature_nodes,
            )
        )
    worst = max(defects)
    passed = worst <= C3_TOL_PER_K
    record(
        3,
        "telescoping identity on every signature iteration",
        passed,
        f"worst defect per k over {len(defects)} runs {worst:.2e} <= {C3_TOL_PER_K:g}",
    )
    assert passed, ACCEPTANCE[3]


def test_criterion_4_cir_comparison(cir_runs):
    runs, runtime = cir_runs
    conv, sig_u, nr_u, failures = comparative_checks(runs, C4_SNAPSHOTS)
    passed = (
        conv >= C4_CONVERGENCE_MIN_RUNS
        and sig_u >= C4_UNIFORMITY_MIN_RUNS
        and nr_u >= C4_UNIFORMITY_MIN_RUNS
        and runtime < C4_RUNTIME
    )
    record(
        4,
        "CIR comparison over 10 seeds",
        passed,
        f"(a) signature n=300 below n=3 in {conv}/10, need {C4_CONVERGENCE_MIN_RUNS}; "
        f"(b) signature uniformity <= {C4_SIG_UNIFORMITY_MAX:g} in {sig_u}/10 and "
        f"Newton uniformity >= {C4_NEWTON_UNIFORMITY_MIN:g} in {nr_u}/10, need {C4_UNIFORMITY_MIN_RUNS}; "
        f"failed or flagged {failures or 'none'}; runtime {runtime:.1f}s < {C4_RUNTIME:g}s",
    )
    assert passed, ACCEPTANCE[4]


def test_criterion_5_uniform_in_n(cir_runs):
    runs, long_runtime = cir_runs
    sig_ok, nr_ok = [], []
    t0 = time.perf_counter()
    for run in runs:
        spec, sim = run["spec"], run["sim"]
        # the N=25 problem is the prefix of the N=50 one: same slopes, same observations
        short_obs = ObservationGrid(spec.delta, sim.observations.values[: C5_SHORT_N + 1])
        short_truth = from_slopes([0.0], spec.delta, slopes(sim.control)[:C5_SHORT_N])
        short = invert(spec.replace(n_intervals=C5_SHORT_N), short_obs, short_truth)
        n = spec.iteration_counts[-1]
        for method, sink, check in (
            ("signature", sig_ok, lambda g: g <= C5_SIG_GROWTH_MAX),
            ("newton", nr_ok, lambda g: g >= C5_NEWTON_GROWTH_MIN),
        ):
            e_long = run["results"][method].reports[n].sup_error
            e_short = short[method].reports[n].sup_error
            growth = e_long / e_short if e_short > 0 else (1.0 if e_long == 0 else np.inf)
            sink.append(check(growth))
    runtime = long_runtime + time.perf_counter() - t0
    passed = count(sig_ok) >= C5_MIN_RUNS and count(nr_ok) >= C5_MIN_RUNS and runtime < C5_RUNTIME
    record(
        5,
        "error growth from N=25 to N=50",
        passed,
        f"signature growth <= {C5_SIG_GROWTH_MAX:g} in {count(sig_ok)}/10, "
        f"Newton growth >= {C5_NEWTON_GROWTH_MIN:g} in {count(nr_ok)}/10, need {C5_MIN_RUNS}; "
        f"runtime {runtime:.1f}s < {C5_RUNTIME:g}s",
    )
    assert passed, ACCEPTANCE[5]


def test_criterion_6_cev_desk(cev_runs):
    runs, runtime = cev_runs
    assert tuple(runs[0]["spec"].iteration_counts) == C6_SNAPSHOTS
    conv, sig_u, nr_u, failures = comparative_checks(runs, C6_SNAPSHOTS)
    passed = (
        conv >= C4_CONVERGENCE_MIN_RUNS
        and sig_u >= C4_UNIFORMITY_MIN_RUNS
        and nr_u >= C4_UNIFORMITY_MIN_RUNS
        and runtime < C6_RUNTIME
    )
    record(
        6,
        "CEV desk scale (delta=0.01, N=200) over 10 seeds",
        passed,
        f"(a) signature n=100 below n=10 in {conv}/10, need {C4_CONVERGENCE_MIN_RUNS}; "
        f"(b) signature uniformity <= {C4_SIG_UNIFORMITY_MAX:g} in {sig_u}/10 and "
        f"Newton uniformity >= {C4_NEWTON_UNIFORMITY_MIN:g} in {nr_u}/10, need {C4_UNIFORMITY_MIN_RUNS}; "
        f"failed or flagged {failures or 'none'}; runtime {runtime:.1f}s < {C6_RUNTIME:g}s",
    )
    assert passed, ACCEPTANCE[6]


def test_criterion_7_metric_consistency():
    rng = np.random.default_rng(7)
    # N divides 10^4 - 1, so a 10^4-point uniform sample contains every knot
    divisors = [9, 11, 33, 99, 101]
    worst_dense, worst_slope = 0.0, 0.0
    for _ in range(C7_PAIRS):
        n = int(rng.choice(divisors))
        delta = float(rng.uniform(0.01, 0.5))
        ca, cb = rng.normal(scale=5.0, size=n), rng.normal(scale=5.0, size=n)
        a, b = from_slopes([0.0], delta, ca), from_slopes([0.0], delta, cb)
        ts = np.linspace(0.0, a.final_time, C7_DENSE_POINTS)
        dense = float(np.max(np.abs(evaluate(a, ts) - evaluate(b, ts))))
        report = path_error(a, b)
        worst_dense = max(worst_dense, abs(report.sup_error - dense))
        worst_slope = max(worst_slope, abs(report.sup_error - slope_error(ca, cb, delta)))
    passed = worst_dense <= C7_TOL and worst_slope <= C7_TOL
    record(
        7,
        "metric consistency on 100 random pairs",
        passed,
        f"knot max vs dense sup {worst_dense:.1e}, path vs slope error {worst_slope:.1e}, tolerance {C7_TOL:g}",
    )
    assert passed, ACCEPTANCE[7]


@pytest.mark.slow
def test_criterion_8_determinism(tmp_path):
    differing = []
    for name in preset_names():
        spec = load_preset(name)
        _, first = run_experiment(spec, tmp_path / name / "a")
        _, second = run_experiment(spec, tmp_path / name / "b")
        files_a = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(second) for p in second.rglob("*") if p.is_file())
        if files_a != files_b:
            differing.append(f"{name}: file sets differ")
            continue
        for rel in files_a:
            # wall-clock runtimes are kept apart from the deterministic outputs
            if rel.name == "timings.json":
                continue
            if (first / rel).read_bytes() != (second / rel).read_bytes():
                differing.append(f"{name}/{rel}")
    passed = not differing
    record(
        8,
        "bitwise-identical reruns of every bundled preset",
        passed,
        f"presets {preset_names()}; differing files: {differing or 'none'}",
    )
    assert passed, ACCEPTANCE[8]


def test_criterion_9_degenerate_guards():
    notes = []
    # constant field: both methods exact after one step
    spec = ExperimentSpec(
        model={"name": "constant", "params": {"matrix": [[1.0]]}},
        delta=0.1,
        n_intervals=20,
        y0=[0.5],
        seed=5,
        iteration_counts=[1],
    )
    sim = simulate(spec)
    results = invert(spec, sim.observations, sim.control)
    const_err = max(r.reports[1].sup_error for r in results.values())
    scale = 1.0 + float(np.abs(sim.control.knot_values).max())
    tol = C9_ULPS_PER_INTERVAL * spec.n_intervals * np.finfo(float).eps * scale
    notes.append(f"constant field n=1 error {const_err:.1e} <= {tol:.1e}")
    ok_const = const_err <= tol

    # f(y) = diag(y_1, 1) loses rank where y_1 = 0
    def diffusion(y):
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape + (2,))
        out[..., 0, 0] = y[..., 0]
        out[..., 1, 1] = 1.0
        return out

    def gradient(y):
        out = np.zeros(np.shape(y) + (2, 2))
        out[..., 0, 0, 0] = 1.0
        return out

    rank_field = VectorFieldModel("rank_drop", 2, 2, diffusion, gradient)
    report = validate(rank_field, [[1.0, 0.0], [0.0, 2.0], [-1.0, 1.0]])
    ok_rank = (not report.passed) and [p.y.tolist() for p in report.failures] == [[0.0, 2.0]]
    notes.append(f"rank failure rejected: {ok_rank}")

    # CIR observation at the positivity floor
    cir = make_cir(**CIR_PARAMS)
    obs = ObservationGrid(0.1, [0.04, 0.041, cir.params["floor"], 0.04])
    raised = []
    for name, call in (
        ("newton", lambda: newton.reconstruct(cir, obs, 10)),
        ("signature", lambda: signature.reconstruct(cir, obs)),
    ):
        try:
            call()
        except DomainViolation:
            raised.append(name)
    ok_floor = raised == ["newton", "signature"]
    notes.append(f"domain error at floor from {raised}")

    passed = ok_const and ok_rank and ok_floor
    record(9, "degenerate guards", passed, "; ".join(notes))
    assert passed, ACCEPTANCE[9]
