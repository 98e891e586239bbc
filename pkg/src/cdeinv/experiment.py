"""Seeded simulate-then-invert experiments and their on-disk artifacts."""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import newton, signature
from .errors import CDEError, DomainViolation, InfeasibleSpec
from .fields import VectorFieldModel, make_model
from .metrics import ErrorReport, path_error, uniformity_ratio, write_error_curve_csv
from .newton import NewtonConfig
from .ode import IntegratorConfig, propagate
from .paths import (
    ObservationGrid,
    PiecewiseLinearPath,
    generate_random_control,
    slopes,
    write_observations_csv,
    write_path_csv,
)
from .signature import SignatureConfig
from .trace import IterationTrace

log = logging.getLogger(__name__)

METHODS = ("newton", "signature")
EXIT_OK, EXIT_INFEASIBLE, EXIT_METHOD_FAILURE = 0, 2, 3


@dataclass
class ExperimentSpec:
    model: dict
    delta: float
    n_intervals: int
    y0: list[float]
    seed: int = 0
    control_clip: float | None = None
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    iteration_counts: list[int] = field(default_factory=lambda: [1, 2, 3, 300])
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    newton_sweeps: int | None = None
    signature: SignatureConfig | None = None
    max_resample_attempts: int = 100
    description: str = ""
    tags: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.y0 = [float(v) for v in np.atleast_1d(self.y0)]
        self.iteration_counts = [int(n) for n in self.iteration_counts]
        if self.iteration_counts != sorted(self.iteration_counts) or not self.iteration_counts:
            raise ValueError("iteration_counts must be a nonempty ascending sequence")
        if self.iteration_counts[0] < 0:
            raise ValueError("iteration counts must be nonnegative")
        if not self.delta > 0 or self.n_intervals < 1:
            raise ValueError("need delta > 0 and n_intervals >= 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ValueError(f"methods must be a nonempty subset of {METHODS}, got {self.methods}")
        if self.newton_sweeps is None:
            self.newton_sweeps = self.iteration_counts[-1]
        if self.signature is None:
            self.signature = SignatureConfig(max_iterations=self.iteration_counts[-1])

    @property
    def final_time(self) -> float:
        return self.n_intervals * self.delta

    def build_model(self) -> VectorFieldModel:
        return make_model(self.model["name"], self.model.get("params", {}))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown experiment keys: {sorted(extra)}")
        if "integrator" in data:
            data["integrator"] = IntegratorConfig(**data["integrator"])
        if "newton" in data:
            data["newton"] = NewtonConfig(**data["newton"])
        if data.get("signature") is not None:
            data["signature"] = SignatureConfig(**data["signature"])
        return cls(**data)

    def replace(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)


def load_spec(path) -> ExperimentSpec:
    with open(path) as fh:
        return ExperimentSpec.from_dict(json.load(fh))


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("cdeinv.presets").iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> ExperimentSpec:
    res = resources.files("cdeinv.presets") / f"{name}.json"
    if not res.is_file():
        raise ValueError(f"unknown preset '{name}', available: {preset_names()}")
    return ExperimentSpec.from_dict(json.loads(res.read_text()))


@dataclass
class Simulation:
    control: PiecewiseLinearPath
    observations: ObservationGrid
    seed_used: int
    attempts: int


def simulate(spec: ExperimentSpec) -> Simulation:
    """Draw a seeded random control and record the model response at the knots.

    Controls that drive the response out of the model domain are redrawn
    with seed + 1, seed + 2, ...
    """
    model = spec.build_model()
    for attempt in range(spec.max_resample_attempts):
        seed = spec.seed + attempt
        control = generate_random_control(
            spec.delta, spec.n_intervals, seed, spec.control_clip, dimension=model.dim_control
        )
        try:
            knots = propagate(model, spec.y0, slopes(control), spec.delta, spec.integrator).knots
        except DomainViolation as exc:
            log.info("seed %d rejected: %s", seed, exc)
            continue
        return Simulation(control, ObservationGrid(spec.delta, knots), seed, attempt + 1)
    raise InfeasibleSpec(
        f"no admissible control in {spec.max_resample_attempts} attempts from seed {spec.seed}"
    )


@dataclass
class MethodResult:
    method: str
    trace: IterationTrace | None
    snapshots: dict[int, PiecewiseLinearPath] = field(default_factory=dict)
    reports: dict[int, ErrorReport] = field(default_factory=dict)
    runtime: float = 0.0
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None or (self.trace is not None and self.trace.failure is not None)


def run_method(spec: ExperimentSpec, model, obs: ObservationGrid, method: str) -> IterationTrace:
    if method == "newton":
        return newton.reconstruct(model, obs, spec.newton_sweeps, spec.newton, spec.integrator)
    return signature.reconstruct(model, obs, spec.signature, spec.integrator)


def invert(
    spec: ExperimentSpec,
    observations: ObservationGrid,
    true_control: PiecewiseLinearPath | None = None,
) -> dict[str, MethodResult]:
    """Run every requested method and snapshot its path at the iteration counts."""
    if observations.n_intervals != spec.n_intervals or not np.isclose(observations.delta, spec.delta):
        raise ValueError("observations do not match the experiment grid")
    model = spec.build_model()
    results = {}
    for method in spec.methods:
        t0 = time.perf_counter()
        try:
            trace = run_method(spec, model, observations, method)
        except CDEError as exc:
            results[method] = MethodResult(method, None, runtime=time.perf_counter() - t0, error=str(exc))
            continue
        res = MethodResult(method, trace, runtime=time.perf_counter() - t0)
        for n in spec.iteration_counts:
            try:
                res.snapshots[n] = trace.path_at(n)
            except ValueError:
                continue
            if true_control is not None:
                res.reports[n] = path_error(true_control, res.snapshots[n])
        results[method] = res
    return results


def _method_summary(res: MethodResult) -> dict:
    out = {"status": "failed" if res.failed else "ok", "error": res.error}
    if res.trace is not None:
        out.update(
            {
                "iterations_run": int(res.trace.last_iteration),
                "converged": bool(res.trace.converged),
                "failure": res.trace.failure,
                "flags": {str(k): v for k, v in sorted(res.trace.flags.items())},
            }
        )
    out["snapshots"] = {
        str(n): (res.reports[n].summary() if n in res.reports else {}) for n in res.snapshots
    }
    return out


def write_artifacts(
    out_dir,
    spec: ExperimentSpec,
    results: dict[str, MethodResult],
    sim: Simulation | None = None,
    observations: ObservationGrid | None = None,
    extra: dict | None = None,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if sim is not None:
        write_path_csv(sim.control, out / "control_true.csv")
        observations = sim.observations
    if observations is not None:
        write_observations_csv(observations, out / "observations.csv")
    for method, res in results.items():
        mdir = out / method
        mdir.mkdir(exist_ok=True)
        for n, path in res.snapshots.items():
            write_path_csv(path, mdir / f"reconstruction_n{n}.csv")
            if n in res.reports:
                write_error_curve_csv(res.reports[n], mdir / f"error_curve_n{n}.csv")
    summary = {
        "config": spec.to_dict(),
        "seed_requested": spec.seed,
        "seed_used": sim.seed_used if sim else None,
        "resample_attempts": sim.attempts if sim else None,
        "methods": {m: _method_summary(r) for m, r in results.items()},
    }
    if extra:
        summary.update(extra)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    timings = {m: r.runtime for m, r in results.items()}
    (out / "timings.json").write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n")


def run_experiment(config, out_dir) -> tuple[int, Path]:
    """Simulate, invert with every method and write all artifacts.

    ``config`` is an :class:`ExperimentSpec` or a path to its JSON file.
    Returns (exit code, artifact directory): 0 on success, 2 when no
    admissible control could be drawn, 3 when a method failed.
    """
    spec = config if isinstance(config, ExperimentSpec) else load_spec(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        sim = simulate(spec)
    except InfeasibleSpec as exc:
        (out / "summary.json").write_text(
            json.dumps({"config": spec.to_dict(), "error": str(exc)}, indent=2, sort_keys=True) + "\n"
        )
        return EXIT_INFEASIBLE, out
    results = invert(spec, sim.observations, sim.control)
    write_artifacts(out, spec, results, sim=sim)
    code = EXIT_METHOD_FAILURE if any(r.failed for r in results.values()) else EXIT_OK
    return code, out


def snapshot_table(results: dict[str, MethodResult]) -> list[tuple[str, int, float, float]]:
    """(method, n, sup error, uniformity ratio) rows for every error report."""
    rows = []
    for method, res in results.items():
        for n, rep in sorted(res.reports.items()):
            rows.append((method, n, rep.sup_error, uniformity_ratio(rep)))
    return rows
