"""Constrained configuration design: minimize predicted variability subject
to a minimum mean-performance requirement.

The inequality constraint is folded into an augmented Lagrangian whose slack
variable is eliminated in closed form, and the resulting box-constrained
objective is driven by a dividing-rectangles global search.  Continuous
optima are then corrected to valid benchmark configurations: integer file and
record sizes with an integer ratio, and an integer thread count.
"""

from __future__ import annotations

import configparser
import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ._errors import OptimizationError, VmapError
from .dataspace import (
    SCHEDULERS,
    SystemConfiguration,
    VariabilityMapKey,
    VariabilityObservation,
)
from .surrogates import ModelSpec, SurrogateModel, fit, fit_performance_surface, predict_batch


@dataclass(frozen=True)
class BoxDomain:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise VmapError("domain bounds must be equal-length vectors")
        if not np.all(self.lower < self.upper):
            raise VmapError("domain requires lower < upper in every coordinate")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass
class ConstrainedProblem:
    objective: Callable[[np.ndarray], float]
    constraint_surface: Callable[[np.ndarray], float]
    m0: float
    domain: BoxDomain
    c: float = 1000.0
    budget: int = 2000
    solver: str = "single-pass"  # or "iterative"
    feasibility_tol: float = 1e-6  # relative to m0
    key: VariabilityMapKey | None = None

    def __post_init__(self):
        if self.m0 <= 0:
            raise VmapError(f"m0 must be positive, got {self.m0}")
        if self.c <= 0:
            raise VmapError(f"penalty parameter c must be positive, got {self.c}")
        if self.budget < 1:
            raise VmapError(f"budget must be at least 1, got {self.budget}")
        if self.solver not in ("single-pass", "iterative"):
            raise VmapError(f"solver must be 'single-pass' or 'iterative', got {self.solver!r}")


def augmented_objective(x: np.ndarray, u: float, c: float, problem: ConstrainedProblem) -> float:
    """Slack-eliminated augmented Lagrangian of the constrained problem."""
    violation = problem.m0 - problem.constraint_surface(x)
    penalty = max(0.0, u + c * violation)
    return problem.objective(x) + (penalty * penalty - u * u) / (2.0 * c)


# ---------------------------------------------------------------------------
# dividing-rectangles global search
# ---------------------------------------------------------------------------

@dataclass
class DirectResult:
    x: np.ndarray
    value: float
    evaluations: int
    trace: list[float] = field(default_factory=list)  # best value after each evaluation
    centers: np.ndarray | None = None  # evaluated points (domain units), on request
    center_values: np.ndarray | None = None


class _RectangleSet:
    """Hyperrectangle bookkeeping over the unit box.

    Centers are stored in unit coordinates; per-dimension trisection counts
    determine side lengths 3**-k and hence each rectangle's half-diagonal,
    cached per rectangle because the optimality sieve reads it every
    iteration.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.centers: list[np.ndarray] = []
        self.levels: list[np.ndarray] = []
        self.values: list[float] = []
        self.sizes: list[float] = []

    @staticmethod
    def _size_of(levels: np.ndarray) -> float:
        sides = 3.0 ** (-levels.astype(float))
        return 0.5 * float(np.sqrt(np.sum(sides * sides)))

    def add(self, center: np.ndarray, levels: np.ndarray, value: float) -> None:
        self.centers.append(center)
        self.levels.append(levels)
        self.values.append(value)
        self.sizes.append(self._size_of(levels))

    def shrink(self, idx: int, levels: np.ndarray) -> None:
        self.levels[idx] = levels
        self.sizes[idx] = self._size_of(levels)


def _potentially_optimal(rects: _RectangleSet, f_min: float, eps: float) -> list[int]:
    # one candidate per distinct size: the first rectangle attaining the
    # minimum value in its size class
    by_size: dict[float, int] = {}
    values = rects.values
    for idx, d in enumerate(rects.sizes):
        cur = by_size.get(d)
        if cur is None or values[idx] < values[cur]:
            by_size[d] = idx
    sizes = sorted(by_size)
    chosen = []
    for pos, d in enumerate(sizes):
        idx = by_size[d]
        fj = rects.values[idx]
        left = -math.inf
        for other in sizes[:pos]:
            left = max(left, (fj - rects.values[by_size[other]]) / (d - other))
        right = math.inf
        for other in sizes[pos + 1:]:
            right = min(right, (rects.values[by_size[other]] - fj) / (other - d))
        if left > right:
            continue
        if math.isinf(right):
            chosen.append(idx)
        elif f_min != 0.0:
            if fj - d * right <= f_min - eps * abs(f_min):
                chosen.append(idx)
        elif fj <= d * right:
            chosen.append(idx)
    return chosen


def direct_minimize(
    g: Callable[[np.ndarray], float],
    domain: BoxDomain,
    budget: int,
    eps: float = 1e-4,
    stagnation_tol: float | None = None,
    stagnation_window: int = 30,
    keep_centers: bool = False,
) -> DirectResult:
    """Global minimization by trisecting potentially optimal rectangles.

    Every evaluation happens at a rectangle center strictly inside the
    domain; the search stops when the evaluation budget is exhausted or,
    when a stagnation tolerance is given, once the best value improves by
    less than that relative tolerance across a window of iterations.
    Returns the best evaluated point.
    """
    if budget < 1:
        raise VmapError(f"budget must be at least 1, got {budget}")
    dim = domain.dim
    lo, span = domain.lower, domain.span

    state = {"evals": 0, "best_x": None, "best_f": math.inf}
    trace: list[float] = []

    def evaluate(center_unit: np.ndarray) -> float:
        x = lo + center_unit * span
        value = float(g(x))
        if not math.isfinite(value):
            raise OptimizationError(f"objective returned a non-finite value at {x.tolist()}")
        state["evals"] += 1
        if value < state["best_f"]:
            state["best_f"] = value
            state["best_x"] = x.copy()
        trace.append(state["best_f"])
        return value

    rects = _RectangleSet(dim)
    center = np.full(dim, 0.5)
    rects.add(center, np.zeros(dim, dtype=np.int64), evaluate(center))

    history: list[float] = [state["best_f"]]
    while state["evals"] < budget:
        selected = _potentially_optimal(rects, state["best_f"], eps)
        if not selected:
            break
        # split larger rectangles first
        selected.sort(key=lambda idx: (-rects.sizes[idx], idx))
        out_of_budget = False
        for idx in selected:
            levels = rects.levels[idx]
            min_level = int(levels.min())
            dims = [k for k in range(dim) if levels[k] == min_level]
            delta = 3.0 ** (-(min_level + 1))

            samples = []
            for k in dims:
                if state["evals"] + 2 > budget:
                    out_of_budget = True
                    break
                plus = rects.centers[idx].copy()
                plus[k] += delta
                minus = rects.centers[idx].copy()
                minus[k] -= delta
                samples.append((k, plus, evaluate(plus), minus, evaluate(minus)))
            samples.sort(key=lambda s: min(s[2], s[4]))

            for k, plus, f_plus, minus, f_minus in samples:
                new_levels = rects.levels[idx].copy()
                new_levels[k] += 1
                rects.add(plus, new_levels.copy(), f_plus)
                rects.add(minus, new_levels.copy(), f_minus)
                rects.shrink(idx, new_levels)
            if out_of_budget:
                break
        history.append(state["best_f"])
        if out_of_budget:
            break
        if stagnation_tol is not None and len(history) > stagnation_window:
            window_gain = history[-stagnation_window - 1] - history[-1]
            if window_gain <= stagnation_tol * (abs(history[-1]) + 1e-12):
                break

    result = DirectResult(
        x=state["best_x"], value=state["best_f"], evaluations=state["evals"], trace=trace
    )
    if keep_centers:
        result.centers = lo + np.asarray(rects.centers) * span
        result.center_values = np.asarray(rects.values)
    return result


# ---------------------------------------------------------------------------
# rounding to valid benchmark configurations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RoundedConfig:
    file_size: int
    record_size: int
    threads: int
    frequency: float

    def encoded(self) -> np.ndarray:
        return np.array(
            [math.log(self.file_size), math.log(self.record_size), math.log(self.threads), self.frequency]
        )


def round_solution(x_star: np.ndarray) -> RoundedConfig:
    """Correct a continuous optimum to integer sizes with an integer ratio.

    Decodes file and record sizes from their logs and searches integer pairs
    (q * R, R) within +/-50% of the decoded values for the pair closest in
    log space; threads round to the nearest integer >= 1.
    """
    x_star = np.asarray(x_star, dtype=float)
    file_dec = math.exp(x_star[0])
    rec_dec = math.exp(x_star[1])
    threads = max(1, round(math.exp(x_star[2])))

    r_lo = max(1, math.ceil(0.5 * rec_dec))
    r_hi = max(r_lo, math.floor(1.5 * rec_dec))
    ratio = file_dec / rec_dec
    q_lo = max(1, math.ceil(0.5 * ratio))
    q_hi = max(q_lo, math.floor(1.5 * ratio))

    log_f, log_r = x_star[0], x_star[1]
    best = None
    best_err = math.inf
    for rec in range(r_lo, r_hi + 1):
        lr = math.log(rec)
        for q in range(q_lo, q_hi + 1):
            lf = math.log(q * rec)
            err = (lf - log_f) ** 2 + (lr - log_r) ** 2
            if err < best_err:
                best_err = err
                best = (q * rec, rec)
    return RoundedConfig(
        file_size=best[0], record_size=best[1], threads=threads, frequency=float(x_star[3])
    )


# ---------------------------------------------------------------------------
# constrained solve and the per-mode scheduler sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptimizationResult:
    x_star: np.ndarray
    config_star: SystemConfiguration | None
    objective_value: float
    constraint_value: float
    feasible: bool
    key: VariabilityMapKey | None
    m0: float
    evaluations_used: int


_MAX_OUTER_ITERATIONS = 15


def _config_from_rounded(rounded: RoundedConfig, key: VariabilityMapKey | None):
    if key is None:
        return None
    return SystemConfiguration(
        io_mode=key.io_mode,
        io_scheduler=key.io_scheduler,
        vm_io_scheduler=key.vm_io_scheduler,
        frequency=rounded.frequency,
        threads=rounded.threads,
        file_size=rounded.file_size,
        record_size=rounded.record_size,
    )


def solve_constrained(problem: ConstrainedProblem) -> OptimizationResult:
    """Solve min objective s.t. constraint_surface >= m0 over the box domain.

    The default single pass fixes the multiplier at zero with a large penalty
    parameter; the iterative mode runs the textbook multiplier update until
    consecutive optima coincide.  On a four-dimensional configuration domain
    the best-scoring search centers are rounded to valid benchmark
    configurations, both surfaces re-evaluated there, and the best feasible
    rounded configuration reported (rounding can hop across lattice cells,
    so correcting only the single continuous optimum may discard a better
    valid configuration found along the way).
    """
    rounding = problem.domain.dim == 4
    evals = 0
    if problem.solver == "single-pass":
        result = direct_minimize(
            lambda x: augmented_objective(x, 0.0, problem.c, problem),
            problem.domain,
            problem.budget,
            keep_centers=rounding,
        )
        x_star = result.x
        evals = result.evaluations
        centers, center_values = result.centers, result.center_values
    else:
        u = 0.0
        c = problem.c
        x_prev = None
        x_star = None
        center_chunks: list[np.ndarray] = []
        value_chunks: list[np.ndarray] = []
        for _ in range(_MAX_OUTER_ITERATIONS):
            result = direct_minimize(
                lambda x, u=u, c=c: augmented_objective(x, u, c, problem),
                problem.domain,
                problem.budget,
                keep_centers=rounding,
            )
            x_star = result.x
            evals += result.evaluations
            if rounding:
                center_chunks.append(result.centers)
                value_chunks.append(result.center_values)
            if x_prev is not None and float(np.linalg.norm(x_star - x_prev)) <= 1e-6:
                break
            x_prev = x_star
            u = max(0.0, u + c * (problem.m0 - problem.constraint_surface(x_star)))
            c *= 10.0
        centers = np.vstack(center_chunks) if rounding else None
        center_values = np.concatenate(value_chunks) if rounding else None

    if not rounding:
        objective_value = float(problem.objective(x_star))
        constraint_value = float(problem.constraint_surface(x_star))
        return OptimizationResult(
            x_star=np.asarray(x_star, dtype=float),
            config_star=None,
            objective_value=objective_value,
            constraint_value=constraint_value,
            feasible=constraint_value >= problem.m0 * (1.0 - problem.feasibility_tol),
            key=problem.key,
            m0=problem.m0,
            evaluations_used=evals,
        )

    # round every visited center (best first), re-evaluate both surfaces at
    # the distinct corrected configurations, and keep the best feasible one
    order = np.argsort(center_values, kind="stable")
    seen: set[tuple] = set()
    candidates: list[RoundedConfig] = [round_solution(x_star)]
    seen.add(_rounded_id(candidates[0]))
    for idx in order:
        rounded = round_solution(centers[idx])
        marker = _rounded_id(rounded)
        if marker not in seen:
            seen.add(marker)
            candidates.append(rounded)

    scored = []
    for rounded in candidates:
        x_eval = rounded.encoded()
        objective_value = float(problem.objective(x_eval))
        constraint_value = float(problem.constraint_surface(x_eval))
        evals += 1
        feasible = constraint_value >= problem.m0 * (1.0 - problem.feasibility_tol)
        scored.append((feasible, objective_value, rounded, constraint_value))

    feasible_entries = [entry for entry in scored if entry[0]]
    if feasible_entries:
        best = min(feasible_entries, key=lambda entry: entry[1])
    else:
        best = scored[0]  # no feasible correction: report the optimum's own rounding
    feasible, objective_value, rounded, constraint_value = best
    return OptimizationResult(
        x_star=np.asarray(x_star, dtype=float),
        config_star=_config_from_rounded(rounded, problem.key),
        objective_value=objective_value,
        constraint_value=constraint_value,
        feasible=feasible,
        key=problem.key,
        m0=problem.m0,
        evaluations_used=evals,
    )


def _rounded_id(rounded: RoundedConfig) -> tuple:
    return (rounded.file_size, rounded.record_size, rounded.threads, round(rounded.frequency, 12))


def domain_from_observations(observations: Sequence[VariabilityObservation]) -> BoxDomain:
    """Bounding box of the encoded training points, padded where degenerate."""
    x = np.array([obs.point.as_array() for obs in observations])
    lower = x.min(axis=0)
    upper = x.max(axis=0)
    flat = upper - lower <= 0
    pad = np.maximum(1e-6, 1e-6 * np.abs(lower))
    lower = np.where(flat, lower - pad, lower)
    upper = np.where(flat, upper + pad, upper)
    return BoxDomain(lower, upper)


def _surrogate_callable(model: SurrogateModel, key: VariabilityMapKey):
    def call(x: np.ndarray) -> float:
        return float(predict_batch(model, np.asarray(x, dtype=float)[None, :], key)[0])

    return call


@dataclass
class SweepSettings:
    c: float = 1000.0
    budget: int = 2000
    solver: str = "single-pass"
    feasibility_tol: float = 1e-6
    m0_rule: str = "per-map-mean"  # or "fixed:<value>"
    domain: BoxDomain | None = None

    def resolve_m0(self, observations) -> float:
        if self.m0_rule == "per-map-mean":
            return float(np.mean([obs.mean_throughput for obs in observations]))
        if self.m0_rule.startswith("fixed:"):
            return float(self.m0_rule.split(":", 1)[1])
        raise VmapError(f"unknown m0_rule {self.m0_rule!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "SweepSettings":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(Path(path).read_text(encoding="utf-8"))
        except configparser.Error as exc:
            raise VmapError(f"bad problem configuration: {exc}") from None
        settings = cls()
        if parser.has_section("problem"):
            section = parser["problem"]
            settings.c = section.getfloat("c", settings.c)
            settings.budget = section.getint("budget", settings.budget)
            settings.solver = section.get("solver", settings.solver)
            settings.feasibility_tol = section.getfloat("feasibility_tol", settings.feasibility_tol)
            settings.m0_rule = section.get("m0_rule", settings.m0_rule)
        if parser.has_section("domain"):
            section = parser["domain"]
            names = ("log_file_size", "log_record_size", "log_threads", "frequency")
            lower, upper = [], []
            for name in names:
                raw = section.get(name)
                if raw is None:
                    raise VmapError(f"domain section must bound {name}")
                parts = raw.split()
                if len(parts) != 2:
                    raise VmapError(f"domain bound {name!r} needs 'lower upper'")
                lower.append(float(parts[0]))
                upper.append(float(parts[1]))
            settings.domain = BoxDomain(np.array(lower), np.array(upper))
        return settings


def optimize_key(
    observations: Sequence[VariabilityObservation],
    key: VariabilityMapKey,
    model_spec: ModelSpec,
    settings: SweepSettings,
) -> OptimizationResult:
    """Fit both surfaces for one map and solve its constrained problem."""
    variability = fit(model_spec, observations)
    performance = fit_performance_surface(model_spec, observations)
    problem = ConstrainedProblem(
        objective=_surrogate_callable(variability, key),
        constraint_surface=_surrogate_callable(performance, key),
        m0=settings.resolve_m0(observations),
        domain=settings.domain or domain_from_observations(observations),
        c=settings.c,
        budget=settings.budget,
        solver=settings.solver,
        feasibility_tol=settings.feasibility_tol,
        key=key,
    )
    return solve_constrained(problem)


def optimize_all_modes(
    observations: Sequence[VariabilityObservation],
    model_spec: ModelSpec | None = None,
    settings: SweepSettings | None = None,
    jobs: int = 1,
) -> list[OptimizationResult]:
    """Sweep the scheduler pairs of every operation mode present in the data.

    Each mode's nine scheduler combinations are solved independently and the
    feasible result with the least predicted variability wins; a mode whose
    combinations are all infeasible is reported with its best infeasible
    candidate and feasible=False.
    """
    if model_spec is None:
        model_spec = ModelSpec("LSP", "raw")
    if settings is None:
        settings = SweepSettings()

    by_key: dict[VariabilityMapKey, list[VariabilityObservation]] = {}
    for obs in observations:
        by_key.setdefault(obs.key, []).append(obs)
    modes = sorted({key.io_mode for key in by_key})
    if not modes:
        raise VmapError("no observations to optimize")

    tasks = []
    for mode in modes:
        for io_sched, vm_sched in product(SCHEDULERS, SCHEDULERS):
            key = VariabilityMapKey(mode, io_sched, vm_sched)
            if key in by_key:
                tasks.append(key)

    def solve(key: VariabilityMapKey) -> OptimizationResult:
        return optimize_key(by_key[key], key, model_spec, settings)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            solved = dict(zip(tasks, pool.map(solve, tasks)))
    else:
        solved = {key: solve(key) for key in tasks}

    winners = []
    for mode in modes:
        candidates = [solved[key] for key in tasks if key.io_mode == mode]
        if not candidates:
            continue
        feasible = [r for r in candidates if r.feasible]
        contenders = feasible if feasible else candidates
        winners.append(min(contenders, key=lambda r: r.objective_value))
    return winners


def write_optimization_csv(results: Sequence[OptimizationResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "mode",
                "io_scheduler",
                "vm_io_scheduler",
                "file_size_kb",
                "record_size_kb",
                "threads",
                "frequency_ghz",
                "predicted_pvm",
                "predicted_mean_throughput",
                "m0",
                "feasible",
                "evaluations",
            ]
        )
        for r in results:
            cfg = r.config_star
            writer.writerow(
                [
                    r.key.io_mode if r.key else "",
                    r.key.io_scheduler if r.key else "",
                    r.key.vm_io_scheduler if r.key else "",
                    cfg.file_size if cfg else "",
                    cfg.record_size if cfg else "",
                    cfg.threads if cfg else "",
                    format(cfg.frequency, ".12g") if cfg else "",
                    format(r.objective_value, ".12g"),
                    format(r.constraint_value, ".12g"),
                    format(r.m0, ".12g"),
                    int(r.feasible),
                    r.evaluations_used,
                ]
            )
