"""The nested-optimization engine.

An inner GP-UCB loop acquires task samples in windows of K iterations, each
window driven by one candidate model theta (a length-scale vector or a
monotonicity strictness vector).  Completed windows are scored by
regret-normalized gain and appended to a ledger; an outer Thompson-sampling
loop over the discretized model grid proposes the next theta from a GP fit to
the ledger.  The first m windows use uniformly random thetas to seed the
ledger.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from hyperbo.acquisition import CandidateSet, ExhaustedSearchSpaceError, thompson_select, ucb_beta, ucb_select
from hyperbo.gp import KernelParams, ObservationSet, gp_fit
from hyperbo.monotonic import StrictnessVector, VirtualDerivativeSet, fit_monotonic_gp
from hyperbo.scoring import LENGTH_SCALE, MODES, MONOTONICITY, default_lambda, score_model
from hyperbo.tasks import Task, regret_trace

__all__ = [
    "LENGTH_SCALE_GRID",
    "MONOTONICITY_LEVELS",
    "ModelTheta",
    "ModelSpace",
    "build_model_space",
    "RunConfig",
    "LedgerRecord",
    "ScoreLedger",
    "RunResult",
    "model_score_window",
    "hyperbo_step",
    "run_framework",
    "rerun_with_best_theta",
]

LENGTH_SCALE_GRID = tuple(round(0.10 + 0.05 * i, 2) for i in range(11))  # 0.10 .. 0.60
MONOTONICITY_LEVELS = tuple(float(v) for v in range(-6, 1))  # -6 .. 0

# All (theta_minus, theta_plus) integer pairs except the doubly-strict (-6, -6).
MONOTONICITY_PAIRS = tuple(
    (a, b) for a in MONOTONICITY_LEVELS for b in MONOTONICITY_LEVELS if not (a == -6.0 and b == -6.0)
)


@dataclass(frozen=True)
class ModelTheta:
    """One point of the model grid: length scales, or strictness exponents."""

    mode: str
    values: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if self.mode == LENGTH_SCALE:
            bad = [v for v in values if v not in LENGTH_SCALE_GRID]
            if bad:
                raise ValueError(f"off-grid length scales {bad}; grid is {LENGTH_SCALE_GRID}")
        elif self.mode == MONOTONICITY:
            StrictnessVector(values)  # validates range, parity, double-strict rule
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return len(self.values) if self.mode == LENGTH_SCALE else len(self.values) // 2

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def strictness(self) -> StrictnessVector:
        if self.mode != MONOTONICITY:
            raise ValueError("strictness is only defined for monotonicity thetas")
        return StrictnessVector(self.values)


class ModelSpace:
    """The discretized grid of candidate thetas, possibly too large to enumerate."""

    ENUMERATION_LIMIT = 200_000

    def __init__(self, mode: str, dim: int):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self.mode = mode
        self.dim = dim
        self._per_dim = len(LENGTH_SCALE_GRID) if mode == LENGTH_SCALE else len(MONOTONICITY_PAIRS)

    @property
    def size(self) -> int:
        return self._per_dim**self.dim

    @property
    def theta_dim(self) -> int:
        return self.dim if self.mode == LENGTH_SCALE else 2 * self.dim

    @property
    def coordinate_bounds(self) -> tuple[float, float]:
        if self.mode == LENGTH_SCALE:
            return (LENGTH_SCALE_GRID[0], LENGTH_SCALE_GRID[-1])
        return (MONOTONICITY_LEVELS[0], MONOTONICITY_LEVELS[-1])

    def to_unit(self, theta_array: np.ndarray) -> np.ndarray:
        """Affine map of theta coordinates onto [0, 1] for the model-space GP."""
        lo, hi = self.coordinate_bounds
        return (np.asarray(theta_array, dtype=float) - lo) / (hi - lo)

    def _theta_from_choices(self, choices) -> ModelTheta:
        if self.mode == LENGTH_SCALE:
            return ModelTheta(self.mode, tuple(choices))
        values = []
        for pair in choices:
            values.extend(pair)
        return ModelTheta(self.mode, tuple(values))

    def enumerate_all(self) -> list[ModelTheta]:
        if self.size > self.ENUMERATION_LIMIT:
            raise ValueError(f"model space of size {self.size} is too large to enumerate")
        options = LENGTH_SCALE_GRID if self.mode == LENGTH_SCALE else MONOTONICITY_PAIRS
        return [self._theta_from_choices(c) for c in itertools.product(options, repeat=self.dim)]

    def sample(self, rng: np.random.Generator) -> ModelTheta:
        options = LENGTH_SCALE_GRID if self.mode == LENGTH_SCALE else MONOTONICITY_PAIRS
        picks = [options[int(rng.integers(0, len(options)))] for _ in range(self.dim)]
        return self._theta_from_choices(picks)

    def contains(self, theta: ModelTheta) -> bool:
        if theta.mode != self.mode or theta.dim != self.dim:
            return False
        try:
            ModelTheta(theta.mode, theta.values)
        except ValueError:
            return False
        return True


def build_model_space(mode: str, dim: int) -> ModelSpace:
    """11 length scales per dimension, or 48 strictness pairs per dimension."""
    return ModelSpace(mode, dim)


@dataclass
class RunConfig:
    """Parameters of one optimization run.

    m random windows seed the ledger, then the outer loop proposes thetas until
    R windows have completed; each window runs K inner UCB iterations.
    """

    mode: str
    m: int = 5
    K: int = 5
    R: int = 10
    seed: int = 0
    regularization: float | None = None  # defaults to the per-mode formula
    default_length_scale: float = 0.3
    signal_variance: float = 1.0
    noise_variance: float = 1e-6
    ucb_delta: float = 0.1
    sample_count_mode: str = "cumulative"  # or "outer_plus_inner"
    thompson_subsample: int = 500
    thompson_threshold: int = 2000
    theta_gp_noise: float = 1e-4
    theta_gp_ls_fraction: float = 0.2

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.m < 1 or self.K < 1:
            raise ValueError("m and K must be >= 1")
        if self.R < self.m:
            raise ValueError(f"R ({self.R}) must be >= m ({self.m})")
        if self.sample_count_mode not in ("cumulative", "outer_plus_inner"):
            raise ValueError(f"unknown sample_count_mode {self.sample_count_mode!r}")

    def resolve_lambda(self, dim: int) -> float:
        if self.regularization is not None:
            return self.regularization
        return default_lambda(self.mode, dim)


@dataclass(frozen=True)
class LedgerRecord:
    theta: ModelTheta
    score: float
    window_start_T: int
    window_gain: float
    outer_index: int


class ScoreLedger:
    """Append-only record of completed scoring windows."""

    def __init__(self):
        self.records: list[LedgerRecord] = []

    def append(self, record: LedgerRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def best(self) -> LedgerRecord:
        if not self.records:
            raise ValueError("empty ledger")
        best = self.records[0]
        for rec in self.records[1:]:
            if rec.score > best.score:  # ties keep the earliest window
                best = rec
        return best


@dataclass
class RunResult:
    """Outcome of a run: best observation, best model, ledger, and regret trace."""

    best_x: np.ndarray
    best_y: float
    best_theta: ModelTheta | None
    ledger: ScoreLedger | None
    best_values: np.ndarray  # index 0 is the initial-design best
    regrets: np.ndarray
    exhausted: bool
    n_samples: int


@dataclass
class _RunState:
    data: ObservationSet
    pool: np.ndarray
    observed: set
    rng: np.random.Generator
    virtual: VirtualDerivativeSet | None
    trial_scale: float
    initial_best: float = -np.inf
    inner_t: int = 0
    best_values: list = field(default_factory=list)
    best_x: np.ndarray = None
    best_y: float = -np.inf

    def candidate_set(self) -> CandidateSet:
        mask = np.zeros(self.pool.shape[0], dtype=bool)
        if self.observed:
            mask[list(self.observed)] = True
        return CandidateSet(self.pool, excluded=mask)

    def record(self, x, y: float) -> None:
        if y > self.best_y:
            self.best_y = y
            self.best_x = np.asarray(x, dtype=float).copy()
        self.best_values.append(self.best_y)


def _standardized_data(data: ObservationSet) -> ObservationSet:
    y = data.y
    scale = np.std(y)
    scale = scale if scale > 1e-12 else 1.0
    out = ObservationSet(data.dim)
    out.extend(data.X, (y - np.mean(y)) / scale)
    return out


def _fit_window_model(state: _RunState, config: RunConfig, theta: ModelTheta | None):
    """Fit the inner surrogate on standardized outputs for the current theta.

    theta None means the fixed default kernel (the plain-BO baseline).  UCB
    selection is invariant to the output standardization, so predictions are
    consumed in standardized units.
    """
    std_data = _standardized_data(state.data)
    if theta is not None and theta.mode == LENGTH_SCALE:
        params = KernelParams(config.signal_variance, theta.values, config.noise_variance)
        return gp_fit(std_data, params)
    params = KernelParams(
        config.signal_variance,
        tuple([config.default_length_scale] * state.data.dim),
        config.noise_variance,
    )
    if theta is None:
        return gp_fit(std_data, params)
    return fit_monotonic_gp(std_data, params, theta.strictness(), state.virtual)


def _inner_step(task: Task, state: _RunState, config: RunConfig, theta: ModelTheta | None) -> bool:
    """One UCB acquisition; returns False when the pool is exhausted."""
    candidates = state.candidate_set()
    n_active = candidates.active_indices.size
    if n_active == 0:
        return False
    model = _fit_window_model(state, config, theta)
    beta = ucb_beta(state.inner_t + 1, n_active, config.ucb_delta)
    try:
        index, x = ucb_select(model, candidates, beta)
    except ExhaustedSearchSpaceError:
        return False
    y = task.observe(index, x)
    state.data.append(x, y)
    state.observed.add(index)
    state.inner_t += 1
    state.record(x, y)
    return True


def model_score_window(
    task: Task,
    state: _RunState,
    config: RunConfig,
    theta: ModelTheta,
    outer_index: int,
    lam: float,
) -> tuple[LedgerRecord | None, bool]:
    """Run up to K inner iterations under theta and score the window.

    Returns (record, exhausted). The record is None when the space was
    exhausted before any step completed.
    """
    start_T = state.inner_t
    y_plus = float(np.max(state.data.y))
    completed = 0
    exhausted = False
    for _ in range(config.K):
        if not _inner_step(task, state, config, theta):
            exhausted = True
            break
        completed += 1
    if completed == 0:
        return None, exhausted
    f_plus = float(np.max(state.data.y))
    gain = (f_plus - y_plus) / state.trial_scale
    if config.sample_count_mode == "cumulative":
        T = state.inner_t
    else:
        T = outer_index + completed
    # A one-sample first window would make the normalizer degenerate.
    T = max(T, 2)
    score = score_model(gain, T, task.dim, theta.values, lam, config.mode)
    record = LedgerRecord(
        theta=theta,
        score=score,
        window_start_T=start_T,
        window_gain=gain,
        outer_index=outer_index,
    )
    return record, exhausted


def _thompson_candidates(space: ModelSpace, config: RunConfig, rng: np.random.Generator, incumbent: ModelTheta | None):
    if space.size <= config.thompson_threshold:
        thetas = space.enumerate_all()
    else:
        thetas = [space.sample(rng) for _ in range(config.thompson_subsample)]
        if incumbent is not None:
            thetas.append(incumbent)
    points = space.to_unit(np.vstack([t.as_array() for t in thetas]))
    return thetas, CandidateSet(points)


def hyperbo_step(
    ledger: ScoreLedger,
    space: ModelSpace,
    rng: np.random.Generator,
    config: RunConfig,
    candidate_thetas: list[ModelTheta] | None = None,
) -> ModelTheta:
    """Propose the next theta: Thompson sampling on a GP over ledger scores.

    Scores are standardized before fitting; previously scored thetas stay in
    the candidate pool since window scores are noisy and re-scoring is
    informative.  candidate_thetas restricts the pool (ablations/tests);
    by default the whole grid competes, subsampled when very large.
    """
    if len(ledger) < 1:
        raise ValueError("hyperbo_step needs at least one scored window")
    thetas = np.vstack([rec.theta.as_array() for rec in ledger.records])
    scores = np.asarray([rec.score for rec in ledger.records], dtype=float)
    std = np.std(scores)
    z = (scores - np.mean(scores)) / std if std > 1e-12 else np.zeros_like(scores)
    signal = max(float(np.var(z)), 1e-6)
    params = KernelParams(
        signal,
        tuple([config.theta_gp_ls_fraction] * space.theta_dim),
        config.theta_gp_noise,
    )
    data = ObservationSet(space.theta_dim)
    data.extend(space.to_unit(thetas), z)
    model = gp_fit(data, params)
    if candidate_thetas is not None:
        pool = list(candidate_thetas)
        candidate_set = CandidateSet(space.to_unit(np.vstack([t.as_array() for t in pool])))
    else:
        pool, candidate_set = _thompson_candidates(space, config, rng, ledger.best().theta)
    index, _ = thompson_select(model, candidate_set, rng)
    return pool[index]


def _init_state(task: Task, config: RunConfig) -> _RunState:
    seq = np.random.SeedSequence(config.seed)
    init_child, virtual_child, run_child = seq.spawn(3)
    init_rng = np.random.default_rng(init_child)
    indices, X0, y0 = task.initial_design(init_rng)
    pool = task.build_pool(init_rng)
    data = ObservationSet(task.dim)
    data.extend(X0, y0)
    # Initial-design entries that are pool members (dataset rows) are excluded
    # from re-sampling; synthetic designs live off-pool and flag nothing.
    observed = set(i for i in indices if i >= 0)
    virtual = None
    if config.mode == MONOTONICITY:
        virtual = VirtualDerivativeSet.sample(task.dim, np.random.default_rng(virtual_child))
    scale = float(np.std(y0))
    state = _RunState(
        data=data,
        pool=pool,
        observed=observed,
        rng=np.random.default_rng(run_child),
        virtual=virtual,
        trial_scale=scale if scale > 1e-12 else 1.0,
    )
    best_idx = int(np.argmax(y0))
    state.best_y = float(y0[best_idx])
    state.best_x = np.asarray(X0[best_idx], dtype=float).copy()
    state.initial_best = state.best_y
    return state


def _result_from_state(task: Task, state: _RunState, best_theta, ledger, exhausted: bool) -> RunResult:
    best_values = np.concatenate([[state.initial_best], state.best_values])
    return RunResult(
        best_x=state.best_x,
        best_y=state.best_y,
        best_theta=best_theta,
        ledger=ledger,
        best_values=best_values,
        regrets=regret_trace(best_values, task.optimum),
        exhausted=exhausted,
        n_samples=state.inner_t,
    )


def run_framework(task: Task, config: RunConfig) -> RunResult:
    """Full nested run: m random windows, then outer-proposed windows until R.

    Deterministic for a fixed (task, config): the seed drives the initial
    design, the virtual derivative locations, and every subsequent draw.
    """
    space = build_model_space(config.mode, task.dim)
    lam = config.resolve_lambda(task.dim)
    state = _init_state(task, config)
    ledger = ScoreLedger()
    exhausted = False

    for outer in range(1, config.R + 1):
        if outer <= config.m:
            theta = space.sample(state.rng)
        else:
            theta = hyperbo_step(ledger, space, state.rng, config)
        record, hit_end = model_score_window(task, state, config, theta, outer, lam)
        if record is not None:
            ledger.append(record)
        if hit_end:
            exhausted = True
            break

    best_theta = ledger.best().theta if len(ledger) else None
    return _result_from_state(task, state, best_theta, ledger, exhausted)


def rerun_with_best_theta(task: Task, theta: ModelTheta | None, budget: int, config: RunConfig) -> RunResult:
    """Plain inner BO with theta held fixed for `budget` iterations.

    theta None runs the fixed-default-kernel baseline.  Seeding matches
    run_framework, so runs with the same seed share the initial design and
    virtual derivative locations.
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    state = _init_state(task, config)
    exhausted = False
    for _ in range(budget):
        if not _inner_step(task, state, config, theta):
            exhausted = True
            break
    return _result_from_state(task, state, theta, None, exhausted)
