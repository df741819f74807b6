"""Synchronous distributed training rounds with byzantine gradient injection.

Each round the server broadcasts the iterate; honest workers run the inner
maximization over their shard and report the mean surrogate gradient;
byzantine workers report crafted vectors instead. The server screens by
norm, averages the survivors, and steps. Everything is deterministic for a
fixed seed: worker order, reduction order, and attack randomness are all
pinned, so two runs with the same config produce bit-identical traces.

Diagnostics (the true surrogate gradient/objective over all samples and the
worst-case inner-solve error) can be recorded per iteration for the bound
checkers; they never feed back into the update.
"""

from dataclasses import dataclass, replace

import numpy as np

from .aggregation import GradientSet, ScreenConfig, norm_screen
from .attacks import AttackSpec, craft
from .errors import ConfigError, NumericError
from .losses import QuadraticLoss
from .surrogate import (
    DROConfig,
    EpsilonSchedule,
    ascend,
    exact_inner_maximizer,
    penalized_objectives,
    required_iterations,
    surrogate_state,
    theoretical_ascent_step,
)

VARIANTS = ("alg2", "dro_only", "nbs_only", "erm")


@dataclass
class WorkerRoster:
    """Shard assignment plus the byzantine subset and its attack behavior."""

    shards: list                      # per-worker sample index arrays
    byzantine: tuple = ()
    attack: AttackSpec | None = None
    allow_unscreened_byzantine: bool = False  # breakpoint demos set this

    def __post_init__(self):
        self.byzantine = tuple(sorted(set(int(i) for i in self.byzantine)))
        m = len(self.shards)
        if m < 1:
            raise ConfigError("roster needs at least one worker")
        if self.byzantine and (self.byzantine[0] < 0 or self.byzantine[-1] >= m):
            raise ConfigError(f"byzantine ids out of range [0, {m})")
        if len(self.byzantine) >= m:
            raise ConfigError("at least one worker must be honest")
        if self.byzantine and self.attack is None:
            raise ConfigError("byzantine workers declared without an attack spec")

    @property
    def m(self):
        return len(self.shards)

    @property
    def honest(self):
        byz = set(self.byzantine)
        return tuple(i for i in range(self.m) if i not in byz)


def validate_roster(roster: WorkerRoster, n_samples, screen: ScreenConfig):
    seen = np.concatenate([np.asarray(s, dtype=int) for s in roster.shards])
    if seen.size == 0:
        raise ConfigError("empty shards")
    if seen.min() < 0 or seen.max() >= n_samples:
        raise ConfigError(f"shard indices out of range [0, {n_samples})")
    if np.unique(seen).size != seen.size:
        raise ConfigError("shards overlap")
    sizes = {len(s) for s in roster.shards}
    if 0 in sizes:
        raise ConfigError("every worker needs a non-empty shard")
    if len(roster.byzantine) > screen.screen_count and not roster.allow_unscreened_byzantine:
        raise ConfigError(
            f"{len(roster.byzantine)} byzantine workers exceed screen_count="
            f"{screen.screen_count}; set allow_unscreened_byzantine to demo this regime"
        )


@dataclass
class TrainConfig:
    eta: float
    iterations: int
    dro: DROConfig
    screen: ScreenConfig
    seed: int = 0
    theta0: np.ndarray | None = None
    snapshot_every: int = 0            # 0: no intermediate snapshots
    eps_schedule: EpsilonSchedule | None = None
    schedule_distance: float = 0.0     # start-to-maximizer distance bound for the schedule
    track_true_gradient: bool = False
    true_solver_t_z: int = 400

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.eps_schedule is not None and self.schedule_distance <= 0:
            raise ConfigError("eps_schedule requires a positive schedule_distance")


@dataclass
class RunTrace:
    eta: float
    aggregated: np.ndarray           # (T, d)
    aggregated_norms: np.ndarray     # (T,)
    objective_estimates: np.ndarray  # (T,) mean honest-worker inner objective
    worker_norms: np.ndarray         # (T, m) reported gradient norms
    t_z_used: np.ndarray             # (T,)
    snapshot_iterations: np.ndarray  # iterations whose iterate was recorded
    snapshots: np.ndarray            # (k, d) iterate before the update
    theta_final: np.ndarray
    true_gradients: np.ndarray | None = None   # (T, d)
    true_objectives: np.ndarray | None = None  # (T,)
    inner_eps: np.ndarray | None = None        # (T,) worst ||z_eps - z*||

    @property
    def iterations(self):
        return self.aggregated.shape[0]

    def snapshot(self, t):
        hits = np.flatnonzero(self.snapshot_iterations == t)
        if hits.size == 0:
            raise KeyError(f"no snapshot recorded at iteration {t}")
        return self.snapshots[hits[0]]


def initial_theta(dim, seed):
    """Seeded small random initialization, shared across compared variants."""
    rng = np.random.default_rng([seed, 0x7E])
    return 0.01 * rng.standard_normal(dim)


def worker_local_gradient(model, theta, shard_X, shard_Y, dro: DROConfig, t_z=None):
    """Mean surrogate gradient over one worker's samples."""
    Z, _ = ascend(model, theta, shard_X, shard_Y, dro, t_z=t_z)
    return model.mean_grad_theta(theta, Z, shard_Y)


def _worker_step(model, theta, shard_X, shard_Y, dro, t_z):
    Z, _ = ascend(model, theta, shard_X, shard_Y, dro, t_z=t_z)
    grad = model.mean_grad_theta(theta, Z, shard_Y)
    obj = penalized_objectives(model, theta, Z, shard_Y, shard_X, dro.lam).mean()
    return grad, float(obj)


def _ascent_error_factor(model, dro: DROConfig):
    # per-step contraction of ||z - z*|| for the quadratic family
    return abs(1.0 - dro.eta_z * (dro.lam - model.curvature))


def run_training(model, X, Y, roster: WorkerRoster, cfg: TrainConfig) -> RunTrace:
    """Run the full round loop and return the per-iteration trace."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    validate_roster(roster, X.shape[0], cfg.screen)
    m, d, T = roster.m, X.shape[1], cfg.iterations
    theta = initial_theta(d, cfg.seed) if cfg.theta0 is None else np.array(cfg.theta0, dtype=float)
    if theta.shape != (d,):
        raise ConfigError(f"theta0 must have shape ({d},), got {theta.shape}")

    quadratic = isinstance(model, QuadraticLoss)
    if cfg.eps_schedule is not None and not quadratic:
        raise ConfigError("the accuracy schedule needs exact constants (quadratic family)")
    track = cfg.track_true_gradient

    trace = RunTrace(
        eta=cfg.eta,
        aggregated=np.empty((T, d)),
        aggregated_norms=np.empty(T),
        objective_estimates=np.empty(T),
        worker_norms=np.empty((T, m)),
        t_z_used=np.empty(T, dtype=int),
        snapshot_iterations=np.empty(0, dtype=int),
        snapshots=np.empty((0, d)),
        theta_final=np.empty(d),
        true_gradients=np.empty((T, d)) if track else None,
        true_objectives=np.empty(T) if track else None,
        inner_eps=np.full(T, np.nan) if track else None,
    )
    snap_iters, snaps = [], []
    honest = roster.honest

    for t in range(T):
        t_z = cfg.dro.t_z
        if cfg.eps_schedule is not None:
            t_z, _ = required_iterations(
                model.constants(), cfg.dro.lam, 1.0,
                cfg.eps_schedule(t), cfg.schedule_distance,
            )
        if cfg.snapshot_every > 0 and t % cfg.snapshot_every == 0:
            snap_iters.append(t)
            snaps.append(theta.copy())

        grads = np.empty((m, d))
        honest_objs = np.empty(len(honest))
        for j, i in enumerate(honest):
            try:
                grads[i], honest_objs[j] = _worker_step(
                    model, theta, X[roster.shards[i]], Y[roster.shards[i]], cfg.dro, t_z
                )
            except NumericError as exc:
                raise NumericError(f"iteration {t}, worker {i}: {exc}") from exc
        honest_set = GradientSet.from_matrix(grads[list(honest)])
        reference = honest_set.matrix.mean(axis=0)
        for i in roster.byzantine:
            grads[i] = craft(roster.attack, honest_set, reference, iteration=t, worker=i)

        G = norm_screen(GradientSet.from_matrix(grads), cfg.screen)
        if not np.all(np.isfinite(G)):
            raise NumericError(f"iteration {t}: non-finite aggregated gradient")

        trace.aggregated[t] = G
        trace.aggregated_norms[t] = np.linalg.norm(G)
        trace.objective_estimates[t] = honest_objs.mean()
        trace.worker_norms[t] = np.linalg.norm(grads, axis=1)
        trace.t_z_used[t] = t_z

        if track:
            lam = cfg.dro.lam
            if quadratic:
                trace.true_objectives[t], trace.true_gradients[t] = surrogate_state(
                    model, theta, X, Y, lam
                )
                z_star = exact_inner_maximizer(model, theta, X, lam)
                start_dist = np.linalg.norm(X - z_star, axis=1).max()
                trace.inner_eps[t] = _ascent_error_factor(model, cfg.dro) ** t_z * start_dist
            else:
                precise = DROConfig(lam, theoretical_ascent_step(lam), cfg.true_solver_t_z)
                z_star, _ = ascend(model, theta, X, Y, precise)
                trace.true_objectives[t] = penalized_objectives(
                    model, theta, z_star, Y, X, lam
                ).mean()
                trace.true_gradients[t] = model.mean_grad_theta(theta, z_star, Y)
                # measured accuracy: worker-precision ascent vs the diagnostic solve
                z_eps, _ = ascend(model, theta, X, Y, cfg.dro, t_z=t_z)
                trace.inner_eps[t] = np.linalg.norm(z_eps - z_star, axis=1).max()

        theta = theta - cfg.eta * G
        if not np.all(np.isfinite(theta)):
            raise NumericError(f"iteration {t}: iterate diverged to non-finite values")

    trace.snapshot_iterations = np.asarray(snap_iters, dtype=int)
    trace.snapshots = np.asarray(snaps) if snaps else np.empty((0, d))
    trace.theta_final = theta
    return trace


def variant_config(variant, cfg: TrainConfig, roster: WorkerRoster):
    """Per-variant surgery: which of the two robustness measures stay on.

    alg2 keeps both; dro_only drops screening (plain averaging); nbs_only
    drops the data perturbation (zero ascent steps); erm drops both.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    new_cfg, new_roster = cfg, roster
    if variant in ("dro_only", "erm"):
        new_cfg = replace(new_cfg, screen=ScreenConfig(0))
        if roster.byzantine:
            new_roster = replace(roster, allow_unscreened_byzantine=True)
    if variant in ("nbs_only", "erm"):
        new_cfg = replace(new_cfg, dro=replace(new_cfg.dro, t_z=0), eps_schedule=None)
    return new_cfg, new_roster


def run_variant(variant, model, X, Y, roster: WorkerRoster, cfg: TrainConfig) -> RunTrace:
    new_cfg, new_roster = variant_config(variant, cfg, roster)
    return run_training(model, X, Y, new_roster, new_cfg)


def gradient_dispersion(model, X, Y, theta, lam, precision_t_z=400, eta_z=None):
    """Largest distance from a single-sample surrogate gradient to their mean.

    Maximizers are solved to high precision by running the ascent for
    precision_t_z steps at the theoretical step size (or eta_z if given).
    """
    dro = DROConfig(lam, eta_z if eta_z is not None else theoretical_ascent_step(lam),
                    precision_t_z)
    Z, _ = ascend(model, theta, np.asarray(X, dtype=float), np.asarray(Y, dtype=float), dro)
    per_sample = model.grads_theta(theta, Z, np.asarray(Y, dtype=float))
    mean = per_sample.mean(axis=0)
    return float(np.linalg.norm(per_sample - mean, axis=1).max())
