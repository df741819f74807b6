"""Worst-case data surrogate: per-sample penalized inner maximization.

For a sample x the surrogate loss is ``sup_z { f(theta; z) - lam * c(z, x) }``
with transport cost ``c(z, x) = ||z - x||^2 / 2``. Workers realize the sup by
plain gradient ascent started at z = x; the gradient of the surrogate in
theta is then the loss gradient evaluated at the ascent output (envelope
property), which is what the training loop aggregates.

The cost is 1-strongly convex and COST_SMOOTHNESS-smooth, so for
``lam > L_zz`` the inner objective is strongly concave and the ascent
contracts linearly; ``required_iterations`` converts a target accuracy into
an iteration count via the contraction factor.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, RegimeError
from .losses import QuadraticLoss, SmoothnessConstants

COST_SMOOTHNESS = 1.0  # c(z, x) = ||z - x||^2 / 2


@dataclass(frozen=True)
class DROConfig:
    """Inner-maximization settings: penalty weight and ascent schedule."""

    lam: float
    eta_z: float = 0.05
    t_z: int = 10

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ConfigError(f"lam must be positive, got {self.lam}")
        if not (np.isfinite(self.eta_z) and self.eta_z > 0):
            raise ConfigError(f"eta_z must be positive, got {self.eta_z}")
        if self.t_z < 0:
            raise ConfigError(f"t_z must be >= 0, got {self.t_z}")


@dataclass
class AscentReport:
    z_final: np.ndarray
    iterations: int
    objective_trace: np.ndarray  # value at z0 and after each step, length t_z + 1


def transport_costs(Z, X):
    diff = Z - X
    return 0.5 * np.einsum("ij,ij->i", diff, diff)


def penalized_objectives(model, theta, Z, Y, X, lam):
    """Per-sample inner objective f(theta; z) - lam * c(z, x)."""
    return model.values(theta, Z, Y) - lam * transport_costs(Z, X)


def ascend(model, theta, X, Y, cfg, t_z=None, record_objective=False):
    """Batched gradient ascent on the penalized objective, one row per sample.

    Runs exactly ``t_z`` steps (default cfg.t_z) of
    z <- z + eta_z * (grad_z f(theta; z) - lam * (z - x)) from z = x.
    Returns (Z, objective_trace or None).
    """
    steps = cfg.t_z if t_z is None else t_z
    X = np.asarray(X, dtype=float)
    Z = X.copy()
    trace = None
    if record_objective:
        trace = np.empty(steps + 1)
        trace[0] = penalized_objectives(model, theta, Z, Y, X, cfg.lam).mean()
    with np.errstate(over="ignore", invalid="ignore"):  # divergence handled below
        for k in range(steps):
            Z += cfg.eta_z * (model.grads_z(theta, Z, Y) - cfg.lam * (Z - X))
            if not np.all(np.isfinite(Z)):
                raise NumericError(f"inner ascent diverged at step {k + 1}")
            if record_objective:
                trace[k + 1] = penalized_objectives(model, theta, Z, Y, X, cfg.lam).mean()
    return Z, trace


def inner_maximize(model, theta, x, y, cfg):
    """Single-sample ascent with the per-step objective recorded."""
    x = np.asarray(x, dtype=float)
    Z, trace = ascend(
        model, theta, x.reshape(1, -1), np.asarray([y], dtype=float), cfg,
        record_objective=True,
    )
    return AscentReport(z_final=Z[0], iterations=cfg.t_z, objective_trace=trace)


def surrogate_gradient(model, theta, x, y, cfg):
    """Gradient of the surrogate loss in theta: loss gradient at the ascent output."""
    report = inner_maximize(model, theta, x, y, cfg)
    return model.grad_theta(theta, report.z_final, y)


def exact_inner_maximizer(model, theta, X, lam):
    """Closed-form maximizer rows for the quadratic family: (lam*x - c*theta)/(lam - c).

    Only the quadratic loss admits a closed form; it is the oracle against
    which the iterative ascent is checked.
    """
    if not isinstance(model, QuadraticLoss):
        raise TypeError(f"no closed-form inner maximizer for {model.kind} loss")
    c = model.curvature
    if lam <= c:
        raise RegimeError(f"inner objective not concave: lam={lam} <= curvature={c}")
    X = np.asarray(X, dtype=float)
    return (lam * X - c * theta) / (lam - c)


def theoretical_ascent_step(lam, l_c=COST_SMOOTHNESS):
    """Step size 2/(L_g + lam_g) for the strongly concave inner objective."""
    return 2.0 / (lam * l_c + lam)


def surrogate_state(model, theta, X, Y, lam, t_z=400, eta_z=None, exact=None):
    """Objective value and gradient of the surrogate averaged over a sample set.

    Diagnostic-grade: maximizers come from the closed form when the model has
    one (default for the quadratic family), otherwise from a long ascent at
    the theoretical step size. Returns (value, gradient).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if exact is None:
        exact = isinstance(model, QuadraticLoss)
    if exact:
        Z = exact_inner_maximizer(model, theta, X, lam)
    else:
        cfg = DROConfig(lam, eta_z if eta_z is not None else theoretical_ascent_step(lam), t_z)
        Z, _ = ascend(model, theta, X, Y, cfg)
    value = float(penalized_objectives(model, theta, Z, Y, X, lam).mean())
    return value, model.mean_grad_theta(theta, Z, Y)


def contraction_factor(l_zz, lam, l_c=COST_SMOOTHNESS):
    """Per-iteration distance contraction of the inner ascent at the theoretical step."""
    return (2.0 * l_zz + lam * l_c - lam) / (lam * l_c + lam)


def required_iterations(constants: SmoothnessConstants, lam, l_c, eps, d_z):
    """Iterations needed to bring the ascent within eps of the exact maximizer.

    Returns (iterations, p) with p the contraction factor; the count is
    ceil(ln(d_z/eps) / ln(1/p)) for an ascent started at distance d_z.
    """
    if lam <= constants.l_zz:
        raise RegimeError(f"need lam > L_zz, got lam={lam}, L_zz={constants.l_zz}")
    if eps <= 0 or d_z <= 0:
        raise ConfigError("eps and d_z must be positive")
    p = contraction_factor(constants.l_zz, lam, l_c)
    if not 0.0 < p < 1.0:
        raise RegimeError(f"contraction factor {p} outside (0, 1)")
    ratio = math.log(d_z / eps) / math.log(1.0 / p)
    # tiny slack so exact-power cases are not bumped up by float rounding
    return max(0, math.ceil(ratio - 1e-9)), p


@dataclass(frozen=True)
class EpsilonSchedule:
    """Two-stage accuracy target: coarse before the boundary iteration, fine after."""

    phase_boundary: int
    eps_coarse: float
    eps_fine: float

    def __post_init__(self):
        if not (self.eps_coarse >= self.eps_fine > 0):
            raise ConfigError(
                f"need eps_coarse >= eps_fine > 0, got {self.eps_coarse}, {self.eps_fine}"
            )

    def __call__(self, t):
        return self.eps_coarse if t < self.phase_boundary else self.eps_fine
