"""Online adaptation of the lasso penalty by stochastic gradient descent.

Each incoming pair (x, y) is first scored with the current model (the
look-ahead loss), then used to move the penalty:

    lam <- lam - epsilon * dC/dlam,

where dC/dlam chains the loss gradient in beta with the closed-form path
derivative dbeta/dlam.  On the active set A the lasso path is linear in lam,
so the derivative is -(A_AA)^{-1} sign(beta_A), zero off the active set; a
diagonal approximation is available for large p.  With an empty active set
the step falls back to the direction of the most correlated predictor, as in
the first move of a least-angle path.

The penalty that reaches the solver always lies in [0, lambda_max]: the
update is floored at zero, and refits cap it at the current zero-solution
boundary (the stored iterate itself may sit above a temporarily low boundary,
so a conservative level is not erased by early or noisy ceilings).

After the penalty update the observation is absorbed into the moments (and,
for the binomial family, the observation buffer) and the coefficients are
refit warm-started at the capped penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import glm, lasso_cd
from .glm import Family, ObsBuffer, get_family
from .lasso_cd import LassoFit, lambda_max
from .streaming_stats import WeightedMoments

__all__ = ["RapState", "TraceRecord", "dbeta_dlambda", "dcost_dlambda",
           "fallback_direction", "update_lambda", "RapRunner"]

MODES = ("exact", "approx")


@dataclass
class RapState:
    """Current penalty, step size, and gradient mode of one adaptive run."""

    lam: float
    epsilon: float
    mode: str = "exact"
    jitter: float = 1e-6

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"penalty must be >= 0, got {self.lam}")
        if self.epsilon < 0:
            raise ValueError(f"step size must be >= 0, got {self.epsilon}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class TraceRecord:
    """Per-step output: state after absorbing observation t.

    ``lookahead_loss`` is the loss of observation t under the model fitted on
    observations 1..t-1, i.e. measured before any update.  ``refit_failed``
    flags steps whose refit did not converge and was rejected, leaving the
    previous coefficients in place.
    """

    t: int
    lam: float
    lookahead_loss: float
    active_size: int
    f_score: float | None = None
    regime_id: int | None = None
    refit_failed: bool = False


def dbeta_dlambda(m, fit: LassoFit, mode: str = "exact", jitter: float = 1e-6) -> np.ndarray:
    """Closed-form derivative of the lasso solution with respect to the penalty.

    ``m`` is either a WeightedMoments or a weighted Gram matrix (for GLM fits
    pass the curvature Gram evaluated at the fit).  Exact mode solves on the
    active block with a small ridge term jitter * mean(diag); approximate mode
    inverts only the Gram diagonal.  Returns a length-p vector supported on
    the active set; all-zero for an empty active set.
    """
    gram = m.gram if isinstance(m, WeightedMoments) else np.asarray(m, dtype=float)
    p = gram.shape[0]
    out = np.zeros(p)
    act = fit.active_set
    if act.size == 0:
        return out
    sign_act = np.sign(fit.beta[act])
    if mode == "approx":
        out[act] = -sign_act / gram[act, act]
        return out
    if mode != "exact":
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    sub = gram[np.ix_(act, act)]
    delta = jitter * float(np.mean(np.diag(sub)))
    try:
        d = np.linalg.solve(sub + delta * np.eye(act.size), -sign_act)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"active submatrix singular beyond jitter rescue at coordinates {act.tolist()}"
        ) from exc
    if not np.all(np.isfinite(d)):
        raise np.linalg.LinAlgError(
            f"active submatrix solve produced non-finite values at coordinates {act.tolist()}"
        )
    out[act] = d
    return out


def dcost_dlambda(family: Family, x_new, y_new: float, fit: LassoFit, dbeta) -> float:
    """Chain rule: gradient of the look-ahead loss in beta, dotted with dbeta/dlam."""
    dbeta = np.asarray(dbeta, dtype=float)
    if dbeta.shape != fit.beta.shape:
        raise ValueError(f"dbeta has shape {dbeta.shape}, expected {fit.beta.shape}")
    g = get_family(family).nll_grad_beta(x_new, y_new, fit.beta)
    return float(g @ dbeta)


def fallback_direction(m: WeightedMoments):
    """Surrogate step direction when the active set is empty.

    Returns (j_hat, direction): the index of the most correlated predictor
    j_hat = argmax_j |cross_j| (smallest index on ties) and a vector whose only
    nonzero entry is -sign(cross_j) / gram_jj at j_hat.  All-zero cross gives
    (None, zeros): no movement.
    """
    if m.t < 1:
        raise ValueError("fallback direction requires at least one observation")
    direction = np.zeros(m.p)
    abs_cross = np.abs(m.cross)
    if not np.any(abs_cross > 0):
        return None, direction
    j = int(np.argmax(abs_cross))
    direction[j] = -np.sign(m.cross[j]) / m.gram[j, j]
    return j, direction


def update_lambda(s: RapState, grad: float, lam_max: float) -> RapState:
    """One gradient step on the penalty, clamped into [0, lam_max]."""
    if not np.isfinite(grad):
        raise ValueError(f"non-finite penalty gradient {grad!r}")
    if lam_max < 0:
        raise ValueError(f"lam_max must be >= 0, got {lam_max}")
    new = min(max(s.lam - s.epsilon * grad, 0.0), lam_max)
    return replace(s, lam=new)


class RapRunner:
    """Stateful driver of the full adaptive iteration over a stream.

    One step processes one (x, y) pair in order: record the look-ahead loss
    under the current fit, compute the penalty gradient (or the empty-set
    fallback), update lam, absorb the observation, refit warm-started.

    ``lam_policy``, if given, replaces the gradient update entirely: the
    penalty at step t is policy(t, omega_t) evaluated after absorbing the
    observation.  Used for fixed and stepwise baseline arms so all arms share
    the same streaming engine and loss accounting.
    """

    def __init__(self, p: int, family="gaussian", r: float = 0.95,
                 epsilon: float = 0.025, lambda0: float = 0.1,
                 mode: str = "exact", jitter: float = 1e-6, lam_policy=None):
        self.family = get_family(family)
        self.moments = WeightedMoments(p, r)
        self.buffer = ObsBuffer(p, r) if self.family.kind == "binomial" else None
        self.state = RapState(lam=float(lambda0), epsilon=float(epsilon),
                              mode=mode, jitter=jitter)
        self.fit = LassoFit(beta=np.zeros(p), lam=float(lambda0))
        self.lam_policy = lam_policy

    @property
    def p(self) -> int:
        return self.moments.p

    @property
    def t(self) -> int:
        return self.moments.t

    def _derivative_gram(self):
        if self.family.kind == "gaussian":
            return self.moments
        return glm.curvature_gram(self.buffer, self.family, self.fit.beta)

    def penalty_gradient(self, x, y: float):
        """dC/dlam for the would-be next observation, without mutating state.

        None when no direction is available (empty active set with an
        all-zero cross moment): the penalty then stays put.
        """
        if self.fit.active_set.size:
            dbeta = dbeta_dlambda(self._derivative_gram(), self.fit,
                                  self.state.mode, self.state.jitter)
        elif self.moments.t >= 1:
            j, dbeta = fallback_direction(self.moments)
            if j is None:
                return None
        else:
            return None
        return dcost_dlambda(self.family, x, y, self.fit, dbeta)

    def step(self, x, y: float, true_support=None, regime_id=None) -> TraceRecord:
        x = np.asarray(x, dtype=float)
        loss = self.family.nll(x, y, self.fit.beta)

        # epsilon == 0 is the degenerate no-adaptation mode: lam stays at its
        # initial value
        if (self.lam_policy is None and self.state.epsilon > 0.0
                and self.moments.t >= 1):
            grad = self.penalty_gradient(x, y)
            if grad is not None:
                # the stored iterate is only bounded below; the zero-solution
                # ceiling applies to the fit-relevant penalty at refit time,
                # so a conservative level survives ceiling fluctuations
                self.state = update_lambda(self.state, grad, np.inf)

        self.moments.update(x, y)
        if self.buffer is not None:
            self.buffer.append(x, y)

        if self.lam_policy is not None:
            lam_fit = max(float(self.lam_policy(self.moments.t, self.moments.omega)),
                          0.0)
            self.state = replace(self.state, lam=lam_fit)
        else:
            lam_fit = min(self.state.lam, lambda_max(self.moments))

        refit_failed = False
        if self.family.kind == "gaussian":
            self.fit = lasso_cd.fit(self.moments, lam_fit, warm=self.fit)
        else:
            new_fit = glm.fit_penalized(self.buffer, self.family, lam_fit,
                                        warm=self.fit)
            if new_fit.converged:
                self.fit = new_fit
            else:
                # separable data near lam = 0 has no finite minimizer; keep the
                # last viable coefficients and let the penalty recover
                refit_failed = True

        f = None
        if true_support is not None:
            from .bench import f_score
            f = f_score(self.fit.active_set, true_support)
        return TraceRecord(t=self.moments.t, lam=lam_fit, lookahead_loss=loss,
                           active_size=self.fit.active_size, f_score=f,
                           regime_id=regime_id, refit_failed=refit_failed)

    def run(self, samples) -> list[TraceRecord]:
        """Process a sequence of StreamSample-like objects (x, y, truth, regime)."""
        records = []
        for s in samples:
            records.append(self.step(s.x, s.y, true_support=s.true_support,
                                     regime_id=s.regime_id))
        return records
