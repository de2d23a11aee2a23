"""Exponential-family pieces and l1-penalized GLM fitting over a decaying buffer.

Two families are supported:

* gaussian  — identity link, variance 1, cumulant theta^2 / 2; the per-sample
  loss is the squared residual (y - x^T beta)^2.
* binomial  — logit link, variance mu (1 - mu), cumulant log(1 + e^theta);
  the per-sample loss is -y eta + log(1 + e^eta), evaluated overflow-safely.

The gaussian penalized objective reduces exactly to the weighted lasso of
:mod:`raplasso.lasso_cd`; the binomial one is solved by iteratively reweighted
least squares with coordinate-descent subproblems and backtracking so the
penalized objective decreases monotonically.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from . import lasso_cd
from .lasso_cd import LassoFit

__all__ = ["Family", "GAUSSIAN", "BINOMIAL", "get_family", "ObsBuffer",
           "ArrayBuffer", "fit_penalized", "penalized_objective",
           "curvature_gram", "glm_kkt_violation"]

#: buffer entries lighter than this weight are dropped
WEIGHT_FLOOR = 1e-4
#: clip for predicted binomial means when forming working responses
MU_EPS = 1e-10
#: lower bound on the IRLS working variance
V_FLOOR = 1e-6

IRLS_TOL = 1e-6
IRLS_MAX_ITER = 50
BETA_CAP = 1e6


class Family:
    """One exponential-family response distribution with its canonical link."""

    def __init__(self, kind: str):
        if kind not in ("gaussian", "binomial"):
            raise ValueError(f"unknown family {kind!r}")
        self.kind = kind

    # -- link and moments ------------------------------------------------
    def link(self, mu):
        if self.kind == "gaussian":
            return mu
        mu = np.asarray(mu, dtype=float)
        return np.log(mu / (1.0 - mu))

    def inv_link(self, eta):
        if self.kind == "gaussian":
            return eta
        return _sigmoid(eta)

    def variance(self, mu):
        if self.kind == "gaussian":
            return np.ones_like(np.asarray(mu, dtype=float))
        mu = np.asarray(mu, dtype=float)
        return mu * (1.0 - mu)

    def cumulant(self, theta):
        if self.kind == "gaussian":
            return 0.5 * np.asarray(theta, dtype=float) ** 2
        return np.logaddexp(0.0, theta)

    # -- per-sample look-ahead loss ---------------------------------------
    def nll(self, x, y: float, beta) -> float:
        """Negative log-likelihood of one observation under coefficients beta.

        Gaussian uses the plain squared residual; binomial the logistic
        deviance term, stable for large |x^T beta|.
        """
        eta = float(np.dot(x, beta))
        if self.kind == "gaussian":
            return (y - eta) ** 2
        self._check_binary(y)
        return -y * eta + np.logaddexp(0.0, eta)

    def nll_grad_beta(self, x, y: float, beta) -> np.ndarray:
        """Gradient of :meth:`nll` with respect to beta."""
        x = np.asarray(x, dtype=float)
        eta = float(np.dot(x, beta))
        if self.kind == "gaussian":
            return -2.0 * (y - eta) * x
        self._check_binary(y)
        return (_sigmoid(eta) - y) * x

    def _check_binary(self, y: float) -> None:
        if y not in (0, 0.0, 1, 1.0):
            raise ValueError(f"binomial response must be 0 or 1, got {y!r}")

    def __repr__(self) -> str:
        return f"Family({self.kind!r})"


GAUSSIAN = Family("gaussian")
BINOMIAL = Family("binomial")


def get_family(kind) -> Family:
    if isinstance(kind, Family):
        return kind
    return {"gaussian": GAUSSIAN, "binomial": BINOMIAL}[kind]


def _sigmoid(eta):
    # exp only ever sees non-positive arguments
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    if out.ndim == 0:
        return float(out)
    return out


class ObsBuffer:
    """Ring of recent observations with geometric age weights r**(t - i).

    Entries whose weight falls below WEIGHT_FLOOR are dropped, which caps the
    length at ceil(log(floor) / log(r)); with r == 1 nothing is ever dropped.
    Needed because the logistic loss has no finite sufficient statistics.
    """

    def __init__(self, p: int, r: float):
        if p < 1:
            raise ValueError(f"dimension p must be >= 1, got {p}")
        if not (0.0 < r <= 1.0):
            raise ValueError(f"forgetting factor r must be in (0, 1], got {r}")
        self.p = int(p)
        self.r = float(r)
        maxlen = None
        if r < 1.0:
            maxlen = int(math.ceil(math.log(WEIGHT_FLOOR) / math.log(r)))
        self.maxlen = maxlen
        self._x = deque(maxlen=maxlen)
        self._y = deque(maxlen=maxlen)
        self.t = 0

    def __len__(self) -> int:
        return len(self._x)

    def append(self, x, y: float) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.p,):
            raise ValueError(f"x has shape {x.shape}, expected ({self.p},)")
        if not (np.all(np.isfinite(x)) and np.isfinite(y)):
            raise ValueError("non-finite value in observation")
        self._x.append(x)
        self._y.append(float(y))
        self.t += 1

    def arrays(self):
        """Current contents as (X, y, w), oldest first, weights decreasing with age."""
        n = len(self._x)
        X = np.array(self._x) if n else np.zeros((0, self.p))
        y = np.array(self._y) if n else np.zeros(0)
        ages = np.arange(n - 1, -1, -1, dtype=float)
        w = self.r ** ages
        return X, y, w


class ArrayBuffer:
    """Fixed observation set with explicit weights, quacking like ObsBuffer.

    Lets the batch cross-validation path reuse the buffer-driven fitters.
    """

    def __init__(self, X, y, w=None):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.w = np.ones(self.y.shape[0]) if w is None else np.asarray(w, dtype=float)
        self.p = self.X.shape[1]

    def __len__(self) -> int:
        return self.y.shape[0]

    def arrays(self):
        return self.X, self.y, self.w


def penalized_objective(buf: ObsBuffer, family: Family, lam: float, beta) -> float:
    """Weighted penalized negative log-likelihood sum(w_i nll_i) + lam ||beta||_1.

    For the gaussian family the loss term carries the internal 1/2, matching
    the lasso solver's scaling.
    """
    X, y, w = buf.arrays()
    eta = X @ beta
    if family.kind == "gaussian":
        loss = 0.5 * float(w @ (y - eta) ** 2)
    else:
        loss = float(w @ (-y * eta + np.logaddexp(0.0, eta)))
    return loss + lam * float(np.sum(np.abs(beta)))


def curvature_gram(buf: ObsBuffer, family: Family, beta) -> np.ndarray:
    """Weighted Gram X^T diag(w_i V_i) X at beta; the GLM analog of the
    gaussian moments' gram (V_i == 1 there)."""
    X, y, w = buf.arrays()
    if family.kind == "gaussian":
        u = w
    else:
        mu = _sigmoid(X @ beta)
        u = w * family.variance(mu)
    return (X * u[:, None]).T @ X


def fit_penalized(buf: ObsBuffer, family: Family, lam: float,
                  warm: LassoFit | None = None,
                  tol: float = IRLS_TOL, max_iter: int = IRLS_MAX_ITER) -> LassoFit:
    """l1-penalized GLM fit over the buffer's weighted observations.

    Gaussian reduces to a single weighted-lasso solve; binomial runs IRLS with
    a local quadratic expansion per outer iteration, backtracking whenever a
    full step would increase the penalized objective.  A coefficient magnitude
    beyond BETA_CAP marks the fit as not converged.
    """
    if len(buf) == 0:
        raise ValueError("cannot fit on an empty buffer")
    if lam < 0:
        raise ValueError(f"penalty must be >= 0, got {lam}")
    family = get_family(family)
    X, y, w = buf.arrays()

    if family.kind == "gaussian":
        A = (X * w[:, None]).T @ X
        b = X.T @ (w * y)
        beta0 = warm.beta if warm is not None else None
        beta, sweeps, converged = lasso_cd.solve_quadratic(A, b, lam, beta0)
        return LassoFit(beta=beta, lam=float(lam), iterations=sweeps, converged=converged)

    beta = warm.beta.copy() if warm is not None else np.zeros(buf.p)
    obj = penalized_objective(buf, family, lam, beta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = X @ beta
        mu = np.clip(_sigmoid(eta), MU_EPS, 1.0 - MU_EPS)
        # variance floor keeps the subproblem well posed at saturated fits;
        # the gradient part (y - mu) stays exact
        v = np.maximum(mu * (1.0 - mu), V_FLOOR)
        u = w * v
        # working response z = eta + (y - mu) / v gives b = X^T (u eta + w (y - mu))
        A = (X * u[:, None]).T @ X
        b = X.T @ (u * eta + w * (y - mu))
        cand, _, _ = lasso_cd.solve_quadratic(A, b, lam, beta.copy())

        step = cand - beta
        s = 1.0
        new_beta = cand
        new_obj = penalized_objective(buf, family, lam, new_beta)
        while new_obj > obj + 1e-12 and s > 1e-10:
            s *= 0.5
            new_beta = beta + s * step
            new_obj = penalized_objective(buf, family, lam, new_beta)
        if new_obj > obj + 1e-12:
            # no decreasing step along this direction; stop at the current point
            converged = True
            break

        delta = float(np.max(np.abs(new_beta - beta))) if buf.p else 0.0
        beta, obj = new_beta, new_obj
        if np.max(np.abs(beta)) > BETA_CAP:
            return LassoFit(beta=beta, lam=float(lam), iterations=it, converged=False)
        if delta < tol:
            converged = True
            break
    return LassoFit(beta=beta, lam=float(lam), iterations=it, converged=converged)


def glm_kkt_violation(buf: ObsBuffer, family: Family, fit: LassoFit) -> float:
    """Worst penalized-GLM stationarity violation (score replaces A beta - b)."""
    family = get_family(family)
    X, y, w = buf.arrays()
    if family.kind == "gaussian":
        resid = y - X @ fit.beta
        grad = -X.T @ (w * resid)
    else:
        mu = _sigmoid(X @ fit.beta)
        grad = -X.T @ (w * (y - mu))
    active = fit.beta != 0
    worst = 0.0
    va = np.abs(grad[active] + fit.lam * np.sign(fit.beta[active]))
    vi = np.abs(grad[~active]) - fit.lam
    if va.size:
        worst = max(worst, float(np.max(va)))
    if vi.size:
        worst = max(worst, float(np.max(vi)))
    return worst
