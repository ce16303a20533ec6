"""Linear mixed models with crossed random intercepts for subjects and items.

The response is a log-transformed duration measure; the fixed part is an
intercept plus (optionally) a condition contrast coded A = -0.5, B = +0.5.
Variance components are estimated by maximum likelihood on the profiled
deviance, parameterized by the ratios ``lambda = var_re / sigma2``.

Two evaluators of the profiled deviance are provided:

* a Woodbury evaluator that works for any subject/item layout and only
  factors an (S + I)-dimensional inner matrix;
* a spectral evaluator for complete crossed designs (every subject sees
  every item exactly once).  There the marginal covariance splits into four
  orthogonal subspaces (grand mean, subject contrasts, item contrasts,
  interaction) with eigenvalues known in closed form, so each evaluation
  costs O(1) once the per-subspace cross products are known.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datagen import MEASURES, Dataset
from .numerics import Cholesky, OptimResult, chisq1_sf, nelder_mead

LOG_2PI = math.log(2.0 * math.pi)
CONDITION_CODES = (-0.5, 0.5)
OPTIM_TOL = 1e-9
OPTIM_MAX_EVALS = 500
LAMBDA_FLOOR = 1e-4
MONOTONE_SLACK = 1e-8


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    response: str
    include_condition: bool = True

    def __post_init__(self):
        if self.response not in MEASURES:
            raise ValueError(f"unknown response {self.response!r}")


@dataclass(frozen=True)
class FitResult:
    beta0: float
    beta1: float | None
    sigma2: float
    var_subj: float
    var_item: float
    loglik: float
    converged: bool
    n_evals: int
    lambda_s: float
    lambda_i: float

    @property
    def deviance(self) -> float:
        return -2.0 * self.loglik


@dataclass(frozen=True)
class MeasureTest:
    measure: str
    lrt_stat: float
    p_value: float
    sign: int
    effect_ms: float
    beta1: float = 0.0
    full_fit: FitResult | None = None
    null_fit: FitResult | None = None
    valid: bool = True


def _solve_gls(xx, xy, yy, n, logdet):
    """Profile out beta and sigma2 given the V^-1 cross products."""
    if len(xy) == 1:
        if xx[0][0] <= 0:
            raise FitError("singular fixed-effects cross product")
        beta = (xy[0] / xx[0][0],)
        rss = yy - xy[0] * beta[0]
    else:
        (a, b), (_, d) = xx
        det = a * d - b * b
        if det <= 1e-300 * max(abs(a * d), 1.0):
            raise FitError("singular fixed-effects cross product")
        beta = ((d * xy[0] - b * xy[1]) / det, (a * xy[1] - b * xy[0]) / det)
        rss = yy - xy[0] * beta[0] - xy[1] * beta[1]
    if not rss > 0:
        return math.inf, beta, 0.0
    sigma2 = rss / n
    return n * (LOG_2PI + math.log(sigma2)) + logdet + n, beta, sigma2


class CrossedModel:
    """One response with crossed subject/item intercepts, ready to evaluate.

    Parameters
    ----------
    y : array
        Response on the modelling (log) scale.
    subject, item : int arrays
        0-based group indices.
    condition : array or None
        Condition indicator (0 = A, 1 = B); None fits the intercept-only
        model.
    """

    def __init__(self, y, subject, item, condition=None):
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise ValueError("response must be a nonempty vector")
        if not np.all(np.isfinite(y)):
            raise ValueError("response contains non-finite values")
        self.y = y
        self.subject = np.asarray(subject, dtype=np.int64)
        self.item = np.asarray(item, dtype=np.int64)
        self.n = y.size
        self.n_subjects = int(self.subject.max()) + 1
        self.n_items = int(self.item.max()) + 1
        cols = [np.ones(self.n)]
        if condition is not None:
            cond = np.asarray(condition)
            cols.append(np.where(cond.astype(bool), CONDITION_CODES[1], CONDITION_CODES[0]))
        self.X = np.column_stack(cols)
        self.p = self.X.shape[1]
        self._grid = _grid_order(self.subject, self.item, self.n_subjects, self.n_items)
        self._spectral = None
        self._woodbury = None

    @property
    def is_complete(self) -> bool:
        return self._grid is not None

    # -- Woodbury route -------------------------------------------------
    def _woodbury_setup(self):
        if self._woodbury is None:
            S, I = self.n_subjects, self.n_items
            q = S + I
            ztz = np.zeros((q, q))
            np.add.at(ztz, (self.subject, self.subject), 1.0)
            np.add.at(ztz, (S + self.item, S + self.item), 1.0)
            np.add.at(ztz, (self.subject, S + self.item), 1.0)
            np.add.at(ztz, (S + self.item, self.subject), 1.0)
            W = np.column_stack([self.X, self.y])
            ztw = np.zeros((q, W.shape[1]))
            np.add.at(ztw, self.subject, W)
            np.add.at(ztw, S + self.item, W)
            self._woodbury = (ztz, ztw, W.T @ W)
        return self._woodbury

    def deviance_woodbury(self, lambda_s: float, lambda_i: float):
        """Profiled ML deviance via the Woodbury identity.

        ``V^-1 = I - Z D (I + D Z'Z D)^-1 D Z'`` with ``D = diag(sqrt(lambda))``
        and ``log det V = log det (I + D Z'Z D)``.
        """
        if lambda_s < 0 or lambda_i < 0:
            raise ValueError("variance ratios must be nonnegative")
        ztz, ztw, wtw = self._woodbury_setup()
        S = self.n_subjects
        d = np.empty(ztz.shape[0])
        d[:S] = math.sqrt(lambda_s)
        d[S:] = math.sqrt(lambda_i)
        inner = np.eye(d.size) + d[:, None] * ztz * d[None, :]
        chol = Cholesky(inner)
        u = chol.solve_lower(d[:, None] * ztw)
        cross = wtw - u.T @ u
        p = self.p
        xx = cross[:p, :p].tolist()
        xy = cross[:p, p].tolist()
        return _solve_gls(xx, xy, float(cross[p, p]), self.n, chol.logdet)

    # -- spectral route -------------------------------------------------
    def _spectral_setup(self):
        if self._spectral is None:
            S, I = self.n_subjects, self.n_items
            cols = [self.X[self._grid, j].reshape(S, I) for j in range(1, self.p)]
            cols.append(self.y[self._grid].reshape(S, I))
            self._spectral = _subspace_products(np.stack(cols), S, I)
        return self._spectral

    def deviance_spectral(self, lambda_s: float, lambda_i: float):
        """Profiled ML deviance from the closed-form eigenstructure of V."""
        if self._grid is None:
            raise FitError("spectral evaluation needs a complete crossed design")
        return _spectral_deviance(self._spectral_setup(), self.n_subjects,
                                  self.n_items, self.p, lambda_s, lambda_i)

    def deviance(self, lambda_s: float, lambda_i: float):
        if self._grid is not None:
            return self.deviance_spectral(lambda_s, lambda_i)
        return self.deviance_woodbury(lambda_s, lambda_i)

    # -- fitting --------------------------------------------------------
    def moment_start(self) -> tuple[float, float]:
        """Method-of-moments variance ratios from subject and item means."""
        S, I = self.n_subjects, self.n_items
        y = self.y
        cs = np.bincount(self.subject, minlength=S)
        ci = np.bincount(self.item, minlength=I)
        ms = np.bincount(self.subject, y, S) / np.maximum(cs, 1)
        mi = np.bincount(self.item, y, I) / np.maximum(ci, 1)
        g = y.mean()
        resid = y - ms[self.subject] - mi[self.item] + g
        df_e = max(self.n - S - I + 1, 1)
        ms_e = float(resid @ resid) / df_e
        if not ms_e > 0:
            return 1.0, 1.0
        ms_s = float(cs @ (ms - g) ** 2) / max(S - 1, 1)
        ms_i = float(ci @ (mi - g) ** 2) / max(I - 1, 1)
        lam_s = (ms_s - ms_e) / (self.n / S) / ms_e
        lam_i = (ms_i - ms_e) / (self.n / I) / ms_e
        return max(lam_s, LAMBDA_FLOOR), max(lam_i, LAMBDA_FLOOR)

    def fit(self) -> FitResult:
        """Maximum-likelihood fit.

        Nelder-Mead in ``(log lambda_s, log lambda_i)`` from the moment
        start, plus the three boundary candidates (each one-dimensional edge
        optimized, and the corner).  The best candidate wins.
        """
        dev = self.deviance
        ls0, li0 = self.moment_start()
        total_evals = 0
        candidates = []

        def value(ls, li):
            try:
                return dev(ls, li)[0]
            except (FitError, np.linalg.LinAlgError):
                return math.inf

        def run(f, start):
            nonlocal total_evals
            try:
                res = nelder_mead(f, start, tol=OPTIM_TOL, max_evals=OPTIM_MAX_EVALS)
            except ValueError:  # non-finite at the start; candidate is unusable
                total_evals += 1
                return OptimResult(np.asarray(start, dtype=float), math.inf, False, 1)
            total_evals += res.n_evals
            return res

        exp = math.exp
        res = run(lambda t: value(exp(t[0]), exp(t[1])), [math.log(ls0), math.log(li0)])
        candidates.append((res.fun, exp(res.x[0]), exp(res.x[1]), res.converged))
        res = run(lambda t: value(0.0, exp(t[0])), [math.log(li0)])
        candidates.append((res.fun, 0.0, exp(res.x[0]), res.converged))
        res = run(lambda t: value(exp(t[0]), 0.0), [math.log(ls0)])
        candidates.append((res.fun, exp(res.x[0]), 0.0, res.converged))
        candidates.append((value(0.0, 0.0), 0.0, 0.0, True))
        total_evals += 1

        best = min(candidates, key=lambda c: c[0])
        if not math.isfinite(best[0]):
            raise FitError("profiled deviance is not finite at any candidate")
        _, ls, li = best[:3]
        deviance, beta, sigma2 = dev(ls, li)
        return FitResult(
            beta0=beta[0],
            beta1=beta[1] if self.p > 1 else None,
            sigma2=sigma2,
            var_subj=ls * sigma2,
            var_item=li * sigma2,
            loglik=-0.5 * deviance,
            converged=bool(best[3]),
            n_evals=total_evals,
            lambda_s=ls,
            lambda_i=li,
        )


def _grid_order(subject, item, S, I):
    """Permutation into subject-major grid order, or None if the design is
    not a complete crossing with one observation per cell."""
    if subject.size != S * I or subject.min() < 0 or item.min() < 0:
        return None
    cell = subject * I + item
    if np.array_equal(cell, np.arange(S * I)):
        return slice(None)
    order = np.argsort(cell, kind="stable")
    if not np.array_equal(cell[order], np.arange(S * I)):
        return None
    return order


def _subspace_products(M, S, I):
    """Cross products of the non-constant columns within each eigenspace.

    ``M`` has shape ``(k, S, I)``.  Returns ``(grand, qs, qi, qe)`` where
    ``grand[k]`` is the grand mean of column k and ``qs, qi, qe`` are
    ``k x k`` Gram matrices of the subject-contrast, item-contrast and
    interaction projections.
    """
    g = M.mean(axis=(1, 2))
    r = M.mean(axis=2) - g[:, None]
    c = M.mean(axis=1) - g[:, None]
    e = M - r[:, :, None] - c[:, None, :] - g[:, None, None]
    e = e.reshape(M.shape[0], -1)
    return (g.tolist(), (I * (r @ r.T)).tolist(), (S * (c @ c.T)).tolist(),
            (e @ e.T).tolist())


def _spectral_deviance(products, S, I, p, lambda_s, lambda_i):
    if lambda_s < 0 or lambda_i < 0:
        raise ValueError("variance ratios must be nonnegative")
    g, qs, qi, qe = products
    n = S * I
    ds = 1.0 + lambda_s * I
    di = 1.0 + lambda_i * S
    d0 = ds + lambda_i * S
    logdet = math.log(d0) + (S - 1) * math.log(ds) + (I - 1) * math.log(di)

    def q(a, b):
        return n * g[a] * g[b] / d0 + qs[a][b] / ds + qi[a][b] / di + qe[a][b]

    # column 0 of the products is the condition contrast when p == 2,
    # the intercept's only nonzero component is the grand mean direction
    yk = p - 1
    yy = q(yk, yk)
    if p == 1:
        return _solve_gls([[n / d0]], [n * g[0] / d0], yy, n, logdet)
    x01 = n * g[0] / d0
    xx = [[n / d0, x01], [x01, q(0, 0)]]
    xy = [n * g[1] / d0, q(0, 1)]
    return _solve_gls(xx, xy, yy, n, logdet)


def _model(data: Dataset, spec: ModelSpec) -> CrossedModel:
    y = data.measure(spec.response)
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise ValueError(f"{spec.response}: durations must be positive and finite")
    return CrossedModel(np.log(y), data.subject, data.item,
                        data.condition if spec.include_condition else None)


def profiled_deviance(data: Dataset, spec: ModelSpec, lambda_s: float, lambda_i: float):
    """Profiled ML deviance at the given variance ratios.

    Returns ``(deviance, beta, sigma2)``; ``beta`` is ``(beta0,)`` or
    ``(beta0, beta1)``.
    """
    return _model(data, spec).deviance_woodbury(lambda_s, lambda_i)


def fit(data: Dataset, spec: ModelSpec) -> FitResult:
    return _model(data, spec).fit()


def lrt(data: Dataset, measure: str) -> MeasureTest:
    """Likelihood-ratio test of the condition effect on one log measure."""
    full = fit(data, ModelSpec(measure, True))
    null = fit(data, ModelSpec(measure, False))
    return _measure_test(data, measure, full, null)


def _measure_test(data, measure, full, null):
    diff = full.loglik - null.loglik
    stat = max(0.0, 2.0 * diff)
    a_mean, b_mean = data.condition_means(measure)
    valid = full.converged and null.converged and diff >= -MONOTONE_SLACK
    return MeasureTest(
        measure=measure,
        lrt_stat=stat,
        p_value=chisq1_sf(stat),
        sign=int(np.sign(full.beta1)),
        effect_ms=b_mean - a_mean,
        beta1=full.beta1,
        full_fit=full,
        null_fit=null,
        valid=valid,
    )


def lrt_all(data: Dataset, measures=MEASURES) -> list[MeasureTest]:
    """Likelihood-ratio tests for several measures of one dataset.

    Shares the design bookkeeping between measures; results are identical
    to calling :func:`lrt` per measure.
    """
    out = []
    for m in measures:
        y = np.log(data.measure(m))
        full = CrossedModel(y, data.subject, data.item, data.condition)
        null = CrossedModel(y, data.subject, data.item, None)
        try:
            full_fit, null_fit = full.fit(), null.fit()
        except FitError:
            a_mean, b_mean = data.condition_means(m)
            out.append(MeasureTest(m, 0.0, 1.0, 0, b_mean - a_mean, valid=False))
            continue
        out.append(_measure_test(data, m, full_fit, null_fit))
    return out
