"""Numerical substrate: random streams, tail probabilities, binomial
intervals, a small Nelder-Mead minimizer and a Cholesky wrapper.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lapack, solve_triangular

_Z975 = NormalDist().inv_cdf(0.975)


class RngStream:
    """Reproducible random stream keyed by ``(master_seed, stream_id)``.

    The stream is a Philox counter-based generator whose key is derived from
    a ``SeedSequence``; the same key yields the same sequence on every
    platform, regardless of which thread or process draws from it.
    ``stream_id`` may be an int or a tuple of ints (hierarchical streams).
    """

    def __init__(self, master_seed: int, stream_id: int | Sequence[int] = ()):
        if isinstance(stream_id, (int, np.integer)):
            stream_id = (int(stream_id),)
        self.master_seed = int(master_seed)
        self.stream_id = tuple(int(s) for s in stream_id)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.stream_id)
        self.generator = np.random.Generator(np.random.Philox(seq))

    def substream(self, *ids: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id + tuple(ids))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        """Integers uniform on the inclusive range ``[low, high]``."""
        return self.generator.integers(low, high, size=size, endpoint=True)

    def normal(self, mean=0.0, sd=1.0, size=None):
        return self.generator.normal(mean, sd, size)

    def lognormal(self, log_mean=0.0, log_sd=1.0, size=None):
        return np.exp(self.normal(log_mean, log_sd, size))

    def bernoulli(self, p: float, size=None):
        return self.generator.random(size) < p

    def permutation(self, x):
        return self.generator.permutation(x)

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"


def chisq1_sf(t: float) -> float:
    """Upper tail probability of the chi-square distribution with 1 df."""
    if not t >= 0:
        raise ValueError(f"chi-square statistic must be nonnegative, got {t}")
    return math.erfc(math.sqrt(t / 2.0))


def binom_ci95(successes: int, n: int) -> tuple[float, float]:
    """Wilson score 95% interval for a binomial proportion."""
    if n < 1:
        raise ValueError("binomial interval needs n >= 1")
    if not 0 <= successes <= n:
        raise ValueError(f"successes must lie in [0, {n}], got {successes}")
    z2 = _Z975 * _Z975
    p = successes / n
    denom = 1.0 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = _Z975 * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == n else min(1.0, center + half)
    return low, high


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    converged: bool
    n_evals: int


def nelder_mead(
    f: Callable[[np.ndarray], float],
    start: Sequence[float],
    tol: float = 1e-9,
    max_evals: int = 500,
    step: float = 0.5,
    restarts: int = 0,
) -> OptimResult:
    """Minimize ``f`` with the Nelder-Mead simplex method.

    Uses reflection 1, expansion 2, contraction 0.5 and shrink 0.5.
    Convergence is declared when the spread of function values across the
    simplex falls below ``tol``.  With ``restarts > 0`` a fresh simplex is
    built around the best vertex after each converged pass, which guards
    against premature collapse on curved valleys.  ``max_evals`` is a
    budget shared across restarts.
    """
    x0 = np.asarray(start, dtype=float)
    f0 = f(x0)
    if not math.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")
    evals = [1]

    def call(x):
        evals[0] += 1
        v = f(x)
        return v if math.isfinite(v) else math.inf

    best_x, best_f = x0, f0
    converged = False
    for _ in range(restarts + 1):
        best_x, best_f, converged = _nm_pass(call, best_x, best_f, tol, max_evals, step, evals)
        if not converged or evals[0] >= max_evals:
            break
    return OptimResult(best_x, best_f, converged, evals[0])


def _nm_pass(call, x0, f0, tol, max_evals, step, evals):
    n = x0.size
    simplex = [x0]
    values = [f0]
    for i in range(n):
        x = x0.copy()
        x[i] += step
        simplex.append(x)
        values.append(call(x))

    while True:
        order = sorted(range(n + 1), key=values.__getitem__)
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        if values[-1] - values[0] < tol:
            return simplex[0], values[0], True
        if evals[0] >= max_evals:
            return simplex[0], values[0], False

        centroid = sum(simplex[:-1]) / n
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = call(xr)
        if fr < values[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = call(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
        elif fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        else:
            if fr < values[-1]:
                xc = centroid + 0.5 * (xr - centroid)
            else:
                xc = centroid + 0.5 * (worst - centroid)
            fc = call(xc)
            if fc < min(fr, values[-1]):
                simplex[-1], values[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    values[i] = call(simplex[i])


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    def __init__(self, pivot: int):
        super().__init__(f"matrix is not positive definite (pivot {pivot} failed)")
        self.pivot = pivot


class Cholesky:
    """Lower Cholesky factor ``L`` of a symmetric positive-definite matrix."""

    def __init__(self, a):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("expected a square matrix")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        lower, info = lapack.dpotrf(a, lower=1, clean=1)
        if info > 0:
            # LAPACK reports the 1-based order of the failing leading minor
            raise NotPositiveDefiniteError(info - 1)
        if info < 0:
            raise ValueError(f"dpotrf: illegal argument {-info}")
        self.lower = lower

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))

    def solve_lower(self, b):
        return solve_triangular(self.lower, b, lower=True)

    def solve(self, b):
        """Solve ``A x = b``."""
        y = solve_triangular(self.lower, b, lower=True)
        return solve_triangular(self.lower, y, lower=True, trans="T")


def cholesky(a) -> Cholesky:
    return Cholesky(a)
