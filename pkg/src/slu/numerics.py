"""Float64 numeric primitives: stable softmax, cross-entropy, seeded
randomness, and finite-difference gradient verification.

All vectors and matrices throughout the toolkit are plain float64 numpy
arrays in row-major order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GradCheckNumericError

LOG_EPS = 1e-12


class SeededRng:
    """Deterministic random source backed by PCG64.

    Same (seed, stream) pair reproduces the identical draw sequence across
    runs and platforms. One instance must not be shared across concurrent
    callers; derive per-purpose instances with distinct streams instead.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((self.seed, self.stream)))
        )

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, n, size=None):
        """Draw integers uniformly from [0, n)."""
        return self._gen.integers(0, n, size=size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def choice(self, n, p=None):
        """Pick one index from range(n), optionally weighted by p."""
        return int(self._gen.choice(n, p=p))


def softmax(v) -> np.ndarray:
    """Probability vector via max-subtracted exponentials."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("softmax expects a nonempty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax input must be finite")
    e = np.exp(v - v.max())
    return e / e.sum()


def softmax_rows(a: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax over the last axis."""
    e = np.exp(a - a.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs, target: int) -> float:
    """Negative log-likelihood in nats, with a 1e-12 clamp inside the log.

    Clipped at zero: the clamp would otherwise make a perfect prediction
    infinitesimally negative.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise ValueError("cross_entropy expects a nonempty probability vector")
    if not 0 <= int(target) < probs.size:
        raise ValueError(f"target {target} out of range for {probs.size} classes")
    return max(0.0, float(-np.log(probs[int(target)] + LOG_EPS)))


def cross_entropy_rows(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-row negative log-likelihood for an (N, C) probability array."""
    n = probs.shape[0]
    return -np.log(probs[np.arange(n), targets] + LOG_EPS)


@dataclass
class GradCheckReport:
    """Outcome of comparing analytic gradients to central differences."""

    param_name: str
    max_rel_err: float
    analytic_sample: list = field(default_factory=list)
    numeric_sample: list = field(default_factory=list)

    def ok(self, tol: float = 1e-4) -> bool:
        return self.max_rel_err < tol


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-8)


def finite_diff_check(loss_fn, params, analytic, epsilon: float = 1e-5):
    """Verify analytic gradients against central differences.

    loss_fn takes the params dict and returns a scalar loss; it must be
    deterministic for fixed parameter values. Every entry of every named
    array is perturbed by +/- epsilon in place (and restored), so arrays
    must be float64 and owned by the caller.

    Returns one GradCheckReport per parameter, in params order.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-6, 1e-3]")
    reports = []
    for name, arr in params.items():
        grad = np.asarray(analytic[name], dtype=np.float64)
        if grad.shape != arr.shape:
            raise ValueError(f"analytic gradient shape mismatch for '{name}'")
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        numeric = np.zeros_like(gflat)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + epsilon
            up = loss_fn(params)
            flat[idx] = orig - epsilon
            down = loss_fn(params)
            flat[idx] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise GradCheckNumericError(
                    f"non-finite loss while perturbing '{name}' entry {idx}"
                )
            numeric[idx] = (up - down) / (2.0 * epsilon)
        errs = np.array([_rel_err(a, n) for a, n in zip(gflat, numeric)])
        worst = int(np.argmax(errs)) if errs.size else 0
        sample_idx = list(range(min(4, flat.size)))
        if flat.size and worst not in sample_idx:
            sample_idx.append(worst)
        reports.append(
            GradCheckReport(
                param_name=name,
                max_rel_err=float(errs.max()) if errs.size else 0.0,
                analytic_sample=[float(gflat[i]) for i in sample_idx],
                numeric_sample=[float(numeric[i]) for i in sample_idx],
            )
        )
    return reports


def global_norm(arrays) -> float:
    """Euclidean norm over the concatenation of all arrays."""
    total = 0.0
    for a in arrays:
        total += float(np.sum(a * a))
    return float(np.sqrt(total))


def assert_finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    return arr
