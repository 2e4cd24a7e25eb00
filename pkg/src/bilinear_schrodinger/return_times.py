"""Integer times at which the free flow nearly comes back to its starting point."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .spectral import StateCoeffs, sobolev_weights

TWO_PI = 2 * np.pi


@dataclass
class ReturnTime:
    k: int
    defect: float
    found: bool
    phase_errors: np.ndarray

    def to_dict(self) -> dict:
        return {"k": self.k, "defect": self.defect, "found": self.found,
                "phase_errors": [float(x) for x in self.phase_errors]}


def _reduced(lambdas, gauge_shift: float) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float)) - gauge_shift
    if lam.ndim != 1 or lam.size == 0 or not np.all(np.isfinite(lam)):
        raise ValidationError("lambdas must be a non-empty finite sequence")
    return np.mod(lam, TWO_PI)


def phase_errors(lambdas, k: int, gauge_shift: float = 0.0) -> np.ndarray:
    """|exp(-i lambda_j k) - 1| per mode (gauge shift divided out)."""
    alpha = _reduced(lambdas, gauge_shift)
    return 2 * np.abs(np.sin(0.5 * np.mod(alpha * k, TWO_PI)))


def return_defect(lambdas, k: int, gauge_shift: float = 0.0) -> float:
    return float(phase_errors(lambdas, k, gauge_shift).sum())


def find_return_time(lambdas, eps: float, k_max: int, k_min: int = 1, gauge_shift: float = 0.0,
                     block: int = 1 << 16) -> ReturnTime:
    """Smallest k in [k_min, k_max] with sum_j |exp(-i lambda_j k) - 1| < eps.

    Exhaustive scan; if nothing qualifies the best k seen is returned with
    ``found=False``.
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    if k_max < 1 or k_min < 1 or k_min > k_max:
        raise ValidationError("need 1 <= k_min <= k_max")
    alpha = _reduced(lambdas, gauge_shift)
    best_k, best_d = k_min, np.inf
    for start in range(k_min, k_max + 1, block):
        ks = np.arange(start, min(start + block, k_max + 1), dtype=float)
        d = 2 * np.abs(np.sin(0.5 * np.mod(np.outer(ks, alpha), TWO_PI))).sum(axis=1)
        hit = np.flatnonzero(d < eps)
        if hit.size:
            k = int(ks[hit[0]])
            return ReturnTime(k, float(d[hit[0]]), True, phase_errors(lambdas, k, gauge_shift))
        i = int(np.argmin(d))
        if d[i] < best_d:
            best_k, best_d = int(ks[i]), float(d[i])
    return ReturnTime(best_k, best_d, False, phase_errors(lambdas, best_k, gauge_shift))


def verify_return(ztilde: StateCoeffs, k: int, s: float = 3.0, n_head: int | None = None) -> dict:
    """||free_evolution(ztilde, k) - ztilde||_s with the gauge phase removed, and its head/tail bound.

    bound = max_{j <= n_head} |exp(-i lambda_j k) - 1| * ||head||_s + 2 ||tail||_s.
    """
    system = ztilde.system
    lam = np.asarray(system.lambdas, dtype=float)
    shift = float(getattr(system, "gauge_shift", 0.0))
    n = lam.size
    n_head = n if n_head is None else n_head
    if not 0 <= n_head <= n:
        raise ValidationError(f"n_head must lie in 0..{n}")
    err = phase_errors(lam, k, shift)
    # phases of the physical spectrum, exactly as in the defect
    diff = ztilde.coeffs * (np.exp(-1j * np.mod(lam - shift, TWO_PI) * k) - 1)
    w = sobolev_weights(lam, s)
    value = float(np.linalg.norm(w * diff))
    head = float(np.linalg.norm((w * ztilde.coeffs)[:n_head]))
    tail = float(np.linalg.norm((w * ztilde.coeffs)[n_head:]))
    head_err = float(err[:n_head].max()) if n_head else 0.0
    return {
        "value": value,
        "bound": head_err * head + 2 * tail,
        "head_phase_error": head_err,
        "head_norm": head,
        "tail_norm": tail,
        "n_head": n_head,
        "k": int(k),
        "s": s,
    }


