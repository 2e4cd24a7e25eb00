"""Coupling matrix Q_mk = <Q e_m, e_k>, Bohr frequencies, and the two spectral conditions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .spectral import EigenSystem, EigenSystemND, Potential, StateCoeffs


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """q[m, k] = <Q e_m, e_k> (symmetric) and omega[m, k] = lambda_m - lambda_k.

    ``lambdas`` are the (gauge-shifted) eigenvalues of the retained modes and
    ``indices`` their 1-based (multi-)indices.
    """

    q: np.ndarray
    omega: np.ndarray
    lambdas: np.ndarray
    indices: list[tuple[int, ...]] = field(default_factory=list)

    @classmethod
    def from_arrays(cls, q, lambdas, indices=None) -> "CouplingMatrix":
        q = np.asarray(q, dtype=float)
        lam = np.asarray(lambdas, dtype=float)
        if q.shape != (lam.size, lam.size):
            raise ValidationError("q must be square with one row per eigenvalue")
        q = 0.5 * (q + q.T)
        omega = lam[:, None] - lam[None, :]
        if indices is None:
            indices = [(j,) for j in range(1, lam.size + 1)]
        return cls(q, omega, lam, list(indices))

    @property
    def n(self) -> int:
        return self.lambdas.size

    def truncate(self, n: int) -> "CouplingMatrix":
        if not 1 <= n <= self.n:
            raise ValidationError(f"truncation {n} outside 1..{self.n}")
        return CouplingMatrix(self.q[:n, :n], self.omega[:n, :n], self.lambdas[:n], self.indices[:n])


def coupling_matrix(Q, E: EigenSystem | EigenSystemND, n: int | None = None) -> CouplingMatrix:
    """Quadrature of <Q e_m, e_k> over the first ``n`` modes of ``E``.

    For a tensor system ``Q`` must be a sequence of 1-D profiles, one per
    axis; the d-D profile is their product and the coupling factorizes.
    """
    n = E.n_modes if n is None else n
    if not 1 <= n <= E.n_modes:
        raise ValidationError(f"truncation n={n} outside 1..{E.n_modes}")
    if isinstance(E, EigenSystemND):
        if isinstance(Q, Potential) or len(Q) != E.dim:
            raise ValidationError(f"tensor coupling needs {E.dim} separable 1-D profiles")
        factor_q = [_coupling_1d(Qi, Ei, Ei.n_modes) for Qi, Ei in zip(Q, E.factors)]
        idx = E.multi_indices[:n]
        q = np.ones((n, n))
        for axis, qa in enumerate(factor_q):
            pos = np.array([m[axis] - 1 for m in idx])
            q = q * qa[np.ix_(pos, pos)]
        return CouplingMatrix.from_arrays(q, E.lambdas[:n], idx)
    if not isinstance(Q, Potential):
        raise ValidationError("1-D coupling needs a single Potential profile")
    return CouplingMatrix.from_arrays(_coupling_1d(Q, E, n), E.lambdas[:n])


def _coupling_1d(Q: Potential, E: EigenSystem, n: int) -> np.ndarray:
    if Q.n_grid != E.n_grid or not np.allclose(Q.grid, E.grid):
        raise ValidationError(f"profile {Q.label!r} is not sampled on the eigensystem grid "
                              f"({Q.n_grid} vs {E.n_grid} points)")
    modes = E.modes[:n]
    q = np.trapezoid(modes[:, None, :] * (Q.values * modes)[None, :, :], E.grid, axis=-1)
    return 0.5 * (q + q.T)


def weighted_coupling(C: CouplingMatrix) -> np.ndarray:
    """|(p_1 j_1 ... p_d j_d)^3 q[p, j]| over the truncation."""
    w = np.array([float(np.prod(np.array(m, dtype=float) ** 3)) for m in C.indices])
    return np.abs(np.outer(w, w) * C.q)


def check_condition_i(C: CouplingMatrix, threshold: float = 1e-4) -> dict:
    if threshold <= 0:
        raise ValidationError("threshold must be positive")
    wq = weighted_coupling(C)
    flat = int(np.argmin(wq))
    p, j = np.unravel_index(flat, wq.shape)
    value = float(wq[p, j])
    return {
        "min_weighted_coupling": value,
        "worst_pair": [list(C.indices[p]), list(C.indices[j])],
        "pass_i": bool(value >= threshold),
    }


def check_condition_ii(E, n: int | None = None, gap: float = 1e-8) -> list[tuple]:
    """All resonances omega_ij ~ omega_pq with i != j and {i,j} != {p,q}.

    ``E`` may be an eigensystem or a CouplingMatrix.  Each resonance is
    listed once, with both frequencies taken non-negative; a pair p == q
    stands for the zero frequency (a degenerate eigenvalue).
    """
    if gap <= 0:
        raise ValidationError("gap must be positive")
    lam = np.asarray(E.lambdas, dtype=float)
    indices = list(E.indices)
    n = lam.size if n is None else n
    if not 1 <= n <= lam.size:
        raise ValidationError(f"truncation n={n} outside 1..{lam.size}")
    lam, indices = lam[:n], indices[:n]
    pairs = []
    for a in range(n):
        for b in range(n):
            w = lam[a] - lam[b]
            if w > 0 or a == b:
                pairs.append((w, a, b))
    pairs.sort()
    out = []
    for s, (w1, a1, b1) in enumerate(pairs):
        for w2, a2, b2 in pairs[s + 1:]:
            if w2 - w1 >= gap:
                break
            if a1 == b1 and a2 == b2:
                continue
            if {a1, b1} == {a2, b2}:
                continue
            first, second = ((a2, b2), (a1, b1)) if a1 == b1 else ((a1, b1), (a2, b2))
            out.append((indices[first[0]], indices[first[1]], indices[second[0]], indices[second[1]]))
    return out


def e_set_defect(z: StateCoeffs, C: CouplingMatrix, p: int) -> float:
    """|c_p|^2 q_pp - sum_{m != p} |c_m|^2 q_mm (zero on the obstruction set)."""
    c = z.coeffs
    if c.size < C.n:
        raise ValidationError("state has fewer coefficients than the coupling truncation")
    if abs(np.linalg.norm(c) - 1.0) > 1e-8:
        raise ValidationError("state must lie on the unit sphere")
    if not 1 <= p <= C.n:
        raise ValidationError(f"mode index p={p} out of range 1..{C.n}")
    weights = np.abs(c[:C.n]) ** 2 * np.diag(C.q)
    return float(2 * weights[p - 1] - weights.sum())


@dataclass
class ConditionReport:
    min_weighted_coupling: float
    worst_pair: list
    resonances: list
    pass_i: bool
    pass_ii: bool
    truncation: int
    thresholds: dict

    def to_dict(self) -> dict:
        return {
            "min_weighted_coupling": self.min_weighted_coupling,
            "worst_pair": self.worst_pair,
            "resonances": [[list(i) for i in r] for r in self.resonances],
            "pass_i": self.pass_i,
            "pass_ii": self.pass_ii,
            "truncation": self.truncation,
            "thresholds": self.thresholds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def check_condition(C: CouplingMatrix, threshold: float = 1e-4, gap: float = 1e-8,
                    n: int | None = None) -> ConditionReport:
    if n is not None:
        C = C.truncate(n)
    part = check_condition_i(C, threshold)
    res = check_condition_ii(C, gap=gap)
    return ConditionReport(part["min_weighted_coupling"], part["worst_pair"], res, part["pass_i"],
                           not res, C.n, {"threshold": threshold, "gap": gap})

