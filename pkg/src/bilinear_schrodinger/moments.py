"""Tangent targets -> Hermitian moment tables -> real controls, and the linear forward map."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .controls import ControlSignal, atom_moments, fourier_moment, theta_norm
from .coupling import CouplingMatrix
from .errors import IllConditioned, NumericalFailure, ObstructedState, ValidationError
from .spectral import StateCoeffs


@dataclass(eq=False)
class MomentTable:
    """d[m, k] (Hermitian, constant real diagonal d0) with omega[m, k] = lambda_m - lambda_k."""

    d: np.ndarray
    d0: float
    omega: np.ndarray
    indices: list = field(default_factory=list)
    case: int = 0
    construction: str = ""

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=complex)
        n = self.d.shape[0]
        if self.d.shape != (n, n) or np.shape(self.omega) != (n, n):
            raise ValidationError("moment table and frequency table must be square and equal-sized")
        if not np.allclose(self.d, self.d.conj().T, rtol=0, atol=1e-12 * (1 + np.abs(self.d).max())):
            raise ValidationError("moment table must be Hermitian")

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def representatives(self) -> tuple[np.ndarray, np.ndarray]:
        """One (frequency >= 0, target) per conjugate pair, plus the zero frequency carrying d0."""
        n = self.n
        om, tg = [0.0], [complex(self.d0)]
        for m in range(n):
            for k in range(m):
                w = float(self.omega[m, k])
                if w >= 0:
                    om.append(w)
                    tg.append(self.d[m, k])
                else:
                    om.append(-w)
                    tg.append(self.d[k, m])
        return np.array(om), np.array(tg)

    def entries(self) -> list:
        n = self.n
        return [[m + 1, k + 1, float(self.d[m, k].real), float(self.d[m, k].imag), float(self.omega[m, k])]
                for m in range(n) for k in range(n)]

    def to_json(self) -> str:
        return json.dumps({"d0": self.d0, "case": self.case, "construction": self.construction,
                           "entries": self.entries()}, indent=2)


def identity_residual(ztilde: StateCoeffs, y: StateCoeffs, C: CouplingMatrix, M: MomentTable) -> float:
    """||-i (q * d) c(ztilde) - c(y)||, the defining identity of the table."""
    c = ztilde.coeffs[:C.n]
    lhs = -1j * (C.q * M.d) @ c
    return float(np.linalg.norm(lhs - y.coeffs[:C.n]))


def _populated(c: np.ndarray, tol: float) -> np.ndarray:
    mag = np.abs(c)
    return np.flatnonzero(mag > tol * mag.max())


def _div(num: complex, den: float, what: str) -> complex:
    if num == 0:
        return 0j
    if den == 0:
        raise ValidationError(f"zero coupling {what} where a nonzero one is needed (condition (i) fails)")
    return num / den


def _offdiag_corrections(c, yv, q, s, d0, pop, p, qr=None) -> np.ndarray:
    """Correction matrix C for a trial d0: star through p, or the modified q-r-p loop."""
    n = c.size
    diag_q = np.diag(q)
    a = np.zeros(n)
    for m in range(n):
        num = 2 * np.imag(yv[m] * np.conj(c[m]))
        a[m] = _div(num, diag_q[m], f"q[{m + 1},{m + 1}]").real if num != 0 else 0.0
    Cm = np.zeros((n, n), dtype=complex)
    Cm[np.arange(n), np.arange(n)] = d0 + a
    star = [m for m in pop if m != p] if qr is None else [m for m in pop if m not in (p, *qr)]
    for m in star:
        Cm[m, p] = -c[m] * (s + q[m, m] * Cm[m, m]) / (c[p] * _nonzero(q[m, p], m, p))
        Cm[p, m] = np.conj(Cm[m, p])
    if qr is not None:
        qi, ri = qr
        Cm[qi, ri] = -c[qi] * (s + q[qi, qi] * Cm[qi, qi]) / (c[ri] * _nonzero(q[qi, ri], qi, ri))
        Cm[ri, qi] = np.conj(Cm[qi, ri])
        Cm[ri, p] = (-c[ri] * s - c[ri] * q[ri, ri] * Cm[ri, ri] - c[qi] * q[ri, qi] * Cm[ri, qi]) \
            / (c[p] * _nonzero(q[ri, p], ri, p))
        Cm[p, ri] = np.conj(Cm[ri, p])
    return Cm


def _nonzero(v: float, m: int, k: int) -> float:
    if v == 0:
        raise ValidationError(f"q[{m + 1},{k + 1}] vanishes (condition (i) fails)")
    return v


def target_to_moments(ztilde: StateCoeffs, y: StateCoeffs, C: CouplingMatrix, pop_tol: float = 1e-12,
                      obstruction_tol: float = 1e-9) -> MomentTable:
    """Hermitian table d with -i sum_k c_k q_mk d_mk = y_m for every m <= n.

    Single populated mode: corrections are diagonal only. Two modes: star
    through the largest mode p (ObstructedState on the degenerate set).
    Three or more: the star, or the q-r-p loop with C_qp = 0, whichever has
    the larger d0 coefficient.
    """
    n = C.n
    c = np.asarray(ztilde.coeffs, dtype=complex)
    yv = np.asarray(y.coeffs, dtype=complex)
    if c.size != n or yv.size != n:
        raise ValidationError(f"states must have {n} coefficients to match the coupling truncation")
    if abs(np.linalg.norm(c) - 1) > 1e-10:
        raise ValidationError("ztilde must be normalized")
    ynorm = float(np.linalg.norm(yv))
    tang = np.real(np.vdot(c, yv))
    if abs(tang) > 1e-10 * (1 + ynorm):
        raise ValidationError(f"y is not tangent at ztilde (Re<y, ztilde> = {tang:.3e})")
    q = C.q
    pop = _populated(c, pop_tol)
    order = sorted(pop, key=lambda m: (-abs(c[m]), m))
    p = order[0]
    s = float(np.imag(np.vdot(yv, c)))  # Im <ztilde, y>
    scale = float(np.sum(np.abs(c) ** 2 * np.abs(np.diag(q))))

    def affine(qr):
        def row_p(d0):
            Cm = _offdiag_corrections(c, yv, q, s, d0, pop, p, qr)
            return Cm, complex(np.sum(c * q[p] * Cm[p]) + c[p] * s)
        _, f0 = row_p(0.0)
        _, f1 = row_p(1.0)
        return f0, f1 - f0, row_p

    case = 1 if len(pop) == 1 else 2 if len(pop) == 2 else 3
    f0, f1, row_p = affine(None)
    construction = "diagonal" if case == 1 else "star"
    if case >= 2 and abs(f1) <= obstruction_tol * scale * abs(c[p]):
        if case == 2:
            raise ObstructedState("base state lies on the degenerate two-mode set: "
                                  "|c_p|^2 q_pp - |c_q|^2 q_qq = 0")
    if case == 3:
        g0, g1, row_alt = affine((order[1], order[2]))
        if abs(g1) > abs(f1):
            f0, f1, row_p, construction = g0, g1, row_alt, "loop"
        if abs(f1) <= obstruction_tol * scale * abs(c[p]):
            raise ObstructedState("both d0 coefficients vanish; requires |c_q|^2 q_qq = 0")
    if abs(f1) == 0:
        raise ObstructedState("d0 coefficient vanishes")
    d0 = -float(np.real(np.conj(f1) * f0)) / abs(f1) ** 2
    Cm, _ = row_p(d0)
    base = np.zeros((n, n), dtype=complex)
    for m in range(n):
        for k in range(n):
            num = 1j * yv[m] * np.conj(c[k]) - 1j * np.conj(yv[k]) * c[m]
            if num != 0:
                base[m, k] = _div(num, q[m, k], f"q[{m + 1},{k + 1}]")
    d = base + Cm
    d[np.arange(n), np.arange(n)] = d0
    d = 0.5 * (d + d.conj().T)
    d[np.arange(n), np.arange(n)] = d0
    M = MomentTable(d, d0, C.omega.copy(), list(C.indices), case, construction)
    res = identity_residual(ztilde, y, C, M)
    if res > 1e-10 * (1 + ynorm):
        raise NumericalFailure(f"moment construction residual {res:.3e} exceeds tolerance")
    return M


@dataclass
class SynthesisReport:
    max_residual: float
    l2_residual: float
    gram_condition: float
    theta: dict
    n_constraints: int
    n_atoms: int
    rho: float

    def to_dict(self) -> dict:
        return {"max_residual": self.max_residual, "l2_residual": self.l2_residual,
                "gram_condition": self.gram_condition, "theta": self.theta,
                "n_constraints": self.n_constraints, "n_atoms": self.n_atoms, "rho": self.rho}


def _merge(om: np.ndarray, tg: np.ndarray, gap: float) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(om, kind="stable")
    om, tg = om[order], tg[order]
    keep_w, keep_t = [om[0]], [tg[0]]
    for w, t in zip(om[1:], tg[1:]):
        if w - keep_w[-1] < gap:
            if abs(t - keep_t[-1]) > 1e-12 * (1 + abs(t)):
                raise ValidationError(f"resonant frequencies near {w:.6g} carry different targets")
            continue
        keep_w.append(w)
        keep_t.append(t)
    return np.array(keep_w), np.array(keep_t)


def synthesize_control(M: MomentTable, T: float, n_atoms: int, rho: float = 1e-10, dt: float = 1e-3,
                       max_condition: float = 1e12, gap: float = 1e-8, s_order: float = 1.0):
    """Atom weights minimizing sum_l |u_check(omega_l) - d_l|^2 + rho |w|^2.

    Returns (ControlSignal, SynthesisReport). The Gram condition number is
    that of the regularized moment-space matrix A A^T + rho I.
    """
    if rho < 0:
        raise ValidationError("rho must be non-negative")
    if T <= 0 or n_atoms < 1:
        raise ValidationError("need T > 0 and n_atoms >= 1")
    om, tg = _merge(*M.representatives(), gap)
    shell = ControlSignal.bump_train(T, n_atoms, np.zeros(n_atoms), dt)
    A = atom_moments(shell, om, dt)
    pos = om > 0
    Ar = np.vstack([A.real, A.imag[pos]])
    b = np.concatenate([tg.real, tg.imag[pos]])
    U, S, Vt = np.linalg.svd(Ar, full_matrices=False)
    smin = S.min() if Ar.shape[0] <= Ar.shape[1] else 0.0
    denom = smin ** 2 + rho
    cond = float("inf") if denom == 0 else float((S.max() ** 2 + rho) / denom)
    if cond > max_condition:
        raise IllConditioned(f"Gram condition number {cond:.3e} exceeds {max_condition:.1e}; "
                             "increase T or n_atoms")
    if rho > 0:
        filt = S / (S ** 2 + rho)
    else:
        cut = S.max() * max(Ar.shape) * np.finfo(float).eps
        filt = np.where(S > cut, 1 / np.where(S > cut, S, 1), 0.0)
    w = Vt.T @ (filt * (U.T @ b))
    u = ControlSignal.bump_train(T, n_atoms, w, dt)
    got = A @ w
    res = np.abs(got - tg)
    th = theta_norm(u, M, s_order, dt)
    rep = SynthesisReport(float(res.max()), float(np.linalg.norm(res)), cond, th.to_dict(),
                          int(om.size), n_atoms, rho)
    return u, rep


def _moment_table_of(u: ControlSignal, omega: np.ndarray, dt=None) -> np.ndarray:
    n = omega.shape[0]
    iu = np.triu_indices(n, 1)
    tab = np.zeros((n, n), dtype=complex)
    tab[np.arange(n), np.arange(n)] = fourier_moment(u, 0.0, dt)
    up = fourier_moment(u, omega[iu], dt)
    tab[iu] = up
    tab[(iu[1], iu[0])] = np.conj(up)
    return tab


def linearized_endpoint(ztilde: StateCoeffs, u: ControlSignal, C: CouplingMatrix, dt=None) -> StateCoeffs:
    """<R_inf, e_m> = -i sum_k c_k q_mk u_check(omega_mk)."""
    c = np.asarray(ztilde.coeffs, dtype=complex)
    if c.size != C.n:
        raise ValidationError(f"ztilde must have {C.n} coefficients")
    tab = _moment_table_of(u, C.omega, dt)
    return ztilde.with_coeffs(-1j * (C.q * tab) @ c)


def obstruction_invariant(traj, ztilde: StateCoeffs, p: int, q: int) -> np.ndarray:
    """Im <R_t, c_p e^{-i lambda_p t} e_p - c_q e^{-i lambda_q t} e_q> along a linearized trajectory."""
    c = np.asarray(ztilde.coeffs, dtype=complex)
    pi, qi = p - 1, q - 1
    if pi == qi or not (0 <= pi < c.size and 0 <= qi < c.size):
        raise ValidationError("p and q must be distinct valid mode indices")
    rest = np.delete(c, [pi, qi])
    if c[pi] == 0 or c[qi] == 0 or np.any(np.abs(rest) > 1e-12):
        raise ValidationError("ztilde must be a two-mode state on modes p and q")
    t = traj.times
    lam = traj.lambdas
    wp = c[pi] * np.exp(-1j * lam[pi] * t)
    wq = c[qi] * np.exp(-1j * lam[qi] * t)
    R = traj.states
    return np.imag(R[:, pi] * np.conj(wp) - R[:, qi] * np.conj(wq))
