"""Real controls built from raised-cosine atoms, their Fourier moments and Theta-norm."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """u(t) = sum_a w_a (1 - cos(2 pi (t - t_a)/h_a)) / 2 on [t_a, t_a + h_a].

    ``centers``/``widths``/``weights`` describe the atoms; ``dt`` is the
    sampling step used for norms and exports.
    """

    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray
    T: float
    dt: float = 1e-3

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.centers, dtype=float))
        h = np.atleast_1d(np.asarray(self.widths, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if not (c.shape == h.shape == w.shape):
            raise ValidationError("centers, widths and weights must have equal length")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(h)) and np.all(np.isfinite(w))):
            raise ValidationError("atom parameters must be finite")
        if self.T <= 0 or self.dt <= 0:
            raise ValidationError("horizon and sampling step must be positive")
        if np.any(h <= 0):
            raise ValidationError("atom widths must be positive")
        tol = 1e-12 * max(1.0, self.T)
        if np.any(c - h / 2 < -tol) or np.any(c + h / 2 > self.T + tol):
            raise ValidationError("every atom must be supported inside [0, T]")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", h)
        object.__setattr__(self, "weights", w)

    @classmethod
    def zero(cls, T: float, dt: float = 1e-3) -> "ControlSignal":
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), T, dt)

    @classmethod
    def atom_layout(cls, T: float, n_atoms: int) -> tuple[np.ndarray, np.ndarray]:
        """Equispaced atoms of width 2T/(n+1): neighbours overlap by half, supports tile [0, T]."""
        if n_atoms < 1:
            raise ValidationError("n_atoms must be at least 1")
        h = 2.0 * T / (n_atoms + 1)
        centers = h / 2 * np.arange(1, n_atoms + 1)
        return centers, np.full(n_atoms, h)

    @classmethod
    def bump_train(cls, T: float, n_atoms: int, weights=None, dt: float = 1e-3) -> "ControlSignal":
        centers, widths = cls.atom_layout(T, n_atoms)
        w = np.ones(n_atoms) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (n_atoms,):
            raise ValidationError(f"expected {n_atoms} weights, got shape {w.shape}")
        return cls(centers, widths, w, T, dt)

    @classmethod
    def random_bumps(cls, T: float, n_atoms: int, rng, scale: float = 1.0, dt: float = 1e-3) -> "ControlSignal":
        return cls.bump_train(T, n_atoms, scale * rng.standard_normal(n_atoms), dt)

    @property
    def n_atoms(self) -> int:
        return self.weights.size

    @property
    def starts(self) -> np.ndarray:
        return self.centers - self.widths / 2

    def __add__(self, other: "ControlSignal") -> "ControlSignal":
        if not isinstance(other, ControlSignal):
            return NotImplemented
        if abs(self.T - other.T) > 1e-12:
            raise ValidationError("cannot add controls with different horizons")
        same = (self.n_atoms == other.n_atoms and np.array_equal(self.centers, other.centers)
                and np.array_equal(self.widths, other.widths))
        if same:
            return ControlSignal(self.centers, self.widths, self.weights + other.weights, self.T, self.dt)
        return ControlSignal(np.concatenate([self.centers, other.centers]),
                             np.concatenate([self.widths, other.widths]),
                             np.concatenate([self.weights, other.weights]), self.T, min(self.dt, other.dt))

    def scaled(self, factor: float) -> "ControlSignal":
        return ControlSignal(self.centers, self.widths, factor * self.weights, self.T, self.dt)

    def _eval(self, t, derivative: bool) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.zeros(flat.size)
        order = np.argsort(flat, kind="stable")
        ts = flat[order]
        acc = np.zeros(flat.size)
        for t0, h, w in zip(self.starts, self.widths, self.weights):
            if w == 0.0:
                continue
            lo, hi = np.searchsorted(ts, [t0, t0 + h])
            if lo == hi:
                continue
            phase = 2 * np.pi * (ts[lo:hi] - t0) / h
            if derivative:
                acc[lo:hi] += w * np.pi / h * np.sin(phase)
            else:
                acc[lo:hi] += 0.5 * w * (1 - np.cos(phase))
        out[order] = acc
        return out.reshape(t.shape)

    def __call__(self, t) -> np.ndarray:
        return self._eval(t, derivative=False)

    def derivative(self, t) -> np.ndarray:
        return self._eval(t, derivative=True)

    def sample_grid(self, dt: float | None = None) -> np.ndarray:
        dt = self.dt if dt is None else dt
        n = max(1, int(np.ceil(self.T / dt - 1e-9)))
        return np.linspace(0.0, self.T, n + 1)

    def samples(self, dt: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        t = self.sample_grid(dt)
        return t, self(t)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "dt": self.dt,
            "atoms": [[float(c), float(h), float(w)] for c, h, w in zip(self.centers, self.widths, self.weights)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "ControlSignal":
        atoms = np.asarray(data.get("atoms", []), dtype=float).reshape(-1, 3)
        return cls(atoms[:, 0], atoms[:, 1], atoms[:, 2], float(data["T"]), float(data.get("dt", 1e-3)))

    def write_csv(self, path, dt: float | None = None) -> None:
        t, u = self.samples(dt)
        np.savetxt(path, np.column_stack([t, u]), delimiter=",", header="t,u", comments="", fmt="%.17g")


def _atom_transform(omega: np.ndarray, h: float, dt: float) -> np.ndarray:
    """Trapezoid value of int_0^h e^{i w s}(1 - cos(2 pi s/h))/2 ds for each w."""
    omega = np.asarray(omega, dtype=float)
    wmax = float(np.max(np.abs(omega))) if omega.size else 0.0
    step = min(dt, 0.1 / wmax) if wmax > 0 else dt
    n = max(8, int(np.ceil(h / step)))
    s = np.linspace(0.0, h, n + 1)
    prof = 0.5 * (1 - np.cos(2 * np.pi * s / h))
    out = np.empty(omega.size, dtype=complex)
    chunk = max(1, 4_000_000 // (n + 1))
    for a in range(0, omega.size, chunk):
        f = np.exp(1j * np.outer(omega[a:a + chunk], s)) * prof
        out[a:a + chunk] = np.trapezoid(f, s, axis=1)
    return out


def atom_moments(u: ControlSignal, omega, dt: float | None = None) -> np.ndarray:
    """Matrix A[l, a] = int e^{i omega_l s} atom_a(s) ds (unit weights)."""
    dt = u.dt if dt is None else dt
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    A = np.zeros((omega.size, u.n_atoms), dtype=complex)
    for h in np.unique(u.widths):
        cols = np.flatnonzero(u.widths == h)
        base = _atom_transform(omega, h, dt)
        A[:, cols] = base[:, None] * np.exp(1j * np.outer(omega, u.starts[cols]))
    return A


def fourier_moment(u: ControlSignal, omega, dt: float | None = None):
    """int_0^T e^{i omega s} u(s) ds, atom by atom with a support-aligned trapezoid rule.

    Returns a complex scalar for scalar ``omega`` and an array otherwise.
    """
    scalar = np.ndim(omega) == 0
    om = np.atleast_1d(np.asarray(omega, dtype=float))
    if u.n_atoms == 0:
        val = np.zeros(om.shape, dtype=complex)
    else:
        # evaluate at |omega| and conjugate negative frequencies: exact Hermitian symmetry
        absval = atom_moments(u, np.abs(om), dt) @ u.weights
        val = np.where(om < 0, np.conj(absval), absval)
    return complex(val[0]) if scalar else val


@dataclass
class ThetaNorm:
    b_norm: float
    l1_norm: float
    moment_norm: float
    hs_norm: float
    s_order: float

    @property
    def total(self) -> float:
        return self.b_norm + self.l1_norm + self.moment_norm + self.hs_norm

    def to_dict(self) -> dict:
        return {"b_norm": self.b_norm, "l1_norm": self.l1_norm, "moment_norm": self.moment_norm,
                "hs_norm": self.hs_norm, "s_order": self.s_order, "total": self.total}


def b_norm(u: ControlSignal, dt: float | None = None) -> float:
    """sqrt(sum_p p^2 ||u||^2_{L2[p-1, p]}), cells of unit length."""
    dt = min(u.dt if dt is None else dt, 1e-3)
    total = 0.0
    n_cells = int(np.ceil(u.T - 1e-12))
    per_cell = max(16, int(np.ceil(1.0 / dt)))
    for p in range(1, n_cells + 1):
        a, b = p - 1.0, min(float(p), u.T)
        t = np.linspace(a, b, per_cell + 1)
        total += p * p * np.trapezoid(u(t) ** 2, t)
    return float(np.sqrt(total))


def hs_control_norm(u: ControlSignal, s_order: float = 1.0, dt: float | None = None) -> float:
    """sqrt(int (1 + xi^2)^s |u_hat(xi)|^2 dxi / 2pi) of u extended by zero, via FFT."""
    dt = min(u.dt if dt is None else dt, 1e-3)
    t, vals = u.samples(dt)
    step = t[1] - t[0]
    n = 1 << int(np.ceil(np.log2(4 * vals.size)))
    fhat = np.fft.rfft(vals, n) * step
    xi = 2 * np.pi * np.fft.rfftfreq(n, step)
    dens = (1 + xi ** 2) ** s_order * np.abs(fhat) ** 2
    weight = np.full(xi.size, 2.0)
    weight[0] = 1.0
    if n % 2 == 0:
        weight[-1] = 1.0
    dxi = 2 * np.pi / (n * step)
    return float(np.sqrt(np.sum(weight * dens) * dxi / (2 * np.pi)))


def theta_norm(u: ControlSignal, C, s_order: float = 1.0, dt: float | None = None) -> ThetaNorm:
    """B-norm + L1 + l2 norm of the moments on C's frequency table + H^s."""
    if s_order < 1:
        raise ValidationError("s_order must be >= 1")
    if u.n_atoms == 0 or not np.any(u.weights):
        return ThetaNorm(0.0, 0.0, 0.0, 0.0, s_order)
    fine = min(u.dt if dt is None else dt, 1e-3)
    t, vals = u.samples(fine)
    l1 = float(np.trapezoid(np.abs(vals), t))
    omega = np.asarray(C.omega)
    n = omega.shape[0]
    iu = np.triu_indices(n, 1)
    # omega_mk for m < k and its negative share moduli, so count the upper triangle twice
    upper = fourier_moment(u, omega[iu], dt)
    zero = fourier_moment(u, 0.0, dt)
    mom = float(np.sqrt(abs(zero) ** 2 + 2 * np.sum(np.abs(upper) ** 2)))
    return ThetaNorm(b_norm(u, dt), l1, mom, hs_control_norm(u, s_order, dt), s_order)
