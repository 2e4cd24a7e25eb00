"""Galerkin propagation of i z' = (-Laplacian + V) z + u(t) Q z and of its linearization."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .controls import ControlSignal
from .coupling import CouplingMatrix
from .errors import ValidationError
from .spectral import StateCoeffs, sobolev_weights


@dataclass(eq=False)
class Trajectory:
    """Coefficient history; ``states[i]`` is the state at ``times[i]``."""

    times: np.ndarray
    states: np.ndarray
    lambdas: np.ndarray
    system: object = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=complex)
        if self.states.ndim != 2 or self.states.shape[0] != self.times.size:
            raise ValidationError("states must be (n_times, n_modes)")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValidationError("times must be strictly increasing")

    @property
    def norms_l2(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    @property
    def norms_h3(self) -> np.ndarray:
        w = sobolev_weights(self.lambdas, 3.0)
        return np.linalg.norm(self.states * w, axis=1)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def state(self, i: int) -> StateCoeffs:
        if self.system is None:
            raise ValidationError("trajectory carries no eigensystem")
        return StateCoeffs(self.states[i], self.system)

    def final_state(self) -> StateCoeffs:
        return self.state(-1)

    def ledger(self) -> dict:
        l2 = self.norms_l2
        return {
            "n_times": int(self.times.size),
            "t_final": float(self.times[-1]),
            "l2_initial": float(l2[0]),
            "l2_max_drift": float(np.max(np.abs(l2 - l2[0]))),
            "h3_sup": float(np.max(self.norms_h3)),
            "tail_mass_last_mode": float(np.max(np.abs(self.states[:, -1]))),
        }

    def to_json(self) -> str:
        return json.dumps(self.ledger(), indent=2, sort_keys=True)

    def write_csv(self, path) -> None:
        n = self.states.shape[1]
        head = ["t"] + [f"re_c{j}" for j in range(1, n + 1)] + [f"im_c{j}" for j in range(1, n + 1)]
        data = np.column_stack([self.times, self.states.real, self.states.imag])
        np.savetxt(path, data, delimiter=",", header=",".join(head), comments="", fmt="%.17g")


def _coeffs(z, n: int) -> np.ndarray:
    c = np.asarray(z.coeffs if isinstance(z, StateCoeffs) else z, dtype=complex)
    if c.shape != (n,):
        raise ValidationError(f"state has {c.size} coefficients, coupling truncation is {n}")
    if not np.all(np.isfinite(c)):
        raise ValidationError("state coefficients must be finite")
    return c


def free_evolution(z0: StateCoeffs, t: float) -> StateCoeffs:
    """c_j -> exp(-i lambda_j t) c_j."""
    return z0.with_coeffs(np.exp(-1j * z0.system.lambdas * t) * z0.coeffs)


def _control_values(u, t: np.ndarray) -> np.ndarray:
    if u is None:
        vals = np.zeros(t.size)
    elif isinstance(u, ControlSignal) or callable(u):
        vals = np.asarray(u(t))
    else:
        vals = np.full(t.size, float(u))
    if np.iscomplexobj(vals):
        raise ValidationError("controls must be real-valued")
    vals = np.broadcast_to(np.asarray(vals, dtype=float), t.shape)
    if not np.all(np.isfinite(vals)):
        raise ValidationError("control samples must be finite")
    return np.array(vals)


def _steps(t_final: float, dt: float) -> tuple[int, float]:
    if dt <= 0:
        raise ValidationError("dt must be positive")
    if t_final <= 0:
        raise ValidationError("t_final must be positive")
    if dt > t_final * (1 + 1e-12):
        raise ValidationError(f"dt={dt} exceeds t_final={t_final}")
    n = max(1, int(np.ceil(t_final / dt - 1e-9)))
    return n, t_final / n


def propagate(z0, u, C: CouplingMatrix, t_final: float, dt: float, record_every: int = 1,
              forcing=None) -> Trajectory:
    """Strang splitting: half free phase, exp(-i u_mid dt q), half free phase.

    ``u`` is a ControlSignal, a callable, a constant or None. ``forcing`` is an
    optional pair (v, y) adding -i v(t) q y(t) to the right-hand side, with
    ``y(t)`` returning a coefficient vector; it is applied at the midpoint.
    """
    n = C.n
    c = _coeffs(z0, n)
    steps, h = _steps(t_final, dt)
    if record_every < 1:
        raise ValidationError("record_every must be >= 1")
    tmid = (np.arange(steps) + 0.5) * h
    umid = _control_values(u, tmid)
    sig, W = np.linalg.eigh(C.q)
    half = np.exp(-0.5j * C.lambdas * h)
    if forcing is not None:
        v, y = forcing
        vmid = _control_values(v, tmid)
    times = [0.0]
    out = [c.copy()]
    for j in range(steps):
        c = half * c
        if umid[j] != 0.0:
            c = W @ (np.exp(-1j * umid[j] * h * sig) * (W.T @ c))
        if forcing is not None and vmid[j] != 0.0:
            c = c - 1j * h * vmid[j] * (C.q @ np.asarray(y(tmid[j]), dtype=complex))
        c = half * c
        if (j + 1) % record_every == 0 or j == steps - 1:
            times.append((j + 1) * h)
            out.append(c.copy())
    system = z0.system if isinstance(z0, StateCoeffs) else None
    return Trajectory(np.array(times), np.array(out), C.lambdas, system)


def propagate_endpoint(z0, u, C: CouplingMatrix, t_final: float, dt: float) -> np.ndarray:
    """Final coefficients only (no history kept)."""
    return propagate(z0, u, C, t_final, dt, record_every=10**12).final


def propagate_many(z0, controls: np.ndarray, t_finals: np.ndarray, n_steps: int,
                   C: CouplingMatrix) -> np.ndarray:
    """Endpoints of several runs from one initial state, advanced in lockstep.

    ``controls[i, j]`` is the midpoint control value of run i at its step j,
    run i using step t_finals[i] / n_steps.
    """
    c0 = _coeffs(z0, C.n)
    controls = np.asarray(controls, dtype=float)
    t_finals = np.asarray(t_finals, dtype=float)
    if controls.shape != (t_finals.size, n_steps):
        raise ValidationError("controls must be (n_runs, n_steps)")
    if not np.all(np.isfinite(controls)):
        raise ValidationError("control samples must be finite")
    sig, W = np.linalg.eigh(C.q)
    h = t_finals / n_steps
    half = np.exp(-0.5j * np.outer(h, C.lambdas))
    Z = np.tile(c0, (t_finals.size, 1))
    for j in range(n_steps):
        Z = half * Z
        Z = (np.exp(-1j * (controls[:, j] * h)[:, None] * sig[None, :]) * (Z @ W)) @ W.T
        Z = half * Z
    return Z


def _time_integrals(u, omega: np.ndarray, t_out: np.ndarray, dt: float) -> np.ndarray:
    """I[i, l] = int_0^{t_out[i]} exp(i omega_l s) u(s) ds, trapezoid with step <= min(dt, 0.1/max|omega|)."""
    wmax = float(np.max(np.abs(omega))) if omega.size else 0.0
    r = 1 if wmax == 0 else max(1, int(np.ceil(dt * wmax / 0.1)))
    res = np.zeros((t_out.size, omega.size), dtype=complex)
    chunk = max(1, 2_000_000 // max(1, omega.size * r))
    acc = np.zeros(omega.size, dtype=complex)
    for a in range(0, t_out.size - 1, chunk):
        b = min(a + chunk, t_out.size - 1)
        # r sub-steps inside each output interval
        frac = np.arange(r + 1) / r
        s = t_out[a:b, None] + (t_out[a + 1:b + 1] - t_out[a:b])[:, None] * frac[None, :]
        us = _control_values(u, s.ravel()).reshape(s.shape)
        ph = np.exp(1j * s[:, :, None] * omega[None, None, :]) * us[:, :, None]
        ds = (t_out[a + 1:b + 1] - t_out[a:b]) / r
        part = ds[:, None] * (ph[:, 1:-1, :].sum(axis=1) + 0.5 * (ph[:, 0, :] + ph[:, -1, :]))
        cum = np.cumsum(part, axis=0) + acc
        res[a + 1:b + 1] = cum
        acc = cum[-1]
    return res


def linearized_propagate(ztilde: StateCoeffs, u, C: CouplingMatrix, t_final: float, dt: float,
                         z0_tan=None) -> Trajectory:
    """R_t(z0_tan, u) = exp(-i Lambda t) z0_tan - i sum_k exp(-i lambda_m t) c_k q_mk int_0^t e^{i omega_mk s} u.

    The time integrals are computed for m >= k and conjugated for m < k, so
    the tangency Re <R_t, U_t(ztilde)> = 0 holds to rounding.
    """
    n = C.n
    c = _coeffs(ztilde, n)
    if abs(np.linalg.norm(c) - 1.0) > 1e-10:
        raise ValidationError("ztilde must be normalized")
    steps, h = _steps(t_final, dt)
    times = np.arange(steps + 1) * h
    cols = np.flatnonzero(np.abs(c) > 0)
    mm, kk = np.meshgrid(np.arange(n), cols, indexing="ij")
    mm, kk = mm.ravel(), kk.ravel()
    # unique unordered pairs carry the integrals; I(k, m) = conj I(m, k) for real u
    lo, hi = np.minimum(mm, kk), np.maximum(mm, kk)
    key = hi * n + lo
    ukeys, inv = np.unique(key, return_inverse=True)
    uh, ul = ukeys // n, ukeys % n
    om = C.lambdas[uh] - C.lambdas[ul]
    I_u = _time_integrals(u, om, times, h)
    I_u[:, uh == ul] = I_u[:, uh == ul].real
    I = I_u[:, inv]
    flip = mm < kk
    I[:, flip] = np.conj(I[:, flip])
    terms = -1j * (c[kk] * C.q[mm, kk])[None, :] * I
    R = np.zeros((times.size, n), dtype=complex)
    for col in range(n):
        sel = mm == col
        R[:, col] = terms[:, sel].sum(axis=1)
    R *= np.exp(-1j * np.outer(times, C.lambdas))
    if z0_tan is not None:
        w = _coeffs(z0_tan, n)
        R += np.exp(-1j * np.outer(times, C.lambdas)) * w[None, :]
    return Trajectory(times, R, C.lambdas, ztilde.system)
