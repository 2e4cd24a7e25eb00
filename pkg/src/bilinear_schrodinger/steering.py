"""Local steering on the unit sphere: chord Newton with the linearized right inverse."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .controls import ControlSignal, theta_norm
from .coupling import CouplingMatrix
from .errors import Diverged, ValidationError
from .moments import synthesize_control, target_to_moments
from .propagator import propagate_endpoint
from .return_times import find_return_time
from .spectral import StateCoeffs, hs_norm


def project_tangent(z: StateCoeffs, ztilde: StateCoeffs) -> StateCoeffs:
    """P z = z - Re<z, ztilde> ztilde."""
    if abs(ztilde.l2_norm() - 1) > 1e-10:
        raise ValidationError("ztilde must be normalized")
    return z - ztilde * np.real(z.inner(ztilde))


def lift(w: StateCoeffs, ztilde: StateCoeffs, delta: float = 0.5) -> StateCoeffs:
    """The sphere point sqrt(1 - |w|^2) ztilde + w, whose tangent projection is w."""
    if abs(ztilde.l2_norm() - 1) > 1e-10:
        raise ValidationError("ztilde must be normalized")
    r = w.l2_norm()
    if r >= delta:
        raise ValidationError(f"tangent vector of norm {r:.3g} is outside the chart (delta={delta})")
    tang = np.real(w.inner(ztilde))
    if abs(tang) > 1e-10 * (1 + r):
        raise ValidationError("lift needs a tangent vector")
    return w + ztilde * np.sqrt(1 - r * r)


@dataclass
class SteeringConfig:
    T: float = 40.0
    n_atoms: int = 200
    rho: float = 1e-10
    dt: float = 1e-3
    tol: float = 1e-7
    max_iter: int = 8
    delta: float = 0.5
    return_eps: float = 0.05
    return_k_max: int = 10**6
    s_order: float = 1.0


@dataclass
class Iterate:
    control: ControlSignal
    endpoint: np.ndarray
    error_h3: float
    finite_time_error_h3: float
    theta_norm: float
    residual: float

    def to_dict(self) -> dict:
        return {"error_h3": self.error_h3, "finite_time_error_h3": self.finite_time_error_h3,
                "theta_norm": self.theta_norm, "residual": self.residual}


@dataclass
class SteeringRun:
    z0: StateCoeffs
    z1: StateCoeffs
    iterates: list = field(default_factory=list)
    status: str = "running"
    return_time: int = 0
    return_defect: float = 0.0
    outside_local_regime: bool = False

    @property
    def errors(self) -> list[float]:
        return [it.error_h3 for it in self.iterates]

    @property
    def control(self) -> ControlSignal:
        return self.iterates[-1].control

    def to_dict(self) -> dict:
        return {"status": self.status, "return_time": self.return_time, "return_defect": self.return_defect,
                "outside_local_regime": self.outside_local_regime,
                "iterations": [it.to_dict() for it in self.iterates]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _h3(c: np.ndarray, system) -> float:
    return hs_norm(StateCoeffs(c, system), 3.0)


def steering_endpoint(z0: StateCoeffs, u: ControlSignal, C: CouplingMatrix, T_ret: int, dt: float):
    """(pulled-back endpoint, state at T_ret): the free phases accumulated up to T_ret are undone."""
    zT = propagate_endpoint(z0, u, C, u.T, dt)
    back = zT * np.exp(1j * C.lambdas * u.T)
    at_return = back * np.exp(-1j * C.lambdas * T_ret)
    return back, at_return


def newton_control(z0: StateCoeffs, z1: StateCoeffs, C: CouplingMatrix, cfg: SteeringConfig | None = None,
                   ) -> SteeringRun:
    """u_{j+1} = u_j + synthesize(target_to_moments(z0, P(z1 - endpoint_j))) with the base frozen at z0.

    The endpoint is the free-phase pullback of the controlled state, which is
    the limit of U_{T_n}(z0, u) along return times T_n; the error against the
    state at the first return time T_ret >= T is reported alongside.
    """
    cfg = cfg or SteeringConfig()
    for z in (z0, z1):
        if z.coeffs.size != C.n:
            raise ValidationError(f"states must have {C.n} coefficients")
        if abs(z.l2_norm() - 1) > 1e-10:
            raise ValidationError("z0 and z1 must lie on the unit sphere")
    system = z0.system
    shift = float(getattr(system, "gauge_shift", 0.0))
    pop = np.abs(z0.coeffs) > 1e-12 * np.abs(z0.coeffs).max()
    ret = find_return_time(C.lambdas[pop], cfg.return_eps, cfg.return_k_max,
                           k_min=int(np.ceil(cfg.T)), gauge_shift=shift)
    run = SteeringRun(z0, z1, return_time=ret.k, return_defect=ret.defect)
    run.outside_local_regime = bool(_h3(z1.coeffs - z0.coeffs, system) > cfg.delta)
    gauge = np.exp(-1j * shift * ret.k)
    u = ControlSignal.bump_train(cfg.T, cfg.n_atoms, np.zeros(cfg.n_atoms), cfg.dt)
    residual = 0.0
    rises = 0
    for j in range(cfg.max_iter + 1):
        if np.any(u.weights):
            end, at_ret = steering_endpoint(z0, u, C, ret.k, cfg.dt)
        else:
            end, at_ret = z0.coeffs.copy(), z0.coeffs * np.exp(-1j * C.lambdas * ret.k)
        err = _h3(z1.coeffs - end, system)
        fin = _h3(z1.coeffs - at_ret / gauge, system)
        th = theta_norm(u, C, cfg.s_order).total
        run.iterates.append(Iterate(u, end, err, fin, th, residual))
        if err <= cfg.tol:
            run.status = "converged"
            return run
        if j > 0:
            rises = rises + 1 if err >= run.iterates[-2].error_h3 else 0
            if rises >= 3:
                run.status = "diverged"
                exc = Diverged(f"steering error stopped decreasing at iteration {j} (error {err:.3e})")
                exc.run = run
                raise exc
        if j == cfg.max_iter:
            break
        y = project_tangent(z1.with_coeffs(z1.coeffs - end), z0)
        M = target_to_moments(z0, y, C)
        du, rep = synthesize_control(M, cfg.T, cfg.n_atoms, cfg.rho, cfg.dt, s_order=cfg.s_order)
        residual = rep.max_residual
        u = u + du
    run.status = "max_iter"
    return run
