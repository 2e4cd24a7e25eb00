"""Dirichlet spectra of -d^2/dx^2 + V on (0,1), tensor products, Sobolev norms.

Eigenpairs come from second-order central differences (a symmetric
tridiagonal problem).  The discrete eigenvalues carry an O(k^4 h^2) bias;
we remove its leading part with the classical asymptotic correction

    lambda_k ~ mu_k(V) + (k^2 pi^2 - mu_k(0)),

where mu_k(0) = (4/h^2) sin^2(k pi h / 2) is the exact discrete free
eigenvalue.  The correction is exact for constant V and reduces the error
for smooth V to a level the refinement tests can resolve.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from .errors import ValidationError

MIN_GRID = 16


@dataclass(frozen=True)
class Potential:
    """Real samples of a profile on a uniform grid of [0, 1], endpoints included.

    Used both for the potential V and for the coupling profile Q.
    """

    grid: np.ndarray
    values: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValidationError("grid and values must be 1-D arrays of equal length")
        if grid.size < MIN_GRID:
            raise ValidationError(f"n_grid must be >= {MIN_GRID}, got {grid.size}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("potential has non-finite values")
        if abs(grid[0]) > 1e-12 or abs(grid[-1] - 1.0) > 1e-12:
            raise ValidationError("grid must include both endpoints 0 and 1")
        if not np.allclose(np.diff(grid), grid[1] - grid[0], rtol=1e-9, atol=1e-14):
            raise ValidationError("grid must be uniform")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def n_grid(self) -> int:
        return self.grid.size

    def mean(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    def resample(self, n_grid: int) -> "Potential":
        if n_grid == self.n_grid:
            return self
        if n_grid < MIN_GRID:
            raise ValidationError(f"n_grid must be >= {MIN_GRID}, got {n_grid}")
        x = np.linspace(0.0, 1.0, n_grid)
        return Potential(x, np.interp(x, self.grid, self.values), self.label)

    @classmethod
    def preset(cls, kind: str, n_grid: int = 2048, **params) -> "Potential":
        """Closed-form profiles.

        kinds: zero, constant(value), linear(slope, intercept),
        quadratic(a, b, c) for a x^2 + b x + c, sine(amplitude, frequency, phase)
        for amplitude * sin(frequency * pi * x + phase).
        """
        x = np.linspace(0.0, 1.0, n_grid)
        allowed = {
            "zero": (),
            "constant": ("value",),
            "linear": ("slope", "intercept"),
            "quadratic": ("a", "b", "c"),
            "sine": ("amplitude", "frequency", "phase"),
        }
        if kind not in allowed:
            raise ValidationError(f"unknown profile kind {kind!r}; expected one of {sorted(allowed)}")
        extra = set(params) - set(allowed[kind])
        if extra:
            raise ValidationError(f"unexpected parameters for {kind!r}: {sorted(extra)}")
        p = {k: float(v) for k, v in params.items()}
        if kind == "zero":
            v = np.zeros_like(x)
        elif kind == "constant":
            v = np.full_like(x, p.get("value", 0.0))
        elif kind == "linear":
            v = p.get("slope", 1.0) * x + p.get("intercept", 0.0)
        elif kind == "quadratic":
            v = p.get("a", 1.0) * x**2 + p.get("b", 0.0) * x + p.get("c", 0.0)
        else:
            v = p.get("amplitude", 1.0) * np.sin(p.get("frequency", 1.0) * np.pi * x + p.get("phase", 0.0))
        label = kind if not p else kind + "(" + ", ".join(f"{k}={p[k]:g}" for k in sorted(p)) + ")"
        return cls(x, v, label)

    @classmethod
    def from_csv(cls, path, n_grid: int | None = None) -> "Potential":
        """Read a two-column (x, V(x)) CSV; a header row is skipped if present.

        Samples are linearly interpolated onto a uniform grid (n_grid points,
        default: the number of rows).
        """
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"potential file not found: {path}")
        rows = []
        with path.open(newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    if rows:
                        raise ValidationError(f"{path}: malformed row {row!r}")
        if len(rows) < 2:
            raise ValidationError(f"{path}: need at least two samples")
        data = np.array(sorted(rows))
        xs, vs = data[:, 0], data[:, 1]
        if xs[0] > 1e-12 or xs[-1] < 1.0 - 1e-12:
            raise ValidationError(f"{path}: samples must cover [0, 1]")
        n = n_grid or len(xs)
        x = np.linspace(0.0, 1.0, n)
        return cls(x, np.interp(x, xs, vs), f"csv({path.name})")


Profile = Potential


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Orthonormal Dirichlet eigenpairs on a uniform grid.

    ``lambdas`` already include ``gauge_shift``; the physical eigenvalues are
    ``lambdas - gauge_shift``.  ``modes[j]`` holds grid samples of e_{j+1}.
    """

    lambdas: np.ndarray
    modes: np.ndarray
    gauge_shift: float
    grid: np.ndarray
    potential_label: str = "custom"

    @property
    def n_modes(self) -> int:
        return self.lambdas.size

    @property
    def n_grid(self) -> int:
        return self.grid.size

    @property
    def dim(self) -> int:
        return 1

    @property
    def physical_lambdas(self) -> np.ndarray:
        return self.lambdas - self.gauge_shift

    @property
    def indices(self) -> list[tuple[int, ...]]:
        return [(j,) for j in range(1, self.n_modes + 1)]

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """Trapezoidal <f, g> = int f conj(g)."""
        return np.trapezoid(f * np.conj(g), self.grid)

    def gram(self) -> np.ndarray:
        return np.trapezoid(self.modes[:, None, :] * self.modes[None, :, :], self.grid, axis=-1)

    def write_csv(self, directory) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        lam_path = directory / "eigenvalues.csv"
        with lam_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "lambda", "lambda_physical"])
            for j, (lam, phys) in enumerate(zip(self.lambdas, self.physical_lambdas), start=1):
                w.writerow([j, repr(float(lam)), repr(float(phys))])
        modes_path = directory / "modes.csv"
        header = "x," + ",".join(f"e{j}" for j in range(1, self.n_modes + 1))
        np.savetxt(modes_path, np.column_stack([self.grid, self.modes.T]), delimiter=",",
                   header=header, comments="", fmt="%.17g")
        return lam_path, modes_path


def _free_discrete_eigenvalues(k: np.ndarray, h: float) -> np.ndarray:
    return 4.0 / h**2 * np.sin(k * np.pi * h / 2.0) ** 2


def solve_sturm_liouville(V: Potential, n_modes: int, n_grid: int | None = None) -> EigenSystem:
    """Lowest ``n_modes`` Dirichlet eigenpairs of -d^2/dx^2 + V on (0, 1)."""
    if n_grid is not None:
        V = V.resample(n_grid)
    n_grid = V.n_grid
    if n_modes < 1:
        raise ValidationError("n_modes must be >= 1")
    if n_modes > n_grid / 8:
        raise ValidationError(f"resolution guard: n_modes={n_modes} exceeds n_grid/8={n_grid / 8:g}")
    x = V.grid
    h = x[1] - x[0]
    mean = V.mean()
    centred = V.values - mean
    k = np.arange(1, n_modes + 1)
    interior = x[1:-1]

    if not np.any(centred):
        # Constant potential: the discrete eigenvectors are sampled sines, exactly.
        mu = _free_discrete_eigenvalues(k, h)
        vecs = np.sin(np.pi * np.outer(k, interior))
    else:
        diag = 2.0 / h**2 + centred[1:-1]
        off = np.full(n_grid - 3, -1.0 / h**2)
        mu, w = eigh_tridiagonal(diag, off, select="i", select_range=(0, n_modes - 1))
        vecs = w.T

    lambdas = mu + (k**2 * np.pi**2 - _free_discrete_eigenvalues(k, h)) + mean

    modes = np.zeros((n_modes, n_grid))
    modes[:, 1:-1] = vecs
    # Trapezoid with zero endpoints reduces to h * sum over the interior.
    modes /= np.sqrt(h * np.sum(vecs**2, axis=1))[:, None]
    modes *= np.where(modes[:, 1] < 0, -1.0, 1.0)[:, None]

    shift = 0.0
    if lambdas[0] < 1.0:
        shift = 1.0 - lambdas[0]
    return EigenSystem(lambdas + shift, modes, shift, x.copy(), V.label)


@dataclass(frozen=True, eq=False)
class EigenSystemND:
    """Tensor-product spectrum for a separable potential on (0,1)^d.

    Multi-indices are 1-based tuples, ordered by eigenvalue (ties broken
    lexicographically) and truncated to ``n_modes`` entries.
    """

    factors: tuple[EigenSystem, ...]
    multi_indices: list[tuple[int, ...]]
    lambdas: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def n_modes(self) -> int:
        return len(self.multi_indices)

    @property
    def indices(self) -> list[tuple[int, ...]]:
        return self.multi_indices

    @property
    def gauge_shift(self) -> float:
        return float(sum(f.gauge_shift for f in self.factors))

    def eigenvalue(self, multi: Sequence[int]) -> float:
        return float(sum(f.lambdas[j - 1] for f, j in zip(self.factors, multi)))

    def evaluate(self, multi: Sequence[int], *points: np.ndarray | float) -> np.ndarray:
        """e_{j1..jd}(x1, ..., xd) as the product of factor modes (cubic-spline interpolation)."""
        if len(points) != self.dim:
            raise ValidationError(f"expected {self.dim} coordinates")
        out = 1.0
        for f, j, p in zip(self.factors, multi, points):
            out = out * CubicSpline(f.grid, f.modes[j - 1])(p)
        return out

    def position(self, multi: Sequence[int]) -> int:
        return self.multi_indices.index(tuple(multi))


def tensor_eigensystem(systems: Sequence[EigenSystem], n_modes: int | None = None) -> EigenSystemND:
    if not systems:
        raise ValidationError("tensor_eigensystem needs at least one factor")
    n_grid = systems[0].n_grid
    if any(s.n_grid != n_grid for s in systems):
        raise ValidationError("all factors must share the grid resolution")
    ranges = [range(1, s.n_modes + 1) for s in systems]
    table = [(sum(s.lambdas[j - 1] for s, j in zip(systems, multi)), multi)
             for multi in itertools.product(*ranges)]
    table.sort()
    if n_modes is not None:
        table = table[:n_modes]
    lambdas = np.array([lam for lam, _ in table])
    return EigenSystemND(tuple(systems), [m for _, m in table], lambdas)


@dataclass(frozen=True, eq=False)
class StateCoeffs:
    """Coefficients c_j = <z, e_j> of a state in the (possibly tensor) eigenbasis."""

    coeffs: np.ndarray
    system: EigenSystem | EigenSystemND

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size != self.system.n_modes:
            raise ValidationError(f"expected {self.system.n_modes} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def basis(cls, system, j, amplitude: complex = 1.0) -> "StateCoeffs":
        """Amplitude times e_j; ``j`` is 1-based (or a multi-index tuple)."""
        c = np.zeros(system.n_modes, dtype=complex)
        c[_position(system, j)] = amplitude
        return cls(c, system)

    @classmethod
    def from_modes(cls, system, amplitudes: dict) -> "StateCoeffs":
        c = np.zeros(system.n_modes, dtype=complex)
        for j, a in amplitudes.items():
            c[_position(system, j)] += complex(a)
        return cls(c, system)

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def normalized(self) -> "StateCoeffs":
        n = self.l2_norm()
        if n == 0:
            raise ValidationError("cannot normalize the zero state")
        return StateCoeffs(self.coeffs / n, self.system)

    def inner(self, other: "StateCoeffs") -> complex:
        """<self, other> with the second argument conjugated."""
        return complex(np.vdot(other.coeffs, self.coeffs))

    def with_coeffs(self, coeffs) -> "StateCoeffs":
        return StateCoeffs(coeffs, self.system)

    def __add__(self, other):
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def on_grid(self) -> np.ndarray:
        """Grid samples of z (1-D systems only)."""
        if not isinstance(self.system, EigenSystem):
            raise ValidationError("grid reconstruction is available for 1-D systems only")
        return self.coeffs @ self.system.modes


def _position(system, j) -> int:
    if isinstance(system, EigenSystemND):
        multi = tuple(j) if not isinstance(j, int) else (j,)
        return system.position(multi)
    j = j[0] if isinstance(j, tuple) else j
    if not 1 <= j <= system.n_modes:
        raise ValidationError(f"mode index {j} out of range 1..{system.n_modes}")
    return j - 1


def sobolev_weights(lambdas: np.ndarray, s: float) -> np.ndarray:
    """lambda_j^(s/2); any real s (negative orders are used for dual metrics)."""
    return np.asarray(lambdas, dtype=float) ** (s / 2.0)


def hs_norm(z: StateCoeffs, s: float) -> float:
    """||z||_{s,V} = || lambda_j^{s/2} c_j ||_{l2}."""
    if s < 0:
        raise ValidationError(f"hs_norm needs s >= 0, got {s}")
    lam = z.system.lambdas
    if lam[0] < 1.0 - 1e-12:
        raise ValidationError("eigenvalues must be gauge-shifted to lambda_1 >= 1")
    return float(np.linalg.norm(sobolev_weights(lam, s) * z.coeffs))


def v_norm(z: StateCoeffs) -> float:
    """Norm with weights j1^3 * ... * jd^3 (coincides with H^3 in d=1 up to lambda_j ~ (j pi)^2)."""
    weights = np.array([float(np.prod(np.array(m, dtype=float) ** 3)) for m in z.system.indices])
    return float(np.linalg.norm(weights * z.coeffs))


@dataclass
class AsymptoticsReport:
    k: np.ndarray
    remainders: np.ndarray
    remainder_partial_sums: np.ndarray
    last_quarter_fraction: float
    sup_distances: np.ndarray
    derivative_distances: np.ndarray
    scaled_distances: np.ndarray
    growth_slope: float
    violation: bool

    def to_dict(self) -> dict:
        return {
            "k": self.k.tolist(),
            "remainders": self.remainders.tolist(),
            "remainder_partial_sums": self.remainder_partial_sums.tolist(),
            "last_quarter_fraction": self.last_quarter_fraction,
            "sup_distances": self.sup_distances.tolist(),
            "derivative_distances": self.derivative_distances.tolist(),
            "scaled_distances": self.scaled_distances.tolist(),
            "growth_slope": self.growth_slope,
            "violation": self.violation,
        }


def check_asymptotics(E: EigenSystem, V: Potential, growth_tol: float = 0.25,
                      noise_floor: float = 1e-9) -> AsymptoticsReport:
    """Probe lambda_k = k^2 pi^2 + int V + r_k and the eigenfunction distances to sqrt(2) sin(k pi x).

    ``violation`` is raised when k * ||e_k - e_{k,0}||_inf trends upward:
    the least-squares slope of log(k * dist_k) against log k over the upper
    half of the modes exceeds ``growth_tol``.
    """
    if E.n_modes < 8:
        raise ValidationError("check_asymptotics needs n_modes >= 8")
    V = V.resample(E.n_grid)
    k = np.arange(1, E.n_modes + 1)
    r = E.physical_lambdas - k**2 * np.pi**2 - V.mean()
    partial = np.cumsum(r**2)
    q = (3 * E.n_modes) // 4
    total = partial[-1]
    frac = float((partial[-1] - partial[q - 1]) / total) if total > 0 else 0.0

    x = E.grid
    free = np.sqrt(2.0) * np.sin(np.pi * np.outer(k, x))
    dfree = np.sqrt(2.0) * np.pi * k[:, None] * np.cos(np.pi * np.outer(k, x))
    sup = np.max(np.abs(E.modes - free), axis=1)
    dmodes = np.gradient(E.modes, x, axis=1, edge_order=2)
    dsup = np.max(np.abs(dmodes - dfree), axis=1)
    scaled = k * sup

    half = k >= E.n_modes // 2
    with np.errstate(divide="ignore"):
        logs = np.log(scaled[half])
    # distances at rounding level carry no trend
    if np.max(scaled[half]) > noise_floor and np.all(np.isfinite(logs)) and np.ptp(logs) > 0:
        slope = float(np.polyfit(np.log(k[half]), logs, 1)[0])
    else:
        slope = 0.0
    return AsymptoticsReport(k, r, partial, frac, sup, dsup, scaled, slope, slope > growth_tol)
