"""Batch front-end: ``bilinear-schrodinger <command> --config FILE --out DIR``."""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .controls import ControlSignal
from .coupling import check_condition, coupling_matrix
from .entropy import EntropyConfig, entropy_report
from .errors import Diverged, NumericalFailure, ValidationError
from .moments import identity_residual, linearized_endpoint, synthesize_control, target_to_moments
from .propagator import linearized_propagate, propagate
from .return_times import find_return_time, verify_return
from .spectral import Potential, StateCoeffs, check_asymptotics, hs_norm, solve_sturm_liouville
from .steering import SteeringConfig, newton_control

log = logging.getLogger("bilinear_schrodinger")

COMMANDS = ("eig", "coupling", "check", "simulate", "return-time", "linearize", "moments", "synth",
            "steer", "entropy")

_PROFILE = {
    "kind": (str, "zero"), "csv": (str, ""), "value": (float, 0.0), "slope": (float, 0.0),
    "intercept": (float, 0.0), "a": (float, 0.0), "b": (float, 0.0), "c": (float, 0.0),
    "amplitude": (float, 0.0), "frequency": (float, 1.0), "phase": (float, 0.0),
}

SCHEMA = {
    "potential": {**_PROFILE, "n_grid": (int, 2048), "n_modes": (int, 16)},
    "coupling": {**_PROFILE, "kind": (str, "quadratic"), "a": (float, 1.0), "n": (int, 0),
                 "threshold": (float, 1e-4), "gap": (float, 1e-8)},
    "simulation": {"t_final": (float, 10.0), "dt": (float, 1e-3), "control": (str, "zero"),
                   "control_value": (float, 0.0), "n_atoms": (int, 20), "control_scale": (float, 1.0),
                   "seed": (int, 0), "initial": (str, "1:1"), "record_every": (int, 10),
                   "return_eps": (float, 0.1), "return_k_max": (int, 1_000_000),
                   "return_modes": (int, 3), "lambdas": (str, ""), "return_order": (float, 3.0)},
    "moments": {"ztilde": (str, "1:1"), "y": (str, "1:1j"), "T": (float, 40.0), "n_atoms": (int, 200),
                "rho": (float, 1e-10), "dt": (float, 1e-3), "s_order": (float, 1.0),
                "max_condition": (float, 1e12)},
    "steering": {"z0": (str, "1:1"), "z1": (str, "1:1"), "T": (float, 40.0), "n_atoms": (int, 200),
                 "rho": (float, 1e-10), "dt": (float, 1e-3), "tol": (float, 1e-7), "max_iter": (int, 8),
                 "delta": (float, 0.5), "return_eps": (float, 0.05), "return_k_max": (int, 1_000_000)},
    "entropy": {"m": (float, 1.0), "count": (int, 400), "knots": (int, 8), "k": (float, 0.5),
                "dt": (float, 1e-3), "seed": (int, 0), "n_eps": (int, 8), "lo_pct": (float, 10.0),
                "hi_pct": (float, 60.0), "n_boot": (int, 200), "oversample": (int, 20),
                "initial": (str, "1:1")},
}


def load_config(path: str | None, seed: int | None = None) -> dict:
    """Parse an INI file against SCHEMA; unknown sections or keys are errors."""
    cfg = {sec: {k: default for k, (_, default) in keys.items()} for sec, keys in SCHEMA.items()}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ValidationError(f"config file not found: {p}")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read(p)
        except configparser.Error as exc:
            raise ValidationError(f"{p}: malformed config: {exc}") from exc
        for sec in parser.sections():
            if sec not in SCHEMA:
                raise ValidationError(f"{p}: unknown section [{sec}]")
            for key, raw in parser.items(sec):
                if key not in SCHEMA[sec]:
                    raise ValidationError(f"{p}: unknown key '{key}' in [{sec}]")
                typ = SCHEMA[sec][key][0]
                try:
                    cfg[sec][key] = typ(float(raw)) if typ is int else typ(raw.strip())
                except ValueError as exc:
                    raise ValidationError(f"{p}: [{sec}] {key} = {raw!r} is not a valid {typ.__name__}") from exc
    if seed is not None:
        cfg["entropy"]["seed"] = seed
        cfg["simulation"]["seed"] = seed
    return cfg


def _profile(sec: dict, n_grid: int) -> Potential:
    if sec["csv"]:
        return Potential.from_csv(sec["csv"], n_grid)
    kind = sec["kind"]
    params = {
        "zero": {}, "constant": {"value": sec["value"]},
        "linear": {"slope": sec["slope"], "intercept": sec["intercept"]},
        "quadratic": {"a": sec["a"], "b": sec["b"], "c": sec["c"]},
        "sine": {"amplitude": sec["amplitude"], "frequency": sec["frequency"], "phase": sec["phase"]},
    }
    if kind not in params:
        raise ValidationError(f"unknown profile kind {kind!r}")
    return Potential.preset(kind, n_grid, **params[kind])


def parse_state(text: str, system) -> StateCoeffs:
    """'1:1, 2:0.5+0.1j' -> sum of amplitudes times modes."""
    amps = {}
    for part in filter(None, (s.strip() for s in text.split(","))):
        if ":" not in part:
            raise ValidationError(f"state entry {part!r} must look like index:amplitude")
        j, a = part.split(":", 1)
        try:
            amps[int(j)] = amps.get(int(j), 0) + complex(a.replace(" ", ""))
        except ValueError as exc:
            raise ValidationError(f"cannot parse state entry {part!r}") from exc
    if not amps:
        raise ValidationError("empty state specification")
    return StateCoeffs.from_modes(system, amps)


def _input_hash(cfg: dict) -> str:
    h = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode())
    for sec in ("potential", "coupling"):
        if cfg[sec]["csv"]:
            h.update(Path(cfg[sec]["csv"]).read_bytes())
    return h.hexdigest()


class Context:
    def __init__(self, cfg: dict, out: Path):
        self.cfg = cfg
        self.out = out
        self._E = None
        self._C = None

    @property
    def E(self):
        if self._E is None:
            p = self.cfg["potential"]
            self._E = solve_sturm_liouville(_profile(p, p["n_grid"]), p["n_modes"])
        return self._E

    @property
    def C(self):
        if self._C is None:
            c = self.cfg["coupling"]
            n = c["n"] or self.E.n_modes
            self._C = coupling_matrix(_profile(c, self.cfg["potential"]["n_grid"]), self.E, n)
        return self._C

    def state(self, text: str, normalize: bool = True) -> StateCoeffs:
        E = self.E
        if self.C.n != E.n_modes:
            raise ValidationError("coupling truncation must equal n_modes for dynamics")
        z = parse_state(text, E)
        return z.normalized() if normalize else z


def _control(ctx: Context, sec: dict, T: float) -> ControlSignal | float | None:
    kind = sec["control"]
    if kind == "zero":
        return None
    if kind == "constant":
        return sec["control_value"]
    if kind == "bumps":
        rng = np.random.default_rng(np.random.SeedSequence([sec["seed"], 2]))
        return ControlSignal.random_bumps(T, sec["n_atoms"], rng, sec["control_scale"], sec["dt"])
    raise ValidationError(f"unknown control kind {kind!r} (zero, constant, bumps)")


def cmd_eig(ctx: Context) -> dict:
    E = ctx.E
    E.write_csv(ctx.out)
    res = {"lambdas": E.physical_lambdas.tolist(), "gauge_shift": E.gauge_shift}
    if E.n_modes >= 8:
        p = ctx.cfg["potential"]
        res["asymptotics"] = check_asymptotics(E, _profile(p, p["n_grid"])).to_dict()
    return res


def cmd_coupling(ctx: Context) -> dict:
    C = ctx.C
    np.savetxt(ctx.out / "coupling.csv", C.q, delimiter=",", fmt="%.17g")
    return {"n": C.n, "diagonal": np.diag(C.q).tolist(), "max_abs": float(np.abs(C.q).max())}


def cmd_check(ctx: Context) -> dict:
    c = ctx.cfg["coupling"]
    return check_condition(ctx.C, c["threshold"], c["gap"]).to_dict()


def cmd_simulate(ctx: Context) -> dict:
    s = ctx.cfg["simulation"]
    z0 = ctx.state(s["initial"])
    traj = propagate(z0, _control(ctx, s, s["t_final"]), ctx.C, s["t_final"], s["dt"], s["record_every"])
    traj.write_csv(ctx.out / "trajectory.csv")
    return traj.ledger()


def cmd_return_time(ctx: Context) -> dict:
    s = ctx.cfg["simulation"]
    if s["lambdas"]:
        try:
            lam = [float(x) for x in s["lambdas"].split(",")]
        except ValueError as exc:
            raise ValidationError("lambdas must be a comma-separated list of numbers") from exc
        shift = 0.0
    else:
        E = ctx.E
        lam, shift = E.lambdas[:s["return_modes"]], E.gauge_shift
    r = find_return_time(lam, s["return_eps"], s["return_k_max"], gauge_shift=shift)
    res = r.to_dict()
    if not s["lambdas"]:
        res["verify"] = verify_return(ctx.state(s["initial"]), r.k, s["return_order"], s["return_modes"])
    return res


def cmd_linearize(ctx: Context) -> dict:
    s, mo = ctx.cfg["simulation"], ctx.cfg["moments"]
    zt = ctx.state(mo["ztilde"])
    u = _control(ctx, s, s["t_final"])
    traj = linearized_propagate(zt, u, ctx.C, s["t_final"], s["dt"])
    traj.write_csv(ctx.out / "linearized.csv")
    free = zt.coeffs[None, :] * np.exp(-1j * np.outer(traj.times, ctx.C.lambdas))
    tang = np.abs(np.real(np.sum(traj.states * np.conj(free), axis=1)))
    return {**traj.ledger(), "max_tangency_defect": float(tang.max())}


def _table(ctx: Context):
    mo = ctx.cfg["moments"]
    zt = ctx.state(mo["ztilde"])
    y = ctx.state(mo["y"], normalize=False)
    y = y - zt * np.real(y.inner(zt))
    return zt, y, target_to_moments(zt, y, ctx.C)


def cmd_moments(ctx: Context) -> dict:
    zt, y, M = _table(ctx)
    (ctx.out / "moments.json").write_text(M.to_json())
    return {"case": M.case, "construction": M.construction, "d0": M.d0,
            "identity_residual": identity_residual(zt, y, ctx.C, M)}


def cmd_synth(ctx: Context) -> dict:
    mo = ctx.cfg["moments"]
    zt, y, M = _table(ctx)
    u, rep = synthesize_control(M, mo["T"], mo["n_atoms"], mo["rho"], mo["dt"], mo["max_condition"],
                                s_order=mo["s_order"])
    u.write_csv(ctx.out / "control.csv")
    (ctx.out / "control.json").write_text(u.to_json())
    R = linearized_endpoint(zt, u, ctx.C)
    return {**rep.to_dict(), "forward_error_h3": hs_norm(R - y, 3.0)}


def cmd_steer(ctx: Context) -> dict:
    st = ctx.cfg["steering"]
    z0, z1 = ctx.state(st["z0"]), ctx.state(st["z1"])
    cfg = SteeringConfig(T=st["T"], n_atoms=st["n_atoms"], rho=st["rho"], dt=st["dt"], tol=st["tol"],
                         max_iter=st["max_iter"], delta=st["delta"], return_eps=st["return_eps"],
                         return_k_max=st["return_k_max"])
    try:
        run = newton_control(z0, z1, ctx.C, cfg)
    except Diverged as exc:
        _write_report(ctx, "steer", exc.run.to_dict())
        raise
    run.control.write_csv(ctx.out / "control.csv")
    return run.to_dict()


def cmd_entropy(ctx: Context) -> dict:
    e = ctx.cfg["entropy"]
    z0 = ctx.state(e["initial"])
    cfg = EntropyConfig(**{k: v for k, v in e.items() if k != "initial"})
    rep = entropy_report(z0, ctx.C, cfg)
    rep.write_csv(ctx.out / "entropy.csv")
    return rep.to_dict()


HANDLERS = {
    "eig": cmd_eig, "coupling": cmd_coupling, "check": cmd_check, "simulate": cmd_simulate,
    "return-time": cmd_return_time, "linearize": cmd_linearize, "moments": cmd_moments,
    "synth": cmd_synth, "steer": cmd_steer, "entropy": cmd_entropy,
}


def _write_report(ctx: Context, command: str, result: dict, status: str = "ok") -> None:
    report = {"command": command, "status": status, "config": ctx.cfg,
              "input_hash": _input_hash(ctx.cfg), "result": result}
    (ctx.out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bilinear-schrodinger", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="INI file with sections " + ", ".join(f"[{s}]" for s in SCHEMA))
    ap.add_argument("--out", default="out", help="output directory (default: ./out)")
    ap.add_argument("--seed", type=int, help="override the random seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ctx = Context(cfg, out)
        result = HANDLERS[args.command](ctx)
        _write_report(ctx, args.command, result)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    print(out / "report.json")
    return 0


def main() -> None:
    sys.exit(run())
