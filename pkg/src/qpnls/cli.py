"""``qpnls <config-file>``: run a solve, a convergence sweep or a soliton profile.

Config files are ``key = value`` lines; ``#`` starts a comment.  Keys::

    mode               solve | converge-time | converge-space | soliton
    preset             1d | 2d            (or give matrix.row.<i> instead)
    matrix.row.<i>     comma-separated row i (1-based) of the projection matrix;
                       irrational entries need >= 15 significant digits
    potential.mode.<j> k1,...,kn : re,im   (inline problems only)
    initial            exp_decay | exp_decay:lo,hi | gaussian
    theta, T           nonlinearity strength, final time
    tau, tau_list      time step / comma-separated decreasing time steps
    N, N_list          truncation (grid has 2N points per axis) / increasing list
    ref_tau, ref_N     reference resolution for convergence sweeps
    measure            coarse | union   (spatial error measure)
    out_dir            output directory (overridden by --out)
    gaussian_centered  true | false    peak at (pi, pi) instead of the origin
    gaussian_domain    symmetric | literal
    x_alpha            alpha for an X_alpha column in trace.csv
    jobs               worker processes for sweeps (env QPNLS_JOBS)

Exit status: 0 success, 1 configuration error, 2 numerical error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import bench
from .errors import ParseError, QPError, ValidationError
from .integrator import evolve, max_mass_drift, write_trace_csv
from .lattice import ProjectionMatrix
from .operators import SolverConfig, check_conjugate_symmetric, merge_modes, steps_for
from .qpfield import evaluate_at_points, write_coeffs_csv

log = logging.getLogger("qpnls")

MODES = ("solve", "converge-time", "converge-space", "soliton")
SCALAR_KEYS = {
    "mode": str,
    "preset": str,
    "initial": str,
    "theta": float,
    "T": float,
    "tau": float,
    "tau_list": "floats",
    "N": int,
    "N_list": "ints",
    "ref_tau": float,
    "ref_N": int,
    "measure": str,
    "out_dir": str,
    "gaussian_centered": bool,
    "gaussian_domain": str,
    "x_alpha": float,
    "jobs": int,
}
PROFILE_X = np.linspace(-5.0, 5.0, 201)


@dataclass(frozen=True)
class RunConfig:
    mode: str
    preset: str | None = None
    matrix_rows: tuple = ()
    potential_modes: tuple = ()
    initial: str | None = None
    theta: float | None = None
    T: float | None = None
    tau: float | None = None
    tau_list: tuple | None = None
    N: int | None = None
    N_list: tuple | None = None
    ref_tau: float | None = None
    ref_N: int | None = None
    measure: str | None = None
    out_dir: str = "."
    gaussian_centered: bool = False
    gaussian_domain: str | None = None
    x_alpha: float | None = None
    jobs: int | None = None

    def to_text(self) -> str:
        lines = [f"mode = {self.mode}"]
        if self.preset is not None:
            lines.append(f"preset = {self.preset}")
        for i, row in enumerate(self.matrix_rows, 1):
            lines.append(f"matrix.row.{i} = " + ",".join(repr(float(v)) for v in row))
        for j, (k, a) in enumerate(self.potential_modes, 1):
            ks = ",".join(str(v) for v in k)
            lines.append(f"potential.mode.{j} = {ks} : {a.real!r},{a.imag!r}")
        for f in fields(self):
            if f.name in ("mode", "preset", "matrix_rows", "potential_modes"):
                continue
            v = getattr(self, f.name)
            if v is None or (f.name == "gaussian_centered" and v is False):
                continue
            if f.name == "out_dir" and v == ".":
                continue
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _parse_value(kind, raw):
    if kind is str:
        return raw
    if kind is float:
        return float(raw)
    if kind is int:
        return int(raw)
    if kind is bool:
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    conv = float if kind == "floats" else int
    return tuple(conv(s) for s in items)


def _parse_mode_line(raw):
    ks, sep, amp = raw.partition(":")
    if not sep:
        raise ValueError("expected 'k1,...,kn : re,im'")
    k = tuple(int(s) for s in ks.split(","))
    re_im = [float(s) for s in amp.split(",")]
    if len(re_im) != 2:
        raise ValueError("amplitude must be 're,im'")
    return k, complex(re_im[0], re_im[1])


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config file body."""
    values, rows, pmodes, seen = {}, {}, {}, set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ParseError(lineno, f"expected 'key = value', got {line!r}")
        if key in seen:
            raise ParseError(lineno, f"duplicate key {key!r}")
        seen.add(key)
        try:
            if key.startswith("matrix.row."):
                rows[int(key[len("matrix.row."):])] = tuple(float(s) for s in raw.split(","))
            elif key.startswith("potential.mode."):
                pmodes[int(key[len("potential.mode."):])] = _parse_mode_line(raw)
            elif key in SCALAR_KEYS:
                values[key] = _parse_value(SCALAR_KEYS[key], raw)
            else:
                raise ParseError(lineno, f"unknown key {key!r}")
        except ParseError:
            raise
        except ValueError as exc:
            raise ParseError(lineno, f"bad value for {key!r}: {exc}") from None
    if rows and sorted(rows) != list(range(1, len(rows) + 1)):
        raise ValidationError("matrix rows must be numbered 1..d without gaps")
    if pmodes and sorted(pmodes) != list(range(1, len(pmodes) + 1)):
        raise ValidationError("potential modes must be numbered 1..m without gaps")
    if "mode" not in values:
        raise ValidationError("mode required")
    cfg = RunConfig(
        matrix_rows=tuple(rows[i] for i in sorted(rows)),
        potential_modes=tuple(pmodes[j] for j in sorted(pmodes)),
        **values,
    )
    validate(cfg)
    return cfg


def _need(cfg, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise ValidationError(f"{name} required for mode {cfg.mode}")


def validate(cfg: RunConfig) -> None:
    if cfg.mode not in MODES:
        raise ValidationError(f"mode must be one of {', '.join(MODES)}, got {cfg.mode!r}")
    if (cfg.preset is None) == (not cfg.matrix_rows):
        raise ValidationError("give exactly one of preset or matrix.row.<i>")
    if cfg.preset is not None:
        if cfg.preset not in bench.PRESETS:
            raise ValidationError(f"unknown preset {cfg.preset!r}")
        if cfg.potential_modes:
            raise ValidationError("potential.mode.<j> is only allowed with an inline matrix")
    else:
        if len({len(r) for r in cfg.matrix_rows}) != 1:
            raise ValidationError("matrix rows must have equal length")
        n = len(cfg.matrix_rows[0])
        try:
            ProjectionMatrix(cfg.matrix_rows)
        except QPError as exc:
            raise ValidationError(f"projection matrix: {exc}") from None
        if any(len(k) != n for k, _ in cfg.potential_modes):
            raise ValidationError(f"potential modes must have n={n} entries")
        try:
            check_conjugate_symmetric(cfg.potential_modes)
        except QPError as exc:
            raise ValidationError(f"potential: {exc}") from None
        _need(cfg, "theta", "T")
        if cfg.initial is None and cfg.mode != "soliton":
            raise ValidationError("initial required for an inline problem")
    if cfg.initial is not None:
        _parse_initial(cfg.initial)
    if cfg.gaussian_domain not in (None, "symmetric", "literal"):
        raise ValidationError("gaussian_domain must be symmetric or literal")
    if cfg.measure not in (None, "coarse", "union"):
        raise ValidationError("measure must be coarse or union")
    if cfg.jobs is not None and cfg.jobs < 1:
        raise ValidationError("jobs must be >= 1")

    need = {
        "solve": ("tau", "N"),
        "converge-time": ("tau_list", "N"),
        "converge-space": ("tau", "N_list"),
        "soliton": ("tau", "N"),
    }[cfg.mode]
    _need(cfg, *need)
    for name in ("tau", "ref_tau", "T"):
        v = getattr(cfg, name)
        if v is not None and not (np.isfinite(v) and (v > 0 or (name == "T" and v == 0))):
            raise ValidationError(f"{name} must be positive, got {v!r}")
    for name in ("N", "ref_N"):
        v = getattr(cfg, name)
        if v is not None and v < 1:
            raise ValidationError(f"{name} must be >= 1")
    if cfg.tau_list is not None:
        if any(t <= 0 for t in cfg.tau_list):
            raise ValidationError("tau_list entries must be positive")
        if any(a <= b for a, b in zip(cfg.tau_list, cfg.tau_list[1:])):
            raise ValidationError("tau_list must be strictly decreasing")
    if cfg.N_list is not None:
        if any(n < 1 for n in cfg.N_list):
            raise ValidationError("N_list entries must be >= 1")
        if any(a >= b for a, b in zip(cfg.N_list, cfg.N_list[1:])):
            raise ValidationError("N_list must be strictly increasing")

    T = cfg.T if cfg.T is not None else bench.PRESETS[cfg.preset]().T
    steps = [cfg.tau, cfg.ref_tau] + list(cfg.tau_list or ())
    for tau in steps:
        if tau is None:
            continue
        try:
            steps_for(T, tau)
        except QPError:
            raise ValidationError(f"T/tau = {T}/{tau} is not an integer number of steps") from None


def _parse_initial(spec: str):
    name, _, args = spec.partition(":")
    name = name.strip()
    if name == "gaussian" and not args:
        return bench.GaussianInitial()
    if name == "exp_decay":
        if not args:
            return bench.ExpDecayInitial(-(10**9), 10**9)
        try:
            lo, hi = (int(s) for s in args.split(","))
        except ValueError:
            raise ValidationError(f"exp_decay bounds must be 'lo,hi', got {args!r}") from None
        if lo > hi:
            raise ValidationError("exp_decay needs lo <= hi")
        return bench.ExpDecayInitial(lo, hi)
    raise ValidationError(f"unknown initial rule {spec!r}")


def build_problem(cfg: RunConfig) -> bench.ExperimentPreset:
    """Preset (with overrides) or inline problem described by ``cfg``."""
    if cfg.preset is not None:
        p = bench.get_preset(cfg.preset)
        over = {}
        for name in ("theta", "T", "ref_tau", "ref_N"):
            if getattr(cfg, name) is not None:
                over[name] = getattr(cfg, name)
        if cfg.initial is not None:
            over["initial"] = _parse_initial(cfg.initial)
    else:
        p = bench.ExperimentPreset(
            name="inline",
            P=ProjectionMatrix(cfg.matrix_rows),
            potential_modes=merge_modes(cfg.potential_modes),
            initial=_parse_initial(cfg.initial or "gaussian"),
            theta=cfg.theta,
            T=cfg.T,
            ref_tau=cfg.ref_tau or min(cfg.tau_list or (cfg.tau,)) / 10,
            ref_N=cfg.ref_N or 2 * max(cfg.N_list or (cfg.N,)),
            N_time=cfg.N or 1,
        )
        over = {}
    if cfg.mode == "soliton":
        over["initial"] = bench.GaussianInitial(
            centered=cfg.gaussian_centered, domain=cfg.gaussian_domain or "symmetric"
        )
    if cfg.mode == "converge-time" and cfg.ref_tau is None:
        over["ref_tau"] = min(p.ref_tau, min(cfg.tau_list) / 10)
    if cfg.mode == "converge-space" and cfg.ref_N is None:
        over["ref_N"] = max(p.ref_N, 2 * max(cfg.N_list))
    return replace(p, **over) if over else p


def _jobs(cfg):
    if cfg.jobs is not None:
        return cfg.jobs
    env = os.environ.get("QPNLS_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"QPNLS_JOBS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def profile_points(d: int, xs=PROFILE_X) -> np.ndarray:
    """Sample points along the last physical axis."""
    pts = np.zeros((len(xs), d))
    pts[:, -1] = xs
    return pts


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg)
    jobs = _jobs(cfg)
    if cfg.mode == "converge-time":
        rep = bench.run_temporal_convergence(problem, cfg.tau_list, cfg.N, jobs=jobs)
        rep.to_csv(out / "report.csv")
        log.info("temporal orders: %s", rep.orders)
    elif cfg.mode == "converge-space":
        rep = bench.run_spatial_convergence(
            problem, cfg.N_list, cfg.tau, measure=cfg.measure or "coarse", jobs=jobs
        )
        rep.to_csv(out / "report.csv")
        log.info("spatial errors: %s", rep.errors)
    else:
        lat = problem.lattice(cfg.N)
        scfg = SolverConfig(tau=cfg.tau, M=steps_for(problem.T, cfg.tau), theta=problem.theta, N=cfg.N)
        final, records = evolve(
            problem.initial_state(lat), problem.potential(lat), scfg, x_alpha=cfg.x_alpha
        )
        log.info("max relative mass drift %.3e", max_mass_drift(records))
        if cfg.mode == "solve":
            write_coeffs_csv(final, out / "final_state.csv")
            write_trace_csv(records, out / "trace.csv")
        else:
            vals = np.abs(evaluate_at_points(final, profile_points(lat.d)))
            with open(out / "profile.csv", "w") as fh:
                fh.write("x,abs_psi\n")
                for x, a in zip(PROFILE_X, vals):
                    fh.write(f"{x:.17g},{a:.17g}\n")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="qpnls", description=__doc__.splitlines()[0])
    ap.add_argument("config", help="config file")
    ap.add_argument("--out", help="output directory (overrides out_dir)")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"qpnls: error: cannot read config: {exc}", file=sys.stderr)
        return 3
    try:
        cfg = parse_config(text)
        if args.out:
            cfg = replace(cfg, out_dir=args.out)
        return run(cfg)
    except (ParseError, ValidationError) as exc:
        code, msg = 1, f"config: {exc}"
    except OSError as exc:
        code, msg = 3, f"I/O: {exc}"
    except (QPError, ValueError, FloatingPointError, MemoryError) as exc:
        code, msg = 2, f"numeric: {exc}"
    print(f"qpnls: error: {' '.join(msg.split())}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
