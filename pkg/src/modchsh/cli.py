"""Command-line front end: ``modchsh {point,sweep,threshold,grating,sample}``.

Configuration comes from (lowest to highest precedence) built-in defaults, a
``--preset``, a ``--config`` file of ``key = value`` lines, and per-parameter
flags.  Packet parameters are fractions of their periods: positions of
``ell``, momenta of ``h/ell``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
import warnings
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import modular as mod
from . import photonics as ph

log = logging.getLogger("modchsh")

OUTPUT_DIR_ENV = "MODCHSH_OUTPUT_DIR"
SWEEP_HEADER = ["a_xbar_frac", "bell_value", "converged"]
SAMPLE_HEADER = ["setting_a", "setting_b", "kk", "kl", "lk", "ll"]
SWEEP_MIN_CONVERGED = 0.9


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


@dataclass
class RunConfig:
    command: str = "point"
    ell: float = 1.0
    ax: float = 0.0
    ap: float = 0.0
    sx: float = 1e-4
    sp: float = 1e-4
    resolution: int = 64
    tol: float = 1e-6
    ax_points: int = 32
    ax_grid: str = ""
    bracket_lo: float = 0.01
    bracket_hi: float = 0.08
    threshold_tol: float = 5e-4
    L: float = 1.0
    kappa: float = 2 * math.pi * 0.1
    sigma: float = 10.0
    shift: float = 0.0
    slm: float = 0.0
    shots: int = 100_000
    seed: int = 0
    phi: float | None = None
    out: str = ""
    wavefunction_out: str = ""

    def validate(self):
        if not self.ell > 0:
            raise ConfigError("ell must be positive")
        if not 0 <= self.ax < 0.5:
            raise ConfigError("ax must be a fraction in [0, 0.5)")
        if not 0 <= self.ap < 1:
            raise ConfigError("ap must be a fraction in [0, 1)")
        if not (0 < self.sx < 1 and 0 < self.sp < 1):
            raise ConfigError("sx and sp must be fractions in (0, 1)")
        r = self.resolution
        if r < 16 or r > 512 or r & (r - 1):
            raise ConfigError("resolution must be a power of two between 16 and 512")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.phi is not None:
            try:
                mod.setting_index(self.phi)
            except ValueError as exc:
                raise ConfigError(f"phi: {exc}") from None
        return self

    def packet(self, a_xbar=None) -> mod.ModularWavepacket:
        return mod.ModularWavepacket(self.ax if a_xbar is None else a_xbar, self.ap, self.sx, self.sp)

    def frame(self) -> mod.ModularFrame:
        return mod.ModularFrame(ell=self.ell)

    def grid(self) -> np.ndarray:
        if self.ax_grid.strip():
            try:
                vals = [float(v) for v in self.ax_grid.replace(",", " ").split()]
            except ValueError:
                raise ConfigError("ax_grid must be a list of numbers") from None
            g = np.array(vals)
        else:
            if self.ax_points < 1:
                raise ConfigError("empty sweep grid (ax_points < 1)")
            g = mod.default_ax_grid(self.ax_points)
        if g.size == 0:
            raise ConfigError("empty sweep grid")
        if g.min() < 0 or g.max() >= 0.5:
            raise ConfigError("ax_grid values must lie in [0, 0.5)")
        return g


PRESETS = {
    # sigma_p -> 0 at a_p = 0
    "fig1a": {"ap": 0.0, "sp": 1e-4},
    "fig1b": {"ap": 0.1, "sp": 0.1},
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, raw):
    if key not in _FIELD_TYPES or key == "command":
        raise ConfigError(f"unknown config key '{key}'")
    typ = _FIELD_TYPES[key]
    try:
        if typ == "int":
            return int(raw)
        if typ in ("float", "float | None"):
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        return str(raw)
    except ValueError:
        raise ConfigError(f"config key '{key}': cannot parse value {raw!r}") from None


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: missing key")
        out[key] = _coerce(key, value)
    return out


def resolve_config(args) -> RunConfig:
    cfg = RunConfig(command=args.command)
    if args.preset:
        cfg = replace(cfg, **PRESETS[args.preset])
    if args.config:
        cfg = replace(cfg, **read_config_file(args.config))
    flags = {
        "out": args.out,
        "resolution": args.resolution,
        "seed": args.seed,
        "ax": args.ax,
        "ap": args.ap,
        "sx": args.sx,
        "sp": args.sp,
        "shots": args.shots,
        "phi": args.phi,
        "kappa": args.kappa,
        "L": args.L,
        "sigma": args.sigma,
    }
    cfg = replace(cfg, **{k: v for k, v in flags.items() if v is not None})
    return cfg.validate()


def output_path(name: str) -> Path:
    p = Path(name)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _config_echo(cfg: RunConfig) -> dict:
    return asdict(cfg)


# -- subcommands ------------------------------------------------------------------


def run_point(cfg: RunConfig) -> dict:
    p = cfg.packet()
    value, err = mod.bell_estimate(p, p, cfg.frame(), cfg.resolution)
    if not err <= cfg.tol:
        raise NumericalFailure(f"<B> not converged: doubling changed it by {err:.3g} (tol {cfg.tol:g})")
    result = {
        "bell_value": value,
        "local_bound": mod.LOCAL_BOUND,
        "violates": value > mod.LOCAL_BOUND,
        "delta_limit": mod.delta_limit_bell(cfg.ax * cfg.ell, cfg.frame()),
    }
    if cfg.phi is not None:
        mz = ph.mach_zehnder_probs(p, cfg.phi, cfg.frame(), partner=p, resolution=cfg.resolution)
        result["mach_zehnder"] = {"phi": cfg.phi, "p_plus": mz.p_plus, "p_minus": mz.p_minus}
    return {"result": result, "diagnostics": {"resolution": cfg.resolution, "doubling_delta": err}}


def sweep_csv(sweep: mod.SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for a, v, ok in zip(sweep.a_xbar, sweep.bell, sweep.converged):
        w.writerow([_fmt(a), _fmt(v), int(bool(ok))])
    return buf.getvalue()


def sweep_dat(sweep: mod.SweepResult) -> str:
    """Whitespace-separated columns with a ``#`` header, for gnuplot."""
    lines = ["# " + " ".join(SWEEP_HEADER)]
    lines += [f"{a!r} {v!r} {int(bool(ok))}" for a, v, ok in zip(sweep.a_xbar.tolist(), sweep.bell.tolist(), sweep.converged)]
    return "\n".join(lines) + "\n"


def run_sweep(cfg: RunConfig) -> dict:
    grid = cfg.grid()
    sweep = mod.sweep_ax(cfg.packet(), grid, cfg.frame(), cfg.resolution, tol=cfg.tol)
    path = output_path(cfg.out or "sweep.csv")
    path.write_text(sweep_csv(sweep), encoding="utf-8")
    path.with_suffix(".dat").write_text(sweep_dat(sweep), encoding="utf-8")
    frac = float(np.mean(sweep.converged))
    i = sweep.argmax()
    report = {
        "result": {
            "csv": str(path),
            "rows": int(grid.size),
            "max_bell": sweep.max(),
            "argmax_a_xbar": float(sweep.a_xbar[i]),
            "delta_limit_at_argmax": mod.delta_limit_bell(sweep.a_xbar[i] * cfg.ell, cfg.frame()),
        },
        "diagnostics": {
            "resolution": cfg.resolution,
            "converged_fraction": frac,
            "max_doubling_delta": sweep.convergence_estimate,
        },
    }
    if frac < SWEEP_MIN_CONVERGED:
        report["failure"] = f"only {frac:.0%} of rows converged"
    return report


def run_threshold(cfg: RunConfig) -> dict:
    if not 0 < cfg.bracket_lo < cfg.bracket_hi:
        raise ConfigError(f"invalid bracket [{cfg.bracket_lo}, {cfg.bracket_hi}]: need 0 < lo < hi")
    try:
        res = mod.violation_threshold(
            cfg.packet(),
            cfg.frame(),
            cfg.resolution,
            bracket=(cfg.bracket_lo, cfg.bracket_hi),
            tol=cfg.threshold_tol,
        )
    except mod.NoCrossingError as exc:
        raise NumericalFailure(str(exc)) from None
    return {
        "result": {
            "sigma_star": res.sigma_star,
            "bracket": list(res.bracket),
            "iterations": res.iterations,
            "inner_max": [{"sigma_xbar": s, "a_xbar": a, "max_bell": v} for s, a, v in res.history],
        },
        "diagnostics": {"resolution": cfg.resolution, "bisection_tol": cfg.threshold_tol},
    }


def run_grating(cfg: RunConfig) -> dict:
    try:
        spec = ph.GratingSpec(cfg.L, cfg.kappa, cfg.sigma, cfg.shift, cfg.slm)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ph.GratingValidityWarning)
        try:
            m = ph.grating_to_modular(spec)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    result = {
        "ell": m.frame.ell,
        "sigma_xbar": m.packet.sigma_xbar,
        "sigma_pbar": m.packet.sigma_pbar,
        "a_xbar": m.packet.a_xbar,
        "a_pbar": m.packet.a_pbar,
        "xbar_width_param": m.xbar_width_param,
        "pbar_width_param": m.pbar_width_param,
        "validity_ratio": m.validity_ratio,
        "warning": m.warning,
    }
    # the exact modular density sums over ~sigma/ell teeth; skip when huge
    if spec.sigma / m.frame.ell <= 200:
        result["wrap_gap"] = ph.wrap_and_compare(spec)
    else:
        result["wrap_gap"] = None
    if cfg.wavefunction_out:
        tooth = spec.kappa * spec.L / (2 * math.pi)
        dx = tooth / 8
        n = int(math.ceil(6 * spec.sigma / dx))
        if 2 * n + 1 > 2_000_000:
            raise ConfigError("wavefunction sample would exceed 2e6 points; reduce sigma or raise kappa")
        x = np.arange(-n, n + 1) * dx
        psi = ph.grating_wavefunction(spec, x)
        path = output_path(cfg.wavefunction_out)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "re", "im"])
        for xi, z in zip(x, psi):
            w.writerow([_fmt(xi), _fmt(z.real), _fmt(z.imag)])
        path.write_text(buf.getvalue(), encoding="utf-8")
        result["wavefunction_csv"] = str(path)
    return {"result": result, "diagnostics": {}}


def sample_csv(counts: ph.CoincidenceTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SAMPLE_HEADER)
    for (pa, pb), t in counts.tables.items():
        t = np.asarray(t)
        w.writerow([_fmt(pa), _fmt(pb), int(t[0, 0]), int(t[0, 1]), int(t[1, 0]), int(t[1, 1])])
    return buf.getvalue()


def run_sample(cfg: RunConfig) -> dict:
    p = cfg.packet()
    probs = ph.chsh_coincidences(p, p, cfg.frame(), cfg.resolution)
    counts = ph.sample_coincidences(probs, cfg.shots, cfg.seed)
    path = output_path(cfg.out or "sample.csv")
    path.write_text(sample_csv(counts), encoding="utf-8")
    return {
        "result": {
            "csv": str(path),
            "shots_per_setting": cfg.shots,
            "chsh_empirical": counts.chsh(),
            "standard_error": counts.chsh_standard_error(),
            "chsh_analytic": probs.chsh(),
        },
        "diagnostics": {"resolution": cfg.resolution, "seed": cfg.seed},
    }


COMMANDS = {
    "point": run_point,
    "sweep": run_sweep,
    "threshold": run_threshold,
    "grating": run_grating,
    "sample": run_sample,
}


HELP = {
    "point": "evaluate <B> for one packet pair",
    "sweep": "sweep <B> over packet centres a_xbar (CSV)",
    "threshold": "bisect the widest sigma_xbar that still violates the local bound",
    "grating": "map grating optics to modular packet parameters",
    "sample": "simulate coincidence counts for the four CHSH settings (CSV)",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="modchsh", description="CHSH tests with modular-variable observables")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in HELP.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--out", metavar="PATH")
        sp.add_argument("--resolution", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--preset", choices=sorted(PRESETS))
        sp.add_argument("--ax", type=float, help="packet centre a_xbar / ell")
        sp.add_argument("--ap", type=float, help="packet centre a_pbar / (h/ell)")
        sp.add_argument("--sx", type=float, help="packet width sigma_xbar / ell")
        sp.add_argument("--sp", type=float, help="packet width sigma_pbar / (h/ell)")
        sp.add_argument("--shots", type=int)
        sp.add_argument("--phi", type=float)
        sp.add_argument("--kappa", type=float)
        sp.add_argument("--L", type=float)
        sp.add_argument("--sigma", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"modchsh: config error: {exc}", file=sys.stderr)
        return 1
    t0 = time.perf_counter()
    try:
        report = COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"modchsh: config error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailure, mod.QuadratureError) as exc:
        print(f"modchsh: numerical failure: {exc}", file=sys.stderr)
        return 2
    report = {"command": cfg.command, "config": _config_echo(cfg), **report}
    code = 2 if "failure" in report else 0
    # files stay byte-reproducible; timing goes to stdout only
    if cfg.command in ("threshold", "point", "grating") and cfg.out:
        _write_json(output_path(cfg.out), report)
    elif cfg.command in ("sweep", "sample"):
        _write_json(output_path(cfg.out or f"{cfg.command}.csv").with_suffix(".json"), report)
    report["wall_time_s"] = time.perf_counter() - t0
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    if code:
        print(f"modchsh: numerical failure: {report['failure']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
