"""Command-line driver: simulate, analytic, compare, genfun-check, selftest.

Exit codes: 0 success, 1 a comparison or check failed, 2 bad usage or
configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import contextlib
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import AnalyticMomentQuery, FiniteNQuery, iq_finite_n, iq_thermo, rho0
from .ensemble import DEFAULT_WINDOW_FACTOR, EnergyWindow, default_threads, estimate_dos0, run_ensemble
from .errors import ConfigError, SimlocError
from .model import MASK64, ModelParams
from .specfun import MomentOrder

__all__ = ["RunConfig", "load_config", "main", "run_command"]

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

TOLERANCE_DEFAULTS = {
    "sigma_threshold": 3.0,
    "thermo_rel_tol": 1e-9,
    "finite_n_rel_tol": 1e-7,
}
LOCK_NAME = ".simloc.lock"


@dataclass(frozen=True)
class RunConfig:
    n: int
    w_values: tuple[float, ...]
    q_values: tuple[float, ...]
    realizations: int
    window_factor: float = DEFAULT_WINDOW_FACTOR
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCE_DEFAULTS))
    output_dir: str | None = None

    def echo(self) -> dict:
        d = asdict(self)
        d["w_values"] = list(self.w_values)
        d["q_values"] = list(self.q_values)
        return d


_REQUIRED = ("n", "w_values", "q_values", "realizations")
_OPTIONAL = ("window_factor", "seed", "tolerances", "output_dir")


def _number(name, value, *, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field '{name}': expected a number, got {value!r}")
    if integer and (not isinstance(value, int) and not float(value).is_integer()):
        raise ConfigError(f"field '{name}': expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"field '{name}': must be finite")
    return int(value) if integer else float(value)


def validate_config(raw: dict) -> RunConfig:
    """Check every field of a parsed config; raise ConfigError naming the field."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(_REQUIRED) - set(_OPTIONAL))
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"missing config field(s): {', '.join(missing)}")
    n = _number("n", raw["n"], integer=True)
    if n < 2 or n % 2:
        raise ConfigError(f"field 'n': must be an even integer >= 2, got {n}")
    lists = {}
    for key in ("w_values", "q_values"):
        vals = raw[key]
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"field '{key}': expected a non-empty list")
        lists[key] = tuple(_number(f"{key}[{i}]", v) for i, v in enumerate(vals))
    if any(w <= 0 for w in lists["w_values"]):
        raise ConfigError("field 'w_values': every entry must be positive")
    if any(q <= 1 for q in lists["q_values"]):
        raise ConfigError("field 'q_values': every entry must exceed 1")
    realizations = _number("realizations", raw["realizations"], integer=True)
    if realizations < 1:
        raise ConfigError("field 'realizations': must be positive")
    wf = _number("window_factor", raw.get("window_factor", DEFAULT_WINDOW_FACTOR))
    if not 0 < wf <= 0.5:
        raise ConfigError(f"field 'window_factor': must lie in (0, 0.5], got {wf}")
    seed = _number("seed", raw.get("seed", 0), integer=True)
    if not 0 <= seed <= MASK64:
        raise ConfigError("field 'seed': must be an unsigned 64-bit integer")
    tol_raw = raw.get("tolerances", {})
    if not isinstance(tol_raw, dict):
        raise ConfigError("field 'tolerances': expected an object")
    bad = sorted(set(tol_raw) - set(TOLERANCE_DEFAULTS))
    if bad:
        raise ConfigError(f"field 'tolerances': unknown key(s) {', '.join(bad)}")
    tol = dict(TOLERANCE_DEFAULTS)
    for k, v in tol_raw.items():
        tol[k] = _number(f"tolerances.{k}", v)
        if tol[k] <= 0:
            raise ConfigError(f"field 'tolerances.{k}': must be positive")
    out = raw.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("field 'output_dir': expected a string")
    return RunConfig(n, lists["w_values"], lists["q_values"], realizations, wf, seed, tol, out)


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return validate_config(raw)


# ----------------------------------------------------------------------------
# output

def fmt(x: float) -> str:
    """Scientific notation with 12 significant digits."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.11e" % x


def csv_text(header: list[str], rows: list[list]) -> str:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, str):
                cells.append(v)
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(fmt(float(v)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def git_blob_hash(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def atomic_write(path: Path, text: str) -> None:
    data = text.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


@contextlib.contextmanager
def run_lock(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"output directory {out_dir} is locked by another run ({lock})") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(OSError):
            os.unlink(lock)


class Run:
    """Collects outputs in memory and writes them only after all stages succeed."""

    def __init__(self, command: str, config: dict, out_dir: Path | None):
        self.command = command
        self.config = config
        self.out_dir = out_dir
        self.files: dict[str, str] = {}
        self.stages: dict[str, int] = {}
        self.started = time.time()

    def add(self, name: str, text: str):
        self.files[name] = text

    def count(self, stage: str, evaluations: int):
        self.stages[stage] = self.stages.get(stage, 0) + int(evaluations)

    def commit(self):
        if self.out_dir is None:
            return
        with run_lock(self.out_dir):
            hashes = {}
            for name in sorted(self.files):
                atomic_write(self.out_dir / name, self.files[name])
                hashes[name] = git_blob_hash(self.files[name].encode("utf-8"))
            combined = hashlib.sha1(
                "".join(f"{k} {v}\n" for k, v in sorted(hashes.items())).encode()
            ).hexdigest()
            manifest = {
                "command": self.command,
                "config": self.config,
                "version": __version__,
                "started": _iso(self.started),
                "finished": _iso(time.time()),
                "stage_evaluations": self.stages,
                "files": hashes,
                "content_hash": combined,
            }
            atomic_write(self.out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _iso(t: float) -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


# ----------------------------------------------------------------------------
# stages

MOMENTS_HEADER = ["q", "w", "n", "estimate", "std_error", "states_used"]
DOS_HEADER = ["bin_center", "density", "std_error"]
ANALYTIC_HEADER = ["q", "w", "mode", "n_or_inf", "value", "error_estimate"]
COMPARE_HEADER = ["q", "w", "n", "estimate", "std_error", "states_used", "mode", "n_or_inf",
                  "analytic_value", "analytic_error", "rel_dev", "sigma_dev"]


def stage_simulate(cfg: RunConfig, threads: int, run: Run):
    moments = {}
    rows, dos_rows = [], []
    for w in cfg.w_values:
        params = ModelParams(cfg.n, w, 0.0, cfg.seed)
        res = run_ensemble(params, cfg.realizations, cfg.q_values, cfg.window_factor, threads=threads)
        run.count("simulate.diagonalizations", cfg.realizations)
        for m in res.moments:
            moments[(m.q, w)] = m
            rows.append([m.q, w, cfg.n, m.estimate, m.std_error, m.states_used])
        dens = res.dos.density
        err = res.dos.std_error
        for c, d, e in zip(res.dos.bin_centers, dens, err):
            if d > 0:
                dos_rows.append([float(c), float(d), float(e)])
        d0, e0 = estimate_dos0(res.dos, res.moments[0].window)
        print(f"simulate w={w:g}: rho(0) = {d0:.6g} +- {e0:.2g} (large-N {rho0(w):.6g})")
    run.add("moments.csv", csv_text(MOMENTS_HEADER, rows))
    run.add("dos.csv", csv_text(DOS_HEADER, dos_rows))
    return moments


def _analytic_one(q: float, w: float, mode: str, n: int | None, tol: dict):
    if mode == "thermo":
        r = iq_thermo(AnalyticMomentQuery(MomentOrder(q), w), rel_tol=tol["thermo_rel_tol"])
        return r, "inf"
    r = iq_finite_n(FiniteNQuery(MomentOrder(q), w, n), rel_tol=tol["finite_n_rel_tol"])
    return r, n


def stage_analytic(q_values, w_values, mode, n, tol, run: Run):
    results = {}
    rows = []
    for w in w_values:
        for q in q_values:
            r, label = _analytic_one(q, w, mode, n, tol)
            run.count(f"analytic.{mode}", r.evaluations)
            results[(q, w)] = r
            rows.append([q, w, mode, label, r.value, r.error_estimate])
            print(f"analytic q={q:g} w={w:g} {mode}: {r.value:.10f} (+- {r.error_estimate:.2g})")
    run.add("analytic.csv", csv_text(ANALYTIC_HEADER, rows))
    return results


# ----------------------------------------------------------------------------
# argument handling

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simloc", description="Anderson model on a simplex: "
                                "Monte Carlo and analytic eigenstate moments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False):
        sp.add_argument("--config", required=config_required, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--threads", type=int, help="worker threads (default: SIMLOC_THREADS "
                        "or the number of CPUs)")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--q", type=float, action="append", help="moment order; repeatable")
        sp.add_argument("--w", type=float, action="append", help="disorder strength; repeatable")

    common(sub.add_parser("simulate", help="Monte Carlo moments and DOS"), True)
    ana = sub.add_parser("analytic", help="analytic moments")
    common(ana)
    for sp in (ana, sub.add_parser("compare", help="Monte Carlo against analytic moments")):
        if sp is not ana:
            common(sp, True)
        sp.add_argument("--mode", choices=("thermo", "finite_n"), default="thermo")
        sp.add_argument("--finite-n", type=int, dest="finite_n",
                        help="even N for --mode finite_n (default: config n)")
    gc = sub.add_parser("genfun-check", help="small-N checks of the field representation")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--realizations", type=int, default=100_000,
                    help="Monte Carlo realizations for the N=2 comparison")
    gc.add_argument("--threads", type=int)
    sub.add_parser("selftest", help="special-function and quadrature oracles")
    return p


def _resolve(args, need_config: bool) -> RunConfig | None:
    cfg = load_config(args.config) if getattr(args, "config", None) else None
    if cfg is None:
        if need_config:
            raise ConfigError("--config is required for this command")
        return None
    overrides = {}
    if args.q:
        if any(q <= 1 for q in args.q):
            raise ConfigError("--q: moment order must exceed 1")
        overrides["q_values"] = tuple(args.q)
    if args.w:
        if any(w <= 0 for w in args.w):
            raise ConfigError("--w: disorder strength must be positive")
        overrides["w_values"] = tuple(args.w)
    if args.seed is not None:
        if not 0 <= args.seed <= MASK64:
            raise ConfigError("--seed: must be an unsigned 64-bit integer")
        overrides["seed"] = args.seed
    if overrides:
        cfg = RunConfig(**{**asdict(cfg), **overrides})
    return cfg


def _out_dir(args, cfg: RunConfig | None) -> Path | None:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    return None


def _threads(args) -> int:
    k = getattr(args, "threads", None)
    if k is not None:
        if k < 1:
            raise ConfigError("--threads must be positive")
        return k
    try:
        return default_threads()
    except ValueError:
        raise ConfigError("SIMLOC_THREADS must be a positive integer") from None


def cmd_simulate(args) -> int:
    cfg = _resolve(args, True)
    run = Run("simulate", cfg.echo(), _out_dir(args, cfg))
    stage_simulate(cfg, _threads(args), run)
    run.commit()
    return EXIT_OK


def cmd_analytic(args) -> int:
    cfg = _resolve(args, False)
    if cfg is not None:
        q_values, w_values, tol, n = cfg.q_values, cfg.w_values, cfg.tolerances, cfg.n
    else:
        if not args.q or not args.w:
            raise ConfigError("analytic needs --config or both --q and --w")
        if any(q <= 1 for q in args.q) or any(w <= 0 for w in args.w):
            raise ConfigError("--q must exceed 1 and --w must be positive")
        q_values, w_values, tol, n = tuple(args.q), tuple(args.w), dict(TOLERANCE_DEFAULTS), None
    if args.mode == "finite_n":
        n = args.finite_n if args.finite_n is not None else n
        if n is None or n < 2 or n % 2:
            raise ConfigError("--mode finite_n needs an even --finite-n (or config n)")
        if any(not float(q).is_integer() for q in q_values):
            raise ConfigError("--mode finite_n needs integer moment orders")
    echo = cfg.echo() if cfg else {"q_values": list(q_values), "w_values": list(w_values)}
    echo = {**echo, "mode": args.mode, "finite_n": n if args.mode == "finite_n" else None}
    run = Run("analytic", echo, _out_dir(args, cfg))
    stage_analytic(q_values, w_values, args.mode, n, tol, run)
    run.commit()
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _resolve(args, True)
    n_analytic = args.finite_n if args.finite_n is not None else cfg.n
    if args.mode == "finite_n":
        if n_analytic % 2 or n_analytic < 2:
            raise ConfigError("--finite-n must be even")
        if any(not float(q).is_integer() for q in cfg.q_values):
            raise ConfigError("--mode finite_n needs integer moment orders")
    echo = {**cfg.echo(), "mode": args.mode,
            "finite_n": n_analytic if args.mode == "finite_n" else None}
    run = Run("compare", echo, _out_dir(args, cfg))
    mc = stage_simulate(cfg, _threads(args), run)
    an = stage_analytic(cfg.q_values, cfg.w_values, args.mode, n_analytic, cfg.tolerances, run)
    threshold = cfg.tolerances["sigma_threshold"]
    rows = []
    ok = True
    for w in cfg.w_values:
        for q in cfg.q_values:
            m = mc[(q, w)]
            a = an[(q, w)]
            sigma = math.hypot(m.std_error, a.error_estimate)
            dev = m.estimate - a.value
            sdev = dev / sigma if sigma > 0 else (0.0 if dev == 0 else math.copysign(math.inf, dev))
            rdev = dev / a.value
            passed = abs(sdev) <= threshold
            ok &= passed
            rows.append([q, w, cfg.n, m.estimate, m.std_error, m.states_used, args.mode,
                         "inf" if args.mode == "thermo" else n_analytic,
                         a.value, a.error_estimate, rdev, sdev])
            print(f"{'PASS' if passed else 'FAIL'} q={q:g} w={w:g}: MC {m.estimate:.6f} +- "
                  f"{m.std_error:.2g}, analytic {a.value:.6f}, {sdev:+.2f} sigma, "
                  f"{100 * rdev:+.2f}%")
    run.add("compare.csv", csv_text(COMPARE_HEADER, rows))
    run.commit()
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_genfun_check(args) -> int:
    from .checks import genfun_checks

    return _report(genfun_checks(seed=args.seed, realizations=args.realizations,
                                 threads=_threads(args)))


def cmd_selftest(args) -> int:
    from .checks import selftest_checks

    return _report(selftest_checks())


def _report(items) -> int:
    ok = True
    for name, passed, detail in items:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}", flush=True)
    return EXIT_OK if ok else EXIT_MISMATCH


COMMANDS = {
    "simulate": cmd_simulate,
    "analytic": cmd_analytic,
    "compare": cmd_compare,
    "genfun-check": cmd_genfun_check,
    "selftest": cmd_selftest,
}


def run_command(argv: list[str]) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    stage = args.command
    try:
        return COMMANDS[stage](args)
    except ConfigError as exc:
        print(f"simloc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimlocError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"simloc: numerical failure in '{stage}': {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_NUMERIC


def main(argv: list[str] | None = None) -> int:
    return run_command(sys.argv[1:] if argv is None else list(argv))


if __name__ == "__main__":
    sys.exit(main())
