"""Command-line front end: ``simulate``, ``select``, ``asymptotics`` and ``verify``.

Configs are INI files with ``[system]``, ``[sweep]`` and ``[users]`` sections;
SNR is given in dB and converted once here. Every file written under ``--out``
gets a JSON manifest next to it.

Exit codes: 0 ok, 2 usage or config error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import asymptotics as asy
from ._kernels import BACKEND
from .beamform import DegenerateBeamError
from .montecarlo import POLICIES, SimulationConfig, records_to_csv, sweep
from .scheme import SystemConfig, UserProfile, db_to_linear, select
from .verify import SUITES, run_suite

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (ArithmeticError, DegenerateBeamError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    seed: int
    version: str = __version__
    backend: str = BACKEND
    outputs: list = field(default_factory=list)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


# -- config parsing ----------------------------------------------------------


def _parse_list(text, conv, what):
    """``a,b,c`` or ``start:stop:step`` (stop inclusive)."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ConfigError(f"{what}: step must be positive")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [conv(start + k * step) for k in range(n)]
        return [conv(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"{what}: cannot parse {text!r}") from exc


def resolve_config_path(name) -> Path:
    """An existing path, or the name of a bundled config (``fig1_r6``)."""
    p = Path(name)
    if p.is_file():
        return p
    stem = p.name if p.suffix == ".ini" else p.name + ".ini"
    bundled = resources.files("bcfeedback") / "configs" / stem
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"config {name!r} not found (neither a file nor a bundled config)")


def load_config(path) -> dict:
    """Parse an INI config into a plain dict of resolved values."""
    cp = configparser.ConfigParser()
    try:
        read = cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not read:
        raise ConfigError(f"cannot read config {path}")
    if not cp.has_section("system"):
        raise ConfigError(f"{path}: missing [system] section")
    sysc = cp["system"]
    try:
        L = sysc.getint("L")
        m = sysc.getint("m", fallback=L)
        gamma = sysc.getfloat("gamma", fallback=1.0)
        rate = sysc.getint("rate_bits")
        rho_db = sysc.getfloat("rho_db", fallback=None)
    except ValueError as exc:
        raise ConfigError(f"{path}: [system] {exc}") from exc
    if L is None or rate is None:
        raise ConfigError(f"{path}: [system] needs L and rate_bits")
    if L < 1 or m is None or m < 1:
        raise ConfigError(f"{path}: L and m must be positive")
    gammas, rates = [gamma] * m, [rate] * m
    if cp.has_section("users"):
        for key, value in cp["users"].items():
            idx, _, attr = key.partition(".")
            if not idx.isdigit() or attr not in ("gamma", "rate_bits") or int(idx) >= m:
                raise ConfigError(f"{path}: bad [users] key {key!r}")
            try:
                if attr == "gamma":
                    gammas[int(idx)] = float(value)
                else:
                    rates[int(idx)] = int(value)
            except ValueError as exc:
                raise ConfigError(f"{path}: [users] {key}: {exc}") from exc
    cfg = {"L": L, "m": m, "gammas": gammas, "rates": rates, "rho_db": rho_db}
    sw = cp["sweep"] if cp.has_section("sweep") else {}
    cfg["s_values"] = _parse_list(sw.get("s_values", f"1:{min(L, m)}:1"), int, "s_values")
    cfg["rho_grid_db"] = _parse_list(sw["rho_db"], float, "rho_db") if "rho_db" in sw else (
        [rho_db] if rho_db is not None else [])
    try:
        cfg["n_blocks"] = int(sw.get("n_blocks", 10_000))
        cfg["seed"] = int(sw.get("seed", 0))
        cfg["workers"] = int(sw.get("workers", 1))
    except ValueError as exc:
        raise ConfigError(f"{path}: [sweep] {exc}") from exc
    cfg["codebook_policy"] = sw.get("codebook_policy", "resampled")
    if cfg["codebook_policy"] not in POLICIES:
        raise ConfigError(f"{path}: codebook_policy must be one of {POLICIES}")
    return cfg


def build_system(cfg: dict, rho_db: float) -> SystemConfig:
    users = tuple(UserProfile(g, r) for g, r in zip(cfg["gammas"], cfg["rates"]))
    return SystemConfig(cfg["L"], users, float(db_to_linear(rho_db)))


# -- output helpers ----------------------------------------------------------


def _emit(args, name: str, text: str, cfg: dict, seed: int) -> None:
    """Write ``text`` to ``<out>/<name>`` plus a manifest, or to stdout."""
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / name
    target.write_text(text)
    manifest = out / (Path(name).stem + ".manifest.json")
    RunManifest(args.command, cfg, seed, outputs=[str(target)]).write(manifest)
    print(f"wrote {target} and {manifest}", file=sys.stderr)


def _seed(args, cfg):
    return cfg.get("seed", 0) if args.seed is None else args.seed


# -- subcommands -------------------------------------------------------------


def cmd_simulate(args) -> int:
    path = resolve_config_path(args.config)
    cfg = load_config(path)
    if args.n_blocks is not None:
        cfg["n_blocks"] = args.n_blocks
    if args.workers is not None:
        cfg["workers"] = args.workers
    if args.policy is not None:
        cfg["codebook_policy"] = args.policy
    cfg["seed"] = _seed(args, cfg)
    if not cfg["rho_grid_db"]:
        raise ConfigError("no SNR grid: set [sweep] rho_db or [system] rho_db")
    sim = SimulationConfig(build_system(cfg, cfg["rho_grid_db"][0]), tuple(cfg["s_values"]),
                           tuple(cfg["rho_grid_db"]), cfg["n_blocks"], cfg["seed"],
                           cfg["codebook_policy"], cfg["workers"])
    records = sweep(sim)
    cfg["source"] = str(path)
    _emit(args, f"{path.stem}.csv", records_to_csv(records, raw=args.raw), cfg, cfg["seed"])
    return EXIT_OK


def _fmt(x, raw):
    return repr(float(x)) if raw else f"{float(x):.6g}"


def cmd_select(args) -> int:
    path = resolve_config_path(args.config)
    cfg = load_config(path)
    rho_db = args.rho_db if args.rho_db is not None else cfg["rho_db"]
    if rho_db is None:
        raise ConfigError("select needs an SNR: set [system] rho_db or pass --rho-db")
    cfg["rho_db"] = rho_db
    cfg["seed"] = _seed(args, cfg)
    res = select(build_system(cfg, rho_db), seed=cfg["seed"])
    lines = ["s,i_main_total,on_users"]
    for s, (on, total) in sorted(res.i_main_by_s.items()):
        lines.append(f"{s},{_fmt(total, args.raw)},{' '.join(map(str, on))}")
    lines.append(f"# s_star={res.s_star} on_users={' '.join(map(str, res.on_users))}")
    if all(total == 0 for _, total in res.i_main_by_s.values()):
        print("warning: every user has zero main-order throughput", file=sys.stderr)
    cfg["source"] = str(path)
    _emit(args, f"{path.stem}.select.csv", "\n".join(lines) + "\n", cfg, cfg["seed"])
    return EXIT_OK


def cmd_asymptotics(args) -> int:
    try:
        dist = asy.load_eta_distribution(args.distribution, normalize=args.normalize)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if args.grid_points < 3:
        raise ConfigError("--grid-points must be at least 3")
    grid = np.linspace(0.0, 1.0, args.grid_points)
    values = asy.efficiency_curve(dist, grid)
    s_opt, i_opt = asy.optimal_sbar(dist, tolerance=args.tolerance)
    lines = ["sbar,spatial_efficiency"]
    lines += [f"{_fmt(s, args.raw)},{_fmt(v, args.raw)}" for s, v in zip(grid, values)]
    lines.append(f"# sbar_star={_fmt(s_opt, args.raw)} efficiency_star={_fmt(i_opt, args.raw)}")
    cfg = {"distribution": str(args.distribution), "normalize": args.normalize,
           "grid_points": args.grid_points, "tolerance": args.tolerance}
    seed = 0 if args.seed is None else args.seed
    _emit(args, f"{Path(args.distribution).stem}.efficiency.csv", "\n".join(lines) + "\n", cfg, seed)
    return EXIT_OK


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    for n in names:
        if n not in SUITES:
            raise ConfigError(f"unknown suite {n!r}; choose from {', '.join(SUITES)} or all")
    seed = 0 if args.seed is None else args.seed
    checks = []
    for n in names:
        for c in run_suite(n, args.n_blocks, seed):
            print(c.line())
            checks.append((n, c))
    if args.out is not None:
        buf = _csv_text([("suite", "check", "value", "bound", "passed")] +
                        [(n, c.name, _fmt(c.value, args.raw), c.bound, c.passed) for n, c in checks])
        _emit(args, f"verify_{args.suite}.csv", buf,
              {"suites": names, "n_blocks": args.n_blocks}, seed)
    return EXIT_OK if all(c.passed for _, c in checks) else EXIT_NUMERIC


def _csv_text(rows):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


# -- entry point -------------------------------------------------------------


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted both before and after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default: stdout)")
    common.add_argument("--n-blocks", type=_positive_int, default=argparse.SUPPRESS,
                        help="fading blocks / trials per point")
    common.add_argument("--raw", action="store_true", default=argparse.SUPPRESS,
                        help="print floats at full precision")

    p = _Parser(prog="bcfeedback", parents=[common],
                description="Limited-feedback MIMO broadcast simulator and analysis tools.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND})")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo SNR / on-user sweep")
    s.add_argument("config", help="INI file or bundled config name (fig1_r6, fig1_r12)")
    s.add_argument("--workers", type=_positive_int)
    s.add_argument("--policy", choices=POLICIES, help="codebook policy override")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("select", parents=[common], help="on/off selection from system parameters")
    s.add_argument("config")
    s.add_argument("--rho-db", type=float)
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("asymptotics", parents=[common], help="spatial efficiency curve and optimum")
    s.add_argument("distribution", help="file with 'mbar <v>' header and 'eta weight' lines")
    s.add_argument("--grid-points", type=int, default=1001)
    s.add_argument("--tolerance", type=float, default=1e-6)
    s.add_argument("--normalize", action="store_true", help="rescale weights to sum to 1")
    s.set_defaults(func=cmd_asymptotics)

    s = sub.add_parser("verify", parents=[common], help="run an oracle suite")
    s.add_argument("suite", help=f"one of {', '.join(SUITES)}, or all")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        for name, default in (("seed", None), ("out", None), ("n_blocks", None), ("raw", False)):
            if not hasattr(args, name):
                setattr(args, name, default)
        return args.func(args)
    except ConfigError as exc:
        print(f"bcfeedback: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"bcfeedback: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"bcfeedback: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
