"""``lpdvo`` command line: experiments, key=value config files and plot data.

Exit status: 0 success, 2 a check failed under ``--assert``, 1 runtime
error, 64 invalid configuration.
"""
import argparse
import math
import os
import shlex
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, rng
from .errors import ConfigError, LpDvoretzkyError, ParseError
from .io import dumps_csv, dumps_json, load_matrix_csv, read_csv, read_json

EXIT_OK, EXIT_ERROR, EXIT_ASSERT, EXIT_CONFIG = 0, 1, 2, 64


def _floats(s):
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).split(",") if v.strip()]


def _eps(s):
    return "auto" if str(s).strip() == "auto" else _floats(s)


_MEASURE_OPTS = [
    ("measure", str, "coordinate", "coordinate | random | lewis | path to a measure CSV"),
    ("n", int, None, "dimension"),
    ("m", int, None, "atoms (random) or rows (lewis); default 4n"),
    ("input", str, None, "matrix CSV for --measure lewis"),
    ("no_isotropy_check", bool, False, "load a measure CSV without the isotropy check"),
]

# name -> (type, default, help); the same table validates config files
SCHEMA = {
    "lewis": [
        ("input", str, None, "matrix CSV, one row per line"),
        ("p", float, None, "exponent, 1 <= p < inf"),
        ("tol", float, 1e-12, "fixed-point tolerance"),
        ("max_iter", int, 20000, "iteration cap"),
    ],
    "moments": _MEASURE_OPTS + [
        ("q", float, None, "norm exponent of B_q(mu)"),
        ("r", _floats, None, "comma-separated moment orders (default q)"),
        ("samples", int, 100_000, "Monte Carlo samples"),
    ],
    "concentrate": _MEASURE_OPTS + [
        ("p", float, None, "exponent, p > 2"),
        ("eps", _eps, "auto", "comma-separated relative deviations, or auto"),
        ("center", str, "p-mean", "p-mean | median | mean"),
        ("samples", int, 200_000, "Monte Carlo samples"),
    ],
    "embed": _MEASURE_OPTS + [
        ("p", float, None, "exponent, p >= 2"),
        ("k", int, None, "embedded dimension"),
        ("eps", float, None, "target distortion 1 + eps"),
        ("delta", float, 0.5, "net mesh"),
        ("samples_ip", int, 20_000, "samples for the I_p estimate"),
        ("fresh", int, 10_000, "fresh directions checked under --assert"),
    ],
    "sweep": _MEASURE_OPTS + [
        ("p", float, None, "exponent, p > 2"),
        ("eps", _floats, None, "comma-separated eps grid"),
        ("trials", int, 20, "seeds per (eps, k)"),
        ("delta", float, 0.25, "net mesh shared by the sweep"),
        ("k_limit", int, None, "largest k probed"),
        ("samples_ip", int, 20_000, "samples for the I_p estimate"),
    ],
    "volume": _MEASURE_OPTS + [
        ("p", float, None, "exponent of B_p(mu)"),
        ("samples", int, 200_000, "Monte Carlo samples"),
    ],
}
REQUIRED = {
    "lewis": ("input", "p"),
    "moments": ("q",),
    "concentrate": ("p",),
    "embed": ("p", "k", "eps"),
    "sweep": ("p", "eps"),
    "volume": ("p",),
}


@dataclass
class ExperimentConfig:
    command: str
    params: dict
    seed: int = 0
    output: str = None
    format: str = "json"
    workers: int = 1
    assert_mode: bool = False

    def validate(self):
        if self.command not in SCHEMA:
            raise ConfigError(f"unknown command {self.command!r}")
        known = {name for name, *_ in SCHEMA[self.command]}
        unknown = set(self.params) - known
        if unknown:
            raise ConfigError(f"unknown keys for {self.command}: {', '.join(sorted(unknown))}")
        for name in REQUIRED[self.command]:
            if self.params.get(name) is None:
                raise ConfigError(f"{self.command} needs --{name.replace('_', '-')}")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.format not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        if self.format == "csv" and self.command in ("lewis", "embed", "volume"):
            raise ConfigError(f"{self.command} writes JSON only")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def reproduce(self):
        parts = ["lpdvo", self.command]
        for name, *_ in SCHEMA[self.command]:
            v = self.params.get(name)
            if v is None or v is False:
                continue
            if v is True:
                parts.append(f"--{name.replace('_', '-')}")
                continue
            if isinstance(v, (list, tuple)):
                v = ",".join(repr(float(x)) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            parts += [f"--{name.replace('_', '-')}", str(v)]
        parts += ["--seed", str(self.seed), "--workers", str(self.workers), "--format", self.format]
        if self.output:
            parts += ["--out", self.output]
        if self.assert_mode:
            parts.append("--assert")
        return " ".join(shlex.quote(p) for p in parts)

    def meta(self):
        return {"command": self.command, "params": self.params, "seed": int(self.seed),
                "workers": int(self.workers), "version": __version__,
                "reproduce": self.reproduce()}


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def read_config_file(path, command):
    """``key = value`` lines (``#`` comments); keys use flag names with ``-`` or ``_``."""
    table = {name: (_bool if typ is bool else typ) for name, typ, *_ in SCHEMA[command]}
    table.update({"seed": int, "out": str, "format": str, "workers": int})
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "assert":
            key = "assert_mode"
            table[key] = _bool
        if key not in table:
            raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
        try:
            out[key] = table[key](val)
        except ValueError:
            raise ConfigError(f"{path}: line {lineno}: bad value for {key}: {val!r}") from None
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = _Parser(prog="lpdvo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lpdvo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for command, opts in SCHEMA.items():
        sp = sub.add_parser(command)
        for name, typ, _default, help_ in opts:
            flag = f"--{name.replace('_', '-')}"
            if typ is bool:
                sp.add_argument(flag, dest=name, action="store_true", default=None, help=help_)
            else:
                sp.add_argument(flag, dest=name, type=typ, default=None, help=help_)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default=None)
        sp.add_argument("--workers", type=int, default=None,
                        help="worker threads (default $LPDVO_WORKERS or 1)")
        sp.add_argument("--config", default=None, help="key = value file; flags override it")
        sp.add_argument("--assert", dest="assert_mode", action="store_true", default=None,
                        help="exit 2 when a checked inequality fails")
    sub.add_parser("plot", help="emit gnuplot columns from a result file").add_argument("input")
    return parser


def config_from_args(argv):
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    values = read_config_file(ns.pop("config"), command) if ns.get("config") else {}
    ns.pop("config", None)
    for k, v in ns.items():
        if v is not None:
            values[k] = v
    params = {}
    for name, _typ, default, _ in SCHEMA[command]:
        params[name] = values.pop(name, default)
    out = values.pop("out", None)
    fmt = values.pop("format", None)
    if fmt is None:
        fmt = "csv" if out and out.endswith(".csv") else "json"
    cfg = ExperimentConfig(
        command=command, params=params, seed=values.pop("seed", 0), output=out, format=fmt,
        workers=values.pop("workers", rng.default_workers()),
        assert_mode=bool(values.pop("assert_mode", False)),
    )
    return cfg.validate()


# -- measure construction ---------------------------------------------------

def make_body(params, q, seed):
    from .lewis import SubspaceSpec, lewis_position
    from .measures import NormBody, coordinate_measure, load_measure_csv, random_isotropic_measure

    kind = params.get("measure") or "coordinate"
    n = params.get("n")
    m = params.get("m")
    if kind == "coordinate":
        if n is None:
            raise ConfigError("--n is required for the coordinate measure")
        mu = coordinate_measure(int(n))
    elif kind == "random":
        if n is None:
            raise ConfigError("--n is required for a random measure")
        mu = random_isotropic_measure(int(n), int(m or 4 * n), seed)
    elif kind == "lewis":
        if params.get("input"):
            A = load_matrix_csv(params["input"])
        else:
            if n is None:
                raise ConfigError("--n or --input is required for a Lewis measure")
            A = rng.generator(seed, "lewis-matrix").standard_normal((int(m or 4 * n), int(n)))
        mu = lewis_position(SubspaceSpec(A, q)).measure
    else:
        if not os.path.exists(kind):
            raise ConfigError(f"unknown measure {kind!r}")
        mu = load_measure_csv(kind, check_isotropy=not params.get("no_isotropy_check"))
    if n is not None and mu.dim != int(n):
        raise ConfigError(f"measure has dimension {mu.dim}, --n says {n}")
    return NormBody(mu, q)


# -- commands ---------------------------------------------------------------

def _cmd_lewis(cfg):
    from .lewis import SubspaceSpec, check_position, lewis_position

    P = cfg.params
    spec = SubspaceSpec(load_matrix_csv(P["input"]), P["p"])
    pos = lewis_position(spec, fp_tol=P["tol"], max_iter=P["max_iter"])
    diag = check_position(pos, spec)
    res = pos.to_dict()
    res.update(diag)
    res["weight_sum"] = math.fsum(pos.weights)
    res["n"], res["m"] = spec.n, spec.m
    res["pruned_rows"] = list(spec.pruned_rows)
    checks = [("weight_sum", abs(res["weight_sum"] - spec.n) <= 1e-6),
              ("fixed_point", diag["fixed_point_residual"] <= max(10 * P["tol"], 1e-10))]
    return res, None, checks


def _cmd_moments(cfg):
    from .gaussian import closed_form_moment, moment_from_values, moment_ratio_bound, norm_samples, ratio_from_values

    P = cfg.params
    q = P["q"]
    body = make_body(P, q, cfg.seed)
    rs = P["r"] or [q]
    values = norm_samples(body, P["samples"], cfg.seed, workers=cfg.workers)
    exact = closed_form_moment(body)
    rows, checks = [], []
    prev = -math.inf
    for r in sorted(rs):
        est = moment_from_values(values, r, cfg.seed)
        row = {"q": q, "r": r, "value": est.value, "std_err": est.std_err,
               "samples": est.samples, "seed": cfg.seed}
        rows.append(row)
        checks.append((f"monotone r={r!r}", est.value >= prev))
        prev = est.value
        if r == q:
            checks.append(("closed form", abs(est.value - exact) <= 3.0 * est.std_err))
        if q >= 2 and r > q:
            lhs, se = ratio_from_values(values, r, q)
            rhs = moment_ratio_bound(q, r / q, body.dim)
            checks.append((f"ratio bound r={r!r}", lhs <= rhs + 3.0 * se))
    res = {"rows": rows, "closed_form_I_q": exact, "n": body.dim}
    return res, (rows, ["q", "r", "value", "std_err", "samples", "seed"]), checks


def _cmd_concentrate(cfg):
    from .concentration import fit_two_level, tail_profile

    P = cfg.params
    body = make_body(P, P["p"], cfg.seed)
    prof = tail_profile(body, P["eps"], P["samples"], cfg.seed, center=P["center"], workers=cfg.workers)
    rows = list(prof.rows())
    counts = prof.counts[np.argsort(prof.eps_grid, kind="stable")]
    checks = [("monotone tail", bool(np.all(np.diff(counts) <= 0)))]
    res = {"rows": rows, "center": prof.center, "center_value": prof.center_value,
           "n": prof.n, "p": prof.p, "samples": prof.samples}
    try:
        fit = fit_two_level(prof)
        res["fit"] = fit.to_dict()
        checks.append(("fit r2", fit.small.r2 >= 0.95 and fit.large.r2 >= 0.95))
    except LpDvoretzkyError as e:
        res["fit"] = None
        res["fit_skipped"] = str(e)
    cols = ["eps", "tail", "stderr", "count", "upper_ci", "censored", "center", "center_value",
            "n", "p", "seed"]
    return res, (rows, cols), checks


def _cmd_embed(cfg):
    from .embedding import distortion_certificate

    P = cfg.params
    body = make_body(P, P["p"], cfg.seed)
    cert = distortion_certificate(body, P["k"], P["eps"], P["delta"], P["samples_ip"], cfg.seed,
                                  workers=cfg.workers)
    res = cert.to_dict()
    checks = []
    if cert.verdict:
        bad = cert.fresh_violations(P["fresh"], cfg.seed)
        res["fresh_violations"] = bad
        checks.append(("soundness", bad == 0))
    return res, None, checks


def _cmd_sweep(cfg):
    from .embedding import frontier_sweep

    P = cfg.params
    body = make_body(P, P["p"], cfg.seed)
    table = frontier_sweep(body, P["eps"], trials=P["trials"], seed=cfg.seed, net_delta=P["delta"],
                           k_limit=P["k_limit"], samples_for_Ip=P["samples_ip"], workers=cfg.workers)
    rows = [{"eps": r.eps, "k_max": r.k_max, "psi": r.psi, "pass_rate": r.pass_rate,
             "trials": r.trials, "seed_base": r.seed_base} for r in table]
    srt = sorted(rows, key=lambda r: r["eps"])
    checks = [("frontier monotone", all(a["k_max"] <= b["k_max"] for a, b in zip(srt, srt[1:])))]
    res = {"rows": rows, "probes": [{str(k): v for k, v in r.probes.items()} for r in table]}
    return res, (rows, ["eps", "k_max", "psi", "pass_rate", "trials", "seed_base"]), checks


def _cmd_volume(cfg):
    from dataclasses import asdict

    from .measures import mc_volume_check

    P = cfg.params
    body = make_body(P, P["p"], cfg.seed)
    chk = mc_volume_check(body, P["samples"], cfg.seed, cfg.workers)
    res = asdict(chk)
    res["passed"] = chk.passed
    return res, None, [("volume", chk.passed)]


COMMANDS = {"lewis": _cmd_lewis, "moments": _cmd_moments, "concentrate": _cmd_concentrate,
            "embed": _cmd_embed, "sweep": _cmd_sweep, "volume": _cmd_volume}


@dataclass
class RunResult:
    status: int
    text: str = ""
    failed: list = field(default_factory=list)


def render(cfg, res, table):
    meta = cfg.meta()
    if cfg.format == "csv":
        rows, cols = table
        return dumps_csv(rows, cols, meta)
    return dumps_json({"meta": meta, "result": res})


def run(cfg, stdout=None, stderr=None):
    """Execute a validated config; write the artifact; return a ``RunResult``."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    res, table, checks = COMMANDS[cfg.command](cfg)
    text = render(cfg, res, table)
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    print(f"# reproduce: {cfg.reproduce()}", file=stderr)
    failed = [name for name, ok in checks if not ok]
    for name in failed:
        print(f"# check failed: {name}", file=stderr)
    status = EXIT_ASSERT if (cfg.assert_mode and failed) else EXIT_OK
    return RunResult(status, text, failed)


# -- plot data --------------------------------------------------------------

def emit_plot_data(path):
    """Gnuplot-ready columns from a result file written by ``run``."""
    if str(path).endswith(".csv"):
        meta, rows = read_csv(path)
        command = (meta or {}).get("command")
    else:
        rec = read_json(path)
        if not isinstance(rec, dict) or "meta" not in rec or "result" not in rec:
            raise ParseError(f"{path}: line 1: not a result record")
        command = rec["meta"].get("command")
        rows = rec["result"].get("rows")
    if rows is None:
        raise ParseError(f"{path}: line 1: result has no table to plot")
    out = []
    try:
        if command == "concentrate":
            out.append("# x: eps  y: -log(tail)  yerr: stderr/tail")
            for r in rows:
                if r["censored"] or r["tail"] <= 0 or r["tail"] >= 1:
                    continue
                out.append(f"{r['eps']!r} {-math.log(r['tail'])!r} {r['stderr'] / r['tail']!r}")
        elif command == "sweep":
            out.append("# x: log(eps)  y: log(k_max)")
            for r in rows:
                if r["k_max"] > 0:
                    out.append(f"{math.log(r['eps'])!r} {math.log(r['k_max'])!r}")
        elif command == "moments":
            out.append("# x: moment order  y: I estimate  yerr: std_err")
            for r in rows:
                out.append(f"{float(r['r'])!r} {r['value']!r} {r['std_err']!r}")
        else:
            raise ParseError(f"{path}: line 1: no plot layout for command {command!r}")
    except (KeyError, TypeError) as e:
        raise ParseError(f"{path}: malformed row ({e})") from None
    return "\n".join(out) + "\n"


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        if argv and argv[0] == "plot":
            ns = build_parser().parse_args(argv)
            sys.stdout.write(emit_plot_data(ns.input))
            return EXIT_OK
        cfg = config_from_args(argv)
        return run(cfg).status
    except ConfigError as e:
        print(f"lpdvo: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (LpDvoretzkyError, OSError) as e:
        print(f"lpdvo: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
