"""Command-line front end.

Subcommands: keyrate, figure, region, simulate, sweep. Every parameter can
come from ``--config file.json`` (keys use the long flag names, dashes or
underscores); an explicit flag always wins.

Exit status: 0 ok, 2 usage error, 3 domain error, 4 numerical-integrity
error, 5 undefined estimate.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import attacks, figures, keyrate, protocol
from .errors import DomainError, NumericalIntegrityError, UndefinedEstimateError

EXIT_USAGE, EXIT_DOMAIN, EXIT_NUMERIC, EXIT_UNDEFINED = 2, 3, 4, 5

DEFAULTS = {
    "model": "collective",
    "alpha": None,
    "q": None,
    "gamma": None,
    "gamma1": 1.0,
    "theta": None,
    "qber": 0.0,
    "chsh": None,
    "rounds": 100_000,
    "seed": 0,
    "spot_fraction": 0.25,
    "attack": "none",
    "out": None,
    "format": "json",
    "resolution": 200,
    "family": "appendixA",
    "q_range": None,
    "steps": 11,
    "rounded": False,
    "variable": None,
    "range": None,
    "outputs": "chsh,qber,r_C,r_S,r_CS,holevo,regions",
    "workers": 1,
    "export_records": None,
    "stamp": None,
}


class UsageError(Exception):
    pass


# -- output ----------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return None if np.isnan(v) else v
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def render(rows, fmt):
    if fmt == "csv":
        header = list(rows[0]) if rows else []
        return figures.csv_text(header, ([r[h] for h in header] for r in rows))
    payload = [{k: _jsonable(v) for k, v in r.items()} for r in rows]
    return json.dumps(payload, indent=2) + "\n"


def emit(rows, args, name):
    text = render(rows, args.format)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.{args.format}").write_text(text, encoding="utf-8")
        manifest = {
            "command": name,
            "file": f"{name}.{args.format}",
            "columns": [figures.column_doc(c) for c in (rows[0] if rows else [])],
        }
        if args.stamp:
            manifest["generated"] = {"timestamp": args.stamp}
        (out / f"{name}_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"missing required parameter(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")


# -- keyrate -----------------------------------------------------------------------


def cmd_keyrate(args):
    model = args.model
    if model == "collective":
        if args.alpha is not None:
            qber, chsh = attacks.collective_qber(args.alpha), attacks.collective_chsh(args.alpha)
        else:
            _require(args, "chsh")
            qber, chsh = args.qber, args.chsh
        rep = keyrate.collective_key_rate(qber, chsh)
        row = {"alpha": np.nan if args.alpha is None else args.alpha, **rep.as_row()}
    elif model in ("sequential-individual", "sequential-collective"):
        _require(args, "q", "gamma")
        fn = (
            keyrate.sequential_individual_key_rate
            if model == "sequential-individual"
            else keyrate.sequential_collective_key_rate
        )
        row = fn(args.q, args.gamma, args.qber).as_row()
    else:
        raise UsageError(f"unknown model {model!r}")
    emit([row], args, "keyrate")


# -- figure ------------------------------------------------------------------------


def cmd_figure(args):
    ids = figures.FIGURES if args.figure_id == "all" else (args.figure_id,)
    if any(f not in figures.FIGURES for f in ids):
        raise UsageError(f"unknown figure {args.figure_id!r}; choose from {', '.join(figures.FIGURES)} or all")
    out = args.out or "figures"
    for fid in ids:
        ds = figures.build_figure(fid, args.resolution)
        for path in figures.write_dataset(ds, out, args.stamp):
            print(path)


# -- region ------------------------------------------------------------------------


def _q_values(args):
    if args.q is not None:
        return [args.q]
    if args.q_range is not None:
        lo, hi = args.q_range
        return list(np.linspace(lo, hi, args.steps))
    raise UsageError("give --q or --q-range LO HI")


def cmd_region(args):
    rows = []
    if args.family == "appendixA":
        regions = attacks.appendix_a_regions(rounded=args.rounded)
        for q in _q_values(args):
            for reg in regions:
                iv = reg.interval(q)
                rows.append({"family": "appendixA", "region": iv.tag, "q": q,
                             "gamma_lower": iv.lower, "gamma_upper": iv.upper, "empty": iv.empty})
    elif args.family == "simultaneous":
        _require(args, "theta")
        for q in _q_values(args):
            iv = attacks.simultaneous_nonlocality_window(args.theta, q)
            rows.append({"family": "simultaneous", "region": iv.tag, "q": q, "theta": args.theta,
                         "gamma_lower": iv.lower, "gamma_upper": iv.upper, "empty": iv.empty})
    else:
        raise UsageError(f"unknown region family {args.family!r}")
    emit(rows, args, "region")


# -- simulate ----------------------------------------------------------------------


def simulation_config(args):
    seq = None
    if args.attack == "sequential":
        _require(args, "q", "gamma")
        theta = args.theta if args.theta is not None else attacks.theta_star(args.q, args.gamma)
        seq = attacks.SequentialAttackParams(args.q, args.gamma1, args.gamma, theta)
    return protocol.SimulationConfig(
        rounds=int(args.rounds),
        seed=int(args.seed),
        attack=args.attack,
        alpha=args.alpha or 0.0,
        sequential=seq,
        base_qber=args.qber,
        spot_check_fraction=args.spot_fraction,
    )


def cmd_simulate(args):
    if args.attack not in protocol.ATTACKS:
        raise UsageError(f"unknown attack {args.attack!r}")
    config = simulation_config(args)
    records, report = protocol.run_simulation(config, workers=args.workers)
    s_exact, q_exact = protocol.analytic_estimates(config)
    z_s, z_q = report.z_scores(s_exact, q_exact)
    row = {"attack": config.attack, "rounds": config.rounds, "seed": config.seed, **report.summary(),
           "chsh_analytic": s_exact, "qber_analytic": q_exact, "z_chsh": z_s, "z_qber": z_q,
           "records_sha256": records.digest()}
    if config.has_eve:
        row["eve_guess_accuracy"] = protocol.eve_guess_accuracy(records)
    if args.export_records:
        records.write(args.export_records)
    emit([row], args, "simulate")


# -- sweep -------------------------------------------------------------------------


OUTPUTS = ("chsh", "qber", "r_C", "r_S", "r_CS", "holevo", "regions")
VARIABLES = ("alpha", "q", "gamma", "theta")
DOMAINS = {
    "alpha": (0.0, 1.0),
    "q": (0.5, 1.0),
    "gamma": (0.0, 1.0),
    "gamma1": (0.0, 1.0),
    "theta": (0.0, np.pi / 2),
    "qber": (0.0, 0.5),
}


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    lo: float
    hi: float
    steps: int
    fixed: dict
    outputs: tuple[str, ...]

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise UsageError(f"unknown sweep variable {self.variable!r}")
        if not self.lo < self.hi:
            raise DomainError("range", (self.lo, self.hi), "lo < hi")
        if self.steps < 2:
            raise DomainError("steps", self.steps, "[2, inf)")
        for name, value in {**self.fixed, f"{self.variable} (lo)": self.lo, f"{self.variable} (hi)": self.hi}.items():
            lo, hi = DOMAINS[name.split()[0]]
            if not lo <= value <= hi:
                raise DomainError(name, value, f"[{lo}, {hi:.6g}]")
        bad = [o for o in self.outputs if o not in OUTPUTS]
        if bad:
            raise UsageError(f"unknown outputs {bad}; choose from {', '.join(OUTPUTS)}")

    def points(self):
        return list(np.linspace(self.lo, self.hi, self.steps))


def _nan_on_domain(fn, *a):
    try:
        return fn(*a)
    except DomainError:
        return np.nan


def sweep_point(spec, value):
    """Evaluate one sweep point; pure so it can run in a worker process."""
    p = {**spec.fixed, spec.variable: value}
    row = {spec.variable: value}
    if spec.variable == "alpha":
        alpha = p["alpha"]
        s, qb = attacks.collective_chsh(alpha), attacks.collective_qber(alpha)
        values = {"chsh": s, "qber": qb}
        values["r_C"] = _nan_on_domain(lambda: keyrate.collective_key_rate(qb, s).rate)
        values["holevo"] = _nan_on_domain(keyrate.chsh_holevo_bound, s)
        values["r_S"] = values["r_CS"] = np.nan
        values["regions"] = ""
    else:
        q, g, g1, base = p["q"], p["gamma"], p.get("gamma1", 1.0), p.get("qber", 0.0)
        theta = p.get("theta")
        if theta is None:
            theta = attacks.theta_star(q, g) if g1 == 1.0 else np.pi / 4
        s = attacks.sequential_chsh(q, g1, g, theta)
        qs = keyrate.sequential_qber(q, g, base)
        spectrum = attacks.BellDiagonalSpectrum.from_sequential(q, g1, g)
        chi = keyrate.bell_diagonal_holevo(spectrum)
        values = {"chsh": s, "qber": qs, "holevo": chi}
        values["r_C"] = _nan_on_domain(lambda: keyrate.collective_key_rate(qs, s).rate)
        sharp = g1 == 1.0
        values["r_S"] = keyrate.sequential_individual_key_rate(q, g, base).rate if sharp else np.nan
        values["r_CS"] = 1 - keyrate.binary_entropy(qs) - chi
        tags = [r.region_tag for r in attacks.appendix_a_regions() if sharp and r.contains(q, g)]
        if s > 2 and attacks.alice_eve_violates(q, g1, g, theta):
            tags.append("simultaneous-nonlocality")
        values["regions"] = ";".join(tags)
    for o in spec.outputs:
        row[o] = values[o]
    return row


def _sweep_task(job):
    spec, value = job
    return sweep_point(spec, value)


def cmd_sweep(args):
    _require(args, "variable", "range")
    fixed = {}
    names = ("alpha",) if args.variable == "alpha" else ("q", "gamma", "gamma1", "theta", "qber")
    for n in names:
        if n != args.variable and getattr(args, n) is not None:
            fixed[n] = getattr(args, n)
    if args.variable != "alpha":
        need = [n for n in ("q", "gamma") if n != args.variable and n not in fixed]
        if need:
            raise UsageError(f"sweep over {args.variable} needs fixed --{' --'.join(need)}")
    outputs = tuple(o.strip() for o in args.outputs.split(",") if o.strip())
    spec = SweepSpec(args.variable, args.range[0], args.range[1], int(args.steps), fixed, outputs)
    jobs = [(spec, v) for v in spec.points()]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            rows = list(pool.map(_sweep_task, jobs))
    else:
        rows = [_sweep_task(j) for j in jobs]
    emit(rows, args, "sweep")


# -- argument handling -------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with parameter values")
    common.add_argument("--out", help="output directory (default: stdout for tables)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--stamp", help="generation timestamp written only into manifests")
    common.add_argument("--workers", type=int)

    params = argparse.ArgumentParser(add_help=False)
    params.add_argument("--model", choices=("collective", "sequential-individual", "sequential-collective"))
    params.add_argument("--alpha", type=float)
    params.add_argument("--q", type=float)
    params.add_argument("--gamma", type=float, help="unsharpness of E2")
    params.add_argument("--gamma1", type=float, help="unsharpness of E1")
    params.add_argument("--theta", type=float)
    params.add_argument("--qber", type=float, help="base QBER (collective: observed QBER)")
    params.add_argument("--chsh", type=float)

    parser = argparse.ArgumentParser(prog="seqdiqkd", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("keyrate", parents=[common, params], help="single key-rate evaluation")

    p = sub.add_parser("figure", parents=[common], help="emit figure datasets")
    p.add_argument("figure_id", help="fig1, fig3, fig4, fig5 or all")
    p.add_argument("--resolution", type=int)

    p = sub.add_parser("region", parents=[common, params], help="tabulate gamma windows")
    p.add_argument("--family", choices=("appendixA", "simultaneous"))
    p.add_argument("--q-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--steps", type=int)
    p.add_argument("--rounded", action="store_const", const=True, help="use the rounded published constants")

    p = sub.add_parser("simulate", parents=[common, params], help="Monte Carlo protocol run")
    p.add_argument("--attack", help="none, collective or sequential")
    p.add_argument("--rounds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--spot-fraction", type=float)
    p.add_argument("--export-records", help="write round records to this CSV path")

    p = sub.add_parser("sweep", parents=[common, params], help="one-dimensional parameter sweep")
    p.add_argument("--variable", choices=VARIABLES)
    p.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--steps", type=int)
    p.add_argument("--outputs", help=f"comma list from {','.join(OUTPUTS)}")
    return parser


def resolve(args):
    """Merge built-in defaults < config file < explicit flags."""
    config = {}
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        config = {k.replace("-", "_"): v for k, v in raw.items()}
        unknown = set(config) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    for key, default in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, default))
    return args


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "keyrate": cmd_keyrate,
        "figure": cmd_figure,
        "region": cmd_region,
        "simulate": cmd_simulate,
        "sweep": cmd_sweep,
    }
    try:
        handlers[args.command](resolve(args))
    except UsageError as exc:
        parser.error(str(exc))
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericalIntegrityError as exc:
        print(f"numerical-integrity error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except UndefinedEstimateError as exc:
        print(f"undefined estimate: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    return 0


if __name__ == "__main__":
    sys.exit(main())
