"""Figure data: key-rate and QBER curves plus the shaded attack regions.

Regions are emitted as closed boundary polygons, obtained by walking the
boundary of the admissible (q, gamma) set and mapping each vertex to the
plotted plane. No plotting happens here.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .attacks import appendix_a_regions, collective_chsh, collective_qber, optimal_chsh
from .errors import DomainError
from .keyrate import (
    collective_key_rate,
    collective_key_window,
    optimal_sequential_collective,
    optimal_sequential_individual,
    sequential_collective_key_rate,
    sequential_individual_key_rate,
    sequential_qber,
)

FIGURES = ("fig1", "fig3", "fig4", "fig5")
SIG_DIGITS = 9

COLUMNS = {
    "alpha": ("1", "mixing parameter of the collective state"),
    "q": ("1", "Eve's bias towards E1"),
    "gamma": ("1", "unsharpness of Eve's E2"),
    "gamma1": ("1", "unsharpness of Eve's E1"),
    "theta": ("rad", "tilt of Alice's A1/A2 away from Z"),
    "base_qber": ("1", "QBER Eve injects by randomising Alice's key bit"),
    "chsh": ("1", "Alice-Bob CHSH value"),
    "S": ("1", "CHSH value: (2+sqrt(1-alpha^2))/sqrt(2) on curves, 2 sqrt(t_z^2+t_x^2) on regions"),
    "qber": ("1", "Q = (1-sqrt(1-alpha^2))/4 (collective) or Q^S (sequential)"),
    "Q_S": ("1", "Q^S = (1-2Q)(1-q)(1-sqrt(1-gamma^2))/2 + Q"),
    "r_C": ("bit/round", "1 - H(Q) - H((1+sqrt((S/2)^2-1))/2)"),
    "r_S": ("bit/round", "1 - H(Q^S) - q(1-H(Q))"),
    "r_CS": ("bit/round", "1 - H(Q^S) - chi(B1:E)"),
    "holevo": ("bit", "chi(B1:E) = H(Lambda) - H(Lambda_+) (Bell-diagonal) or CHSH bound"),
    "rate": ("bit/round", "model key rate, unfloored"),
    "rate_floored": ("bit/round", "max(rate, 0)"),
    "eve_information": ("bit", "term subtracted for Eve's knowledge"),
}


@dataclass
class Series:
    columns: dict[str, np.ndarray]
    kind: str  # "curve" | "polygon" | "points"
    description: str = ""


@dataclass
class FigureDataset:
    figure_id: str
    series: dict[str, Series] = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)


def format_value(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or np.isnan(v):
        return "nan"
    return format(float(v), f".{SIG_DIGITS}g")


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def column_doc(name):
    unit, formula = COLUMNS.get(name, ("", ""))
    return {"name": name, "unit": unit, "formula": formula}


def write_dataset(ds, out_dir, stamp=None):
    """Write one CSV per series and a JSON manifest; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    manifest = {"figure_id": ds.figure_id, "parameters": ds.parameters, "series": []}
    for name, s in ds.series.items():
        path = out / f"{ds.figure_id}_{name}.csv"
        header = list(s.columns)
        rows = zip(*(s.columns[c] for c in header))
        path.write_text(csv_text(header, rows), encoding="utf-8")
        files.append(path)
        manifest["series"].append(
            {
                "name": name,
                "file": path.name,
                "kind": s.kind,
                "description": s.description,
                "columns": [column_doc(c) for c in header],
            }
        )
    if stamp is not None:
        manifest["generated"] = {"timestamp": stamp}
    mpath = out / f"{ds.figure_id}_manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return files + [mpath]


# -- shared geometry -----------------------------------------------------------


def collective_curve(resolution):
    """Collective family over the positive-key window, ordered by increasing S."""
    w = collective_key_window()
    alphas = np.linspace(w.alpha_cap, 0.0, resolution)
    S = np.array([collective_chsh(a) for a in alphas])
    Q = np.array([collective_qber(a) for a in alphas])
    r = np.array([collective_key_rate(q, s).rate for q, s in zip(Q, S)])
    return alphas, S, Q, r


def _gamma_qber_cap(q, qber_cap):
    c = 1 - 2 * qber_cap / (1 - q)
    return float(np.sqrt(1 - c * c)) if 0 <= c <= 1 else 1.0


def attack_region_bounds():
    """Lower/upper gamma of the shaded set and its q-extent.

    The set is the union of the two optimal-CHSH regions further cut by
    ``Q^S <= qber_cap`` (with no injected QBER).
    """
    w = collective_key_window()
    r1, r2 = appendix_a_regions(w.chsh_low, w.chsh_high)
    q1, q2 = r1.q_interval[1], r2.q_interval[1]

    def lower(q):
        return r1.gamma_lower(q) if q <= q1 else 0.0

    def upper(q):
        return min(r1.gamma_upper(q), _gamma_qber_cap(q, w.qber_cap))

    # first q where the cut region opens up
    q_start = brentq(lambda q: lower(q) - upper(q), 0.5 + 1e-9, q1, xtol=1e-14)
    return lower, upper, q_start, q1, q2


def attack_region_polygon(resolution):
    """Closed (q, gamma) boundary of the shaded set, counter-clockwise."""
    lower, upper, q_start, q1, q2 = attack_region_bounds()
    qs = np.unique(np.concatenate([np.linspace(q_start, q2, resolution), [q1]]))
    qs = qs[(qs >= q_start) & (qs <= q2)]
    low = [(q, lower(q)) for q in qs]
    high = [(q, upper(q) if q < q2 else 0.0) for q in qs[::-1]]
    pts = low + high[1:-1] + [low[0]]
    q, g = np.array(pts).T
    return q, np.clip(g, 0.0, 1.0)


def attack_region_points(resolution):
    """Interior grid of the shaded set as (q, gamma) arrays."""
    lower, upper, q_start, _, q2 = attack_region_bounds()
    qs, gs = [], []
    n = max(resolution // 4, 4)
    for q in np.linspace(q_start, q2, n + 2)[1:-1]:
        lo, hi = lower(q), upper(q)
        for g in np.linspace(lo, hi, n + 2)[1:-1]:
            qs.append(q)
            gs.append(g)
    return np.array(qs), np.array(gs)


def _map_region(q, g, rate=None):
    S = np.array([optimal_chsh(a, b) for a, b in zip(q, g)])
    Q = np.array([sequential_qber(a, b, 0.0) for a, b in zip(q, g)])
    cols = {"S": S, "Q_S": Q, "q": q, "gamma": g}
    if rate == "r_S":
        cols["r_S"] = np.array([sequential_individual_key_rate(a, b).rate for a, b in zip(q, g)])
    elif rate == "r_CS":
        cols["r_CS"] = np.array([sequential_collective_key_rate(a, b).rate for a, b in zip(q, g)])
    return cols


# -- figure builders -----------------------------------------------------------


def figure1(resolution=200):
    alphas, S, Q, r = collective_curve(resolution)
    ds = FigureDataset("fig1", parameters={"resolution": resolution})
    ds.series["collective"] = Series(
        {"S": S, "r_C": r, "alpha": alphas, "qber": Q}, "curve", "collective-attack key rate vs CHSH"
    )
    return ds


def figure3(resolution=200):
    alphas, S, Q, _ = collective_curve(resolution)
    ds = FigureDataset("fig3", parameters={"resolution": resolution})
    ds.series["target"] = Series({"S": S, "qber": Q, "alpha": alphas}, "curve", "collective target correlation")
    q, g = attack_region_polygon(resolution)
    ds.series["region"] = Series(_map_region(q, g), "polygon", "sequential-attack correlations, boundary")
    q, g = attack_region_points(resolution)
    ds.series["region_points"] = Series(_map_region(q, g), "points", "interior samples of the region")
    return ds


def _optimal_curve(alphas, which, family_size):
    fn = optimal_sequential_individual if which == "r_S" else optimal_sequential_collective
    best = [fn(a, family_size) for a in alphas]
    attr = "r_s" if which == "r_S" else "r_cs"
    return {
        "q": np.array([b.q for b in best]),
        "gamma": np.array([b.gamma for b in best]),
        "base_qber": np.array([b.base_qber for b in best]),
        which: np.array([getattr(b, attr) for b in best]),
    }


def figure4(resolution=200, family_size=101):
    alphas, S, Q, r = collective_curve(resolution)
    ds = FigureDataset("fig4", parameters={"resolution": resolution, "family_size": family_size})
    q, g = attack_region_polygon(resolution)
    ds.series["region"] = Series(_map_region(q, g, "r_S"), "polygon", "sequential-individual rates, boundary")
    q, g = attack_region_points(resolution)
    ds.series["region_points"] = Series(_map_region(q, g, "r_S"), "points", "interior samples of the region")
    opt = _optimal_curve(alphas, "r_S", family_size)
    ds.series["optimal_r_S"] = Series({"S": S, **opt, "alpha": alphas}, "curve", "optimal sequential-individual rate")
    ds.series["collective"] = Series({"S": S, "r_C": r, "alpha": alphas}, "curve", "collective-attack rate")
    return ds


def figure5(resolution=200, family_size=101):
    alphas, S, Q, r = collective_curve(resolution)
    ds = FigureDataset("fig5", parameters={"resolution": resolution, "family_size": family_size})
    ds.series["collective"] = Series({"S": S, "r_C": r, "alpha": alphas}, "curve", "collective-attack rate")
    opt = _optimal_curve(alphas, "r_CS", family_size)
    ds.series["optimal_r_CS"] = Series({"S": S, **opt, "alpha": alphas}, "curve", "optimal sequential-collective rate")
    q, g = attack_region_polygon(resolution)
    ds.series["region"] = Series(_map_region(q, g, "r_CS"), "polygon", "sequential-collective rates, boundary")
    q, g = attack_region_points(resolution)
    ds.series["region_points"] = Series(_map_region(q, g, "r_CS"), "points", "interior samples of the region")
    return ds


BUILDERS = {"fig1": figure1, "fig3": figure3, "fig4": figure4, "fig5": figure5}


def build_figure(figure_id, resolution=200):
    if figure_id not in BUILDERS:
        raise DomainError("figure_id", figure_id, "|".join(FIGURES))
    if resolution < 2:
        raise DomainError("resolution", resolution, "[2, inf)")
    return BUILDERS[figure_id](resolution)
