"""Scenario files, experiment runs and comparison-table rendering.

A scenario file is JSON::

    {
      "name": "table1",
      "mtu_bytes": 1500,                 # P, bytes
      "capacity_pkts_per_s": 70.0,       # C, MTU-sized packets per second
      "regime": "sub_mtu",               # or "super_mtu"
      "distribution": {"kind": "uniform", "lo": 750, "hi": 1500},
      "distributions": [...],            # optional per-node override
      "omega2_mode": "literal",          # or "mean_square"
      "note": "...",                     # optional, printed under text reports
      "rows": [{"lambda": [10, 10, 10, 10],
                "reference": {"simulated_ms": [...], "analytic_ms": 14.9}}],
      "mac": {"W": 32, "m": 5},          # MacParams overrides
      "run": {"engines": ["analytic", "dcf"], "replications": 30,
              "seed": 1, "packet_budget": 300000, "warmup": 0.1}
    }

``reference`` blocks are optional and only echoed in text reports.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .appdelay import REGIMES, Scenario, mean_delay
from .distributions import dist_from_dict
from .errors import ConfigurationError, DelaylabError, InstabilityError, ValidationError
from .mac import MacParams
from .sim import run_dcf_simulation, run_rps_oracle

ENGINES = ("analytic", "dcf", "rps")
SIM_ENGINES = ("dcf", "rps")
SEED_ENV = "DELAYLAB_SEED"


@dataclass
class RunControls:
    engines: tuple[str, ...] = ("analytic", "dcf")
    replications: int = 30
    seed: int = 1
    packet_budget: int | None = 300_000
    horizon: float | None = None
    warmup: float = 0.1
    workers: int = 1

    def __post_init__(self):
        if not self.engines:
            raise ConfigurationError("select at least one engine", "run.engines")
        for e in self.engines:
            if e not in ENGINES:
                raise ConfigurationError(f"unknown engine {e!r}; choose from {ENGINES}", "run.engines")
        if self.replications < 1:
            raise ConfigurationError("need at least one replication", "run.replications")


@dataclass
class ExperimentSpec:
    name: str
    scenarios: list[Scenario]
    mac: MacParams
    run: RunControls
    references: list[dict] = field(default_factory=list)
    reference_rho: float | None = None
    source: str = ""
    note: str = ""

    def with_run(self, **changes) -> "ExperimentSpec":
        return replace(self, run=replace(self.run, **changes))

    def with_omega2_mode(self, mode: str) -> "ExperimentSpec":
        return replace(self, scenarios=[replace(s, omega2_mode=mode) for s in self.scenarios])


def bundled_scenarios() -> list[str]:
    root = resources.files("delaylab") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _resolve(path: str | os.PathLike) -> tuple[str, str]:
    p = Path(path)
    if p.exists():
        return p.read_text(), str(p)
    name = p.name[:-5] if p.name.endswith(".json") else p.name
    if name in bundled_scenarios():
        res = resources.files("delaylab") / "scenarios" / f"{name}.json"
        return res.read_text(), f"<bundled {name}>"
    raise ValidationError(f"no such scenario file: {path}", "path")


def _require(doc: dict, key: str, where: str = ""):
    if key not in doc:
        raise ValidationError("missing required key", f"{where}{key}")
    return doc[key]


def parse_spec(doc: dict[str, Any], source: str = "") -> ExperimentSpec:
    if not isinstance(doc, dict):
        raise ValidationError("top level must be an object")
    mtu = float(_require(doc, "mtu_bytes"))
    cap = float(_require(doc, "capacity_pkts_per_s"))
    regime = doc.get("regime", "sub_mtu")
    if regime not in REGIMES:
        raise ValidationError(f"must be one of {REGIMES}", "regime")
    rows = _require(doc, "rows")
    if not isinstance(rows, list) or not rows:
        raise ValidationError("need a non-empty list of rows", "rows")

    mac = MacParams.from_dict(doc.get("mac") or {})
    run_doc = dict(doc.get("run") or {})
    if "engines" in run_doc:
        run_doc["engines"] = tuple(run_doc["engines"])
    if "seed" not in run_doc and os.environ.get(SEED_ENV):
        run_doc["seed"] = int(os.environ[SEED_ENV])
    try:
        run = RunControls(**run_doc)
    except TypeError as exc:
        raise ValidationError(str(exc), "run") from None

    scenarios, refs = [], []
    for r, row in enumerate(rows):
        where = f"rows[{r}]"
        lams = _require(row, "lambda", f"{where}.")
        if "distributions" in doc:
            dists = tuple(dist_from_dict(d, f"distributions[{i}]")
                          for i, d in enumerate(doc["distributions"]))
            if len(dists) != len(lams):
                raise ValidationError("one distribution per node required", "distributions")
        else:
            dist = dist_from_dict(_require(doc, "distribution"), "distribution")
            dists = (dist,) * len(lams)
        try:
            sc = Scenario(lambdas=tuple(float(x) for x in lams), dists=dists, mtu_bytes=mtu,
                          capacity_pkts_per_s=cap, regime=regime,
                          omega2_mode=doc.get("omega2_mode", "literal"),
                          name=f"{doc.get('name', '')}[{r}]")
        except ValidationError as exc:
            raise _at(exc, where) from None
        scenarios.append(sc)
        refs.append(row.get("reference", {}))
    return ExperimentSpec(name=doc.get("name", Path(source).stem), scenarios=scenarios, mac=mac,
                          run=run, references=refs, reference_rho=doc.get("reference_rho"),
                          source=source, note=str(doc.get("note", "")))


def _at(exc: ValidationError, where: str) -> ValidationError:
    """Re-home a validation error under ``where`` in the field path."""
    path = f"{where}.{exc.field}" if exc.field else where
    if isinstance(exc, InstabilityError):
        return InstabilityError(exc.rho, path)
    msg = str(exc)[len(exc.field) + 2:] if exc.field else str(exc)
    return type(exc)(msg, path)


def load_scenario(path: str | os.PathLike) -> ExperimentSpec:
    """Read and fully validate a scenario file (or a bundled name such as
    ``table1``)."""
    text, source = _resolve(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"JSON parse error at line {exc.lineno} col {exc.colno}: {exc.msg}",
                              source) from None
    return parse_spec(doc, source)


@dataclass
class TableRow:
    lambdas: tuple[float, ...]
    analytic: np.ndarray | None = None        # seconds, per node
    simulated: dict[str, Any] = field(default_factory=dict)   # engine -> DelayStats
    rho: float = math.nan
    reference: dict = field(default_factory=dict)

    @property
    def d_analytic(self) -> float:
        # the published tables carry one analytic column; with per-node
        # differences the largest is the one that bounds the cell
        return float(np.max(self.analytic)) if self.analytic is not None else math.nan


@dataclass
class ComparisonTable:
    name: str
    n: int
    rows: list[TableRow]
    engines: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    @property
    def sim_engines(self) -> list[str]:
        return [e for e in self.engines if e in SIM_ENGINES]


def run_experiment(spec: ExperimentSpec, backend: str | None = None) -> ComparisonTable:
    """Evaluate every selected engine on every row."""
    run = spec.run
    rows = []
    for r, sc in enumerate(spec.scenarios):
        row = TableRow(lambdas=sc.lambdas, rho=sc.rho,
                       reference=spec.references[r] if r < len(spec.references) else {})
        try:
            if "analytic" in run.engines:
                row.analytic = mean_delay(sc).d_avg
            for eng in run.engines:
                if eng not in SIM_ENGINES:
                    continue
                # distinct seed per row so rows are independent experiments
                seed = run.seed + 1000 * r
                common = dict(seed=seed, replications=run.replications, horizon=run.horizon,
                              packet_budget=run.packet_budget, warmup=run.warmup,
                              workers=run.workers, backend=backend)
                if eng == "dcf":
                    row.simulated[eng] = run_dcf_simulation(sc, spec.mac, **common)
                else:
                    row.simulated[eng] = run_rps_oracle(sc, **common)
        except DelaylabError as exc:
            raise type(exc)(f"{spec.name} row {r}: {exc}") from exc
        rows.append(row)
    sc0 = spec.scenarios[0]
    m0 = sc0.moments()[0]
    meta = {
        "C": sc0.capacity_pkts_per_s, "mtu_bytes": sc0.mtu_bytes, "regime": sc0.regime,
        "distribution": sc0.dists[0].to_dict(), "omega": m0.omega, "omega2": m0.omega2,
        "omega2_mode": sc0.omega2_mode, "reference_rho": spec.reference_rho, "note": spec.note,
    }
    return ComparisonTable(name=spec.name, n=sc0.n, rows=rows, engines=tuple(run.engines), meta=meta)


def _fmt_ms(x: float) -> str:
    return "" if x is None or not np.isfinite(x) else f"{x * 1e3:.1f}"


def _fmt_num(x: float) -> str:
    return f"{x:g}"


def csv_header(n: int, extra_engines=(), ci: bool = False) -> list[str]:
    cols = [f"lambda{i + 1}" for i in range(n)] + [f"d{i + 1}" for i in range(n)] + ["d_analytic"]
    if ci:
        cols += [f"ci{i + 1}" for i in range(n)]
    for eng in extra_engines:
        cols += [f"{eng}_d{i + 1}" for i in range(n)]
    return cols


def emit_csv(table: ComparisonTable, ci: bool = False) -> str:
    """Fixed header ``lambda1..n, d1..n, d_analytic`` (delays in ms, one
    decimal).  ``d*`` come from the first simulation engine selected; further
    engines get prefixed columns."""
    sims = table.sim_engines
    primary, extra = (sims[0], sims[1:]) if sims else (None, [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(table.n, extra, ci))
    for row in table.rows:
        out = [_fmt_num(x) for x in row.lambdas]
        st = row.simulated.get(primary) if primary else None
        out += [_fmt_ms(x) for x in st.mean] if st else [""] * table.n
        out.append(_fmt_ms(row.d_analytic))
        if ci:
            out += [_fmt_ms(x) for x in st.ci_half_width] if st else [""] * table.n
        for eng in extra:
            out += [_fmt_ms(x) for x in row.simulated[eng].mean]
        w.writerow(out)
    return buf.getvalue()


def parse_csv(text: str) -> list[dict[str, float | None]]:
    """Inverse of :func:`emit_csv`; blank cells become ``None``."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append({k: (float(v) if v != "" else None) for k, v in rec.items()})
    return rows


def emit_text(table: ComparisonTable) -> str:
    """Aligned table in the layout of the published comparison tables."""
    n = table.n
    sims = table.sim_engines
    head = [f"lambda{i + 1}" for i in range(n)]
    for eng in sims:
        head += [f"{eng}:d{i + 1}" for i in range(n)]
    head += ["d_avg", "rho"]
    show_ref = any(r.reference for r in table.rows)
    if show_ref:
        head += ["ref_d_avg"]
    body = []
    for row in table.rows:
        cells = [_fmt_num(x) for x in row.lambdas]
        for eng in sims:
            st = row.simulated[eng]
            cells += [f"{_fmt_ms(m)}±{_fmt_ms(h)}" if np.isfinite(h) else _fmt_ms(m)
                      for m, h in zip(st.mean, st.ci_half_width)]
        cells += [_fmt_ms(row.d_analytic), f"{row.rho:.3f}"]
        if show_ref:
            ref = row.reference.get("analytic_ms")
            cells.append("" if ref is None else f"{ref:.1f}")
        body.append(cells)
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(head)]
    sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"

    def line(cells):
        return "| " + " | ".join(c.rjust(w) for c, w in zip(cells, widths)) + " |"

    meta = table.meta
    dist = meta.get("distribution", {})
    title = (f"{table.name}: C = {meta.get('C', math.nan):.1f} pkts/s, MTU = {meta.get('mtu_bytes', 0):g} B, "
             f"{dist.get('kind', '?')} {json.dumps({k: v for k, v in dist.items() if k != 'kind'})}, "
             f"omega = {meta.get('omega', math.nan):.4g}, omega2 = {meta.get('omega2', math.nan):.4g} "
             f"({meta.get('omega2_mode', 'literal')}); delays in ms")
    out = [title, sep, line(head), sep]
    out += [line(b) for b in body]
    out.append(sep)
    if meta.get("note"):
        out.append(f"note: {meta['note']}")
    return "\n".join(out) + "\n"


def emit_report(table: ComparisonTable, fmt: str = "text", ci: bool = False) -> str:
    if fmt == "csv":
        return emit_csv(table, ci=ci)
    if fmt == "text":
        return emit_text(table)
    raise ValueError(f"unknown format {fmt!r}")
