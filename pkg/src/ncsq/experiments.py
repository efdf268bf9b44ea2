"""MSE-versus-rate experiments, their presets and result files."""
from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigInvalid, NumericalError
from .network import IIDDropout, TwoStateDropout
from .sim import (CellSummary, Design, DictionarySpec, SimulationConfig, aggregate_runs,
                  run_closed_loop)
from .synth import CostWeights, Plant

REF_A = [
    [-0.758, -0.325, -0.085, 0.060, -2.256],
    [0.432, -0.356, 0.002, 0.007, -0.171],
    [-0.173, 1.063, 0.366, 0.671, 0.939],
    [0.951, 0.667, 0.737, -0.434, 0.352],
    [1.054, 0.484, -0.158, 0.454, -0.264],
]
REF_P = [[0.95, 0.05], [0.25, 0.75]]

CSV_HEADER = ["family", "target_rate_bps", "achieved_rate_bps", "mse_linear", "mse_db",
              "stable", "runs", "steps", "master_seed"]
BASELINE = "baseline"
KINDS = ("rate_sweep", "two_state", "pd2_sweep")


def ref_plant() -> dict:
    return {"A": REF_A, "B1": [1.0] * 5, "B2": [1.0] * 5, "sigma2_w": 1.0}


def ref_weights() -> dict:
    return {"Q": np.eye(5).tolist(), "R": 1.0, "N": 5}


@dataclass
class FamilySpec:
    family: str
    scale: float = 1.0
    iid_variance: float = 25.0
    M: int = 2

    def dictionary(self, rate: float) -> DictionarySpec:
        return DictionarySpec(self.family, rate, self.scale, self.M, self.iid_variance)


@dataclass
class ExperimentSpec:
    name: str = "custom"
    kind: str = "rate_sweep"
    families: list = field(default_factory=list)
    rates: list = field(default_factory=list)
    channel: dict = field(default_factory=lambda: {"type": "iid", "p_d": 0.1})
    runs: int = 12
    steps: int = 50_000
    master_seed: int = 0
    out_dir: str = "results"
    plant: dict = field(default_factory=ref_plant)
    weights: dict = field(default_factory=ref_weights)
    pd2_grid: list = field(default_factory=list)
    baseline: bool = True

    def __post_init__(self):
        self.families = [f if isinstance(f, FamilySpec) else FamilySpec(**f) for f in self.families]
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigInvalid(f"unknown experiment kind {self.kind!r}")
        if any(b <= a for a, b in zip(self.rates, self.rates[1:])):
            raise ConfigInvalid("rate grid must be strictly increasing")
        if any(r <= 0 for r in self.rates):
            raise ConfigInvalid("rates must be positive")
        for f in self.families:
            if not f.scale > 0:
                raise ConfigInvalid("family scales must be positive")
            DictionarySpec(f.family, 1.0, f.scale, f.M, f.iid_variance)
        if self.runs < 1 or self.steps < 1:
            raise ConfigInvalid("runs and steps must be positive")
        if self.kind == "pd2_sweep" and not self.pd2_grid:
            raise ConfigInvalid("pd2 sweep needs a pd2_grid")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(f"unknown config fields: {sorted(unknown)}")
        return cls(**copy.deepcopy(data))

    def build_plant(self) -> Plant:
        try:
            return Plant(self.plant["A"], self.plant["B1"], self.plant["B2"],
                         self.plant.get("sigma2_w", 1.0))
        except KeyError as exc:
            raise ConfigInvalid(f"plant config missing {exc}") from exc

    def build_weights(self) -> CostWeights:
        try:
            return CostWeights(self.weights["Q"], self.weights["R"], self.weights["N"])
        except KeyError as exc:
            raise ConfigInvalid(f"weights config missing {exc}") from exc

    def build_channel(self, channel: dict | None = None):
        return make_channel(channel or self.channel)


def make_channel(spec: dict):
    kind = spec.get("type", "iid")
    if kind == "iid":
        return IIDDropout(spec["p_d"])
    if kind == "two_state":
        return TwoStateDropout(spec["P"], spec["p_d1"], spec["p_d2"])
    raise ConfigInvalid(f"unknown channel type {kind!r}")


def _grid(lo, hi, step):
    n = int(round((hi - lo) / step))
    return [round(lo + i * step, 10) for i in range(n + 1)]


PRESETS = {
    "fig5": dict(
        name="fig5", kind="rate_sweep",
        families=[dict(family="IID", iid_variance=25.0, scale=1.0),
                  dict(family="GR", scale=1.0), dict(family="GSR", scale=2.0)],
        rates=_grid(4.2, 7.0, 0.2), channel={"type": "iid", "p_d": 0.10}, runs=12),
    "fig6": dict(
        name="fig6", kind="rate_sweep",
        families=[dict(family="IID", iid_variance=25.0, scale=2.0),
                  dict(family="GR", scale=2.0), dict(family="GSR", scale=4.0)],
        rates=_grid(4.2, 7.0, 0.2), channel={"type": "iid", "p_d": 0.10}, runs=12),
    "twostate": dict(
        name="twostate", kind="two_state",
        families=[dict(family="IID", iid_variance=25.0, scale=2.0),
                  dict(family="GR", scale=2.0), dict(family="GSR", scale=4.0),
                  dict(family="GR2", scale=3.0), dict(family="GSR2", scale=3.0)],
        rates=[4.2, 4.4, 4.5] + _grid(4.6, 7.0, 0.2),
        channel={"type": "two_state", "P": REF_P, "p_d1": 0.05, "p_d2": 0.15}, runs=24),
    "pd2sweep": dict(
        name="pd2sweep", kind="pd2_sweep",
        families=[dict(family="GSR2", scale=3.0)],
        rates=[4.8, 5.6, 6.4],
        channel={"type": "two_state", "P": REF_P, "p_d1": 0.05, "p_d2": 0.15},
        pd2_grid=_grid(0.05, 0.45, 0.05), runs=12),
}


def preset(name: str, **overrides) -> ExperimentSpec:
    if name not in PRESETS:
        raise ConfigInvalid(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    data = copy.deepcopy(PRESETS[name])
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec.from_dict(data)


@dataclass
class ResultRow:
    family: str
    target_rate: float
    achieved_rate: float
    mse_linear: float
    mse_db: float
    stable: bool
    runs: int
    steps: int
    seed: int

    def csv_fields(self) -> list:
        return [self.family, repr(float(self.target_rate)), repr(float(self.achieved_rate)),
                repr(float(self.mse_linear)), repr(float(self.mse_db)),
                "true" if self.stable else "false", str(self.runs), str(self.steps),
                str(self.seed)]


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def cell(self, family: str, rate: float) -> ResultRow:
        for row in self.rows:
            if row.family == family and math.isclose(row.target_rate, rate):
                return row
        raise KeyError((family, rate))

    def families(self) -> list:
        seen = []
        for row in self.rows:
            if row.family not in seen:
                seen.append(row.family)
        return seen

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow(row.csv_fields())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, metadata: dict | None = None) -> "ResultTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != CSV_HEADER:
            raise ConfigInvalid("unexpected CSV header")
        rows = [ResultRow(r[0], float(r[1]), float(r[2]), float(r[3]), float(r[4]),
                          r[5] == "true", int(r[6]), int(r[7]), int(r[8])) for r in reader]
        return cls(rows, metadata or {})

    def to_json(self) -> str:
        rows = [asdict(r) for r in self.rows]
        # non-finite floats carried as strings so the document stays strict JSON
        for raw in rows:
            for k in ("target_rate", "achieved_rate", "mse_linear", "mse_db"):
                if not math.isfinite(raw[k]):
                    raw[k] = repr(float(raw[k]))
        return json.dumps({"metadata": self.metadata, "rows": rows}, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        doc = json.loads(text)
        rows = []
        for raw in doc["rows"]:
            raw = dict(raw)
            for k in ("target_rate", "achieved_rate", "mse_linear", "mse_db"):
                raw[k] = float(raw[k])
            rows.append(ResultRow(**raw))
        return cls(rows, doc.get("metadata", {}))


def _cell_job(args):
    spec_dict, channel, family_dict, rate = args
    spec = ExperimentSpec.from_dict(spec_dict)
    plant, weights = spec.build_plant(), spec.build_weights()
    chan = make_channel(channel)
    try:
        design = Design(plant, weights, chan)
    except NumericalError:
        return None
    if family_dict is None:
        cfg = SimulationConfig(plant, weights, chan, None, steps=spec.steps, runs=spec.runs,
                               master_seed=spec.master_seed, baseline=True)
        return aggregate_runs(run_closed_loop(cfg, r, design) for r in range(spec.runs)), math.nan
    fam = FamilySpec(**family_dict)
    cfg = SimulationConfig(plant, weights, chan, fam.dictionary(rate), steps=spec.steps,
                           runs=spec.runs, master_seed=spec.master_seed)
    records = []
    for r in range(spec.runs):
        try:
            records.append(run_closed_loop(cfg, r, design))
        except NumericalError:
            # no stationary statistics to shape the dictionary with
            return CellSummary(math.nan, False, spec.runs, 0), _achieved(spec, fam, rate)
    return aggregate_runs(records), records[0].achieved_rate


def _achieved(spec, fam, rate):
    from .dictionary import achieved_rate, codewords_per_section
    N = spec.weights["N"]
    return achieved_rate(N, fam.M, codewords_per_section(N, fam.M, rate))


def _run_jobs(jobs, n_workers):
    if n_workers and n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            return list(pool.map(_cell_job, jobs))
    return [_cell_job(j) for j in jobs]


def _row(spec, label, rate, summary, achieved):
    if summary is None:
        summary = CellSummary(math.nan, False, spec.runs, 0)
    return ResultRow(label, float(rate), float(achieved), summary.mse_linear, summary.mse_db,
                     summary.stable, spec.runs, spec.steps, spec.master_seed)


def _sweep(spec: ExperimentSpec, channel: dict, suffix: str, jobs: int):
    base = spec.to_dict()
    tasks = [(base, channel, asdict(f), rate) for f in spec.families for rate in spec.rates]
    if spec.baseline:
        tasks.append((base, channel, None, None))
    results = _run_jobs(tasks, jobs)
    rows = []
    i = 0
    for f in spec.families:
        for rate in spec.rates:
            res = results[i]
            i += 1
            summary, achieved = res if res is not None else (None, math.nan)
            rows.append(_row(spec, f.family + suffix, rate, summary, achieved))
    if spec.baseline:
        res = results[i]
        summary = res[0] if res is not None else None
        for rate in spec.rates:
            rows.append(_row(spec, BASELINE + suffix, rate, summary, math.nan))
    return rows


def experiment_rate_sweep(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    """Every family at every rate, plus the unquantized baseline repeated per rate."""
    rows = _sweep(spec, spec.channel, "", jobs)
    return ResultTable(rows, {"spec": spec.to_dict()})


def experiment_two_state(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    """Rate sweep over a two-state channel; GR/GSR switch dictionaries with the state."""
    if spec.channel.get("type") != "two_state":
        raise ConfigInvalid("two-state experiment needs a two_state channel")
    return experiment_rate_sweep(spec, jobs)


def pd2_label(family: str, pd2: float) -> str:
    return f"{family}@pd2={pd2:g}"


def experiment_pd2_sweep(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    """Rate sweep repeated for each bad-state dropout probability in ``pd2_grid``."""
    if spec.channel.get("type") != "two_state":
        raise ConfigInvalid("pd2 sweep needs a two_state channel")
    rows = []
    for pd2 in spec.pd2_grid:
        channel = dict(spec.channel, p_d2=pd2)
        rows.extend(_sweep(spec, channel, pd2_label("", pd2), jobs))
    return ResultTable(rows, {"spec": spec.to_dict()})


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    if spec.kind == "rate_sweep":
        return experiment_rate_sweep(spec, jobs)
    if spec.kind == "two_state":
        return experiment_two_state(spec, jobs)
    return experiment_pd2_sweep(spec, jobs)


def _series(table: ResultTable):
    """(title, [(x, mse_db)]) per plotted curve, unstable cells dropped."""
    spec = table.metadata.get("spec", {})
    if spec.get("kind") == "pd2_sweep":
        series = {}
        for row in table.rows:
            fam, pd2 = row.family.split("@pd2=")
            key = f"{fam} R={row.target_rate:g}" if fam != BASELINE else BASELINE
            pts = series.setdefault(key, [])
            if row.stable and (fam != BASELINE or all(p[0] != float(pd2) for p in pts)):
                pts.append((float(pd2), row.mse_db))
        return "p_{d2}", list(series.items())
    out = []
    for fam in table.families():
        pts = [(r.target_rate, r.mse_db) for r in table.rows if r.family == fam and r.stable]
        out.append((fam, pts))
    return "rate [bit/symbol]", out


def gnuplot_script(table: ResultTable) -> str:
    xlabel, series = _series(table)
    lines = ["# generated by ncsq", "set terminal pngcairo size 800,600",
             "set output 'results.png'", f"set xlabel '{xlabel}'", "set ylabel 'MSE [dB]'",
             "set key top right", "set grid"]
    for k, (_, pts) in enumerate(series):
        lines.append(f"$s{k} << EOD")
        lines.extend(f"{x!r} {y!r}" for x, y in pts)
        lines.append("EOD")
    plots = []
    for k, (title, _) in enumerate(series):
        style = "lines dashtype 2" if title.startswith(BASELINE) else "linespoints"
        plots.append(f"$s{k} using 1:2 with {style} title '{title}'")
    lines.append("plot " + ", \\\n     ".join(plots) if plots else "# no series")
    return "\n".join(lines) + "\n"


def emit_outputs(table: ResultTable, outdir) -> dict:
    os.makedirs(outdir, exist_ok=True)
    paths = {"csv": os.path.join(outdir, "results.csv"),
             "json": os.path.join(outdir, "results.json"),
             "plot": os.path.join(outdir, "plot.gp")}
    for key, text in (("csv", table.to_csv()), ("json", table.to_json()),
                      ("plot", gnuplot_script(table))):
        with open(paths[key], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return paths
