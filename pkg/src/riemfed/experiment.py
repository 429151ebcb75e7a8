"""Experiment orchestration: build objectives from data, run repeats, persist results."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import data as data_mod
from .consensus import KARCHER, TANGENT, ConsensusConfig, karcher_mean, mean_sq_dist, tangent_space_mean
from .fedopt import ALGORITHMS, LAST, RFEDSVRG, AlgorithmConfig, RoundRecord, initial_point, run
from .manifolds import Sphere, manifold_for
from .metrics import GroundTruth, ground_truth, principal_angle_sum
from .objectives import GlobalObjective, QuadraticObjective, smoothness_constant
from . import plotting

HISTORY_COLUMNS = ("repeat", "round", "grad_norm", "loss", "loss_gap", "principal_angle_sum")
AGGREGATE_METRICS = ("grad_norm", "loss", "loss_gap", "principal_angle_sum")


class SpecError(ValueError):
    """Invalid experiment specification."""


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "gaussian"  # gaussian | csv | idx
    path: Optional[str] = None
    p: int = 10000
    d: int = 100
    has_header: bool = False
    label_column: Optional[int] = None

    def describe(self) -> str:
        return f"gaussian(p={self.p}, d={self.d})" if self.kind == "gaussian" else f"{self.kind}({self.path})"


@dataclass(frozen=True)
class ExperimentSpec:
    task: str = "pca"
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    r: int = 1
    algorithm: str = RFEDSVRG
    n: int = 10
    k: Optional[int] = None
    T: int = 600
    tau: Optional[int] = None
    eta: Optional[float] = None  # None -> 1 / lambda_max(mean covariance)
    mu: Optional[float] = None
    beta: float = 1.0
    consensus: str = TANGENT
    server_option: str = LAST
    client_option: str = LAST
    seed: int = 0
    repeats: int = 10
    center: bool = False
    standardize: bool = False
    normalize_cov: bool = False

    def validate(self) -> None:
        errors = []
        if self.task not in ("pca", "kpca"):
            errors.append(f"task: must be pca or kpca, got {self.task!r}")
        if self.r < 1:
            errors.append("r: must be >= 1")
        if self.task == "pca" and self.r != 1:
            errors.append("r: pca requires r = 1 (use task kpca for r > 1)")
        if self.repeats < 1:
            errors.append("repeats: must be >= 1")
        if self.algorithm not in ALGORITHMS:
            errors.append(f"algorithm: must be one of {', '.join(ALGORITHMS)}")
        if self.consensus not in (TANGENT, KARCHER):
            errors.append("consensus: must be tangent or karcher")
        if self.dataset.kind not in ("gaussian", "csv", "idx"):
            errors.append(f"dataset: unknown kind {self.dataset.kind!r}")
        elif self.dataset.kind != "gaussian" and not self.dataset.path:
            errors.append(f"dataset: {self.dataset.kind} needs a path")
        if self.dataset.kind == "gaussian" and (self.dataset.p < 1 or self.dataset.d < 1):
            errors.append("dataset: p and d must be positive")
        if self.n < 1:
            errors.append("n: must be >= 1")
        if errors:
            raise SpecError("; ".join(errors))

    def resolved(self, objective: Optional[GlobalObjective] = None) -> "ExperimentSpec":
        """Fill defaults: k = n/10, tau = 1 (rfedsvrg) or 5, mu = n/10, eta = 1/L."""
        spec = self
        if spec.k is None:
            spec = replace(spec, k=max(1, spec.n // 10))
        if spec.tau is None:
            spec = replace(spec, tau=1 if spec.algorithm == RFEDSVRG else 5)
        if spec.mu is None:
            spec = replace(spec, mu=spec.n / 10)
        if spec.eta is None and objective is not None:
            spec = replace(spec, eta=1.0 / smoothness_constant(objective, "mean"))
        return spec

    def algorithm_config(self, repeat: int) -> AlgorithmConfig:
        return AlgorithmConfig(
            algorithm=self.algorithm,
            n=self.n,
            k=self.k,
            T=self.T,
            tau=self.tau,
            eta=self.eta,
            server_option=self.server_option,
            client_option=self.client_option,
            mu=self.mu if self.algorithm == "rfedprox" else 0.0,
            consensus=ConsensusConfig(method=self.consensus, beta=self.beta),
            seed=self.seed + repeat,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentSpec":
        raw = dict(raw)
        ds = DatasetSpec(**raw.pop("dataset", {}))
        try:
            return cls(dataset=ds, **raw)
        except TypeError as e:
            raise SpecError(str(e)) from None

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except OSError as e:
            raise data_mod.DataError(f"cannot read spec {path}: {e.strerror}") from e
        except json.JSONDecodeError as e:
            raise SpecError(f"{path}: invalid JSON: {e}") from None


@dataclass
class ResultTable:
    spec: ExperimentSpec
    histories: list[list[RoundRecord]]
    f_star: float

    def rows(self) -> list[dict]:
        out = []
        for rep, hist in enumerate(self.histories):
            for rec in hist:
                out.append(
                    {
                        "repeat": rep,
                        "round": rec.round,
                        "grad_norm": rec.grad_norm,
                        "loss": rec.loss,
                        "loss_gap": rec.loss - self.f_star,
                        "principal_angle_sum": rec.principal_angle_sum,
                        "elapsed_s": rec.elapsed_seconds,
                    }
                )
        return out

    def aggregate(self) -> dict[str, np.ndarray]:
        lengths = {len(h) for h in self.histories}
        if len(lengths) != 1:
            raise RuntimeError("repeats have unequal round counts")
        rows = self.rows()
        n_rounds = lengths.pop()
        agg = {"round": np.array([r.round for r in self.histories[0]])}
        for m in AGGREGATE_METRICS:
            vals = np.array([row[m] for row in rows], dtype=float).reshape(len(self.histories), n_rounds)
            agg[m] = vals.mean(axis=0)
        return agg


def load_dataset(spec: ExperimentSpec) -> data_mod.DataMatrix:
    ds = spec.dataset
    if ds.kind == "gaussian":
        dm = data_mod.gen_gaussian(ds.p, ds.d, spec.seed)
    elif ds.kind == "csv":
        dm = data_mod.load_csv(ds.path, ds.has_header, ds.label_column)
    else:
        dm = data_mod.load_idx(ds.path)
    if spec.standardize:
        v = dm.values - dm.values.mean(axis=0)
        std = v.std(axis=0)
        dm = data_mod.DataMatrix(v / np.where(std > 0, std, 1.0), dm.source + " (standardized)")
    elif spec.center:
        dm = dm.centered()
    return dm


def build_objective(spec: ExperimentSpec, dm: Optional[data_mod.DataMatrix] = None) -> tuple[GlobalObjective, GroundTruth]:
    dm = load_dataset(spec) if dm is None else dm
    if spec.r > dm.cols:
        raise SpecError(f"r: {spec.r} exceeds data dimension {dm.cols}")
    if spec.n > dm.rows:
        raise SpecError(f"n: {spec.n} clients but only {dm.rows} samples")
    # i.i.d. synthetic rows need no shuffle; real data is partitioned at random
    shuffle = None if spec.dataset.kind == "gaussian" else spec.seed
    part = data_mod.partition_equal(dm.rows, spec.n, shuffle)
    covs = data_mod.client_covariances(dm, part, spec.normalize_cov)
    manifold = manifold_for(dm.cols, spec.r)
    objective = GlobalObjective([QuadraticObjective(a) for a in covs], manifold)
    return objective, ground_truth(objective)


def run_experiment(
    spec: ExperimentSpec,
    workers: Optional[int] = None,
    prepared: Optional[tuple[GlobalObjective, GroundTruth]] = None,
) -> ResultTable:
    spec.validate()
    objective, gt = prepared or build_objective(spec)
    spec = spec.resolved(objective)
    histories = []
    for rep in range(spec.repeats):
        cfg = spec.algorithm_config(rep)
        x0 = initial_point(objective.manifold, spec.seed + rep)
        _, hist = run(cfg, objective, x0, x_star=gt.X_star, workers=workers)
        if not hist:
            # T = 0: report the starting point alone
            g = objective.rgrad(x0)
            hist = [
                RoundRecord(0, float(np.linalg.norm(g)), objective.value(x0), principal_angle_sum(x0, gt.X_star), (), 0.0)
            ]
        histories.append(hist)
    return ResultTable(spec, histories, gt.f_star)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_results(table: ResultTable, out_dir, plots: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = table.rows()
    written = [
        write_csv(out / "history.csv", HISTORY_COLUMNS, [[r[c] for c in HISTORY_COLUMNS] for r in rows]),
        write_csv(out / "timing.csv", ("repeat", "round", "elapsed_s"), [[r["repeat"], r["round"], r["elapsed_s"]] for r in rows]),
    ]
    agg = table.aggregate()
    cols = ["round"] + [f"{m}_mean" for m in AGGREGATE_METRICS]
    written.append(
        write_csv(out / "aggregate.csv", cols, [[int(agg["round"][i])] + [float(agg[m][i]) for m in AGGREGATE_METRICS] for i in range(len(agg["round"]))])
    )
    (out / "spec.json").write_text(table.spec.to_json())
    written.append(out / "spec.json")
    if plots:
        curves = {m: {table.spec.algorithm: agg[m]} for m in ("grad_norm", "loss_gap", "principal_angle_sum")}
        written += plotting.metric_charts(out, agg["round"], curves)
    return written


def run_compare(
    spec: ExperimentSpec, out_dir, workers: Optional[int] = None, plots: bool = True
) -> dict[str, ResultTable]:
    """Run all three algorithms on the same data, partition and starting points."""
    spec.validate()
    prepared = build_objective(spec)
    tables = {}
    for algo in ALGORITHMS:
        s = replace(spec, algorithm=algo)
        if algo != RFEDSVRG:
            s = replace(s, client_option=LAST)
        tables[algo] = run_experiment(s, workers, prepared)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = ("algorithm",) + HISTORY_COLUMNS
    merged = []
    for algo, table in tables.items():
        merged += [[algo] + [r[c] for c in HISTORY_COLUMNS] for r in table.rows()]
    write_csv(out / "history.csv", header, merged)
    agg_rows = []
    for algo, table in tables.items():
        agg = table.aggregate()
        agg_rows += [[algo, int(agg["round"][i])] + [float(agg[m][i]) for m in AGGREGATE_METRICS] for i in range(len(agg["round"]))]
    write_csv(out / "aggregate.csv", ["algorithm", "round"] + [f"{m}_mean" for m in AGGREGATE_METRICS], agg_rows)
    specs = {algo: json.loads(t.spec.to_json()) for algo, t in tables.items()}
    (out / "spec.json").write_text(json.dumps(specs, indent=2, sort_keys=True) + "\n")
    if plots:
        aggs = {algo: t.aggregate() for algo, t in tables.items()}
        rounds = next(iter(aggs.values()))["round"]
        curves = {m: {algo: a[m] for algo, a in aggs.items()} for m in ("grad_norm", "loss_gap", "principal_angle_sum")}
        plotting.metric_charts(out, rounds, curves, prefix="compare_")
    return tables


BENCH_COLUMNS = (
    "d",
    "h_xt",
    "karcher_d2",
    "karcher_h",
    "karcher_time_s",
    "karcher_iters",
    "tangent_d2",
    "tangent_h",
    "tangent_time_s",
)


def consensus_bench(
    d_list: Sequence[int], k: int = 100, trials: int = 10, seed: int = 0, karcher: Optional[ConsensusConfig] = None
) -> list[dict]:
    """Tangent-space mean vs Karcher mean on random sphere configurations, averaged over trials.

    For each d: anchor x_t and k points drawn uniformly on S^{d-1}; reports
    h(x_t), and per method d^2(x_{t+1}, x_t), h(x_{t+1}) and wall-clock time, where
    h(x) is the mean squared distance to the k points.
    """
    if k < 1 or trials < 1:
        raise SpecError("k and trials must be positive")
    karcher = karcher or ConsensusConfig(method=KARCHER)
    rows = []
    for d in d_list:
        sphere = Sphere(d)
        rng = np.random.default_rng(np.random.SeedSequence([seed, d]))
        acc = {c: [] for c in BENCH_COLUMNS[1:]}
        for _ in range(trials):
            anchor = sphere.random_point(rng)
            pts = [sphere.random_point(rng) for _ in range(k)]
            acc["h_xt"].append(mean_sq_dist(sphere, anchor, pts))

            t0 = time.perf_counter()
            km = karcher_mean(sphere, pts, anchor, karcher)
            acc["karcher_time_s"].append(time.perf_counter() - t0)
            acc["karcher_iters"].append(km.iterations)
            acc["karcher_d2"].append(sphere.dist(km.point, anchor) ** 2)
            acc["karcher_h"].append(mean_sq_dist(sphere, km.point, pts))

            t0 = time.perf_counter()
            tm = tangent_space_mean(sphere, anchor, pts)
            acc["tangent_time_s"].append(time.perf_counter() - t0)
            acc["tangent_d2"].append(sphere.dist(tm, anchor) ** 2)
            acc["tangent_h"].append(mean_sq_dist(sphere, tm, pts))
        rows.append({"d": d, **{c: float(np.mean(v)) for c, v in acc.items()}})
    return rows


def write_bench(rows: list[dict], out_dir, plots: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [write_csv(out / "consensus.csv", BENCH_COLUMNS, [[r[c] for c in BENCH_COLUMNS] for r in rows])]
    if plots and rows:
        ds = [r["d"] for r in rows]
        written.append(
            plotting.line_chart(
                out / "consensus_time.svg",
                {"karcher": (ds, [r["karcher_time_s"] for r in rows]), "tangent": (ds, [r["tangent_time_s"] for r in rows])},
                "wall-clock time (s)",
                xlabel="dimension d",
            )
        )
    return written
