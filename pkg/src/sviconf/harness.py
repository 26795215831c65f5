"""Replicated coverage experiments and their CSV/YAML outputs."""

from __future__ import annotations

import csv
import hashlib
import io
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .box import BoxSet
from .inference import (
    ConfidenceRegion,
    RegionKind,
    SingularSelection,
    ThresholdAboveAllEigenvalues,
    coherent_orientation,
    derivative_at,
    independence_condition,
    individual_intervals,
    limiting_coverages,
    limiting_law,
    project_intervals_to_x,
    region_auto,
    region_contains,
    simultaneous_intervals,
)
from .model import (
    AffineScenarioModel,
    CovarianceEstimate,
    SaaMap,
    assemble,
    sample_batch,
    sample_covariance,
    ten_dim_example,
    true_map,
    two_dim_example,
)
from .numerics import RngStream, chi2_quantile, eig_sym
from .solver import MaxIterations, SingularNewtonMatrix, solve

PRESETS = {
    "two_dim": two_dim_example,
    "ten_dim_1": lambda: ten_dim_example(1),
    "ten_dim_2": lambda: ten_dim_example(2),
    "ten_dim_3": lambda: ten_dim_example(3),
}


class ConfigParse(ValueError):
    pass


@dataclass
class ModelSpec:
    preset: str | None = None
    lam_lo: list | None = None
    lam_hi: list | None = None
    b_lo: list | None = None
    b_hi: list | None = None
    box_lower: list | None = None
    box_upper: list | None = None

    def build(self) -> AffineScenarioModel:
        if self.preset is not None:
            if self.preset not in PRESETS:
                raise ConfigParse(f"model.preset: unknown preset {self.preset!r} (choose from {sorted(PRESETS)})")
            return PRESETS[self.preset]()
        missing = [k for k in ("lam_lo", "lam_hi", "b_lo", "b_hi") if getattr(self, k) is None]
        if missing:
            raise ConfigParse(f"model: missing field(s) {', '.join(missing)} (or give a preset)")
        try:
            return AffineScenarioModel(self.lam_lo, self.lam_hi, self.b_lo, self.b_hi)
        except ValueError as exc:
            raise ConfigParse(f"model: {exc}") from None

    def box(self, q: int) -> BoxSet:
        lo = np.zeros(q) if self.box_lower is None else np.asarray(self.box_lower, dtype=float)
        up = np.full(q, np.inf) if self.box_upper is None else np.asarray(self.box_upper, dtype=float)
        try:
            return BoxSet(lo, up)
        except ValueError as exc:
            raise ConfigParse(f"model.box: {exc}") from None


@dataclass
class ExperimentConfig:
    model: ModelSpec
    sample_sizes: list[int]
    replications: int
    alphas: list[float]
    seed: int
    z0: list[float] | None = None
    rho0: float | None = None
    epsilon: float = 0.0
    output_dir: str = "results"
    coverage: bool = True
    qq: bool = True
    ellipse: bool = False
    limiting: bool = False
    limiting_samples: int = 1_000_000
    threads: int = 1
    max_failure_rate: float = 0.05

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigParse("replications: must be >= 1")
        if not self.alphas or any(not 0.0 < a < 1.0 for a in self.alphas):
            raise ConfigParse("alphas: need a nonempty list of levels in (0, 1)")
        if not self.sample_sizes or any(n < 2 for n in self.sample_sizes):
            raise ConfigParse("sample_sizes: need a nonempty list of sizes >= 2")
        if self.epsilon < 0:
            raise ConfigParse("epsilon: must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = {k: v for k, v in d["model"].items() if v is not None}
        return d

    def digest(self) -> str:
        text = yaml.safe_dump(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


_REQUIRED = ("model", "sample_sizes", "replications", "alphas", "seed")


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigParse("config: top level must be a mapping")
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigParse(f"{key}: required field is missing")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigParse(f"{unknown[0]}: unknown field")
    model_raw = raw["model"]
    if not isinstance(model_raw, dict):
        raise ConfigParse("model: must be a mapping")
    model_known = {f.name for f in fields(ModelSpec)}
    bad = sorted(set(model_raw) - model_known)
    if bad:
        raise ConfigParse(f"model.{bad[0]}: unknown field")
    kwargs = dict(raw)
    kwargs["model"] = ModelSpec(**model_raw)
    try:
        if kwargs.get("z0") is not None:
            kwargs["z0"] = [float(v) for v in kwargs["z0"]]
        kwargs["sample_sizes"] = [int(n) for n in raw["sample_sizes"]]
        kwargs["alphas"] = [float(a) for a in raw["alphas"]]
        kwargs["replications"] = int(raw["replications"])
        kwargs["seed"] = int(raw["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"config: bad value ({exc})") from None
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigParse(f"config: {exc}") from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParse(f"{path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigParse(f"{path}:{where} {exc}") from None
    return config_from_dict(raw)


def write_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))


# --- replications -------------------------------------------------------------


@dataclass
class Replication:
    n: int
    r: int
    status: str
    z: np.ndarray | None = None
    x: np.ndarray | None = None
    M: np.ndarray | None = None
    sigma: np.ndarray | None = None
    is_linear: bool = True
    region_kind: str = ""
    dof: int = 0
    d2: float = math.nan
    iterations: int = 0
    # keyed by alpha
    region_cover: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    ind: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class Problem:
    model: AffineScenarioModel
    S: BoxSet
    z0: np.ndarray
    alphas: tuple
    seed: int
    rho0: float | None
    epsilon: float


def true_solution(model: AffineScenarioModel, S: BoxSet) -> np.ndarray:
    return solve(true_map(model), S).z


def replicate(prob: Problem, n: int, r: int) -> Replication:
    stream = RngStream(prob.seed, r).substream(n)
    batch = sample_batch(prob.model, n, stream)
    f = assemble(batch)
    try:
        res = solve(f, prob.S)
    except (MaxIterations, SingularNewtonMatrix) as exc:
        return Replication(n, r, f"solver_failure: {type(exc).__name__}")
    d = derivative_at(f, prob.S, res)
    cov = sample_covariance(batch, res.x)
    rec = Replication(n, r, "ok", z=res.z, x=res.x, M=d.matrix, sigma=cov.matrix,
                      is_linear=d.is_linear, iterations=res.iterations)
    if not d.is_invertible:
        rec.status = "noninvertible"
        return rec
    for alpha in prob.alphas:
        try:
            region = region_auto(d, cov, n, alpha, prob.rho0, prob.epsilon)
        except ThresholdAboveAllEigenvalues:
            rec.status = "zero_covariance"
            return rec
        rec.region_kind = region.kind.value
        rec.dof = region.dof
        rec.d2 = region.statistic(prob.z0)
        rec.region_cover[alpha] = region_contains(region, prob.z0)
        if region.kind is RegionKind.FULL_RANK or region.epsilon == 0.0:
            rec.sim[alpha] = simultaneous_intervals(region)
        rec.ind[alpha] = individual_intervals(d, cov, n, alpha)
    return rec


def _run_chunk(args):
    prob, n, rs = args
    return [replicate(prob, n, r) for r in rs]


@dataclass
class CoverageRow:
    n: int
    alpha: float
    replications: int
    valid: int
    region: int
    simultaneous: int
    individual: list[int]
    nonlinear: int
    noninvertible: int
    solver_failures: int
    other_failures: int


@dataclass
class QqData:
    n: int
    dof: int
    quantiles: np.ndarray
    distances: np.ndarray

    def slope(self) -> float:
        """Least-squares slope of distances on quantiles through the origin."""
        return float(self.quantiles @ self.distances / (self.quantiles @ self.quantiles))


@dataclass
class RunResult:
    config: ExperimentConfig
    z0: np.ndarray
    records: list[Replication]
    coverage: list[CoverageRow]
    qq: dict[int, QqData]
    limiting: list[tuple] = field(default_factory=list)

    def row(self, n: int, alpha: float) -> CoverageRow:
        for row in self.coverage:
            if row.n == n and math.isclose(row.alpha, alpha):
                return row
        raise KeyError((n, alpha))

    def failure_rate(self) -> float:
        bad = sum(not rec.ok for rec in self.records)
        return bad / max(len(self.records), 1)

    def mean_intervals(self, n: int, alpha: float, kind: str, space: str = "z"):
        """Average interval endpoints over valid replications."""
        recs = [rec for rec in self.records if rec.n == n and rec.ok]
        table = "sim" if kind == "sim" else "ind"
        sets = [getattr(rec, table)[alpha] for rec in recs if alpha in getattr(rec, table)]
        if space == "x":
            S = self.config.model.box(self.z0.size)
            sets = [project_intervals_to_x(s, S) for s in sets]
        if not sets:
            return None
        return np.mean([s.lo for s in sets], axis=0), np.mean([s.hi for s in sets], axis=0)


def coverage_rows(records: list[Replication], z0, sample_sizes, alphas) -> list[CoverageRow]:
    rows = []
    for n in sample_sizes:
        recs = [rec for rec in records if rec.n == n]
        valid = [rec for rec in recs if rec.ok]
        for alpha in alphas:
            ind = np.zeros(z0.size, dtype=int)
            for rec in valid:
                ind += rec.ind[alpha].covers(z0)
            rows.append(CoverageRow(
                n=n,
                alpha=alpha,
                replications=len(recs),
                valid=len(valid),
                region=sum(rec.region_cover[alpha] for rec in valid),
                simultaneous=sum(alpha in rec.sim and rec.sim[alpha].contains(z0) for rec in valid),
                individual=ind.tolist(),
                nonlinear=sum(not rec.is_linear for rec in recs if rec.z is not None),
                noninvertible=sum(rec.status == "noninvertible" for rec in recs),
                solver_failures=sum(rec.status.startswith("solver_failure") for rec in recs),
                other_failures=sum(rec.status == "zero_covariance" for rec in recs),
            ))
    return rows


def qq_data(records: list[Replication], n: int, dof: int) -> QqData:
    d2 = np.sort([rec.d2 for rec in records
                  if rec.n == n and rec.ok and rec.region_kind == RegionKind.FULL_RANK.value])
    R = d2.size
    quant = np.array([chi2_quantile(dof, 1.0 - (j - 0.5) / R) for j in range(1, R + 1)])
    return QqData(n, dof, quant, d2)


def run_replications(cfg: ExperimentConfig, threads: int | None = None) -> RunResult:
    model = cfg.model.build()
    S = cfg.model.box(model.q)
    z0 = np.asarray(cfg.z0, dtype=float) if cfg.z0 is not None else true_solution(model, S)
    prob = Problem(model, S, z0, tuple(cfg.alphas), cfg.seed, cfg.rho0, cfg.epsilon)
    threads = cfg.threads if threads is None else threads
    jobs = []
    chunk = max(1, math.ceil(cfg.replications / (4 * max(threads, 1))))
    for n in cfg.sample_sizes:
        for start in range(0, cfg.replications, chunk):
            jobs.append((prob, n, range(start, min(start + chunk, cfg.replications))))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(job) for job in jobs]
    records = [rec for part in parts for rec in part]
    records.sort(key=lambda rec: (cfg.sample_sizes.index(rec.n), rec.r))

    coverage = coverage_rows(records, z0, cfg.sample_sizes, cfg.alphas)
    qq = {n: qq_data(records, n, model.q) for n in cfg.sample_sizes} if cfg.qq else {}
    result = RunResult(cfg, z0, records, coverage, qq)
    if cfg.limiting:
        result.limiting = run_limiting(cfg, model, S, z0)
    return result


def run_limiting(cfg: ExperimentConfig, model=None, S=None, z0=None) -> list[tuple]:
    """Limiting individual coverage for every (alpha, coordinate).

    Returns rows ``(alpha, coord, coverage, condition, coherent)``.
    """
    model = cfg.model.build() if model is None else model
    S = cfg.model.box(model.q) if S is None else S
    z0 = true_solution(model, S) if z0 is None else z0
    x0 = np.clip(z0, S.lower, S.upper)
    law = limiting_law(model.mean_jacobian(), model.covariance_at(x0), S, z0)
    coherent = coherent_orientation(law)
    if not coherent:
        raise SingularSelection("true normal map is not coherently oriented")
    cond = independence_condition(law) or "unverified"
    rows = []
    for i, alpha in enumerate(cfg.alphas):
        cov = limiting_coverages(law, alpha, cfg.limiting_samples, RngStream(cfg.seed, 0).substream(i))
        rows.extend((alpha, j, float(c), cond, coherent) for j, c in enumerate(cov))
    return rows


# --- ellipse boundaries -------------------------------------------------------


class DimensionNot2(ValueError):
    pass


def emit_ellipse_boundary(region: ConfidenceRegion, points: int = 200):
    """Boundary points of a 2-d full-rank region as rows ``(level, x, y)``."""
    if region.center.size != 2 or region.kind is not RegionKind.FULL_RANK:
        raise DimensionNot2("ellipse boundaries need a full-rank region in the plane")
    eig = eig_sym(region.shape)
    theta = np.linspace(0.0, 2.0 * np.pi, points, endpoint=False)
    circle = np.stack([np.cos(theta), np.sin(theta)])
    pts = region.center[:, None] + np.sqrt(region.radius) * eig.U.T @ (circle / np.sqrt(eig.values)[:, None])
    level = 1.0 - region.alpha
    return [(level, float(x), float(y)) for x, y in pts.T]


def ellipse_svg(boundaries: dict, boxes: dict | None = None, marks: dict | None = None, size: int = 480) -> str:
    """Minimal SVG: closed boundary curves, dashed boxes and point markers."""
    xs = [p[1] for rows in boundaries.values() for p in rows]
    ys = [p[2] for rows in boundaries.values() for p in rows]
    for box in (boxes or {}).values():
        xs += [box.lo[0], box.hi[0]]
        ys += [box.lo[1], box.hi[1]]
    for pt in (marks or {}).values():
        xs.append(pt[0])
        ys.append(pt[1])
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    pad = 0.05 * max(x1 - x0, y1 - y0)
    x0, x1, y0, y1 = x0 - pad, x1 + pad, y0 - pad, y1 + pad
    s = size / max(x1 - x0, y1 - y0)

    def tx(x, y):
        return (x - x0) * s, (y1 - y) * s

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">']
    for rows in boundaries.values():
        pts = " ".join("%.2f,%.2f" % tx(x, y) for _, x, y in rows)
        out.append(f'<polygon points="{pts}" fill="none" stroke="black" stroke-width="1"/>')
    for box in (boxes or {}).values():
        ax, ay = tx(box.lo[0], box.hi[1])
        bx, by = tx(box.hi[0], box.lo[1])
        out.append(f'<rect x="{ax:.2f}" y="{ay:.2f}" width="{bx - ax:.2f}" height="{by - ay:.2f}" '
                   'fill="none" stroke="gray" stroke-dasharray="4,3"/>')
    for label, (x, y) in (marks or {}).items():
        px, py = tx(x, y)
        out.append(f'<text x="{px:.2f}" y="{py:.2f}" font-size="14" text-anchor="middle">{label}</text>')
    out.append("</svg>")
    return "\n".join(out)


# --- outputs ------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def interval_rows(iv, n: int | None = None):
    prefix = iv.space
    return [(f"{prefix}{j + 1}", iv.kind, float(lo), float(hi), iv.alpha, n)
            for j, (lo, hi) in enumerate(zip(iv.lo, iv.hi))]


INTERVAL_HEADER = ["coord", "kind", "lo", "hi", "alpha", "n"]


def write_outputs(result: RunResult, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    q = result.z0.size
    files = {}

    write_csv(out / "coverage.csv",
              ["n", "alpha", "replications", "valid", "region", "simultaneous",
               *[f"ind_z{j + 1}" for j in range(q)], "nonlinear", "noninvertible",
               "solver_failures", "other_failures"],
              [(row.n, row.alpha, row.replications, row.valid, row.region, row.simultaneous,
                *row.individual, row.nonlinear, row.noninvertible, row.solver_failures,
                row.other_failures) for row in result.coverage])
    files["coverage"] = "coverage.csv"

    qq_rows = []
    for n, qq in result.qq.items():
        qq_rows.extend((n, j + 1, qv, dv) for j, (qv, dv) in enumerate(zip(qq.quantiles, qq.distances)))
    write_csv(out / "qq.csv", ["n", "j", "chi2_quantile", "squared_distance"], qq_rows)
    files["qq"] = "qq.csv"

    rep_header = ["n", "r", "status", "is_linear", "region_kind", "dof", "d2", "iterations",
                  *[f"z{j + 1}" for j in range(q)]]
    for alpha in cfg.alphas:
        rep_header += [f"region_a{alpha}", f"sim_a{alpha}", *[f"ind_z{j + 1}_a{alpha}" for j in range(q)]]
    rep_rows = []
    for rec in result.records:
        row = [rec.n, rec.r, rec.status, rec.is_linear, rec.region_kind, rec.dof, rec.d2, rec.iterations]
        row += list(rec.z) if rec.z is not None else [""] * q
        for alpha in cfg.alphas:
            if rec.ok:
                row += [rec.region_cover[alpha], rec.sim[alpha].contains(result.z0) if alpha in rec.sim else "",
                        *rec.ind[alpha].covers(result.z0)]
            else:
                row += [""] * (2 + q)
        rep_rows.append(row)
    write_csv(out / "replications.csv", rep_header, rep_rows)
    files["replications"] = "replications.csv"

    iv_rows = []
    for n in cfg.sample_sizes:
        for alpha in cfg.alphas:
            for kind in ("sim", "ind"):
                for space in ("z", "x"):
                    mean = result.mean_intervals(n, alpha, kind, space)
                    if mean is None:
                        continue
                    for j in range(q):
                        iv_rows.append((f"{space}{j + 1}", kind, mean[0][j], mean[1][j], alpha, n))
    write_csv(out / "intervals.csv", INTERVAL_HEADER, iv_rows)
    files["intervals"] = "intervals.csv"

    if result.limiting:
        write_csv(out / "limiting.csv", ["alpha", "coord", "coverage", "condition", "coherent"],
                  [(a, f"z{j + 1}", c, cond, coh) for a, j, c, cond, coh in result.limiting])
        files["limiting"] = "limiting.csv"

    write_manifest(out, cfg, files, result.failure_rate())
    return files


def write_manifest(out: Path, cfg: ExperimentConfig, files: dict, failure_rate: float = 0.0) -> None:
    manifest = {
        "seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "versions": {"sviconf": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "failure_rate": failure_rate,
        "files": files,
        "config": cfg.to_dict(),
    }
    (Path(out) / "manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=False))


# --- fixtures -----------------------------------------------------------------


@dataclass
class Fixture:
    """An externally supplied SAA instance: ``J``, ``b``, ``sigma`` and ``n``."""

    J: np.ndarray
    b: np.ndarray
    sigma: np.ndarray
    n: int
    alphas: list[float] = field(default_factory=lambda: [0.1])
    z0: np.ndarray | None = None
    box_lower: np.ndarray | None = None
    box_upper: np.ndarray | None = None
    rho0: float | None = None

    @property
    def q(self) -> int:
        return self.b.size

    def box(self) -> BoxSet:
        return ModelSpec(box_lower=self.box_lower, box_upper=self.box_upper).box(self.q)


def _matrix(raw, q, name):
    a = np.asarray(raw, dtype=float)
    if a.ndim == 1:
        if a.size != q * q:
            raise ConfigParse(f"{name}: expected {q * q} row-major entries, got {a.size}")
        a = a.reshape(q, q)
    if a.shape != (q, q):
        raise ConfigParse(f"{name}: expected a {q}x{q} matrix")
    return a


def load_fixture(path) -> Fixture:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigParse(f"{path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigParse(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigParse("fixture: top level must be a mapping")
    for key in ("J", "b", "sigma", "n"):
        if key not in raw:
            raise ConfigParse(f"{key}: required field is missing")
    try:
        b = np.asarray(raw["b"], dtype=float).reshape(-1)
        q = int(raw.get("q", b.size))
        if q != b.size:
            raise ConfigParse(f"q: {q} does not match len(b) = {b.size}")
        opt = lambda k: None if raw.get(k) is None else np.asarray(raw[k], dtype=float)
        return Fixture(
            J=_matrix(raw["J"], q, "J"),
            b=b,
            sigma=_matrix(raw["sigma"], q, "sigma"),
            n=int(raw["n"]),
            alphas=[float(a) for a in raw.get("alphas", [0.1])],
            z0=opt("z0"),
            box_lower=opt("box_lower"),
            box_upper=opt("box_upper"),
            rho0=raw.get("rho0"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigParse):
            raise
        raise ConfigParse(f"fixture: bad value ({exc})") from None


@dataclass
class FixtureResult:
    fixture: Fixture
    z: np.ndarray
    x: np.ndarray
    derivative: object
    regions: dict
    sim: dict
    ind: dict


def run_fixture(fx: Fixture) -> FixtureResult:
    S = fx.box()
    f = SaaMap(fx.J, fx.b)
    res = solve(f, S)
    d = derivative_at(f, S, res)
    cov = CovarianceEstimate(fx.sigma, fx.n)
    regions, sim, ind = {}, {}, {}
    for alpha in fx.alphas:
        regions[alpha] = region_auto(d, cov, fx.n, alpha, fx.rho0)
        sim[alpha] = simultaneous_intervals(regions[alpha])
        ind[alpha] = individual_intervals(d, cov, fx.n, alpha)
    return FixtureResult(fx, res.z, res.x, d, regions, sim, ind)


ELLIPSE_LEVELS = tuple(round(0.1 * k, 1) for k in range(1, 10))


def write_fixture_outputs(fr: FixtureResult, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fx = fr.fixture
    S = fx.box()
    rows = []
    for alpha in fx.alphas:
        for iv in (fr.sim[alpha], fr.ind[alpha]):
            rows.extend(interval_rows(iv, fx.n))
            rows.extend(interval_rows(project_intervals_to_x(iv, S), fx.n))
    write_csv(out / "intervals.csv", INTERVAL_HEADER, rows)
    files = {"intervals": "intervals.csv"}

    reg_rows = []
    for alpha, reg in fr.regions.items():
        inside = "" if fx.z0 is None else region_contains(reg, fx.z0)
        stat = "" if fx.z0 is None else reg.statistic(fx.z0)
        reg_rows.append((alpha, reg.kind.value, reg.dof, reg.critical_value,
                         " ".join(repr(float(v)) for v in reg.shape.ravel()), stat, inside))
    write_csv(out / "regions.csv", ["alpha", "kind", "dof", "critical_value", "shape_row_major",
                                     "statistic_z0", "contains_z0"], reg_rows)
    files["regions"] = "regions.csv"

    if fx.q == 2:
        d = fr.derivative
        cov = CovarianceEstimate(fx.sigma, fx.n)
        boundaries = {}
        for level in ELLIPSE_LEVELS:
            reg = region_auto(d, cov, fx.n, round(1.0 - level, 10), fx.rho0)
            if reg.kind is RegionKind.FULL_RANK:
                boundaries[level] = emit_ellipse_boundary(reg)
        if boundaries:
            write_csv(out / "ellipse.csv", ["level", "x", "y"],
                      [row for rows in boundaries.values() for row in rows])
            marks = {"x": tuple(fr.z)}
            if fx.z0 is not None:
                marks["+"] = tuple(fx.z0)
            boxes = {a: fr.sim[a] for a in fx.alphas}
            (out / "ellipse.svg").write_text(ellipse_svg(boundaries, boxes, marks))
            files["ellipse"] = "ellipse.csv"
            files["ellipse_svg"] = "ellipse.svg"
    return files


def format_table(fr: FixtureResult) -> str:
    lines = []
    for alpha in fr.fixture.alphas:
        lines.append(f"{100 * (1 - alpha):.0f}% intervals, n={fr.fixture.n}")
        lines.append(f"{'':6s}{'est':>8s}  {'simultaneous':>18s}  {'individual':>18s}")
        s, i = fr.sim[alpha], fr.ind[alpha]
        for j in range(fr.fixture.q):
            lines.append(f"z{j + 1:<5d}{fr.z[j]:8.4f}  [{s.lo[j]:7.2f}, {s.hi[j]:7.2f}]  "
                         f"[{i.lo[j]:7.2f}, {i.hi[j]:7.2f}]")
    return "\n".join(lines)
