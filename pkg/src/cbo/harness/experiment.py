"""
Run directories: seeded Monte Carlo replicates, pointwise averaging and
hashed, byte-stable CSV output.

Layout of a run directory::

    series.csv            replicate-averaged diagnostics
    replicate_000.csv     raw diagnostics of each replicate
    final_state.csv       terminal particles or quantile grid
    chi_t<step>.csv       quantile snapshots (scheme=chi)
    condition_report.txt  concentration quantities of the initial law
    config.txt            the parsed configuration, defaults included
    manifest.txt          seeds, termination, wall time, file hashes
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .. import __version__
from ..diagnostics import check_concentration_conditions, laplace_sweep
from ..errors import SolverError
from ..measure import Ensemble
from ..objective import from_config
from ..particle import CboParams, RngSpec, run
from ..porous import PorousParams, porous_run
from ..pseudo_inverse import ChiSolverParams, QuantileGrid, chi_from_uniform, chi_run
from .config import ExperimentConfig

__all__ = [
    "ExperimentError",
    "ReplicateResult",
    "RunManifest",
    "build_objective",
    "initial_state",
    "run_replicate",
    "average_replicates",
    "run_experiment",
    "read_csv",
    "read_manifest",
    "sweep_alpha",
]


class ExperimentError(RuntimeError):
    """A replicate failed; the experiment was aborted."""

    def __init__(self, message, replicate=None, seed=None, stream=None):
        super().__init__(message)
        self.replicate = replicate
        self.seed = seed
        self.stream = stream


@dataclass
class ReplicateResult:
    index: int
    seed: int
    series: object
    final: object
    snapshots: list = field(default_factory=list)
    initial: object = None

    @property
    def terminated_by(self):
        return self.series.terminated_by

    @property
    def steps_taken(self):
        return self.series.steps_taken


@dataclass
class RunManifest:
    out_dir: Path
    config: ExperimentConfig
    status: str = "ok"
    build: str = ""
    wall_time: float = 0.0
    replicates: list = field(default_factory=list)
    files: dict = field(default_factory=dict)
    error: str = ""

    def to_text(self):
        lines = ["status=%s" % self.status, "package_version=%s" % __version__, "build=%s" % self.build]
        lines.append("wall_time_s=%.3f" % self.wall_time)
        if self.error:
            lines.append("error=%s" % self.error.replace("\n", " "))
        for key, text in self.config.items():
            lines.append("config.%s=%s" % (key, text))
        # values after scheme-dependent defaults are applied
        lines.append("effective.p=%.17g" % self.config.p_exponent)
        lines.append("effective.heaviside_eps=%.17g" % self.config.gate_eps)
        lines.append("effective.max_steps=%d" % self.config.steps)
        for rep in self.replicates:
            i = rep["index"]
            for k in ("seed", "stream", "terminated_by", "steps"):
                if k in rep:
                    lines.append("replicate.%d.%s=%s" % (i, k, rep[k]))
        for name in sorted(self.files):
            lines.append("file.%s.sha256=%s" % (name, self.files[name]))
        return "\n".join(lines) + "\n"


def _source_digest():
    # identifies the build the outputs came from; stable for a fixed checkout
    root = Path(__file__).resolve().parents[1]
    h = hashlib.sha256()
    for path in sorted(root.rglob("*.py")):
        h.update(path.relative_to(root).as_posix().encode())
        h.update(path.read_bytes())
    return h.hexdigest()[:12]


def build_objective(cfg):
    return from_config(cfg.objective, dim=cfg.dim, shift=cfg.shift)


def initial_state(cfg, gen):
    """
    Initial ensemble (particle schemes) or quantile grid (``chi``).

    Gaussian quantile grids are cut at ``eta = h/2`` and ``1 - h/2`` so the
    end nodes stay finite.
    """
    init = cfg.init
    if cfg.scheme == "chi":
        if init.kind == "uniform":
            return chi_from_uniform(init.a, init.b, cfg.K)
        eta = np.linspace(0.0, 1.0, cfg.K)
        h = eta[1] - eta[0]
        return QuantileGrid(norm.ppf(np.clip(eta, 0.5 * h, 1.0 - 0.5 * h), loc=init.a, scale=init.b))
    shape = (cfg.N, cfg.dim)
    if init.kind == "uniform":
        return Ensemble(gen.uniform(init.a, init.b, size=shape))
    return Ensemble(gen.normal(init.a, init.b, size=shape))


def run_replicate(cfg, index):
    """
    Run replicate ``index``. Its generator is ``RngSpec(cfg.seed, index)``;
    the initial ensemble is drawn first, then the noise.
    """
    spec = RngSpec(cfg.seed, index)
    gen = spec.generator()
    obj = build_objective(cfg)
    start = initial_state(cfg, gen)
    snapshots = []
    if cfg.scheme in ("cbo", "cbo_heaviside"):
        params = CboParams(
            lam=cfg.lam,
            sigma=cfg.sigma,
            alpha=cfg.alpha,
            dt=cfg.dt,
            heaviside_eps=cfg.gate_eps,
            max_steps=cfg.steps,
            stop_tol=cfg.stop_tol,
        )
        final, series = run(start, obj, params, gen, record_every=cfg.record_every)
    elif cfg.scheme == "porous":
        params = PorousParams(
            lam=cfg.lam,
            sigma=cfg.sigma,
            alpha=cfg.alpha,
            dt=cfg.dt,
            heaviside_eps=cfg.gate_eps,
            max_steps=cfg.steps,
            stop_tol=cfg.stop_tol,
            p_exponent=cfg.p_exponent,
            mollifier_eps=cfg.mollifier_eps,
        )
        final, series = porous_run(start, obj, params, record_every=cfg.record_every)
    else:
        params = ChiSolverParams(
            lam=cfg.lam,
            sigma=cfg.sigma,
            alpha=cfg.alpha,
            p_exponent=cfg.p_exponent,
            dt=cfg.dt,
            tol=cfg.tol,
            gap_floor=cfg.gap_floor,
            max_steps=cfg.steps,
        )
        final, series = chi_run(start, obj, params, record_every=cfg.record_every, keep_snapshots=True)
        last = series.snapshots[-1][0]
        snapshots = [(n, g) for n, g in series.snapshots if n % cfg.snapshot_every == 0 or n == last]
        series.snapshots = None
    return ReplicateResult(index=index, seed=cfg.seed, series=series, final=final, snapshots=snapshots, initial=start)


def _run_indexed(args):
    cfg, index = args
    try:
        return index, run_replicate(cfg, index), None
    except (SolverError, FloatingPointError) as exc:
        return index, None, "%s: %s" % (type(exc).__name__, exc)


def _run_all(cfg):
    jobs = [(cfg, i) for i in range(cfg.mc_runs)]
    if cfg.workers > 1 and cfg.mc_runs > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, cfg.mc_runs)) as pool:
            outcomes = list(pool.map(_run_indexed, jobs))
    else:
        outcomes = [_run_indexed(job) for job in jobs]
    # reduction only after every replicate is back, in index order
    outcomes.sort(key=lambda o: o[0])
    return outcomes


def _value_at(steps, values, grid):
    # latest record at or before each requested step; a finished replicate
    # holds its terminal value
    idx = np.searchsorted(steps, grid, side="right") - 1
    return values[np.clip(idx, 0, len(steps) - 1)]


def average_replicates(series_list):
    """
    Pointwise mean over replicates on the union of recorded steps.

    Returns a dict of arrays: ``step``, ``t``, ``V_mean``, ``w2_mean``,
    ``w2_std`` (population), ``support_width_mean`` and ``m_f`` (mean of the
    replicate weighted means, shape ``(n, d)``).
    """
    steps = np.unique(np.concatenate([s.step for s in series_list]))
    V = np.array([_value_at(s.step, s.variance, steps) for s in series_list])
    W = np.array([_value_at(s.step, s.w2, steps) for s in series_list])
    S = np.array([_value_at(s.step, s.support_width, steps) for s in series_list])
    M = np.array([_value_at(s.step, s.m_f, steps) for s in series_list])
    t_of = {}
    for s in series_list:
        t_of.update(zip(s.step.tolist(), s.t.tolist()))
    t = np.array([t_of[k] for k in steps.tolist()])
    return {
        "step": steps,
        "t": t,
        "V_mean": _mean(V),
        "w2_mean": _mean(W),
        "w2_std": (W - W[0]).std(axis=0),
        "support_width_mean": _mean(S),
        "m_f": _mean(M),
    }


def _mean(a):
    # offsets from the first replicate, so identical replicates average exactly
    return a[0] + (a - a[0]).mean(axis=0)


def _fmt(x):
    return "%.17g" % x


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else (str(v) if isinstance(v, (int, np.integer)) else _fmt(v)) for v in row) + "\n")


def _write_series(path, avg, dim):
    header = ["step", "t", "V_mean", "w2_mean", "w2_std", "support_width_mean"] + ["m_f_%d" % k for k in range(dim)]
    rows = []
    for i in range(len(avg["step"])):
        rows.append(
            [int(avg["step"][i]), avg["t"][i], avg["V_mean"][i], avg["w2_mean"][i], avg["w2_std"][i], avg["support_width_mean"][i]]
            + list(avg["m_f"][i])
        )
    _write_csv(path, header, rows)


def _write_replicate(path, series):
    dim = series.m_f.shape[1]
    header = ["step", "t", "V", "w2", "weight_norm", "support_width"]
    header += ["mean_%d" % k for k in range(dim)] + ["m_f_%d" % k for k in range(dim)]
    rows = []
    for i in range(len(series)):
        rows.append(
            [int(series.step[i]), series.t[i], series.variance[i], series.w2[i], series.weight_norm[i], series.support_width[i]]
            + list(series.mean[i])
            + list(series.m_f[i])
        )
    _write_csv(path, header, rows)


def _write_grid(path, grid):
    _write_csv(path, ["eta", "chi"], zip(grid.nodes, grid.values))


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_experiment(cfg, out_dir=None):
    """
    Execute ``cfg.mc_runs`` replicates and write the run directory.

    Raises
    ------
    ExperimentError
        If any replicate fails; the manifest is still written, with
        ``status=failed`` and the seed and stream of the first failed replicate.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if out_dir is not None:
        cfg = replace(cfg, out_dir=str(out_dir))
    manifest = RunManifest(out_dir=out, config=cfg, build="cbo-%s+src.%s" % (__version__, _source_digest()))
    started = time.perf_counter()
    outcomes = _run_all(cfg)
    manifest.wall_time = time.perf_counter() - started

    (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    written = ["config.txt"]
    failed = [(i, err) for i, res, err in outcomes if err is not None]
    for i, res, err in outcomes:
        rep = {"index": i, "seed": cfg.seed, "stream": i}
        if res is not None:
            rep["terminated_by"] = res.terminated_by
            rep["steps"] = res.steps_taken
        else:
            rep["terminated_by"] = "error"
        manifest.replicates.append(rep)
    if failed:
        i, err = failed[0]
        manifest.status = "failed"
        manifest.error = "replicate %d (seed %d, stream %d): %s" % (i, cfg.seed, i, err)
        manifest.files = {name: _sha256(out / name) for name in written}
        (out / "manifest.txt").write_text(manifest.to_text(), encoding="utf-8")
        raise ExperimentError(manifest.error, replicate=i, seed=cfg.seed, stream=i)

    results = [res for _, res, _ in outcomes]
    dim = results[0].series.m_f.shape[1]
    _write_series(out / "series.csv", average_replicates([r.series for r in results]), dim)
    written.append("series.csv")
    for r in results:
        name = "replicate_%03d.csv" % r.index
        _write_replicate(out / name, r.series)
        written.append(name)

    if cfg.scheme == "chi":
        _write_csv(
            out / "final_state.csv",
            ["replicate", "eta", "chi"],
            [[r.index, e, c] for r in results for e, c in zip(r.final.nodes, r.final.values)],
        )
        for n, grid in results[0].snapshots:
            name = "chi_t%d.csv" % n
            _write_grid(out / name, grid)
            written.append(name)
    else:
        rows = [[r.index] + list(x) for r in results for x in r.final.positions]
        _write_csv(out / "final_state.csv", ["replicate"] + ["x_%d" % k for k in range(dim)], rows)
    written.append("final_state.csv")

    obj = build_objective(cfg)
    try:
        report = check_concentration_conditions(results[0].initial, obj, cfg.lam, cfg.sigma, cfg.alpha).to_text()
    except ValueError as exc:
        report = "status=unavailable\nreason=%s\n" % exc
    (out / "condition_report.txt").write_text(report, encoding="utf-8")
    written.append("condition_report.txt")

    manifest.files = {name: _sha256(out / name) for name in written}
    (out / "manifest.txt").write_text(manifest.to_text(), encoding="utf-8")
    return manifest


def read_csv(path):
    """Read a CSV written by this module into a dict of float arrays keyed by header."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError("no such file: %s" % path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if not header or header == [""]:
            raise ValueError("%s has no header row" % path)
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ValueError("malformed CSV %s: %s" % (path, exc))
    if data.size == 0:
        raise ValueError("%s has no data rows" % path)
    if data.shape[1] != len(header):
        raise ValueError("%s: %d columns in header, %d in data" % (path, len(header), data.shape[1]))
    return {name: data[:, k] for k, name in enumerate(header)}


def read_manifest(run_dir):
    path = Path(run_dir) / "manifest.txt"
    out = {}
    if path.is_file():
        for line in path.read_text(encoding="utf-8").splitlines():
            if "=" in line:
                k, v = line.split("=", 1)
                out[k] = v
    return out


def sweep_alpha(cfg, alphas, out_dir=None):
    """
    Run ``cfg`` once per ``alpha`` into ``<out_dir>/alpha_<alpha>`` and
    tabulate the terminal distance of the averaged weighted mean from the
    minimizer, together with the Laplace gap of the initial law.

    Returns
    -------
    rows : list of dict
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    obj = build_objective(cfg)
    if obj.x_star is None:
        raise ValueError("objective %r has no known minimizer" % cfg.objective)
    initial = initial_state(cfg, RngSpec(cfg.seed, 0).generator())
    gaps = {a: g for a, _, g in laplace_sweep(initial, obj, sorted(alphas))}
    rows = []
    for a in alphas:
        sub = out / ("alpha_%s" % _fmt(a))
        run_experiment(replace(cfg, alpha=float(a)), out_dir=sub)
        series = read_csv(sub / "series.csv")
        m_f = np.array([series["m_f_%d" % k][-1] for k in range(cfg.dim)])
        rows.append(
            {
                "alpha": float(a),
                "distance": float(np.linalg.norm(m_f - obj.x_star)),
                "laplace_gap_initial": gaps[float(a)],
                "m_f": m_f,
            }
        )
    header = ["alpha", "distance", "laplace_gap_initial"] + ["m_f_%d" % k for k in range(cfg.dim)]
    _write_csv(
        out / "alpha_sweep.csv",
        header,
        [[r["alpha"], r["distance"], r["laplace_gap_initial"]] + list(r["m_f"]) for r in rows],
    )
    return rows
