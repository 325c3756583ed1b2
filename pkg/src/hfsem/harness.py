"""Config-driven Monte Carlo studies: simulate, estimate, test, aggregate.

Replications are independent given (config, base seed, replication
index), so they run on a process pool; results are merged in replication
order and every output file is byte-identical for any worker count.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import pathlib
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .errors import HfsemError
from .inference import chi2_upper_quantile, gof_test, penalized_gof_test
from .matrixcalc import asymcov_w, half_dim, vech
from .qmle import fit, theoretical_se
from .realized import realized_cov
from .sde import replication_seed, simulate_observations
from .sparse import sparse_pipeline


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _csv_line(cells) -> str:
    return ",".join(_fmt(c) if not isinstance(c, str) else c for c in cells) + "\r\n"


@dataclass
class RepOutcome:
    """Everything one replication produced (or the error that ended it)."""

    rep: int
    seed: int
    vech_q: Optional[np.ndarray] = None
    models: list = field(default_factory=list)
    error: Optional[str] = None


@dataclass
class ModelOutcome:
    name: str
    theta: np.ndarray
    contrast: float
    converged: bool
    iterations: int
    statistic: float
    df: int
    critical: float
    p_value: float
    reject: bool
    sparse_active: Optional[tuple] = None
    sparse_statistic: Optional[float] = None
    sparse_df: Optional[int] = None
    sparse_critical: Optional[float] = None
    sparse_p_value: Optional[float] = None
    sparse_reject: Optional[bool] = None
    sparse_theta_po: Optional[np.ndarray] = None
    sparse_blocked: int = 0


# Worker processes inherit the experiment through the pool initializer.
_WORKER_CFG: Optional[ExperimentConfig] = None


def _init_worker(cfg: ExperimentConfig):
    global _WORKER_CFG
    _WORKER_CFG = cfg


def run_replication(cfg: ExperimentConfig, rep: int) -> RepOutcome:
    """Simulate one path, fit every model and run the tests."""
    seed = replication_seed(cfg.seed, rep)
    out = RepOutcome(rep=rep, seed=seed)
    try:
        path = simulate_observations(cfg.system, cfg.grid, seed)
        rc = realized_cov(path)
        out.vech_q = vech(rc.q)
        for spec in cfg.fit_models:
            fr = fit(rc, spec.mask, spec.theta_init,
                     multistart=cfg.multistart, seed=seed, compute_se=False)
            report = gof_test(rc, fr, spec.mask, cfg.alpha)
            mo = ModelOutcome(
                name=spec.name, theta=fr.theta, contrast=fr.contrast,
                converged=fr.converged, iterations=fr.iterations,
                statistic=report.statistic, df=report.df, critical=report.critical,
                p_value=report.p_value, reject=report.reject,
            )
            if cfg.penalty is not None:
                sp = sparse_pipeline(rc, spec.mask, spec.theta_init, cfg.penalty,
                                     init_fit=fr)
                sreport = penalized_gof_test(rc, sp.po_fit, len(sp.active_set),
                                             spec.mask, cfg.alpha)
                mo.sparse_active = sp.active_set
                mo.sparse_statistic = sreport.statistic
                mo.sparse_df = sreport.df
                mo.sparse_critical = sreport.critical
                mo.sparse_p_value = sreport.p_value
                mo.sparse_reject = sreport.reject
                mo.sparse_theta_po = sp.theta_po
                mo.sparse_blocked = len(sp.lsa.blocked_slots)
            out.models.append(mo)
    except HfsemError as exc:
        out.error = f"{type(exc).__name__}: {exc}"
    return out


def _worker(rep: int) -> RepOutcome:
    return run_replication(_WORKER_CFG, rep)


@dataclass
class AggregateReport:
    """Collected per-replication results plus derived summaries."""

    cfg: ExperimentConfig
    outcomes: list
    sigma0: np.ndarray
    elapsed: float

    @property
    def ok(self) -> list:
        return [o for o in self.outcomes if o.error is None]

    @property
    def failures(self) -> list:
        return [o for o in self.outcomes if o.error is not None]

    def model_outcomes(self, name: str) -> list:
        return [m for o in self.ok for m in o.models if m.name == name]

    def q_matrix(self) -> np.ndarray:
        return np.array([o.vech_q for o in self.ok])

    def zscores(self) -> np.ndarray:
        """Replication x p-bar matrix of CLT z-scores of vech Q."""
        w = asymcov_w(self.sigma0)
        sd = np.sqrt(np.diag(w))
        target = vech(self.sigma0)
        return np.sqrt(self.cfg.grid.n) * (self.q_matrix() - target) / sd


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None,
                   progress: bool = False) -> AggregateReport:
    """Run every replication (in parallel when threads != 1) and aggregate.

    Hard failures inside a replication are recorded and excluded; more
    than one percent of failures aborts the experiment.
    """
    t0 = time.monotonic()
    reps = range(cfg.replications)
    if threads is None:
        threads = os.cpu_count() or 1
    threads = max(1, min(threads, cfg.replications))
    if threads == 1:
        outcomes = [run_replication(cfg, r) for r in reps]
    else:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=threads, initializer=_init_worker, initargs=(cfg,)) as pool:
            chunk = max(1, cfg.replications // (8 * threads))
            outcomes = list(pool.map(_worker, reps, chunksize=chunk))
    outcomes.sort(key=lambda o: o.rep)
    report = AggregateReport(cfg=cfg, outcomes=outcomes,
                             sigma0=cfg.system.implied_sigma(),
                             elapsed=time.monotonic() - t0)
    n_fail = len(report.failures)
    if n_fail > 0.01 * cfg.replications:
        details = "; ".join(f"rep {o.rep}: {o.error}" for o in report.failures[:5])
        raise RuntimeError(
            f"{n_fail}/{cfg.replications} replications failed (> 1%): {details}")
    return report


def _vech_pair(k: int, p: int) -> tuple:
    """(i, j) 1-based entry of the vech position k."""
    for j in range(p):
        width = p - j
        if k < width:
            return k + j + 1, j + 1
        k -= width
    raise IndexError(k)


def _five_numbers(x: np.ndarray) -> tuple:
    qs = np.percentile(x, [0, 25, 50, 75, 100])  # linear interpolation (type 7)
    return tuple(qs)


def summary_rows(report: AggregateReport) -> list:
    """Rows of (quantity, mean, sd, theoretical value, theoretical sd, five-number summary)."""
    cfg = report.cfg
    n = cfg.grid.n
    rows = []
    qm = report.q_matrix()
    target = vech(report.sigma0)
    theo_sd = np.sqrt(np.diag(asymcov_w(report.sigma0)) / n)
    p = report.sigma0.shape[0]
    for k in range(qm.shape[1]):
        i, j = _vech_pair(k, p)
        col = qm[:, k]
        rows.append((f"Q[{i},{j}]", col.mean(), col.std(ddof=1),
                     target[k], theo_sd[k]) + _five_numbers(col))
    for spec in cfg.fit_models:
        mos = report.model_outcomes(spec.name)
        if not mos:
            continue
        thetas = np.array([m.theta for m in mos])
        se = None
        if spec.theta_true is not None:
            se = theoretical_se(spec.mask, spec.theta_true, n)
        for jdx, label in enumerate(spec.mask.labels):
            col = thetas[:, jdx]
            rows.append((f"{spec.name}:{label}", col.mean(), col.std(ddof=1),
                         spec.theta_true[jdx] if spec.theta_true is not None else "",
                         se[jdx] if se is not None else "") + _five_numbers(col))
        stats = np.array([m.statistic for m in mos])
        df = mos[0].df
        rows.append((f"{spec.name}:T", stats.mean(), stats.std(ddof=1),
                     float(df), float(np.sqrt(2.0 * df))) + _five_numbers(stats))
        if cfg.penalty is not None:
            sstats = np.array([m.sparse_statistic for m in mos])
            sdf = np.array([m.sparse_df for m in mos])
            df_mode = int(np.bincount(sdf).argmax())
            rows.append((f"{spec.name}:T_check", sstats.mean(), sstats.std(ddof=1),
                         float(df_mode), float(np.sqrt(2.0 * df_mode))) + _five_numbers(sstats))
            active = np.array([len(m.sparse_active) for m in mos], dtype=float)
            rows.append((f"{spec.name}:active_count", active.mean(), active.std(ddof=1),
                         "", "") + _five_numbers(active))
    return rows


def emit_tables(report: AggregateReport, outdir) -> list:
    """Write summary.csv, realized.csv, estimates.csv, tests.csv, qq.csv and run.json."""
    outdir = pathlib.Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = report.cfg
    written = []

    def emit(name, text):
        path = outdir / name
        path.write_text(text, newline="")
        written.append(str(path))

    # summary.csv
    lines = [_csv_line(("quantity", "mean", "sd", "theoretical_value", "theoretical_sd",
                        "min", "q1", "median", "q3", "max"))]
    for row in summary_rows(report):
        lines.append(_csv_line(row))
    emit("summary.csv", "".join(lines))

    # realized.csv: vech(Q) per replication
    p = report.sigma0.shape[0]
    header = ["rep", "seed"] + [
        "Q[%d,%d]" % _vech_pair(k, p) for k in range(half_dim(p))]
    lines = [_csv_line(header)]
    for o in report.ok:
        lines.append(_csv_line([o.rep, o.seed] + list(o.vech_q)))
    emit("realized.csv", "".join(lines))

    # estimates.csv: one row per (rep, model)
    lines = [_csv_line(("rep", "model", "converged", "iterations", "contrast", "theta..."))]
    for o in report.ok:
        for m in o.models:
            lines.append(_csv_line([o.rep, m.name, m.converged, m.iterations,
                                    m.contrast] + list(m.theta)))
    emit("estimates.csv", "".join(lines))

    # tests.csv
    header = ["rep", "model", "kind", "statistic", "df", "critical", "p_value", "reject"]
    lines = [_csv_line(header)]
    for o in report.ok:
        for m in o.models:
            lines.append(_csv_line([o.rep, m.name, "plain", m.statistic, m.df,
                                    m.critical, m.p_value, m.reject]))
            if m.sparse_statistic is not None:
                lines.append(_csv_line([o.rep, m.name, "penalized", m.sparse_statistic,
                                        m.sparse_df, m.sparse_critical,
                                        m.sparse_p_value, m.sparse_reject]))
    emit("tests.csv", "".join(lines))

    # qq.csv: sorted z-scores of vech Q against normal quantiles, and test
    # statistics against chi-squared quantiles, at (r - 1/2)/R positions.
    import scipy.stats

    lines = [_csv_line(("series", "rank", "value", "theoretical"))]
    z = report.zscores()
    nrep = z.shape[0]
    pos = (np.arange(1, nrep + 1) - 0.5) / nrep
    normal_q = scipy.stats.norm.ppf(pos)
    for k in range(z.shape[1]):
        i, j = _vech_pair(k, p)
        for r, (v, t) in enumerate(zip(np.sort(z[:, k]), normal_q), start=1):
            lines.append(_csv_line([f"z[Q[{i},{j}]]", r, v, t]))
    for spec in cfg.fit_models:
        mos = report.model_outcomes(spec.name)
        if not mos:
            continue
        stats = np.sort(np.array([m.statistic for m in mos]))
        chi_q = np.array([chi2_upper_quantile(mos[0].df, 1.0 - u) for u in pos])
        for r, (v, t) in enumerate(zip(stats, chi_q), start=1):
            lines.append(_csv_line([f"T[{spec.name}]", r, v, t]))
    emit("qq.csv", "".join(lines))

    # sparse.csv: active set per replication
    if cfg.penalty is not None:
        lines = [_csv_line(("rep", "model", "active_count", "blocked", "active_slots"))]
        for o in report.ok:
            for m in o.models:
                if m.sparse_active is None:
                    continue
                slots = " ".join(str(s) for s in m.sparse_active)
                lines.append(_csv_line([o.rep, m.name, len(m.sparse_active),
                                        m.sparse_blocked, f'"{slots}"']))
        emit("sparse.csv", "".join(lines))

    # run.json: config echo, environment and failure record
    import scipy

    run = {
        "experiment": cfg.doc or {"name": cfg.name},
        "resolved": {
            "name": cfg.name,
            "replications": cfg.replications,
            "seed": cfg.seed,
            "alpha": cfg.alpha,
            "grid": {"n": cfg.grid.n, "h": cfg.grid.h, "horizon": cfg.grid.horizon},
            "regime": cfg.regime,
            "penalty": None if cfg.penalty is None else {
                "lambda1": cfg.penalty.lambda1, "lambda2": cfg.penalty.lambda2,
                "gamma": cfg.penalty.gamma, "delta": cfg.penalty.delta,
            },
            "fit_models": [spec.name for spec in cfg.fit_models],
        },
        "seed_rule": "per-replication seed = SeedSequence(entropy=base, spawn_key=(rep,)) as uint64",
        "versions": {"hfsem": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "failures": [{"rep": o.rep, "error": o.error} for o in report.failures],
        "elapsed_seconds": round(report.elapsed, 3),
    }
    emit("run.json", json.dumps(run, indent=1, sort_keys=True) + "\n")
    return written
