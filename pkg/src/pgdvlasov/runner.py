"""Batch execution of a :class:`RunConfig`: stepping, diagnostics and outputs.

Output directory layout::

    run_config.txt      resolved configuration (re-parses to the same config)
    diagnostics.csv     one row per diagnostics_stride steps
    ranks.csv           t, rank, ranks after each substep, fixed-point iterations
    decay_fit.txt       electric-energy decay fit (or the reason it failed)
    error_summary.txt   eps_m, eps_p, eps_h, eps_f
    plot.gp             gnuplot script for the figures
    snapshots/          step_XXXXXXX.csv factor files plus index.csv
"""

from __future__ import annotations

import itertools
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from pgdvlasov._io import atomic_write_text
from pgdvlasov.config import RunConfig, build_config, format_config, load_config, parse_pairs
from pgdvlasov.diagnostics import (
    DecayFitResult,
    ErrorSummary,
    InvalidFit,
    csv_header,
    error_summary,
    fit_decay,
    format_csv,
    observe,
    relative_sq_error,
    resample,
)
from pgdvlasov.field import compute_fields
from pgdvlasov.grid import PhaseGrid
from pgdvlasov.scenarios import build_phase_grid, initial_condition
from pgdvlasov.stepper import StepConfig, StepError, run
from pgdvlasov.tensor import SeparatedFunction, read_snapshot, write_snapshot

log = logging.getLogger(__name__)


@dataclass
class Reference:
    """Snapshot series of a reference run, addressable by time."""

    grid: PhaseGrid
    times: np.ndarray
    functions: list
    _cache: dict = field(default_factory=dict, repr=False)

    def lookup(self, t: float, grid: PhaseGrid, atol: float):
        """Reference function at time ``t`` resampled onto ``grid``, or None."""
        if self.times.size == 0:
            return None
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > atol:
            return None
        key = (i, grid.n_x, grid.n_v)
        if key not in self._cache:
            self._cache[key] = resample(self.functions[i], self.grid, grid)
        return self._cache[key]


def load_reference(path) -> Reference:
    """Load a run directory written with snapshots (``--save-reference``)."""
    path = os.fspath(path)
    cfg = load_config(os.path.join(path, "run_config.txt"))
    grid = build_phase_grid(cfg.scenario)
    index = os.path.join(path, "snapshots", "index.csv")
    if not os.path.exists(index):
        raise FileNotFoundError(f"{index} missing; run the reference with --save-reference")
    times, funcs = [], []
    with open(index) as fh:
        next(fh)
        for line in fh:
            if not line.strip():
                continue
            _, t, name = line.strip().split(",")
            f, _ = read_snapshot(os.path.join(path, "snapshots", name))
            times.append(float(t))
            funcs.append(f)
    return Reference(grid=grid, times=np.array(times), functions=funcs)


@dataclass
class RunResult:
    config: RunConfig
    records: list
    rank_rows: list
    final: SeparatedFunction | None
    summary: ErrorSummary | None
    fit: DecayFitResult | None
    fit_error: str | None = None
    failed_step: int | None = None
    error: str | None = None
    snapshots: list = field(default_factory=list)
    ref_samples: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.failed_step is None and self.error is None


def step_config(cfg: RunConfig) -> StepConfig:
    return StepConfig(
        dt=cfg.dt, tol=cfg.tolerances, recompress=cfg.recompress,
        force_convention=cfg.force_convention,
    )


def execute(
    cfg: RunConfig,
    write: bool = True,
    reference: Reference | None = None,
    keep_snapshots: bool = False,
    progress_every: int = 0,
) -> RunResult:
    """Run one configuration end to end.

    With ``write`` the outputs go to ``cfg.output.directory``; outputs
    collected so far are still written when a step fails. ``keep_snapshots``
    keeps the strided snapshots in memory as ``(step, t, f)`` tuples.
    """
    params = cfg.scenario
    grid = build_phase_grid(params)
    f0 = initial_condition(params, grid)
    scfg = step_config(cfg)
    out = cfg.output
    out_dir = out.directory if write else None
    if reference is None and out.reference:
        reference = load_reference(out.reference)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        atomic_write_text(os.path.join(out_dir, "run_config.txt"), format_config(cfg))

    stride = out.snapshot_stride
    t_atol = 1e-9 * max(1.0, params.t_f)
    fields0 = compute_fields(f0, grid)
    records = [observe(0.0, f0, fields0, grid)]
    rank_rows = [(0.0, f0.rank, f0.rank, f0.rank, f0.rank, 0, 0)]
    snapshots, snap_index, ref_samples = [], [], []

    def take_snapshot(step, t, f):
        if keep_snapshots:
            snapshots.append((step, t, f))
        if out_dir:
            name = f"step_{step:07d}.csv"
            write_snapshot(os.path.join(out_dir, "snapshots", name), f, t)
            snap_index.append((step, t, name))

    def compare(t, f):
        if reference is None:
            return
        fr = reference.lookup(t, grid, t_atol)
        if fr is not None:
            ref_samples.append((t, relative_sq_error(f, fr, grid)))

    if stride:
        take_snapshot(0, 0.0, f0)
    compare(0.0, f0)

    state = {"step": 0, "f": f0}
    t_start = time.perf_counter()

    def observer(t, f, fields, info):
        state["step"] += 1
        state["f"] = f
        m = state["step"]
        records.append(observe(t, f, fields, grid))
        rank_rows.append((t, f.rank, *info.ranks, *info.fp_iterations))
        compare(t, f)
        if stride and (m % stride == 0 or m == params.n_steps):
            take_snapshot(m, t, f)
        if progress_every and m % progress_every == 0:
            log.info("step %d/%d  t=%.4f  rank=%d  (%.1fs)", m, params.n_steps, t, f.rank,
                     time.perf_counter() - t_start)

    failed_step, error = None, None
    try:
        run(f0, grid, scfg, params.n_steps, observer)
    except StepError as exc:
        failed_step = exc.step
        error = str(exc)
        log.error("step %d failed: %s", exc.step, exc)
    wall = time.perf_counter() - t_start

    summary = None
    if len(records) >= 2:
        rel = None
        if len(ref_samples) >= 2:
            rel = tuple(zip(*ref_samples))
        elif reference is not None:
            log.warning("fewer than two reference snapshots match the run times; eps_f skipped")
        summary = error_summary(records, t_f=records[-1].t, ref_errors=rel)
    fit, fit_error = None, None
    try:
        fit = fit_decay([r.t for r in records], [r.electric_energy for r in records])
    except (InvalidFit, ValueError) as exc:
        fit_error = str(exc)

    result = RunResult(
        config=cfg, records=records, rank_rows=rank_rows, final=state["f"],
        summary=summary, fit=fit, fit_error=fit_error, failed_step=failed_step,
        error=error, snapshots=snapshots, ref_samples=ref_samples, wall_time=wall,
    )
    if out_dir:
        write_outputs(out_dir, result, snap_index)
    return result


def _ranks_csv(rows) -> str:
    lines = ["t,rank,rank_a,rank_b,rank_c,fp_iters_a,fp_iters_b"]
    for t, *rest in rows:
        lines.append(",".join([repr(float(t)), *(str(int(a)) for a in rest)]))
    return "\n".join(lines) + "\n"


def _summary_text(result: RunResult) -> str:
    s = result.summary
    if s is None:
        return "status = failed before the first step\n"
    eps_f = "n/a" if s.eps_f is None else repr(s.eps_f)
    lines = [
        f"eps_m = {s.eps_m!r}",
        f"eps_p = {s.eps_p!r}",
        f"eps_h = {s.eps_h!r}",
        f"eps_f = {eps_f}",
        f"t_final = {result.records[-1].t!r}",
        f"status = {'ok' if result.ok else f'failed at step {result.failed_step}'}",
    ]
    return "\n".join(lines) + "\n"


def _fit_text(result: RunResult) -> str:
    if result.fit is None:
        return f"status = invalid\nreason = {result.fit_error}\n"
    f = result.fit
    return (
        f"gamma_fit = {f.gamma_fit!r}\npeaks_used = {f.peaks_used}\n"
        f"fit_rms = {f.fit_rms!r}\nintercept = {f.intercept!r}\n"
        f"peak_times = {' '.join(repr(t) for t in f.peak_times)}\n"
    )


def plot_script(dim: int, fit: DecayFitResult | None) -> str:
    cols = csv_header(dim)
    col = {c: i + 1 for i, c in enumerate(cols)}
    env = ""
    if fit is not None:
        env = f", exp({fit.intercept!r} - 2*{fit.gamma_fit!r}*x) with lines dt 2 title 'fit envelope'"
    return f"""# gnuplot script; run with `gnuplot plot.gp` inside the output directory
# diagnostics.csv columns: {', '.join(cols)}
set datafile separator ','
set terminal pngcairo size 900,600
set xlabel 't'

set output 'electric_energy.png'
set logscale y
set ylabel 'electric energy'
plot 'diagnostics.csv' every ::1 using 1:{col['electric_energy']} with lines title 'electric energy'{env}
unset logscale y

set output 'ranks.png'
set ylabel 'rank'
plot 'ranks.csv' every ::1 using 1:2 with steps title 'rank'

set output 'conservation.png'
set ylabel 'relative drift'
m0 = real(system("awk -F, 'NR==2{{print $2}}' diagnostics.csv"))
h0 = real(system("awk -F, 'NR==2{{print ${col['hamiltonian']}}}' diagnostics.csv"))
plot 'diagnostics.csv' every ::1 using 1:(($2-m0)/m0) with lines title 'mass', \\
     '' every ::1 using 1:((${col['hamiltonian']}-h0)/h0) with lines title 'hamiltonian'
"""


def write_outputs(out_dir: str, result: RunResult, snap_index=()) -> None:
    cfg = result.config
    stride = cfg.output.diagnostics_stride
    recs = result.records
    keep = [r for i, r in enumerate(recs) if i % stride == 0 or i == len(recs) - 1]
    atomic_write_text(os.path.join(out_dir, "diagnostics.csv"), format_csv(keep))
    atomic_write_text(os.path.join(out_dir, "ranks.csv"), _ranks_csv(result.rank_rows))
    atomic_write_text(os.path.join(out_dir, "error_summary.txt"), _summary_text(result))
    atomic_write_text(os.path.join(out_dir, "decay_fit.txt"), _fit_text(result))
    atomic_write_text(os.path.join(out_dir, "plot.gp"), plot_script(cfg.scenario.dim, result.fit))
    if snap_index:
        lines = ["step,t,file"] + [f"{s},{t!r},{name}" for s, t, name in snap_index]
        atomic_write_text(os.path.join(out_dir, "snapshots", "index.csv"), "\n".join(lines) + "\n")


# -- sweeps -------------------------------------------------------------------

SWEEP_COLUMNS = ["n_x", "n_v", "n_steps", "epsilon", "eps_m", "eps_p", "eps_h", "eps_f", "gamma_fit", "status"]


def _sweep_one(config_text: str) -> dict:
    cfg = build_config(parse_pairs(config_text))
    res = execute(cfg, write=True)
    row = {
        "n_x": cfg.scenario.n_x, "n_v": cfg.scenario.n_v, "n_steps": cfg.scenario.n_steps,
        "epsilon": repr(cfg.tolerances.epsilon),
    }
    if not res.ok or res.summary is None:
        row.update({k: "n.c." for k in ("eps_m", "eps_p", "eps_h", "eps_f", "gamma_fit")})
        row["status"] = f"failed at step {res.failed_step}"
        return row
    s = res.summary
    row.update(
        eps_m=f"{s.eps_m:.3e}", eps_p=f"{s.eps_p:.3e}", eps_h=f"{s.eps_h:.3e}",
        eps_f="n/a" if s.eps_f is None else f"{s.eps_f:.3e}",
        gamma_fit="n/a" if res.fit is None else f"{res.fit.gamma_fit:.4f}",
        status="ok",
    )
    return row


def expand_grid(base_pairs, grid: dict, out_dir: str) -> list:
    """One resolved config text per point of the Cartesian ``grid``.

    Every combination is validated before anything runs.
    """
    keys = list(grid)
    texts = []
    for i, combo in enumerate(itertools.product(*(grid[k] for k in keys))):
        pairs = list(base_pairs) + [(k, str(v), None) for k, v in zip(keys, combo)]
        pairs.append(("output.dir", os.path.join(out_dir, f"run_{i:03d}"), None))
        texts.append(format_config(build_config(pairs)))
    return texts


def sweep(base_pairs, grid: dict, out_dir: str, jobs: int = 1) -> list:
    """Run every combination; returns summary rows and writes sweep_summary.csv."""
    texts = expand_grid(base_pairs, grid, out_dir)
    if jobs > 1 and len(texts) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, texts))
    else:
        rows = [_sweep_one(t) for t in texts]
    extra = [k for k in grid if k.split(".", 1)[-1] not in SWEEP_COLUMNS]
    header = ["run"] + SWEEP_COLUMNS[:4] + extra + SWEEP_COLUMNS[4:]
    lines = [",".join(header)]
    for i, (row, text) in enumerate(zip(rows, texts)):
        values = dict(parse_pairs_dict(text))
        cells = [f"run_{i:03d}"] + [str(row[c]) for c in SWEEP_COLUMNS[:4]]
        cells += [values.get(k, "") for k in extra]
        cells += [str(row[c]) for c in SWEEP_COLUMNS[4:]]
        lines.append(",".join(cells))
    os.makedirs(out_dir, exist_ok=True)
    atomic_write_text(os.path.join(out_dir, "sweep_summary.csv"), "\n".join(lines) + "\n")
    return rows


def parse_pairs_dict(text: str) -> dict:
    return {k: v for k, v, _ in parse_pairs(text)}
