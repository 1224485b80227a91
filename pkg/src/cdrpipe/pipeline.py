"""End-to-end orchestration: FOM -> reduced basis -> kernel surrogate.

A single :func:`run_pipeline` call samples parameters, builds all three
models, measures accuracy and cost of each stage, and returns a report in
the usual benchmark layout (one row per model: dimension, offline seconds,
mean online seconds, relative error) together with the pay-off query count
-- the number of surrogate queries after which the cumulative pipeline cost
undercuts repeated full-order evaluation.

Randomness is fully reproducible: every sampling purpose draws from its own
sub-stream derived from the master seed with a fixed offset, so changing one
sample count never shifts another set's draws.
"""

import csv
import json
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import io as cdrio
from .config import config_hash
from .errors import PipelineStageError
from .fom import Grid1D, Parameter, assemble, qoi_error, solve_fom
from .basis import inc_hapod
from .rom import project, solve_rom
from .vkoga import KernelConfig, fit_fgreedy, predict

# Sub-stream offsets from the master seed (one per sampling purpose).
STREAM_ROM_TRAIN = 1
STREAM_ROM_ERR = 2
STREAM_ML_ERR = 3
STREAM_ROM_TIMING = 4
STREAM_ML_TIMING = 5
STREAM_FOM_CAL = 6


def substream(master_seed, offset):
    """Seed key of a named sub-stream; PCG64 keeps it portable."""
    return (int(master_seed), int(offset))


def sample_parameters(domain, n, seed):
    """Uniform i.i.d. parameter samples from a seeded PCG64 generator.

    ``seed`` may be an int or a sub-stream key; identical seeds reproduce
    the identical sequence.  A degenerate box coordinate yields its fixed
    value.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = np.random.default_rng(seed)
    u = rng.random((n, 2))
    lo = np.array([domain.lower.da, domain.lower.pe])
    hi = np.array([domain.upper.da, domain.upper.pe])
    vals = lo + u * (hi - lo)
    return [Parameter(float(v[0]), float(v[1])) for v in vals]


def corner_parameters(domain):
    """The four box corners, ordered lexicographically by (da, pe)."""
    if domain.is_degenerate():
        warnings.warn("degenerate parameter box: corner points coincide")
    lo, hi = domain.lower, domain.upper
    return [Parameter(lo.da, lo.pe), Parameter(lo.da, hi.pe),
            Parameter(hi.da, lo.pe), Parameter(hi.da, hi.pe)]


@dataclass
class ReportRow:
    model: str
    dimension: int
    offline_s: float
    online_s: float
    rel_err: float | None = None


@dataclass
class PipelineReport:
    """Per-model cost/accuracy rows plus the data behind the report figures."""

    rows: list
    pay_off_queries: int | None
    config_hash: str
    notes: list = field(default_factory=list)
    times: np.ndarray | None = None
    sample_mu: Parameter | None = None
    sample_fom: np.ndarray | None = None
    sample_rom: np.ndarray | None = None
    sample_ml: np.ndarray | None = None
    singular_values: np.ndarray | None = None
    greedy_residuals: np.ndarray | None = None

    def row(self, model):
        for r in self.rows:
            if r.model == model:
                return r
        raise KeyError(model)


def payoff_queries(offline_fom, online_fom, offline_ml, online_ml):
    """Smallest q with offline_ml + q*online_ml <= offline_fom + q*online_fom.

    Returns ``None`` when the surrogate never pays off.
    """
    if offline_ml <= offline_fom:
        return 0
    gain = online_fom - online_ml
    if gain <= 0.0:
        return None
    return int(np.ceil((offline_ml - offline_fom) / gain))


def _stage(name):
    class _StageGuard:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PipelineStageError):
                raise PipelineStageError(name, str(exc)) from exc
            return False

    return _StageGuard()


def corner_snapshot_stream(ops, corners, cfg, corner_times, corner_qois,
                           on_trajectory=None, log=None):
    """Generator of free-DoF snapshot chunks across the corner trajectories.

    Trajectories are solved lazily and released after chunking, so the peak
    memory holds one trajectory plus the compressor's working set.  Solve
    wall times and QoI curves are appended to the caller's lists as a side
    effect; ``on_trajectory(i, traj)`` runs before a trajectory is dropped.
    """
    say = log if log is not None else (lambda msg: None)
    for i, mu in enumerate(corners):
        say(f"FOM trajectory at corner {i}: da={mu.da:g} pe={mu.pe:g}")
        with _stage("fom"):
            t_solve = time.perf_counter()
            traj = solve_fom(ops, mu, cfg.time_num_steps, cfg.time_t_end)
            corner_times.append(time.perf_counter() - t_solve)
            corner_qois.append(traj.qoi)
            if on_trajectory is not None:
                on_trajectory(i, traj)
        snaps = traj.states[1:, :]
        for j in range(0, snaps.shape[1], cfg.pod_chunk_size):
            yield snaps[:, j:j + cfg.pod_chunk_size]


def run_pipeline(cfg, out_dir=None, log=None):
    """Execute the full three-model pipeline described by ``cfg``.

    When ``out_dir`` is given, artifacts are persisted as each stage
    completes (so failures leave a post-mortem trail): corner QoI curves,
    the reduced basis with its singular values, the reduced model blob, the
    kernel model blob, and finally the report files.
    """
    cfg.validate()
    tag = config_hash(cfg)
    domain = cfg.domain()
    num_steps, t_end = cfg.time_num_steps, cfg.time_t_end
    say = log if log is not None else (lambda msg: None)

    def artifact(name):
        return None if out_dir is None else f"{out_dir}/{name}_{tag}"

    # (1) FOM assembly ------------------------------------------------------
    with _stage("assemble"):
        say("assembling FOM operators")
        t0 = time.perf_counter()
        ops = assemble(Grid1D(cfg.grid_num_intervals))
        fom_offline = time.perf_counter() - t0

    # (2)+(3) corner trajectories streamed into the incremental HAPOD ------
    corners = corner_parameters(domain)
    corner_times = []
    corner_qois = []

    def persist_corner(i, traj):
        if out_dir is not None:
            cdrio.save_qoi_csv(artifact(f"fom_qoi_corner{i}") + ".csv",
                               traj.times, traj.qoi)

    with _stage("pod"):
        say("compressing snapshots (incremental HAPOD)")
        t0 = time.perf_counter()
        n_total = len(corners) * (num_steps + 1)
        chunks = corner_snapshot_stream(ops, corners, cfg, corner_times,
                                        corner_qois, persist_corner, log=say)
        basis = inc_hapod(chunks, ops.free_h1_product(), cfg.pod_tol,
                          omega=cfg.pod_omega, n_total=n_total)
        hapod_time = time.perf_counter() - t0 - sum(corner_times)
        say(f"reduced basis: {basis.num_modes} modes")
        if out_dir is not None:
            cdrio.save_basis(artifact("basis") + ".bin", basis)
            cdrio.save_singular_values_csv(artifact("singular_values") + ".csv",
                                           basis)

    # (4) Galerkin projection ----------------------------------------------
    with _stage("project"):
        t0 = time.perf_counter()
        red = project(ops, basis)
        project_time = time.perf_counter() - t0
        if out_dir is not None:
            cdrio.save_reduced_model(
                artifact("reduced_model") + ".npz", red,
                time_meta={"num_steps": num_steps, "t_end": t_end})
    rom_offline = fom_offline + sum(corner_times) + hapod_time + project_time

    # (5) ROM error over corners + fresh random inputs ----------------------
    with _stage("rom"):
        say("measuring ROM error")
        rom_err_mus = corners + sample_parameters(
            domain, cfg.sampling_n_rom_err_test,
            substream(cfg.sampling_seed, STREAM_ROM_ERR))
        rom_errs = []
        sample_curves = None
        for i, mu in enumerate(rom_err_mus):
            f_h = corner_qois[i] if i < len(corners) else \
                solve_fom(ops, mu, num_steps, t_end, store_states=False).qoi
            f_rb = solve_rom(red, mu, num_steps, t_end)
            rom_errs.append(qoi_error(f_rb, f_h))
            if sample_curves is None and i >= len(corners):
                sample_curves = (mu, f_h, f_rb)
        if sample_curves is None and rom_err_mus:
            mu = rom_err_mus[0]
            sample_curves = (mu, corner_qois[0],
                             solve_rom(red, mu, num_steps, t_end))
        rom_rel_err = max(rom_errs) if rom_errs else None

    # (6) ROM training outputs for the surrogate ----------------------------
    with _stage("rom"):
        say(f"generating {cfg.sampling_n_rom_train} ROM training outputs")
        train_mus = sample_parameters(domain, cfg.sampling_n_rom_train,
                                      substream(cfg.sampling_seed,
                                                STREAM_ROM_TRAIN))
        t0 = time.perf_counter()
        rom_train_qois = [solve_rom(red, mu, num_steps, t_end)
                          for mu in train_mus]
        rom_train_time = time.perf_counter() - t0

    # (7) kernel surrogate fit ----------------------------------------------
    with _stage("vkoga"):
        say("fitting kernel surrogate (f-greedy)")
        kcfg = KernelConfig.for_domain(domain, shape_gamma=cfg.vkoga_gamma,
                                       lambda_reg=cfg.vkoga_lambda_reg,
                                       max_points=cfg.vkoga_max_points,
                                       greedy_tol=cfg.vkoga_greedy_tol)
        x_train = corners + train_mus
        y_train = np.vstack([np.vstack(corner_qois)] +
                            ([np.vstack(rom_train_qois)] if rom_train_qois
                             else []))
        t0 = time.perf_counter()
        model = fit_fgreedy(x_train, y_train, kcfg)
        fit_time = time.perf_counter() - t0
        say(f"surrogate: {model.num_centers} centers"
            + (" [flagged]" if model.flagged else ""))
        if out_dir is not None:
            cdrio.save_kernel_model(artifact("kernel_model") + ".npz", model)
    ml_offline = rom_offline + rom_train_time + fit_time

    # (8) surrogate error vs ROM on fresh inputs -----------------------------
    with _stage("vkoga"):
        ml_err_mus = sample_parameters(domain, cfg.sampling_n_ml_err_test,
                                       substream(cfg.sampling_seed,
                                                 STREAM_ML_ERR))
        ml_errs = [qoi_error(predict(model, mu),
                             solve_rom(red, mu, num_steps, t_end))
                   for mu in ml_err_mus]
        ml_rel_err = max(ml_errs) if ml_errs else None

    # (9) online timing -------------------------------------------------------
    with _stage("timing"):
        say("timing online evaluations")
        fom_online = float(np.mean(corner_times))
        timing_mus = sample_parameters(domain, cfg.sampling_n_rom_timing,
                                       substream(cfg.sampling_seed,
                                                 STREAM_ROM_TIMING))
        t0 = time.perf_counter()
        for mu in timing_mus:
            solve_rom(red, mu, num_steps, t_end)
        rom_online = (time.perf_counter() - t0) / len(timing_mus)
        ml_timing_mus = sample_parameters(domain, cfg.sampling_n_ml_timing,
                                          substream(cfg.sampling_seed,
                                                    STREAM_ML_TIMING))
        t0 = time.perf_counter()
        for mu in ml_timing_mus:
            predict(model, mu)
        ml_online = (time.perf_counter() - t0) / len(ml_timing_mus)

    # (10) report -------------------------------------------------------------
    with _stage("report"):
        rows = [
            ReportRow("fom", ops.grid.num_nodes, fom_offline, fom_online),
            ReportRow("rom", basis.num_modes, rom_offline, rom_online,
                      rom_rel_err),
            ReportRow("ml", model.num_centers, ml_offline, ml_online,
                      ml_rel_err),
        ]
        payoff = payoff_queries(fom_offline, fom_online, ml_offline, ml_online)
        notes = []
        if cfg.sampling_n_rom_train == 0:
            notes.append("reduced training set: surrogate fitted on the "
                         "corner FOM outputs only")
        if model.flagged:
            notes.append("kernel fit stopped by power-function breakdown")
        report = PipelineReport(
            rows=rows, pay_off_queries=payoff, config_hash=tag, notes=notes,
            times=np.linspace(0.0, t_end, num_steps + 1),
            sample_mu=sample_curves[0] if sample_curves else None,
            sample_fom=sample_curves[1] if sample_curves else None,
            sample_rom=sample_curves[2] if sample_curves else None,
            sample_ml=predict(model, sample_curves[0]) if sample_curves else None,
            singular_values=basis.singular_values,
            greedy_residuals=model.residual_history,
        )
        if out_dir is not None:
            emit_report(report, out_dir)
            save_report_data(artifact("report_data") + ".npz", report)
    return report


# --- report emission --------------------------------------------------------

_CSV_COLUMNS = ["model", "dimension", "offline_s", "online_s", "rel_err",
                "payoff"]


def _fmt(value):
    return "" if value is None else f"{value:.17g}"


def emit_report(report, out_dir, stem="report"):
    """Write the CSV and aligned-text renderings; returns their paths."""
    base = f"{out_dir}/{stem}_{report.config_hash}"
    csv_path, txt_path = base + ".csv", base + ".txt"

    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_CSV_COLUMNS)
        for r in report.rows:
            payoff = report.pay_off_queries if r.model == "ml" else None
            writer.writerow([r.model, r.dimension, f"{r.offline_s:.17g}",
                             f"{r.online_s:.17g}", _fmt(r.rel_err),
                             "" if payoff is None else str(payoff)])

    widths = (6, 10, 12, 12, 12, 8)
    header = ["model", "dim", "offline_s", "online_s", "rel_err", "payoff"]
    lines = ["".join(h.ljust(w) for h, w in zip(header, widths))]
    for r in report.rows:
        payoff = report.pay_off_queries if r.model == "ml" else None
        cells = [r.model, str(r.dimension), f"{r.offline_s:.3e}",
                 f"{r.online_s:.3e}",
                 "-" if r.rel_err is None else f"{r.rel_err:.3e}",
                 "-" if payoff is None else str(payoff)]
        lines.append("".join(c.ljust(w) for c, w in zip(cells, widths)))
    for note in report.notes:
        lines.append(f"note: {note}")
    with open(txt_path, "w") as f:
        f.write("\n".join(lines) + "\n")
    return csv_path, txt_path


def parse_report_csv(path):
    """Read an emitted report CSV back into rows + payoff."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != _CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        payoff = None
        for rec in reader:
            rows.append(ReportRow(rec[0], int(rec[1]), float(rec[2]),
                                  float(rec[3]),
                                  float(rec[4]) if rec[4] else None))
            if rec[0] == "ml" and rec[5]:
                payoff = int(rec[5])
    return rows, payoff


def save_report_data(path, report):
    """Persist everything needed to re-render report files and figures."""
    meta = {
        "config_hash": report.config_hash,
        "pay_off_queries": report.pay_off_queries,
        "notes": report.notes,
        "rows": [[r.model, r.dimension, r.offline_s, r.online_s, r.rel_err]
                 for r in report.rows],
        "sample_mu": None if report.sample_mu is None
        else [report.sample_mu.da, report.sample_mu.pe],
    }
    arrays = {}
    for name in ("times", "sample_fom", "sample_rom", "sample_ml",
                 "singular_values", "greedy_residuals"):
        value = getattr(report, name)
        if value is not None:
            arrays[name] = value
    np.savez(path, meta=json.dumps(meta), **arrays)


def load_report_data(path):
    with np.load(path, allow_pickle=False) as blob:
        meta = json.loads(str(blob["meta"]))
        rows = [ReportRow(m, int(d), float(off), float(on),
                          None if err is None else float(err))
                for m, d, off, on, err in meta["rows"]]
        sample_mu = meta["sample_mu"]
        report = PipelineReport(
            rows=rows, pay_off_queries=meta["pay_off_queries"],
            config_hash=meta["config_hash"], notes=meta["notes"],
            sample_mu=None if sample_mu is None else Parameter(*sample_mu),
        )
        for name in ("times", "sample_fom", "sample_rom", "sample_ml",
                     "singular_values", "greedy_residuals"):
            if name in blob:
                setattr(report, name, blob[name])
    return report
