"""Command-line interface for the FOM / RB-ROM / kernel-surrogate pipeline.

Subcommands mirror the pipeline stages and compose through artifacts written
under ``--out`` (filenames are content-addressed with the config hash):

    assemble    validate and summarize the FOM operators
    fom-solve   one full-order transient solve at --da/--pe
    pod-build   corner trajectories -> HAPOD basis -> reduced model
    rom-solve   one reduced solve at --da/--pe (needs pod-build)
    vkoga-fit   fit the kernel surrogate (needs pod-build)
    predict     kernel-surrogate breakthrough curve at --da/--pe
    run         full pipeline + report (CSV, text, figures)
    report      re-render report files from a stored report_data blob

Exit codes: 0 on success, 2 for configuration errors, and one distinct code
per failed stage (see EXIT_CODES).
"""

import argparse
import os
import sys
import time

import numpy as np

from . import io as cdrio
from .config import PipelineConfig, config_hash, load_config, save_config
from .errors import CdrPipeError, PipelineStageError
from .figures import render_report_figures
from .fom import Grid1D, Parameter, assemble, solve_fom
from .pipeline import (corner_parameters, corner_snapshot_stream, emit_report,
                       load_report_data, run_pipeline, sample_parameters,
                       substream, STREAM_ROM_TRAIN)
from .basis import inc_hapod
from .rom import project, solve_rom
from .vkoga import KernelConfig, fit_fgreedy, predict as kernel_predict

EXIT_CODES = {
    "config": 2,
    "assemble": 10,
    "fom": 11,
    "pod": 12,
    "project": 13,
    "rom": 14,
    "vkoga": 15,
    "predict": 16,
    "timing": 17,
    "report": 18,
}


def _log(msg):
    print(msg, file=sys.stderr)


def _load_cfg(args):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg.sampling_seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    cfg.validate()
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg


def _artifact(cfg, name, ext):
    return os.path.join(cfg.output_dir, f"{name}_{config_hash(cfg)}.{ext}")


def _mu(args):
    return Parameter(args.da, args.pe)


def cmd_assemble(args, cfg):
    ops = assemble(Grid1D(cfg.grid_num_intervals))
    print(f"grid: {cfg.grid_num_intervals} intervals, "
          f"{ops.grid.num_nodes} nodes, h = {ops.grid.h:.6g}")
    print(f"constrained DoFs: {list(ops.dirichlet_dofs)}, "
          f"free DoFs: {ops.num_free}")
    print("affine components: mass, a_diff, a_conv, a_reac "
          "(tridiagonal), 3 load vectors, QoI functional, H1 product")
    return 0


def cmd_fom_solve(args, cfg):
    ops = assemble(Grid1D(cfg.grid_num_intervals))
    traj = solve_fom(ops, _mu(args), cfg.time_num_steps, cfg.time_t_end)
    tag = f"da{args.da:g}_pe{args.pe:g}"
    bin_path = _artifact(cfg, f"fom_traj_{tag}", "bin")
    csv_path = _artifact(cfg, f"fom_qoi_{tag}", "csv")
    cdrio.save_trajectory(bin_path, traj)
    cdrio.save_qoi_csv(csv_path, traj.times, traj.qoi)
    print(bin_path)
    print(csv_path)
    return 0


def cmd_pod_build(args, cfg):
    ops = assemble(Grid1D(cfg.grid_num_intervals))
    corners = corner_parameters(cfg.domain())
    corner_times, corner_qois = [], []
    chunks = corner_snapshot_stream(ops, corners, cfg, corner_times,
                                    corner_qois, log=_log)
    n_total = len(corners) * (cfg.time_num_steps + 1)
    basis = inc_hapod(chunks, ops.free_h1_product(), cfg.pod_tol,
                      omega=cfg.pod_omega, n_total=n_total)
    _log(f"reduced basis: {basis.num_modes} modes")
    red = project(ops, basis)
    basis_path = _artifact(cfg, "basis", "bin")
    sv_path = _artifact(cfg, "singular_values", "csv")
    red_path = _artifact(cfg, "reduced_model", "npz")
    cdrio.save_basis(basis_path, basis)
    cdrio.save_singular_values_csv(sv_path, basis)
    cdrio.save_reduced_model(red_path, red,
                             time_meta={"num_steps": cfg.time_num_steps,
                                        "t_end": cfg.time_t_end})
    for i, qoi in enumerate(corner_qois):
        cdrio.save_qoi_csv(_artifact(cfg, f"fom_qoi_corner{i}", "csv"),
                           np.linspace(0.0, cfg.time_t_end, qoi.size), qoi)
    print(basis_path)
    print(sv_path)
    print(red_path)
    return 0


def _load_reduced(cfg):
    path = _artifact(cfg, "reduced_model", "npz")
    if not os.path.exists(path):
        raise PipelineStageError(
            "rom", f"no reduced model at {path}; run 'pod-build' first")
    return cdrio.load_reduced_model(path)


def cmd_rom_solve(args, cfg):
    red, _ = _load_reduced(cfg)
    qoi = solve_rom(red, _mu(args), cfg.time_num_steps, cfg.time_t_end)
    times = np.linspace(0.0, cfg.time_t_end, cfg.time_num_steps + 1)
    path = _artifact(cfg, f"rom_qoi_da{args.da:g}_pe{args.pe:g}", "csv")
    cdrio.save_qoi_csv(path, times, qoi)
    print(path)
    return 0


def cmd_vkoga_fit(args, cfg):
    red, _ = _load_reduced(cfg)
    ops = assemble(Grid1D(cfg.grid_num_intervals))
    domain = cfg.domain()
    corners = corner_parameters(domain)
    _log("computing corner FOM outputs")
    corner_qois = [solve_fom(ops, mu, cfg.time_num_steps, cfg.time_t_end,
                             store_states=False).qoi for mu in corners]
    train_mus = sample_parameters(domain, cfg.sampling_n_rom_train,
                                  substream(cfg.sampling_seed,
                                            STREAM_ROM_TRAIN))
    _log(f"computing {len(train_mus)} ROM training outputs")
    rom_qois = [solve_rom(red, mu, cfg.time_num_steps, cfg.time_t_end)
                for mu in train_mus]
    kcfg = KernelConfig.for_domain(domain, shape_gamma=cfg.vkoga_gamma,
                                   lambda_reg=cfg.vkoga_lambda_reg,
                                   max_points=cfg.vkoga_max_points,
                                   greedy_tol=cfg.vkoga_greedy_tol)
    model = fit_fgreedy(corners + train_mus,
                        np.vstack(corner_qois + rom_qois), kcfg)
    _log(f"surrogate: {model.num_centers} centers"
         + (" [flagged]" if model.flagged else ""))
    path = _artifact(cfg, "kernel_model", "npz")
    cdrio.save_kernel_model(path, model)
    print(path)
    return 0


def cmd_predict(args, cfg):
    path = _artifact(cfg, "kernel_model", "npz")
    if not os.path.exists(path):
        raise PipelineStageError(
            "predict", f"no kernel model at {path}; run 'vkoga-fit' first")
    model = cdrio.load_kernel_model(path)
    values = kernel_predict(model, _mu(args))
    times = np.linspace(0.0, cfg.time_t_end, values.size)
    out = _artifact(cfg, f"ml_qoi_da{args.da:g}_pe{args.pe:g}", "csv")
    cdrio.save_qoi_csv(out, times, values)
    print(out)
    return 0


def cmd_run(args, cfg):
    t0 = time.perf_counter()
    report = run_pipeline(cfg, out_dir=cfg.output_dir, log=_log)
    csv_path, txt_path = emit_report(report, cfg.output_dir)
    figure_paths = render_report_figures(report, cfg.output_dir)
    save_config(os.path.join(cfg.output_dir,
                             f"config_{report.config_hash}.txt"), cfg)
    _log(f"pipeline finished in {time.perf_counter() - t0:.1f} s")
    with open(txt_path) as f:
        print(f.read(), end="")
    for path in [csv_path, txt_path, *figure_paths]:
        print(path)
    return 0


def cmd_report(args, cfg):
    path = _artifact(cfg, "report_data", "npz")
    if not os.path.exists(path):
        raise PipelineStageError(
            "report", f"no report data at {path}; run 'run' first")
    report = load_report_data(path)
    csv_path, txt_path = emit_report(report, cfg.output_dir)
    figure_paths = render_report_figures(report, cfg.output_dir)
    for p in [csv_path, txt_path, *figure_paths]:
        print(p)
    return 0


def _add_mu_arguments(parser):
    parser.add_argument("--da", type=float, required=True,
                        help="reaction-rate coefficient (Damkoehler number)")
    parser.add_argument("--pe", type=float, required=True,
                        help="convection-strength coefficient (Peclet number)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cdrpipe",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", metavar="PATH",
                        help="flat key=value configuration file")
    parser.add_argument("--seed", type=int, metavar="N",
                        help="override sampling.seed")
    parser.add_argument("--out", metavar="DIR",
                        help="override output.dir for all artifacts")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("assemble", help="validate and summarize FOM operators")
    p = sub.add_parser("fom-solve", help="one full-order transient solve")
    _add_mu_arguments(p)
    sub.add_parser("pod-build",
                   help="corner trajectories -> HAPOD basis -> reduced model")
    p = sub.add_parser("rom-solve", help="one reduced transient solve")
    _add_mu_arguments(p)
    sub.add_parser("vkoga-fit", help="fit the kernel surrogate")
    p = sub.add_parser("predict", help="evaluate the kernel surrogate")
    _add_mu_arguments(p)
    sub.add_parser("run", help="full pipeline with report and figures")
    sub.add_parser("report", help="re-render report files from stored data")
    return parser


_COMMANDS = {
    "assemble": (cmd_assemble, "assemble"),
    "fom-solve": (cmd_fom_solve, "fom"),
    "pod-build": (cmd_pod_build, "pod"),
    "rom-solve": (cmd_rom_solve, "rom"),
    "vkoga-fit": (cmd_vkoga_fit, "vkoga"),
    "predict": (cmd_predict, "predict"),
    "run": (cmd_run, "report"),
    "report": (cmd_report, "report"),
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_cfg(args)
    except (ValueError, OSError) as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CODES["config"]
    handler, default_stage = _COMMANDS[args.command]
    try:
        return handler(args, cfg)
    except PipelineStageError as exc:
        _log(str(exc))
        return EXIT_CODES.get(exc.stage, EXIT_CODES[default_stage])
    except CdrPipeError as exc:
        _log(f"{args.command}: {exc}")
        return EXIT_CODES[default_stage]


if __name__ == "__main__":
    sys.exit(main())
