"""On-disk formats: binary snapshot/basis containers, CSV exports, npz blobs.

The flat binary container is a 24-byte header -- magic ``CDR1``, version
u32, two u64 dimension fields -- followed by column-major little-endian
float64 data.  Trajectory files store (num_nodes, num_steps) in the header
(the data has ``num_steps + 1`` columns, one per time point); basis files
reuse the identical layout with (rows, columns) semantics.
"""

import csv
import json
import struct

import numpy as np

from .fom import Trajectory
from .basis import ReducedBasis
from .rom import ReducedOperatorSet
from .vkoga import KernelConfig, KernelModel

MAGIC = b"CDR1"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def _write_container(path, arr, dim_second):
    arr = np.asarray(arr, dtype=float)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, arr.shape[0], dim_second))
        f.write(np.asfortranarray(arr, dtype="<f8").tobytes(order="F"))


def _read_container(path, cols_from_second):
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        magic, version, rows, second = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        cols = cols_from_second(second)
        data = np.frombuffer(f.read(8 * rows * cols), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: truncated payload")
    return data.reshape((rows, cols), order="F").copy(), second


def save_trajectory(path, traj):
    """Write the snapshot matrix; header dims are (num_nodes, num_steps)."""
    if traj.states is None:
        raise ValueError("trajectory was solved without stored states")
    _write_container(path, traj.states, traj.states.shape[1] - 1)


def load_trajectory(path, t_end=None, mu=None):
    """Read a snapshot container back into a :class:`Trajectory`.

    The container carries no time scale or parameter, so ``t_end`` (default
    1.0) and ``mu`` may be supplied by the caller; the QoI row is
    reconstructed from the stored states.
    """
    states, num_steps = _read_container(path, lambda s: s + 1)
    t_end = 1.0 if t_end is None else t_end
    times = np.linspace(0.0, t_end, num_steps + 1)
    return Trajectory(states=states, times=times, qoi=states[-1].copy(), mu=mu)


def save_basis(path, rb):
    """Write basis modes in the snapshot container layout (rows, modes)."""
    _write_container(path, rb.basis, rb.basis.shape[1])


def load_basis(path, product=None, tolerance=0.0):
    basis, num_modes = _read_container(path, lambda s: s)
    if basis.shape[1] != num_modes:
        raise ValueError(f"{path}: inconsistent mode count")
    return ReducedBasis(basis=basis, singular_values=np.zeros(num_modes),
                        product=product, tolerance=tolerance)


def save_qoi_csv(path, times, values):
    """CSV breakthrough-curve export with columns ``t,f``."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "f"])
        for t, v in zip(times, values):
            writer.writerow([f"{t:.17g}", f"{v:.17g}"])


def load_qoi_csv(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != ["t", "f"]:
            raise ValueError(f"{path}: expected header 't,f', got {header}")
        rows = [(float(t), float(v)) for t, v in reader]
    times = np.array([r[0] for r in rows])
    values = np.array([r[1] for r in rows])
    return times, values


def save_singular_values_csv(path, rb):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["k", "sigma"])
        for k, s in enumerate(rb.singular_values):
            writer.writerow([k, f"{s:.17g}"])


def save_reduced_model(path, red, time_meta=None):
    """Self-describing npz blob; enough to run the online phase alone."""
    meta = {"qoi_lift_offset": red.qoi_lift_offset, "basis_ref": red.basis_ref}
    if time_meta:
        meta["time"] = time_meta
    np.savez(path, meta=json.dumps(meta), mass_r=red.mass_r,
             a_diff_r=red.a_diff_r, a_conv_r=red.a_conv_r,
             a_reac_r=red.a_reac_r, rhs_diff_r=red.rhs_diff_r,
             rhs_conv_r=red.rhs_conv_r, rhs_reac_r=red.rhs_reac_r,
             qoi_r=red.qoi_r, init_r=red.init_r)


def load_reduced_model(path):
    with np.load(path, allow_pickle=False) as blob:
        meta = json.loads(str(blob["meta"]))
        red = ReducedOperatorSet(
            mass_r=blob["mass_r"], a_diff_r=blob["a_diff_r"],
            a_conv_r=blob["a_conv_r"], a_reac_r=blob["a_reac_r"],
            rhs_diff_r=blob["rhs_diff_r"], rhs_conv_r=blob["rhs_conv_r"],
            rhs_reac_r=blob["rhs_reac_r"], qoi_r=blob["qoi_r"],
            init_r=blob["init_r"],
            qoi_lift_offset=float(meta["qoi_lift_offset"]),
            basis_ref=meta.get("basis_ref", {}),
        )
    return red, meta.get("time")


def save_kernel_model(path, model):
    """Self-describing npz blob: centers, weights, factor, and config."""
    cfg = model.config
    config_meta = {
        "shape_gamma": cfg.shape_gamma, "lambda_reg": cfg.lambda_reg,
        "max_points": cfg.max_points, "greedy_tol": cfg.greedy_tol,
        "norm_lo": list(cfg.norm_lo), "norm_hi": list(cfg.norm_hi),
    }
    meta = {"config": config_meta, "d_out": model.d_out,
            "flagged": model.flagged,
            "selected_indices": list(map(int, model.selected_indices))}
    np.savez(path, meta=json.dumps(meta), centers=model.centers,
             coefficients=model.coefficients,
             newton_factor=model.newton_factor,
             residual_history=model.residual_history)


def load_kernel_model(path):
    with np.load(path, allow_pickle=False) as blob:
        meta = json.loads(str(blob["meta"]))
        cm = meta["config"]
        config = KernelConfig(shape_gamma=cm["shape_gamma"],
                              lambda_reg=cm["lambda_reg"],
                              max_points=cm["max_points"],
                              greedy_tol=cm["greedy_tol"],
                              norm_lo=tuple(cm["norm_lo"]),
                              norm_hi=tuple(cm["norm_hi"]))
        model = KernelModel(centers=blob["centers"],
                            coefficients=blob["coefficients"],
                            newton_factor=blob["newton_factor"],
                            config=config, d_out=int(meta["d_out"]),
                            selected_indices=list(meta["selected_indices"]),
                            residual_history=blob["residual_history"],
                            flagged=bool(meta["flagged"]))
    return model
