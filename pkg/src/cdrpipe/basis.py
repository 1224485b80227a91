"""Snapshot compression: classical POD and an incremental hierarchical POD.

Both constructions return a basis that is orthonormal in a caller-supplied
inner product (the full H1 matrix in the pipeline).  The classical variant
eigendecomposes the snapshot Gramian; the incremental variant consumes the
snapshots chunk by chunk and only ever forms small Gramians of size
(modes + chunk), which is what makes long trajectories tractable.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotSPDError

#: Relative eigenvalue cutoff below which Gramian modes count as noise.
RANK_RTOL = 1e-14

#: Default split between intermediate and final accuracy in the HAPOD.
DEFAULT_OMEGA = 0.75


@dataclass
class ReducedBasis:
    """Product-orthonormal modes with the singular values that ranked them.

    ``basis`` has one row per free DoF and one column per mode;
    ``singular_values`` are nonincreasing and positive; ``tolerance`` records
    the target the construction aimed for.
    """

    basis: np.ndarray
    singular_values: np.ndarray
    product: object
    tolerance: float

    @property
    def num_modes(self):
        return self.basis.shape[1]


def apply_product(product, x):
    """``product @ x`` for banded (``matmat``/``matvec``) or dense products."""
    if hasattr(product, "matmat"):
        return product.matmat(x) if x.ndim == 2 else product.matvec(x)
    product = np.asarray(product)
    return product @ x


def check_spd(product, dim):
    """Validate symmetry/positive-definiteness of the product matrix."""
    if hasattr(product, "cholesky_check"):
        product.cholesky_check()
        return
    product = np.asarray(product)
    if product.shape != (dim, dim):
        raise ValueError(f"product has shape {product.shape}, expected {(dim, dim)}")
    if not np.allclose(product, product.T, rtol=1e-12, atol=0.0):
        raise NotSPDError("product matrix is not symmetric")
    try:
        np.linalg.cholesky(product)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError("product matrix is not positive definite") from exc


def orthonormalize(vectors, product, drop_tol=1e-13):
    """Product-orthonormalize columns by repeated modified Gram-Schmidt.

    Columns whose norm collapses below ``drop_tol`` times their original norm
    are dropped.  Two orthogonalization sweeps push the result to roundoff
    orthonormality even when the input is badly conditioned.
    """
    v = np.array(vectors, dtype=float, copy=True)
    kept = []
    for j in range(v.shape[1]):
        col = v[:, j]
        orig = np.sqrt(max(col @ apply_product(product, col), 0.0))
        if orig == 0.0:
            continue
        for _ in range(2):
            if kept:
                basis = v[:, kept]
                col = col - basis @ (basis.T @ apply_product(product, col))
        norm = np.sqrt(max(col @ apply_product(product, col), 0.0))
        if norm <= drop_tol * orig:
            continue
        v[:, j] = col / norm
        kept.append(j)
    return v[:, kept]


def _gramian(snapshots, product):
    """Small dense Gramian ``S^T P S``; kept separate so tests can observe
    the largest working set the incremental construction ever builds."""
    ps = apply_product(product, snapshots)
    g = snapshots.T @ ps
    return 0.5 * (g + g.T)


def pod(snapshots, product, tol):
    """POD of a snapshot set through its Gramian.

    Retains the smallest number of modes whose discarded eigenvalue mass is
    at most ``tol**2`` times the total mass; eigenvalues below
    ``RANK_RTOL * lambda_max`` are treated as rank noise and never kept.
    An all-zero snapshot set yields a valid empty basis.
    """
    snapshots = np.asarray(snapshots, dtype=float)
    if snapshots.ndim != 2:
        raise ValueError("snapshots must be a 2d array (one column per snapshot)")
    n, m = snapshots.shape
    if m < 1:
        raise ValueError("need at least one snapshot")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    check_spd(product, n)

    lam, vecs = scipy.linalg.eigh(_gramian(snapshots, product))
    lam = lam[::-1]
    vecs = vecs[:, ::-1]
    lam = np.clip(lam, 0.0, None)
    total = lam.sum()
    if total == 0.0 or tol >= 1.0:
        # discarding everything already meets the energy criterion
        return ReducedBasis(np.zeros((n, 0)), np.zeros(0), product, tol)

    rank = int(np.count_nonzero(lam > RANK_RTOL * lam[0]))
    discarded = total - np.cumsum(lam)
    keep = int(np.searchsorted(-discarded, -(tol * tol) * total) + 1)
    keep = min(keep, rank)

    modes = snapshots @ (vecs[:, :keep] / np.sqrt(lam[:keep]))
    modes = orthonormalize(modes, product)
    return ReducedBasis(modes, np.sqrt(lam[:modes.shape[1]]), product, tol)


def inc_hapod(chunks, product, tol, omega=DEFAULT_OMEGA, n_total=None):
    """Incremental hierarchical POD over a sequence of snapshot chunks.

    Processes chunks one at a time: each step runs a POD of the previous
    modes (scaled by their singular values) stacked with the new chunk, at
    the local tolerance

        eps_loc = sqrt(1 - omega^2) * tol * sqrt(n_total / n_seen),

    and a final POD at ``omega * tol`` compresses the last mode set.  A
    single chunk degenerates to a classical POD at ``tol``.  ``chunks`` may
    be a lazy iterable when ``n_total`` (total snapshot count) is given, so
    trajectories can be generated and discarded on the fly.
    """
    if not 0.0 < omega < 1.0:
        raise ValueError("omega must lie strictly between 0 and 1")
    if n_total is None:
        chunks = [np.asarray(c, dtype=float) for c in chunks if np.size(c)]
        n_total = sum(c.shape[1] for c in chunks)
        if not chunks:
            raise ValueError("chunks must contain at least one nonempty matrix")
        if len(chunks) == 1:
            rb = pod(chunks[0], product, tol)
            rb.tolerance = tol
            return rb

    modes = None
    svals = None
    n_seen = 0
    n_chunks = 0
    for chunk in chunks:
        chunk = np.asarray(chunk, dtype=float)
        if chunk.size == 0:
            continue
        n_chunks += 1
        n_seen += chunk.shape[1]
        work = chunk if modes is None else np.hstack([modes * svals, chunk])
        eps_loc = np.sqrt(1.0 - omega * omega) * tol * np.sqrt(n_total / n_seen)
        rb = pod(work, product, eps_loc)
        modes, svals = rb.basis, rb.singular_values
    if modes is None:
        raise ValueError("chunks must contain at least one nonempty matrix")
    if n_seen != n_total:
        raise ValueError(f"n_total={n_total} but {n_seen} snapshots were seen")
    if n_chunks == 1:
        # depth-1 hierarchy: redo as a plain POD at the full tolerance
        rb = pod(work, product, tol)
        rb.tolerance = tol
        return rb

    final = pod(modes * svals, product, omega * tol)
    final.tolerance = tol
    return final


def projection_error(snapshots, basis, product):
    """Relative l2-mean projection error of ``snapshots`` onto the basis.

    Returns ``sqrt(sum_i |s_i - P s_i|_P^2 / sum_i |s_i|_P^2)`` where ``P``
    is the product-orthogonal projector onto the span; an empty basis gives 1
    for any nonzero snapshot set, a zero snapshot set gives 0.
    """
    snapshots = np.asarray(snapshots, dtype=float)
    v = basis.basis if isinstance(basis, ReducedBasis) else np.asarray(basis)
    if snapshots.ndim == 1:
        snapshots = snapshots[:, None]
    p_snap = apply_product(product, snapshots)
    denom = float(np.sum(snapshots * p_snap))
    if denom == 0.0:
        return 0.0
    resid = snapshots - v @ (v.T @ p_snap)
    num = float(np.sum(resid * apply_product(product, resid)))
    return float(np.sqrt(max(num, 0.0) / denom))
