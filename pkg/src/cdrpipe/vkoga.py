"""Sparse vectorial kernel surrogate fitted by f-greedy center selection.

The surrogate maps a (normalized) parameter point straight to the full QoI
time series, skipping all time integration.  Centers are picked greedily by
the largest residual output norm; each insertion runs a Newton-basis update,
which is a pivoted Cholesky of the kernel matrix in disguise and keeps the
incremental fit numerically stable.  Prediction cost is O(centers * d_out).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .fom import Parameter

#: Selection floor: points whose power-function value falls below
#: POWER_FLOOR * sqrt(k(x, x)) are never selected (prevents breakdown).
POWER_FLOOR = 1e-7


@dataclass
class KernelConfig:
    """Hyperparameters of the Gaussian-kernel surrogate.

    ``shape_gamma`` is the Gaussian width on the normalized inputs,
    ``k(x, y) = exp(-gamma^2 |x - y|^2)``.  ``greedy_tol=None`` resolves at
    fit time to ``1e-6 * max_i |y_i|``.  ``norm_lo``/``norm_hi`` define the
    affine map of the parameter box onto the unit square applied before any
    kernel evaluation; the box spans three decades per coordinate, so an
    unnormalized unit-width Gaussian would be nearly flat.
    """

    shape_gamma: float = 1.0
    lambda_reg: float = 0.0
    max_points: int = 100
    greedy_tol: float | None = None
    norm_lo: tuple = (0.0, 0.0)
    norm_hi: tuple = (1.0, 1.0)

    def __post_init__(self):
        if self.shape_gamma <= 0.0:
            raise ValueError("shape_gamma must be positive")
        if self.lambda_reg < 0.0:
            raise ValueError("lambda_reg must be nonnegative")
        if self.max_points < 1:
            raise ValueError("max_points must be positive")
        if self.greedy_tol is not None and self.greedy_tol <= 0.0:
            raise ValueError("greedy_tol must be positive when given")

    @classmethod
    def for_domain(cls, domain, **kwargs):
        """Config whose normalization maps ``domain`` onto the unit square."""
        lo = (domain.lower.da, domain.lower.pe)
        hi = (domain.upper.da, domain.upper.pe)
        return cls(norm_lo=lo, norm_hi=hi, **kwargs)

    def normalize(self, x):
        """Apply the affine input map; degenerate box coordinates pass through."""
        lo = np.asarray(self.norm_lo, dtype=float)
        span = np.asarray(self.norm_hi, dtype=float) - lo
        span[span == 0.0] = 1.0
        return (np.asarray(x, dtype=float) - lo) / span


@dataclass
class KernelModel:
    """Fitted surrogate: selected centers, weights, and the Newton factor.

    ``newton_factor`` is the lower-triangular matrix of Newton-basis values
    at the centers; the kernel matrix on the centers equals ``L @ L.T``.
    ``flagged`` marks a fit stopped by numerical breakdown (power function
    exhausted while residuals were still above tolerance).  Immutable after
    fitting; safe for concurrent prediction.
    """

    centers: np.ndarray
    coefficients: np.ndarray
    newton_factor: np.ndarray
    config: KernelConfig
    d_out: int
    selected_indices: list = field(default_factory=list)
    residual_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    flagged: bool = False

    @property
    def num_centers(self):
        return self.centers.shape[0]


def as_parameter_array(x):
    """Accept Parameter lists, pairs, or arrays; return an (n, 2) array."""
    if isinstance(x, Parameter):
        return x.as_array()[None, :]
    if len(x) and isinstance(x[0], Parameter):
        return np.array([[p.da, p.pe] for p in x])
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def kernel_matrix(x, z, gamma):
    """Gaussian kernel matrix ``exp(-gamma^2 |x_i - z_j|^2)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    sq = np.sum(x * x, axis=1)[:, None] + np.sum(z * z, axis=1)[None, :] \
        - 2.0 * (x @ z.T)
    return np.exp(-(gamma * gamma) * np.clip(sq, 0.0, None))


def fit_fgreedy(x, y, config):
    """Fit the surrogate by f-greedy selection with Newton-basis updates.

    Starts from the empty center set; each iteration picks the admissible
    training point with the largest residual output norm (ties broken by the
    lowest index), incorporates it through the Newton recursion, and stops at
    ``max_points``, at ``greedy_tol``, or -- flagged, not crashed -- when the
    power function of every remaining point sits below the numerical floor.

    With ``lambda_reg > 0`` the same interpolation-driven selection runs, and
    the final weights instead minimize the regularized mean-squared loss
    restricted to the selected centers.
    """
    xn = config.normalize(as_parameter_array(x))
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    n_train, d_out = y.shape
    if xn.shape[0] != n_train:
        raise ValueError(f"{xn.shape[0]} inputs but {n_train} target rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("target rows must be finite")
    if np.unique(xn, axis=0).shape[0] != n_train:
        raise ValueError("training inputs must be pairwise distinct "
                         "after normalization")

    gamma = config.shape_gamma
    y_scale = float(np.max(np.linalg.norm(y, axis=1)))
    gtol = config.greedy_tol if config.greedy_tol is not None else 1e-6 * y_scale

    max_sel = min(config.max_points, n_train)
    newton_values = np.zeros((n_train, max_sel))  # Newton basis at all points
    newton_coef = np.zeros((max_sel, d_out))
    power2 = np.ones(n_train)  # k(x,x) = 1 for the Gaussian
    residual = y.copy()
    selected = []
    history = []
    flagged = False

    floor2 = POWER_FLOOR * POWER_FLOOR  # vs k(x,x) = 1
    while len(selected) < max_sel:
        res_norm = np.linalg.norm(residual, axis=1)
        if float(res_norm.max(initial=0.0)) <= gtol:
            break
        admissible = power2 > floor2
        if selected:
            admissible[selected] = False
        if not np.any(admissible):
            flagged = True
            break
        i_next = int(np.argmax(np.where(admissible, res_norm, -1.0)))
        n_sel = len(selected)

        beta = np.sqrt(power2[i_next])
        col = kernel_matrix(xn, xn[i_next:i_next + 1], gamma)[:, 0]
        v_new = col - newton_values[:, :n_sel] @ newton_values[i_next, :n_sel]
        v_new /= beta
        c_new = residual[i_next] / beta

        newton_values[:, n_sel] = v_new
        newton_coef[n_sel] = c_new
        residual -= np.outer(v_new, c_new)
        power2 = np.maximum(power2 - v_new * v_new, 0.0)
        selected.append(i_next)
        history.append(float(res_norm[i_next]))

    n_sel = len(selected)
    lower = np.tril(newton_values[selected, :n_sel])
    if n_sel == 0:
        weights = np.zeros((0, d_out))
    elif config.lambda_reg > 0.0:
        # stacked least squares for min 1/N |Y - K W|^2 + lambda |L^T W|^2
        k_xc = kernel_matrix(xn, xn[selected], gamma)
        lhs = np.vstack([k_xc / np.sqrt(n_train),
                         np.sqrt(config.lambda_reg) * lower.T])
        rhs = np.vstack([y / np.sqrt(n_train), np.zeros((n_sel, d_out))])
        weights = scipy.linalg.lstsq(lhs, rhs)[0]
    else:
        weights = scipy.linalg.solve_triangular(lower.T, newton_coef[:n_sel],
                                                lower=False)

    return KernelModel(centers=xn[selected].copy(), coefficients=weights,
                       newton_factor=lower, config=config, d_out=d_out,
                       selected_indices=selected,
                       residual_history=np.array(history), flagged=flagged)


def predict(model, mu):
    """Evaluate the surrogate at one parameter point.

    Returns ``sum_j w_j k(x, c_j)`` on the normalized input; extrapolation
    outside the training box is allowed but untrusted.
    """
    xn = model.config.normalize(as_parameter_array(mu))
    if model.num_centers == 0:
        return np.zeros(model.d_out)
    k_row = kernel_matrix(xn, model.centers, model.config.shape_gamma)
    return (k_row @ model.coefficients)[0]


def predict_many(model, mus):
    """Vectorized :func:`predict` over a sequence of parameter points."""
    xn = model.config.normalize(as_parameter_array(mus))
    if model.num_centers == 0:
        return np.zeros((xn.shape[0], model.d_out))
    return kernel_matrix(xn, model.centers, model.config.shape_gamma) \
        @ model.coefficients


def power_function(model, mu):
    """Worst-case interpolation-error norm at ``mu``; zero at the centers."""
    xn = model.config.normalize(as_parameter_array(mu))[0]
    if model.num_centers == 0:
        return 1.0  # sqrt(k(x, x)) for the Gaussian
    k_col = kernel_matrix(model.centers, xn[None, :], model.config.shape_gamma)[:, 0]
    v = scipy.linalg.solve_triangular(model.newton_factor, k_col, lower=True)
    return float(np.sqrt(max(1.0 - v @ v, 0.0)))


def loss(model, x, y):
    """Mean-squared data misfit plus ``lambda_reg`` times the squared
    RKHS norm of the expansion (``trace(W^T K W) = |L^T W|_F^2``)."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    data = float(np.mean(np.sum((y - predict_many(model, x)) ** 2, axis=1)))
    reg = 0.0
    if model.num_centers:
        reg = float(np.sum((model.newton_factor.T @ model.coefficients) ** 2))
    return data + model.config.lambda_reg * reg
