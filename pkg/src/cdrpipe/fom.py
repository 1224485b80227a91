"""Full-order model: P1 finite elements for the parametric 1D CDR problem.

The problem is posed on the unit interval with unit transport velocity,
concentration held at 1 on the inflow end ``x = 0`` and a zero-flux outflow
at ``x = 1``.  Two dimensionless numbers parametrize it: a reaction-rate
coefficient (Damkoehler number ``da``) and a convection-strength coefficient
(Peclet number ``pe``).  The inhomogeneous inflow value is lifted with the
nodal hat function at ``x = 0``, so the evolved (shifted) variable vanishes
on the constrained node and the quantity of interest -- the outflow value
``c(1, t)``, i.e. the breakthrough curve -- needs no lift correction.

All bilinear forms split affinely in ``(da, pe)``:

    A(mu) = a_diff + pe * a_conv + da * a_reac,
    l(mu) = rhs_diff + pe * rhs_conv + da * rhs_reac,

where each component is assembled once per grid with exact P1 integrals.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssemblyError, BlowUpError, ZeroReferenceError
from .tridiag import Tridiagonal


@dataclass(frozen=True)
class Parameter:
    """A point ``(da, pe)`` in parameter space.

    ``da`` scales the reaction term, ``pe`` the convection term.  Both are
    dimensionless; membership in a :class:`ParameterDomain` is checked by the
    domain, not assumed here.
    """

    da: float
    pe: float

    def as_array(self):
        return np.array([self.da, self.pe])


@dataclass(frozen=True)
class ParameterDomain:
    """Componentwise box ``[lower, upper]`` of admissible parameters."""

    lower: Parameter
    upper: Parameter

    def __post_init__(self):
        if self.lower.da > self.upper.da or self.lower.pe > self.upper.pe:
            raise ValueError("domain bounds must satisfy lower <= upper")

    def contains(self, mu):
        return (self.lower.da <= mu.da <= self.upper.da
                and self.lower.pe <= mu.pe <= self.upper.pe)

    def is_degenerate(self):
        return self.lower.da == self.upper.da or self.lower.pe == self.upper.pe


#: Experiment default: three decades in each coordinate.
DEFAULT_DOMAIN = ParameterDomain(Parameter(1e-3, 1e-3), Parameter(1.0, 1.0))


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on (0, 1) with nodes ``x_i = i * h``."""

    num_intervals: int

    @property
    def h(self):
        return 1.0 / self.num_intervals

    @property
    def num_nodes(self):
        return self.num_intervals + 1

    def nodes(self):
        return np.linspace(0.0, 1.0, self.num_nodes)


@dataclass
class AffineOperatorSet:
    """All parameter-independent pieces of the discrete problem.

    Matrices are full-size (``num_nodes`` square); the load vectors, which
    absorb the Dirichlet lift, are already restricted to the free DoFs.
    Immutable by convention after assembly; safe for concurrent reads.
    """

    grid: Grid1D
    mass: Tridiagonal
    a_diff: Tridiagonal
    a_conv: Tridiagonal
    a_reac: Tridiagonal
    rhs_diff: np.ndarray
    rhs_conv: np.ndarray
    rhs_reac: np.ndarray
    qoi_vector: np.ndarray
    h1_product: Tridiagonal
    dirichlet_dofs: tuple = (0,)

    @property
    def num_free(self):
        return self.grid.num_nodes - len(self.dirichlet_dofs)

    def free_qoi_vector(self):
        return self.qoi_vector[1:]

    def free_h1_product(self):
        return self.h1_product.restrict(1)

    def free_mass(self):
        return self.mass.restrict(1)


@dataclass
class Trajectory:
    """Discrete solution of one transient solve.

    ``states`` holds the shifted solution coefficients column-per-time-step
    (the constrained node, where the shifted variable vanishes, is stored as
    an explicit zero row); ``qoi`` is the breakthrough curve evaluated on the
    unshifted state.  ``states`` is ``None`` when the solve was run with
    ``store_states=False``.
    """

    states: np.ndarray | None
    times: np.ndarray
    qoi: np.ndarray
    mu: Parameter


def assemble(grid):
    """Assemble every affine component on ``grid`` with exact P1 integrals.

    The convection component carries the outflow boundary term, so that for
    any ``v`` vanishing at the inflow node ``v^T a_conv v = v(1)^2 / 2 >= 0``;
    together with the stiffness part this keeps the combined operator
    coercive for all ``da, pe >= 0``.
    """
    if grid.num_intervals < 2:
        raise AssemblyError("num_intervals must be >= 2 (no interior node)")
    n = grid.num_nodes
    h = grid.h

    d_mass = np.full(n, 2.0 * h / 3.0)
    d_mass[0] = d_mass[-1] = h / 3.0
    off_mass = np.full(n - 1, h / 6.0)
    mass = Tridiagonal(off_mass, d_mass, off_mass.copy())

    d_diff = np.full(n, 2.0 / h)
    d_diff[0] = d_diff[-1] = 1.0 / h
    off_diff = np.full(n - 1, -1.0 / h)
    a_diff = Tridiagonal(off_diff, d_diff, off_diff.copy())

    # -int(c v') plus the outflow term c(1) v(1); u = 1 is hard-coded, other
    # constant velocities rescale through pe.
    d_conv = np.zeros(n)
    d_conv[0] = 0.5
    d_conv[-1] = 0.5
    a_conv = Tridiagonal(np.full(n - 1, -0.5), d_conv, np.full(n - 1, 0.5))

    a_reac = mass.copy()
    h1_product = a_diff + mass

    # Load vectors -a_q(lift, phi_i) on the free DoFs; the hat lift at node 0
    # only touches the first free node.
    nf = n - 1
    rhs_diff = np.zeros(nf)
    rhs_diff[0] = 1.0 / h
    rhs_conv = np.zeros(nf)
    rhs_conv[0] = 0.5
    rhs_reac = np.zeros(nf)
    rhs_reac[0] = -h / 6.0

    qoi_vector = np.zeros(n)
    qoi_vector[-1] = 1.0

    return AffineOperatorSet(grid=grid, mass=mass, a_diff=a_diff, a_conv=a_conv,
                             a_reac=a_reac, rhs_diff=rhs_diff, rhs_conv=rhs_conv,
                             rhs_reac=rhs_reac, qoi_vector=qoi_vector,
                             h1_product=h1_product)


def operator_at(ops, mu):
    """Evaluate the affine combination at ``mu`` on the free DoFs.

    Returns the pair ``(A, l)`` with ``A`` tridiagonal and ``l`` the load
    vector; ``A`` is coercive whenever ``da, pe >= 0``.
    """
    a = ops.a_diff.restrict(1) + mu.pe * ops.a_conv.restrict(1) \
        + mu.da * ops.a_reac.restrict(1)
    l = ops.rhs_diff + mu.pe * ops.rhs_conv + mu.da * ops.rhs_reac
    return a, l


def solve_fom(ops, mu, num_steps, t_end, store_states=True):
    """Implicit Euler time stepping from the zero initial datum.

    The system matrix ``M/dt + A(mu)`` is LU-factored once and reused for all
    ``num_steps`` steps.  The QoI is filled per time point with the unshifted
    outflow value; with the hat lift at the inflow node the lift contributes
    nothing there, so the QoI is simply the last free coefficient.

    Set ``store_states=False`` to skip the snapshot matrix (QoI-only runs).
    """
    if num_steps < 1:
        raise ValueError("num_steps must be >= 1")
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    a, l = operator_at(ops, mu)
    dt = t_end / num_steps
    mass = ops.free_mass()
    mass_dt = mass * (1.0 / dt)
    lu = (mass_dt + a).factor()

    nf = ops.num_free
    c = np.zeros(nf)  # shifted initial datum restricted to the free DoFs
    times = np.linspace(0.0, t_end, num_steps + 1)
    qoi = np.empty(num_steps + 1)
    qoi[0] = 0.0
    states = None
    if store_states:
        states = np.zeros((ops.grid.num_nodes, num_steps + 1))

    for n in range(1, num_steps + 1):
        c = lu.solve(mass_dt.matvec(c) + l)
        qoi[n] = c[-1]
        if states is not None:
            states[1:, n] = c

    if not np.all(np.isfinite(qoi)) or not np.all(np.isfinite(c)):
        raise BlowUpError(f"nonfinite values in time stepping at mu={mu}")
    return Trajectory(states=states, times=times, qoi=qoi, mu=mu)


def steady_qoi_oracle(mu):
    """Outflow value of the stationary problem, in closed form.

    Solves ``-c'' + pe c' + da c = 0`` with ``c(0) = 1`` and ``c'(1) = 0``
    through the exponential ansatz with roots
    ``r = (pe +- sqrt(pe^2 + 4 da)) / 2``; the evaluation is arranged so no
    positive exponential is ever formed.  ``da = 0`` makes one root vanish
    and the constant profile is the analytic limit for any ``pe >= 0``.
    """
    if mu.da < 0.0 or mu.pe < 0.0:
        raise ValueError("oracle requires da >= 0 and pe >= 0")
    if mu.da == 0.0:
        return 1.0
    disc = math.sqrt(mu.pe * mu.pe + 4.0 * mu.da)
    r1 = 0.5 * (mu.pe + disc)
    r2 = 0.5 * (mu.pe - disc)
    # c(1) = (r1 - r2) e^{r1 + r2} / (r1 e^{r1} - r2 e^{r2}), rescaled by
    # e^{-r1} top and bottom; r2 <= 0 <= r1 keeps every exponent nonpositive.
    return (r1 - r2) * math.exp(r2) / (r1 - r2 * math.exp(r2 - r1))


def qoi_error(f_a, f_b):
    """Relative discrete l2 distance of ``f_a`` from the reference ``f_b``."""
    f_a = np.asarray(f_a, dtype=float)
    f_b = np.asarray(f_b, dtype=float)
    if f_a.shape != f_b.shape:
        raise ValueError(f"shape mismatch: {f_a.shape} vs {f_b.shape}")
    ref = np.linalg.norm(f_b)
    if ref == 0.0:
        raise ZeroReferenceError("reference QoI vector has zero norm")
    return float(np.linalg.norm(f_a - f_b) / ref)
