"""Noncommutative differential calculus on regular lattices.

Functions live on the nodes of a regular lattice; the derivative along a
direction is the forward difference. Forms are stored as one coefficient
array per basis monomial ``dq^I`` (``I`` a sorted tuple of axes) and obey the
shift rule ``dq^i f = (R_i f) dq^i`` when a function is moved past a
differential.

On non-periodic axes a difference has no value on the last node, so results
shrink by one node per application. Arrays are always anchored at node 0, so
trimming from the upper end keeps every coefficient aligned.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

__all__ = [
    "Grid1D",
    "Grid2D",
    "NodeFunction",
    "LatticeForm",
    "forward_difference",
    "backward_difference",
    "shift",
    "product_difference",
    "discrete_integral",
    "exterior_derivative",
    "wedge",
    "codifferential",
    "laplacian",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D lattice with ``n_nodes`` nodes spaced ``step`` apart.

    ``n_nodes == 1`` is allowed only for the degenerate output of differencing a
    two-node function; such a grid cannot be differenced again.
    """

    step: float
    n_nodes: int
    periodic: bool = False

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 1:
            raise ValueError(f"n_nodes must be a positive integer, got {self.n_nodes}")

    @property
    def ndim(self) -> int:
        return 1

    @property
    def steps(self) -> tuple[float, ...]:
        return (self.step,)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_nodes,)

    @property
    def periodic_axes(self) -> tuple[bool, ...]:
        return (self.periodic,)

    def nodes(self) -> np.ndarray:
        return self.step * np.arange(self.n_nodes)

    def _with_shape(self, shape):
        return Grid1D(self.step, shape[0], self.periodic)


@dataclass(frozen=True)
class Grid2D:
    """Uniform 2D lattice; axis 0 is ``q^1`` (time in field runs), axis 1 is ``q^2``."""

    steps: tuple[float, float]
    extents: tuple[int, int]
    periodic: tuple[bool, bool] = (False, False)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(float(s) for s in self.steps))
        object.__setattr__(self, "extents", tuple(int(n) for n in self.extents))
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))
        if len(self.steps) != 2 or len(self.extents) != 2 or len(self.periodic) != 2:
            raise ValueError("Grid2D needs two steps, two extents and two periodic flags")
        if not all(s > 0 for s in self.steps):
            raise ValueError(f"steps must be positive, got {self.steps}")
        if not all(n >= 1 for n in self.extents):
            raise ValueError(f"extents must be positive, got {self.extents}")

    @property
    def ndim(self) -> int:
        return 2

    @property
    def shape(self) -> tuple[int, ...]:
        return self.extents

    @property
    def periodic_axes(self) -> tuple[bool, ...]:
        return self.periodic

    def _with_shape(self, shape):
        return Grid2D(self.steps, tuple(shape), self.periodic)


Grid = Grid1D | Grid2D


@dataclass(frozen=True)
class NodeFunction:
    """Real values on the nodes of a grid.

    ``values`` has the grid shape, optionally followed by one trailing axis for
    vector-valued functions.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape[: self.grid.ndim] != self.grid.shape or values.ndim > self.grid.ndim + 1:
            raise ValueError(
                f"values of shape {values.shape} do not match grid shape {self.grid.shape}"
            )
        object.__setattr__(self, "values", values)

    def __mul__(self, other: NodeFunction) -> NodeFunction:
        _check_same_grid(self, other)
        return NodeFunction(self.grid, self.values * other.values)


def _check_axis(grid: Grid, direction: int) -> int:
    if int(direction) != direction or not 0 <= direction < grid.ndim:
        raise ValueError(f"invalid direction {direction} for a {grid.ndim}D grid")
    direction = int(direction)
    if grid.shape[direction] < 2:
        raise ValueError("cannot difference along an axis with fewer than 2 nodes")
    return direction


def _check_same_grid(f: NodeFunction, g: NodeFunction):
    if f.grid != g.grid or f.values.shape != g.values.shape:
        raise ValueError("functions live on different grids")


def _shift_array(a: np.ndarray, axis: int, periodic: bool, sign: int = 1) -> np.ndarray:
    """Value at the successor (``sign=1``) or predecessor (``sign=-1``) node."""
    if periodic:
        return np.roll(a, -sign, axis=axis)
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(1, None) if sign == 1 else slice(None, -1)
    return a[tuple(sl)]


def _trim(a: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    return a[tuple(slice(0, n) for n in shape)]


def _diff_array(a, axis, step, periodic):
    succ = _shift_array(a, axis, periodic)
    return (succ - _trim(a, succ.shape[: a.ndim])) / step


def _shrunk(grid: Grid, axis: int) -> Grid:
    if grid.periodic_axes[axis]:
        return grid
    shape = list(grid.shape)
    shape[axis] -= 1
    return grid._with_shape(shape)


def forward_difference(f: NodeFunction, direction: int = 0) -> NodeFunction:
    """``(f_{k+1} - f_k) / step`` along ``direction``."""
    axis = _check_axis(f.grid, direction)
    out = _diff_array(f.values, axis, f.grid.steps[axis], f.grid.periodic_axes[axis])
    return NodeFunction(_shrunk(f.grid, axis), out)


def backward_difference(f: NodeFunction, direction: int = 0) -> NodeFunction:
    """``(f_k - f_{k-1}) / step`` on a periodic axis."""
    axis = _check_axis(f.grid, direction)
    if not f.grid.periodic_axes[axis]:
        raise ValueError("backward differences are only provided on periodic axes")
    a = f.values
    return NodeFunction(f.grid, (a - np.roll(a, 1, axis=axis)) / f.grid.steps[axis])


def shift(f: NodeFunction, direction: int = 0) -> NodeFunction:
    """Successor values ``(R f)_k = f_{k+1}``."""
    axis = _check_axis(f.grid, direction)
    out = _shift_array(f.values, axis, f.grid.periodic_axes[axis])
    return NodeFunction(_shrunk(f.grid, axis), out)


def product_difference(f: NodeFunction, g: NodeFunction, a: float, direction: int = 0) -> NodeFunction:
    """Difference of a product through the one-parameter Leibniz family.

    Returns ``(a f_{k+1} + (1-a) f_k) Δg_k + Δf_k ((1-a) g_{k+1} + a g_k)``, which
    equals ``Δ(f g)`` for every ``a`` in [0, 1]. ``a = 1`` is the shifted product
    rule, ``a = 1/2`` the averaged one.
    """
    _check_same_grid(f, g)
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"a must lie in [0, 1], got {a}")
    axis = _check_axis(f.grid, direction)
    periodic = f.grid.periodic_axes[axis]
    f1, g1 = _shift_array(f.values, axis, periodic), _shift_array(g.values, axis, periodic)
    f0, g0 = _trim(f.values, f1.shape), _trim(g.values, g1.shape)
    h = f.grid.steps[axis]
    out = (a * f1 + (1 - a) * f0) * (g1 - g0) / h + (f1 - f0) / h * ((1 - a) * g1 + a * g0)
    return NodeFunction(_shrunk(f.grid, axis), out)


def discrete_integral(f: NodeFunction) -> float:
    """``sum_k step * Δf_k`` on a finite 1D chain; telescopes to ``f_last - f_first``."""
    if not isinstance(f.grid, Grid1D):
        raise ValueError("discrete_integral is defined on 1D grids")
    if f.grid.periodic:
        raise ValueError("discrete_integral needs a non-periodic grid (no boundary on a ring)")
    v = f.values.reshape(f.grid.n_nodes, -1)
    # fsum over the unrounded increments f_{k+1}, -f_k is the exactly rounded
    # value of the real-arithmetic sum, so telescoping holds bitwise.
    out = np.array([math.fsum(np.concatenate([col[1:], -col[:-1]])) for col in v.T])
    return float(out[0]) if f.values.ndim == 1 else out


# ---------------------------------------------------------------------------
# Forms


def _monomials(dim: int, degree: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(dim), degree))


def _merge(I: tuple[int, ...], J: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
    """Sign and sorted index of ``dq^I ^ dq^J``; sign 0 when an index repeats."""
    seq = I + J
    if len(set(seq)) < len(seq):
        return 0, ()
    inversions = sum(1 for x, y in itertools.combinations(seq, 2) if x > y)
    return (-1) ** inversions, tuple(sorted(seq))


@dataclass(frozen=True)
class LatticeForm:
    """A ``degree``-form ``sum_I c_I dq^I`` on a lattice.

    All coefficient arrays share ``shape``, the window of nodes on which the
    form is defined (the full grid unless differencing trimmed it).
    """

    grid: Grid
    degree: int
    coefficients: dict[tuple[int, ...], np.ndarray] = field(default_factory=dict)
    shape: tuple[int, ...] | None = None

    def __post_init__(self):
        dim = self.grid.ndim
        if not 0 <= self.degree <= dim:
            raise ValueError(f"degree {self.degree} exceeds lattice dimension {dim}")
        basis = _monomials(dim, self.degree)
        shape = tuple(self.shape) if self.shape is not None else self.grid.shape
        coeffs = {}
        for I in basis:
            c = self.coefficients.get(I)
            coeffs[I] = np.zeros(shape) if c is None else np.asarray(c, dtype=float)
        extra = set(self.coefficients) - set(basis)
        if extra:
            raise ValueError(f"monomials {sorted(extra)} do not belong to degree {self.degree}")
        for I, c in coeffs.items():
            if c.shape != shape:
                raise ValueError(f"coefficient {I} has shape {c.shape}, expected {shape}")
        assert len(coeffs) == comb(dim, self.degree)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def from_function(cls, f: NodeFunction) -> LatticeForm:
        return cls(f.grid, 0, {(): f.values})

    @classmethod
    def one_form(cls, grid: Grid, *coeffs) -> LatticeForm:
        return cls(grid, 1, {(i,): c for i, c in enumerate(coeffs)})

    def __getitem__(self, I) -> np.ndarray:
        if isinstance(I, int):
            I = (I,)
        return self.coefficients[tuple(I)]

    def __add__(self, other: LatticeForm) -> LatticeForm:
        if other.grid != self.grid or other.degree != self.degree:
            raise ValueError("can only add forms of equal degree on the same grid")
        shape = tuple(min(a, b) for a, b in zip(self.shape, other.shape))
        coeffs = {I: _trim(c, shape) + _trim(other[I], shape) for I, c in self.coefficients.items()}
        return LatticeForm(self.grid, self.degree, coeffs, shape)

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(c))) if c.size else 0.0) for c in self.coefficients.values())


def _common(shapes):
    return tuple(min(s) for s in zip(*shapes))


def exterior_derivative(omega: LatticeForm) -> LatticeForm:
    """``d(sum_I f_I dq^I) = sum_I sum_mu Δ_mu f_I dq^mu ^ dq^I``.

    The top-degree form maps to the zero form of the same degree.
    """
    grid, dim = omega.grid, omega.grid.ndim
    if omega.degree == dim:
        return LatticeForm(grid, dim, {}, omega.shape)
    terms: dict[tuple[int, ...], list[np.ndarray]] = {}
    for I, c in omega.coefficients.items():
        for mu in range(dim):
            sign, K = _merge((mu,), I)
            if sign == 0:
                continue
            if c.shape[mu] < 2:
                raise ValueError("form window too small to difference")
            dc = _diff_array(c, mu, grid.steps[mu], grid.periodic_axes[mu])
            terms.setdefault(K, []).append(sign * dc)
    shape = _common([a.shape for parts in terms.values() for a in parts])
    coeffs = {K: sum(_trim(a, shape) for a in parts) for K, parts in terms.items()}
    return LatticeForm(grid, omega.degree + 1, coeffs, shape)


def _shift_along(a: np.ndarray, axes, grid: Grid) -> np.ndarray:
    for ax in axes:
        a = _shift_array(a, ax, grid.periodic_axes[ax])
    return a


def wedge(omega: LatticeForm, eta: LatticeForm) -> LatticeForm:
    """Exterior product with the lattice shift rule.

    ``(f dq^I) ^ (g dq^J) = f (R_I g) dq^I ^ dq^J`` where ``R_I`` shifts along
    every axis in ``I``; moving ``g`` past the differentials is what shifts it.
    """
    if omega.grid != eta.grid:
        raise ValueError("forms live on different grids")
    grid = omega.grid
    degree = omega.degree + eta.degree
    if degree > grid.ndim:
        raise ValueError(f"wedge of degree {degree} exceeds lattice dimension {grid.ndim}")
    terms: dict[tuple[int, ...], list[np.ndarray]] = {}
    for I, f in omega.coefficients.items():
        for J, g in eta.coefficients.items():
            sign, K = _merge(I, J)
            if sign == 0:
                continue
            g_shifted = _shift_along(g, I, grid)
            shape = _common([f.shape, g_shifted.shape])
            terms.setdefault(K, []).append(sign * _trim(f, shape) * _trim(g_shifted, shape))
    if not terms:
        shape = _common([omega.shape, eta.shape])
        return LatticeForm(grid, degree, {}, shape)
    shape = _common([a.shape for parts in terms.values() for a in parts])
    coeffs = {K: sum(_trim(a, shape) for a in parts) for K, parts in terms.items()}
    return LatticeForm(grid, degree, coeffs, shape)


def _require_periodic(grid: Grid, shape):
    if not all(grid.periodic_axes):
        raise ValueError("codifferential and laplacian require a fully periodic grid")
    if tuple(shape) != grid.shape:
        raise ValueError("form must cover the whole periodic grid")


def codifferential(omega: LatticeForm) -> LatticeForm:
    """Lattice codifferential, built from backward differences.

    ``(δ ω)_I = sum_mu sign(mu, I) ∇_mu ω_{mu ∪ I}``. This is minus the
    node-wise inner-product adjoint of ``d``; the sign is fixed so that
    ``dδ + δd`` on functions is the ordinary second-difference stencil.
    """
    grid, dim = omega.grid, omega.grid.ndim
    _require_periodic(grid, omega.shape)
    if omega.degree == 0:
        return LatticeForm(grid, 0, {}, omega.shape)
    coeffs = {}
    for I in _monomials(dim, omega.degree - 1):
        acc = np.zeros(grid.shape)
        for mu in range(dim):
            sign, K = _merge((mu,), I)
            if sign == 0:
                continue
            c = omega[K]
            acc = acc + sign * (c - np.roll(c, 1, axis=mu)) / grid.steps[mu]
        coeffs[I] = acc
    return LatticeForm(grid, omega.degree - 1, coeffs)


def laplacian(f: NodeFunction | LatticeForm) -> NodeFunction | LatticeForm:
    """``Δ_L = dδ + δd``; on node functions this is the 2m+1 point stencil."""
    form = LatticeForm.from_function(f) if isinstance(f, NodeFunction) else f
    _require_periodic(form.grid, form.shape)
    out = codifferential(exterior_derivative(form))
    if form.degree > 0:
        out = out + exterior_derivative(codifferential(form))
    if isinstance(f, NodeFunction):
        return NodeFunction(f.grid, out[()])
    return out
