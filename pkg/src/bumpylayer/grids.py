"""Boundary-fitted tensor grids over bumpy domains, and nodal fields.

Geometry convention
-------------------
Every domain handled here sits between two graphs: a lower boundary
``bottom(x')`` and an upper boundary ``top(x')`` over a horizontal box.
Grids are tensor products of uniform horizontal axes with a uniform ladder
of vertical fractions; the node of column ``x'`` at fraction ``t`` sits at
``bottom(x') + t * (top(x') - bottom(x'))``.

* bumpy cube: ``|x'| < r`` (max-norm boxes), ``eps psi(x'/eps) < x_d <
  eps psi(x'/eps) + r``.  Bottom and top are parallel, so the flattening
  map ``(x', x_d - bottom(x'))`` is a vertical shear with unit Jacobian
  determinant and shear slope bounded by the graph's Lipschitz constant.
* channel: ``psi(y') < y_d < 0``.  The top is flat while the bottom is
  rough, so no unit-determinant shear can flatten it; columns are fitted
  by a vertical stretch instead and all integrals are evaluated with the
  exact per-cell Jacobians.
* flat strip: ``(-L, L)^{d-1} x (0, H)``, plain rectangles.

Subregions for energy integrals are boxes in mapped coordinates
``(x', x_d - bottom(x'))``; for channel grids only horizontal restriction
is supported (the mapped height varies by column).

Grids and fields are immutable once built and safe to share across
threads.
"""

import numpy as np

from dataclasses import dataclass
from typing import Optional

from .coefficients import LipschitzGraph

KINDS = ("bumpy_cube", "channel", "strip")

#: Resolution rule: when an oscillation of scale eps is present, every axis
#: must provide at least this many cells per eps.
CELLS_PER_OSCILLATION = 4


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of a solve domain.

    ``kind`` selects one of bumpy cube / channel / strip.  ``eps`` is the
    oscillation scale of the bumpy cube (the channel lives in the fast
    variable, where the scale is 1); ``extent`` is the bumpy-cube size r;
    ``half_width``/``height`` describe channels and strips.
    """

    kind: str
    dimension: int = 2
    eps: Optional[float] = None
    extent: Optional[float] = None
    half_width: Optional[float] = None
    height: Optional[float] = None
    graph: Optional[LipschitzGraph] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}; known: {KINDS}")
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if self.kind == "bumpy_cube":
            if self.graph is None:
                raise ValueError("bumpy cube requires a boundary graph")
            if self.eps is None or self.extent is None:
                raise ValueError("bumpy cube requires eps and extent")
            if not 0.0 < self.eps <= self.extent:
                raise ValueError(
                    f"bumpy cube requires 0 < eps <= r, got eps={self.eps}, r={self.extent}"
                )
        elif self.kind == "channel":
            if self.graph is None:
                raise ValueError("channel requires a boundary graph")
            if self.graph.upper >= 0.0:
                raise ValueError("channel graph must be strictly negative")
            if self.half_width is None or self.half_width <= 0.0:
                raise ValueError("channel requires a positive half width")
        else:
            if self.graph is not None:
                raise ValueError("flat strip takes no graph")
            if self.half_width is None or self.half_width <= 0.0:
                raise ValueError("strip requires a positive half width")
            if self.height is None or self.height <= 0.0:
                raise ValueError("strip requires a positive height")

    @property
    def horizontal_extent(self):
        if self.kind == "bumpy_cube":
            return self.extent
        return self.half_width

    def bottom_heights(self, xprime):
        """Lower boundary heights at horizontal points (M,) or (M, d-1)."""
        if self.kind == "bumpy_cube":
            x = np.asarray(xprime, dtype=float)
            return self.eps * self.graph.heights(x / self.eps)
        if self.kind == "channel":
            return self.graph.heights(xprime)
        n = np.shape(np.atleast_1d(np.asarray(xprime)))[0]
        return np.zeros(n)

    def top_heights(self, xprime):
        if self.kind == "bumpy_cube":
            return self.bottom_heights(xprime) + self.extent
        if self.kind == "channel":
            n = np.shape(np.atleast_1d(np.asarray(xprime)))[0]
            return np.zeros(n)
        n = np.shape(np.atleast_1d(np.asarray(xprime)))[0]
        return np.full(n, self.height)

    @property
    def mapped_height(self):
        """Height of the domain in flattened coordinates (None for channels)."""
        if self.kind == "bumpy_cube":
            return self.extent
        if self.kind == "strip":
            return self.height
        return None


class GridResolutionError(ValueError):
    """The requested resolution violates the cells-per-oscillation rule."""


class MappedGrid:
    """Tensor-product grid fitted between the domain's two boundary graphs.

    Built by :func:`build_grid`.  Attributes (all read-only by convention):

    - ``axes``: list of d-1 horizontal node-coordinate arrays (length n_k+1).
    - ``levels``: vertical fractions, length n_v + 1.
    - ``bottom``, ``top``: boundary heights on the horizontal node lattice.
    - ``periodic``: whether the horizontal axes are periodically identified.
    - ``ndof``: number of degrees of freedom per component (periodic grids
      drop the duplicate wrap column).
    - ``boundary_sets``: dict of named dof-index arrays: ``bottom``, ``top``
      and, on non-periodic grids, one set per lateral face plus their union
      ``lateral``.
    """

    def __init__(self, spec, resolution, periodic=False):
        resolution = tuple(int(n) for n in resolution)
        dim = spec.dimension
        if len(resolution) != dim:
            raise ValueError(f"resolution must have {dim} entries, got {resolution}")
        if any(n < 4 for n in resolution):
            raise ValueError(f"resolution must be at least 4 cells per axis, got {resolution}")
        self.spec = spec
        self.resolution = resolution
        self.periodic = bool(periodic)

        half = spec.horizontal_extent
        self.axes = [np.linspace(-half, half, n + 1) for n in resolution[:-1]]
        self.levels = np.linspace(0.0, 1.0, resolution[-1] + 1)
        self._check_oscillation_rule()

        lattice = np.meshgrid(*self.axes, indexing="ij") if dim > 2 else [self.axes[0]]
        cols = np.stack([a.ravel() for a in lattice], axis=-1)
        shape = tuple(n + 1 for n in resolution[:-1])
        self.bottom = np.asarray(spec.bottom_heights(cols), dtype=float).reshape(shape)
        self.top = np.asarray(spec.top_heights(cols), dtype=float).reshape(shape)
        if np.any(self.top - self.bottom <= 0.0):
            raise ValueError("degenerate domain: top boundary does not stay above bottom")
        if self.periodic:
            for axis in range(dim - 1):
                lo = np.take(self.bottom, 0, axis=axis)
                hi = np.take(self.bottom, -1, axis=axis)
                if np.max(np.abs(lo - hi)) > 1e-12:
                    raise ValueError(
                        "periodic grid requires matching boundary heights at the wrap"
                    )

        # dof lattice: periodic grids drop the duplicated wrap column
        self._dof_cols = tuple(
            n if self.periodic else n + 1 for n in resolution[:-1]
        )
        self._nv = resolution[-1]
        self.ndof = int(np.prod(self._dof_cols)) * (self._nv + 1)
        self.boundary_sets = self._build_boundary_sets()
        self._corners_cache = None

    # -- resolution rule ---------------------------------------------------
    def _check_oscillation_rule(self):
        spec = self.spec
        if spec.kind == "strip":
            return
        scale = spec.eps if spec.kind == "bumpy_cube" else 1.0
        limit = scale / CELLS_PER_OSCILLATION
        spacings = [a[1] - a[0] for a in self.axes]
        height = spec.mapped_height
        if height is not None:
            spacings.append(height * (self.levels[1] - self.levels[0]))
        else:
            depth = -float(spec.graph.lower)
            spacings.append(depth * (self.levels[1] - self.levels[0]))
        for k, h in enumerate(spacings):
            if h > limit + 1e-12:
                raise GridResolutionError(
                    f"under-resolved grid: axis {k} spacing {h:.4g} exceeds eps/"
                    f"{CELLS_PER_OSCILLATION} = {limit:.4g}; the rule requires at "
                    f"least {CELLS_PER_OSCILLATION} cells per oscillation eps={scale}"
                )

    # -- indexing ----------------------------------------------------------
    @property
    def dimension(self):
        return self.spec.dimension

    @property
    def cell_counts(self):
        return self.resolution

    @property
    def ncells(self):
        return int(np.prod(self.resolution))

    def dof_index(self, *multi):
        """Flat dof index from (i_1, ..., i_{d-1}, j)."""
        idx = 0
        for k, cols in enumerate(self._dof_cols):
            idx = idx * cols + (multi[k] % cols)
        return idx * (self._nv + 1) + multi[-1]

    def node_coordinates(self):
        """Physical coordinates of all dofs, shape (ndof, d)."""
        grids = [a[:c] for a, c in zip(self.axes, self._dof_cols)]
        mesh = np.meshgrid(*grids, self.levels, indexing="ij")
        flat = [m.reshape(-1) for m in mesh]
        bot = self._column_values(self.bottom)
        top = self._column_values(self.top)
        z = bot[:, None] + self.levels[None, :] * (top - bot)[:, None]
        coords = np.stack(flat[:-1] + [z.reshape(-1)], axis=-1)
        return coords

    def _column_values(self, lattice):
        slices = tuple(slice(0, c) for c in self._dof_cols)
        return lattice[slices].reshape(-1)

    def _build_boundary_sets(self):
        dim = self.dimension
        cols_shape = self._dof_cols
        nv = self._nv
        lattice = np.arange(int(np.prod(cols_shape))).reshape(cols_shape)
        base = lattice * (nv + 1)
        sets = {
            "bottom": np.sort(base.reshape(-1)),
            "top": np.sort(base.reshape(-1) + nv),
        }
        if not self.periodic:
            lateral = []
            names = {0: ("left", "right")} if dim == 2 else {}
            for axis in range(dim - 1):
                lo_name, hi_name = names.get(axis, (f"x{axis}_lo", f"x{axis}_hi"))
                lo = np.take(base, 0, axis=axis).reshape(-1)
                hi = np.take(base, -1, axis=axis).reshape(-1)
                vertical = np.arange(nv + 1)
                sets[lo_name] = np.sort((lo[:, None] + vertical[None, :]).reshape(-1))
                sets[hi_name] = np.sort((hi[:, None] + vertical[None, :]).reshape(-1))
                lateral.extend([sets[lo_name], sets[hi_name]])
            sets["lateral"] = np.unique(np.concatenate(lateral))
        return sets

    # -- cells ---------------------------------------------------------------
    def connectivity_and_corners(self):
        """Cell dof indices (C, 2**d) and corner coordinates (C, 2**d, d)."""
        if self._corners_cache is not None:
            return self._corners_cache
        from .elements import corner_offsets

        dim = self.dimension
        offsets = corner_offsets(dim)
        cell_ranges = [np.arange(n) for n in self.resolution]
        mesh = np.meshgrid(*cell_ranges, indexing="ij")
        cell_multi = [m.reshape(-1) for m in mesh]
        ncell = cell_multi[0].size

        conn = np.empty((ncell, offsets.shape[0]), dtype=np.intp)
        corners = np.empty((ncell, offsets.shape[0], dim))
        bot_lat = self.bottom.reshape(-1)
        top_lat = self.top.reshape(-1)
        lat_shape = tuple(n + 1 for n in self.resolution[:-1])
        for c, off in enumerate(offsets):
            # dof index with periodic wrap; coordinates without wrap
            idx = 0
            lat_idx = 0
            for k, cols in enumerate(self._dof_cols):
                ik = cell_multi[k] + off[k]
                idx = idx * cols + np.mod(ik, cols)
                lat_idx = lat_idx * lat_shape[k] + ik
            j = cell_multi[-1] + off[-1]
            conn[:, c] = idx * (self._nv + 1) + j
            for k in range(dim - 1):
                corners[:, c, k] = self.axes[k][cell_multi[k] + off[k]]
            b = bot_lat[lat_idx]
            t = top_lat[lat_idx]
            corners[:, c, dim - 1] = b + self.levels[j] * (t - b)
        self._corners_cache = (conn, corners)
        return self._corners_cache

    def cell_axis_intervals(self):
        """Per-axis cell breakpoints in mapped coordinates.

        Horizontal axes use physical coordinates; the vertical axis uses
        ``fraction * mapped_height`` (fractions themselves for channels).
        """
        height = self.spec.mapped_height
        vert = self.levels * (height if height is not None else 1.0)
        return [np.asarray(a) for a in self.axes] + [vert]

    @property
    def shear_slope_max(self):
        """Largest column-to-column slope of the lower boundary."""
        worst = 0.0
        for axis in range(self.dimension - 1):
            d = np.diff(self.bottom, axis=axis)
            h = self.axes[axis][1] - self.axes[axis][0]
            if d.size:
                worst = max(worst, float(np.max(np.abs(d))) / h)
        return worst

    @property
    def flattening_determinant(self):
        """Jacobian determinant of the flattening map (1 for shear kinds)."""
        if self.spec.kind in ("bumpy_cube", "strip"):
            return 1.0
        return self.top - self.bottom  # channel: per-column stretch factor


def build_grid(spec, resolution, periodic=False):
    """Build a boundary-fitted grid over the given domain.

    ``resolution`` lists cells per axis, vertical last; an integer is
    broadcast to all axes.  Refuses resolutions below 4 cells per axis and,
    for oscillating domains, below :data:`CELLS_PER_OSCILLATION` cells per
    oscillation scale in any axis.
    """
    if np.isscalar(resolution):
        resolution = (int(resolution),) * spec.dimension
    return MappedGrid(spec, resolution, periodic=periodic)


class DiscreteField:
    """Nodal values of an N-component field on a mapped grid."""

    def __init__(self, grid, values, components=None):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if components is not None and values.shape[1] != components:
            raise ValueError(
                f"value array has {values.shape[1]} components, expected {components}"
            )
        if values.shape[0] != grid.ndof:
            raise ValueError(
                f"value array length {values.shape[0]} does not match node count {grid.ndof}"
            )
        self.grid = grid
        self.values = values
        self.diagnostics = None

    @property
    def components(self):
        return self.values.shape[1]

    @property
    def flat(self):
        return self.values.reshape(-1)

    @classmethod
    def from_function(cls, grid, fn, components=1):
        coords = grid.node_coordinates()
        vals = np.asarray(fn(coords), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        return cls(grid, vals, components=components)

    @classmethod
    def zeros(cls, grid, components=1):
        return cls(grid, np.zeros((grid.ndof, components)))

    def copy(self):
        return DiscreteField(self.grid, self.values.copy())

    def export_rows(self):
        """(coordinates..., value...) rows for CSV export."""
        coords = self.grid.node_coordinates()
        return np.hstack([coords, self.values])
