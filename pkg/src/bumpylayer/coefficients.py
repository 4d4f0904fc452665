"""Periodic coefficient tensors and Lipschitz boundary graphs.

Every solver in this package acts on a divergence-form operator
``-div(A(y) grad u)`` whose coefficient tensor ``A`` is 1-periodic,
uniformly elliptic and Hoelder continuous, posed over a domain whose lower
boundary is the graph of a Lipschitz function.  This module holds the two
ingredient types (tensor field with its ellipticity/regularity metadata,
boundary graph with its Lipschitz constant) together with validated
constructors for the built-in families the experiments use.

Coefficients are closed-form evaluators sampled at quadrature points, never
pre-tabulated arrays, so convergence studies see exact pointwise values at
any resolution.  Evaluators are pure and immutable after construction and
may be sampled concurrently.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

COEFFICIENT_FAMILIES = ("constant", "laminate", "trigonometric", "user-sampled")
GRAPH_FAMILIES = ("flat", "sawtooth", "smooth-bump", "random-piecewise-linear")

_VALIDATION_SAMPLES = 512
_VALIDATION_SEED = 1234


class ValidationError(ValueError):
    """A constructed object violates one of its declared invariants."""


@dataclass(frozen=True)
class CoefficientField:
    """Periodic, elliptic coefficient tensor with declared metadata.

    ``evaluate`` maps points of shape (M, dimension) to tensors of shape
    (M, dimension, dimension, components, components).  Entry
    ``[m, a, b, i, j]`` multiplies ``d_b u_j`` in row ``(a, i)`` of the
    divergence-form operator, so the energy density reads
    ``A[a, b, i, j] * d_a u_i * d_b u_j``.

    ``ellipticity`` is the declared constant ``lam`` with
    ``lam |xi|^2 <= A xi . xi <= |xi|^2 / lam`` for all ``xi``; it is
    verified by sampling at construction time.  The Hoelder exponent and
    seminorm are declared by the family constructor, not estimated; they
    are carried as metadata only and never enter a computation.
    """

    dimension: int
    components: int
    evaluate: Callable
    ellipticity: float
    holder_exponent: float
    holder_seminorm: float
    family: str
    params: tuple = ()

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValidationError(f"dimension must be 2 or 3, got {self.dimension}")
        if self.components < 1:
            raise ValidationError(f"components must be >= 1, got {self.components}")
        if not 0.0 < self.ellipticity <= 1.0:
            raise ValidationError(
                f"ellipticity constant must lie in (0, 1], got {self.ellipticity}"
            )
        if not 0.0 < self.holder_exponent < 1.0:
            raise ValidationError(
                f"Hoelder exponent must lie in (0, 1), got {self.holder_exponent}"
            )
        if self.family not in COEFFICIENT_FAMILIES:
            raise ValidationError(
                f"unknown coefficient family {self.family!r}; known: {COEFFICIENT_FAMILIES}"
            )

    def periodicity_defect(self, samples=_VALIDATION_SAMPLES, seed=_VALIDATION_SEED):
        """Max of |A(y + z) - A(y)| over random points y and integer shifts z."""
        rng = np.random.default_rng(seed)
        y = rng.uniform(-2.0, 2.0, size=(samples, self.dimension))
        z = rng.integers(-3, 4, size=(samples, self.dimension)).astype(float)
        return float(np.max(np.abs(self.evaluate(y + z) - self.evaluate(y))))

    def ellipticity_defect(self, samples=_VALIDATION_SAMPLES, seed=_VALIDATION_SEED):
        """Worst violation of the two-sided ellipticity bounds over random probes.

        Returns ``(defect, point)`` where defect <= 0 means every sampled
        probe respected the declared constant.
        """
        rng = np.random.default_rng(seed)
        y = rng.uniform(0.0, 1.0, size=(samples, self.dimension))
        xi = rng.normal(size=(samples, self.dimension, self.components))
        xi /= np.linalg.norm(xi.reshape(samples, -1), axis=1)[:, None, None]
        a = self.evaluate(y)
        form = np.einsum("mabij,mai,mbj->m", a, xi, xi)
        low = self.ellipticity - form
        high = form - 1.0 / self.ellipticity
        defect = np.maximum(low, high)
        worst = int(np.argmax(defect))
        return float(defect[worst]), y[worst]

    def is_symmetric(self, samples=64, seed=_VALIDATION_SEED, tol=1e-12):
        rng = np.random.default_rng(seed)
        y = rng.uniform(0.0, 1.0, size=(samples, self.dimension))
        a = self.evaluate(y)
        return bool(np.max(np.abs(a - a.transpose(0, 2, 1, 4, 3))) <= tol)

    def validate(self, samples=_VALIDATION_SAMPLES, seed=_VALIDATION_SEED, tol=1e-10):
        defect = self.periodicity_defect(samples, seed)
        if defect > 1e-12:
            raise ValidationError(
                f"field is not 1-periodic: sampled defect {defect:.3e} exceeds 1e-12"
            )
        defect, point = self.ellipticity_defect(samples, seed)
        if defect > tol:
            raise ValidationError(
                "ellipticity violated by "
                f"{defect:.3e} at sample point {np.array2string(point, precision=6)} "
                f"(declared lambda = {self.ellipticity})"
            )
        return self


@dataclass(frozen=True)
class LipschitzGraph:
    """Boundary graph ``psi`` with Lipschitz constant and range in (-1, 0).

    ``evaluate`` accepts horizontal points of shape (M,) or (M, p) and
    returns heights of shape (M,).  ``lipschitz_bound`` is the declared
    bound on the gradient sup-norm; built-in constructors verify it with
    sampled difference quotients, including quotients straddling corner
    points for the non-smooth families.
    """

    evaluate: Callable
    lipschitz_bound: float
    family: str
    params: tuple = ()
    lower: float = field(default=-1.0)
    upper: float = field(default=0.0)

    def __post_init__(self):
        if self.family not in GRAPH_FAMILIES:
            raise ValidationError(
                f"unknown graph family {self.family!r}; known: {GRAPH_FAMILIES}"
            )
        if not (-1.0 < self.lower <= self.upper < 0.0):
            raise ValidationError(
                f"graph range [{self.lower}, {self.upper}] must lie inside (-1, 0)"
            )
        if self.lipschitz_bound < 0.0:
            raise ValidationError("Lipschitz bound must be nonnegative")

    def heights(self, points):
        points = np.asarray(points, dtype=float)
        vals = np.asarray(self.evaluate(points), dtype=float)
        return vals

    def range_defect(self, samples=_VALIDATION_SAMPLES, seed=_VALIDATION_SEED):
        rng = np.random.default_rng(seed)
        y = rng.uniform(-8.0, 8.0, size=samples)
        vals = self.heights(y)
        return float(max(np.max(vals), -1.0 - np.min(vals)))

    def quotient_defect(self, samples=_VALIDATION_SAMPLES, seed=_VALIDATION_SEED):
        """Max sampled difference quotient minus the declared bound."""
        rng = np.random.default_rng(seed)
        a = rng.uniform(-4.0, 4.0, size=samples)
        b = a + rng.uniform(-1.0, 1.0, size=samples)
        good = np.abs(b - a) > 1e-8
        a, b = a[good], b[good]
        quot = np.abs(self.heights(b) - self.heights(a)) / np.abs(b - a)
        return float(np.max(quot) - self.lipschitz_bound)

    def validate(self, samples=_VALIDATION_SAMPLES, seed=_VALIDATION_SEED):
        if self.range_defect(samples, seed) >= 0.0:
            raise ValidationError(
                f"graph range bound violated: values must stay strictly inside (-1, 0)"
            )
        if self.quotient_defect(samples, seed) > 1e-9:
            raise ValidationError(
                f"sampled difference quotient exceeds declared Lipschitz bound "
                f"{self.lipschitz_bound}"
            )
        return self


def _first_coordinate(points):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        return points
    return points[..., 0]


def isotropic_evaluator(scalar_fn, dimension, components):
    """Wrap a scalar function a(y) as the tensor a(y) * Id."""
    eye_d = np.eye(dimension)
    eye_n = np.eye(components)

    def evaluate(points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        a = np.asarray(scalar_fn(points), dtype=float)
        return np.einsum("m,ab,ij->mabij", a, eye_d, eye_n)

    return evaluate


def make_builtin_coefficients(family, dimension=2, components=1, params=()):
    """Construct and validate a built-in coefficient field.

    Families and parameters:

    - ``constant``: params ``[]`` or ``[a]``; A = a * Id with a > 0.
    - ``laminate``: params ``[base, amp]``; A = (base + amp sin(2 pi y_1)) Id.
    - ``trigonometric``: params ``[amp]`` or ``[base, amp]`` (base defaults
      to 2); A = (base + amp prod_k cos(2 pi y_k)) Id.

    The declared ellipticity constant is the sharp one for the family; the
    construction is deterministic for fixed parameters and rejects
    parameters that break ellipticity, naming a violating sample point.
    """
    params = tuple(float(p) for p in params)
    if family == "constant":
        a = params[0] if params else 1.0
        if a <= 0.0:
            raise ValidationError(
                f"constant family rejected: A(y) xi . xi = {a} |xi|^2 at y = 0"
            )
        lam = min(a, 1.0 / a)
        fn = lambda pts: np.full(pts.shape[0], a)
        seminorm = 0.0
    elif family == "laminate":
        if len(params) != 2:
            raise ValidationError("laminate family takes params [base, amp]")
        base, amp = params
        lo, hi = base - abs(amp), base + abs(amp)
        if lo <= 0.0:
            raise ValidationError(
                f"laminate family rejected: A(y) xi . xi = {lo} |xi|^2 at the "
                f"minimizing point of base + amp sin(2 pi y_1)"
            )
        lam = min(lo, 1.0 / hi)
        fn = lambda pts: base + amp * np.sin(2.0 * np.pi * pts[:, 0])
        seminorm = 2.0 * np.pi * abs(amp)
    elif family == "trigonometric":
        if len(params) == 1:
            base, amp = 2.0, params[0]
        elif len(params) == 2:
            base, amp = params
        else:
            raise ValidationError("trigonometric family takes params [amp] or [base, amp]")
        lo, hi = base - abs(amp), base + abs(amp)
        if lo <= 0.0:
            raise ValidationError(
                f"trigonometric family rejected: A(y) xi . xi = {lo} |xi|^2 at the "
                f"minimizing point of the cosine product"
            )
        lam = min(lo, 1.0 / hi)

        def fn(pts, base=base, amp=amp):
            prod = np.ones(pts.shape[0])
            for k in range(pts.shape[1]):
                prod *= np.cos(2.0 * np.pi * pts[:, k])
            return base + amp * prod

        seminorm = 2.0 * np.pi * abs(amp) * dimension
    else:
        raise ValidationError(
            f"unknown coefficient family {family!r}; known: {COEFFICIENT_FAMILIES}"
        )
    field = CoefficientField(
        dimension=dimension,
        components=components,
        evaluate=isotropic_evaluator(fn, dimension, components),
        ellipticity=lam,
        holder_exponent=0.5,
        holder_seminorm=seminorm,
        family=family,
        params=params,
    )
    return field.validate()


def with_skew_perturbation(base, amplitude, frequency=1):
    """Add an oscillating antisymmetric part to a field ("user-sampled").

    The perturbation ``s(y) (e_1 x e_2)`` contributes nothing to the
    quadratic form, so the declared ellipticity constant carries over, but
    the resulting operator is genuinely non-symmetric.
    """
    if base.components != 1:
        raise ValidationError("skew perturbation implemented for scalar systems")
    d = base.dimension

    def evaluate(points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        a = base.evaluate(points)
        s = amplitude * np.sin(2.0 * np.pi * frequency * points[:, 0])
        out = a.copy()
        out[:, 0, 1, 0, 0] += s
        out[:, 1, 0, 0, 0] -= s
        return out

    field = CoefficientField(
        dimension=d,
        components=1,
        evaluate=evaluate,
        ellipticity=base.ellipticity,
        holder_exponent=base.holder_exponent,
        holder_seminorm=base.holder_seminorm + 2.0 * np.pi * abs(amplitude) * frequency,
        family="user-sampled",
        params=base.params + (amplitude, float(frequency)),
    )
    return field.validate()


def transposed_field(base):
    """The field with A replaced by its transpose-adjoint A^T (user-sampled)."""

    def evaluate(points):
        return base.evaluate(points).transpose(0, 2, 1, 4, 3)

    field = CoefficientField(
        dimension=base.dimension,
        components=base.components,
        evaluate=evaluate,
        ellipticity=base.ellipticity,
        holder_exponent=base.holder_exponent,
        holder_seminorm=base.holder_seminorm,
        family="user-sampled",
        params=base.params,
    )
    return field.validate()


def _tent(t):
    # distance to the nearest integer, the 1-Lipschitz tent map
    return np.abs(t - np.round(t))


def make_builtin_graph(family, params=()):
    """Construct and validate a built-in Lipschitz boundary graph.

    Families and parameters:

    - ``flat``: params ``[level]``; psi == level, level in (-1, 0).
    - ``sawtooth``: params ``[amp]`` or ``[amp, level]`` (level defaults to
      -0.5); psi(y) = level + amp * (dist(y_1, Z) - 1/4).  Genuinely non-C1:
      corners at every half-integer.
    - ``smooth-bump``: params ``[amp]`` or ``[amp, level]``;
      psi(y) = level + amp * sin(2 pi y_1).
    - ``random-piecewise-linear``: params ``[seed]`` or ``[seed, knots]``;
      linear interpolation of seeded uniform values on an integer lattice,
      periodic with period ``knots``.  Deterministic for a fixed seed.
    """
    params = tuple(float(p) for p in params)
    if family == "flat":
        if len(params) != 1:
            raise ValidationError("flat family takes params [level]")
        level = params[0]
        if not -1.0 < level < 0.0:
            raise ValidationError(
                f"flat graph rejected: range bound violated, level {level} outside (-1, 0)"
            )
        graph = LipschitzGraph(
            evaluate=lambda pts: np.full(np.shape(_first_coordinate(pts)), level),
            lipschitz_bound=0.0,
            family=family,
            params=params,
            lower=level,
            upper=level,
        )
    elif family == "sawtooth":
        if len(params) == 1:
            amp, level = params[0], -0.5
        elif len(params) == 2:
            amp, level = params
        else:
            raise ValidationError("sawtooth family takes params [amp] or [amp, level]")
        lower, upper = level - amp / 4.0, level + amp / 4.0
        if amp <= 0.0 or not (-1.0 < lower and upper < 0.0):
            raise ValidationError(
                f"sawtooth graph rejected: range [{lower}, {upper}] outside (-1, 0)"
            )
        graph = LipschitzGraph(
            evaluate=lambda pts: level + amp * (_tent(_first_coordinate(pts)) - 0.25),
            lipschitz_bound=amp,
            family=family,
            params=params,
            lower=lower,
            upper=upper,
        )
    elif family == "smooth-bump":
        if len(params) == 1:
            amp, level = params[0], -0.5
        elif len(params) == 2:
            amp, level = params
        else:
            raise ValidationError("smooth-bump family takes params [amp] or [amp, level]")
        lower, upper = level - abs(amp), level + abs(amp)
        if not (-1.0 < lower and upper < 0.0):
            raise ValidationError(
                f"smooth-bump graph rejected: range [{lower}, {upper}] outside (-1, 0)"
            )
        graph = LipschitzGraph(
            evaluate=lambda pts: level + amp * np.sin(2.0 * np.pi * _first_coordinate(pts)),
            lipschitz_bound=2.0 * np.pi * abs(amp),
            family=family,
            params=params,
            lower=lower,
            upper=upper,
        )
    elif family == "random-piecewise-linear":
        if len(params) == 1:
            seed, knots = int(params[0]), 8
        elif len(params) == 2:
            seed, knots = int(params[0]), int(params[1])
        else:
            raise ValidationError(
                "random-piecewise-linear family takes params [seed] or [seed, knots]"
            )
        rng = np.random.default_rng(seed)
        values = rng.uniform(-0.7, -0.3, size=knots)
        slopes = np.diff(np.append(values, values[0]))

        def evaluate(pts, values=values, knots=knots):
            t = np.mod(_first_coordinate(pts), knots)
            i = np.minimum(t.astype(int), knots - 1)
            frac = t - i
            nxt = np.append(values, values[0])
            return values[i] * (1.0 - frac) + nxt[i + 1] * frac

        graph = LipschitzGraph(
            evaluate=evaluate,
            lipschitz_bound=float(np.max(np.abs(slopes))),
            family=family,
            params=(float(seed), float(knots)),
            lower=float(np.min(values)),
            upper=float(np.max(values)),
        )
    else:
        raise ValidationError(
            f"unknown graph family {family!r}; known: {GRAPH_FAMILIES}"
        )
    return graph.validate()
