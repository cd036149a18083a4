"""The degree-7 polynomial decision boundary and Legendre reshaping fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as L
from numpy.polynomial import polynomial as P
from scipy import linalg

from hullgap.datasets import rng_for
from hullgap.errors import FitError, GenerationError, InputError

POLY7_SCALE = 1e-5
POLY7_ROOTS = (-20.0, -17.0, -10.0, -5.0, 0.0, 2.0, 9.0)

RED = 0  # below the boundary
BLUE = 1  # above the boundary

DEFAULT_TRAIN_BOUNDS = (-22.0, 11.0, -4.0, 4.0)
DEFAULT_DOMAIN = (-25.0, 15.0, -5.0, 5.0)


def eval_poly7(x):
    """``1e-5 (x+20)(x+17)(x+10)(x+5) x (x-2)(x-9)`` in product form."""
    x = np.asarray(x, dtype=np.float64)
    out = np.full_like(x, POLY7_SCALE)
    for r in POLY7_ROOTS:
        out = out * (x - r)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Polynomial:
    """A univariate polynomial in root-product, monomial or Legendre form.

    ``coef`` holds basis coefficients, lowest degree first.  Legendre
    coefficients refer to the basis mapped from ``domain`` onto ``[-1, 1]``.
    """

    kind: str
    coef: tuple = ()
    roots: tuple = ()
    scale: float = 1.0
    domain: tuple = (-1.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("roots", "monomial", "legendre"):
            raise InputError(f"unknown polynomial representation {self.kind!r}")

    @property
    def degree(self) -> int:
        if self.kind == "roots":
            return len(self.roots)
        return len(self.coef) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "roots":
            out = np.full_like(x, self.scale)
            for r in self.roots:
                out = out * (x - r)
        elif self.kind == "monomial":
            out = P.polyval(x, np.asarray(self.coef))
        else:
            out = L.Legendre(np.asarray(self.coef), domain=self.domain)(x)
        return out if np.ndim(out) else float(out)

    def to_monomial(self) -> "Polynomial":
        if self.kind == "monomial":
            return self
        if self.kind == "roots":
            c = self.scale * P.polyfromroots(self.roots)
        else:
            c = L.Legendre(np.asarray(self.coef), domain=self.domain).convert(kind=P.Polynomial).coef
        return Polynomial("monomial", tuple(float(v) for v in c))

    def to_legendre(self, domain=(-1.0, 1.0)) -> "Polynomial":
        mono = self.to_monomial()
        c = P.Polynomial(np.asarray(mono.coef)).convert(kind=L.Legendre, domain=domain).coef
        return Polynomial("legendre", tuple(float(v) for v in c), domain=tuple(domain))


def poly7() -> Polynomial:
    return Polynomial("roots", roots=POLY7_ROOTS, scale=POLY7_SCALE)


@dataclass(frozen=True, eq=False)
class TwoClassSet:
    points: np.ndarray
    labels: np.ndarray
    bounds: tuple

    @property
    def m(self) -> int:
        return self.points.shape[0]


def gen_two_class(n_per_class: int = 100, margin: float = 0.3,
                  bounds=DEFAULT_TRAIN_BOUNDS, seed: int = 0,
                  max_draws: int = 1_000_000) -> TwoClassSet:
    """Points on either side of the degree-7 boundary.

    Candidates are uniform in ``bounds``; a candidate closer than ``margin``
    (vertically) to the boundary is rejected.  Points above the boundary are
    BLUE, below are RED; sampling stops once each class has ``n_per_class``
    points.  Gives up with :class:`GenerationError` after ``max_draws``
    candidates.
    """
    if margin <= 0:
        raise InputError("margin must be > 0")
    x_lo, x_hi, y_lo, y_hi = bounds
    if not (x_lo < x_hi and y_lo < y_hi):
        raise InputError(f"invalid bounds {bounds}")
    if n_per_class < 0:
        raise InputError("n_per_class must be >= 0")
    if n_per_class == 0:
        return TwoClassSet(np.zeros((0, 2)), np.zeros(0, dtype=np.int64), tuple(bounds))
    rng = rng_for(seed)
    kept = {RED: [], BLUE: []}
    drawn = 0
    batch = max(64, 4 * n_per_class)
    while drawn < max_draws:
        xs = rng.uniform(x_lo, x_hi, batch)
        ys = rng.uniform(y_lo, y_hi, batch)
        drawn += batch
        offset = ys - eval_poly7(xs)
        for x, y, o in zip(xs, ys, offset):
            if abs(o) < margin:
                continue
            label = BLUE if o > 0 else RED
            if len(kept[label]) < n_per_class:
                kept[label].append((x, y))
        if len(kept[RED]) == n_per_class and len(kept[BLUE]) == n_per_class:
            pts = np.array(kept[RED] + kept[BLUE])
            labels = np.array([RED] * n_per_class + [BLUE] * n_per_class, dtype=np.int64)
            return TwoClassSet(pts, labels, tuple(bounds))
    raise GenerationError(
        f"could not place {n_per_class} points per class with margin {margin} "
        f"in {bounds} after {drawn} draws")


def classify_poly7(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    return np.where(pts[:, 1] - eval_poly7(pts[:, 0]) > 0, BLUE, RED)


@dataclass(frozen=True)
class LegendreFit:
    polynomial: Polynomial
    constrained_residual: float
    free_residual: float


def legendre_fit(xs, ys, degree: int, interp_constraints=None) -> LegendreFit:
    """Least-squares fit in a Legendre basis scaled to the data interval.

    ``interp_constraints`` is a list of ``(x, y)`` pairs the polynomial must
    pass through exactly; they are imposed with a null-space method and the
    ``constrained_residual`` is the residual norm over ``(xs, ys)`` only.
    ``free_residual`` is the residual norm of the ordinary least-squares fit
    that treats the constraint points as additional data.
    """
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if degree < 0:
        raise InputError("degree must be >= 0")
    if xs.shape != ys.shape:
        raise InputError("xs and ys must have the same length")
    cons = np.asarray(interp_constraints if interp_constraints else np.zeros((0, 2)), dtype=np.float64)
    cons = cons.reshape(-1, 2)
    if cons.shape[0] > degree + 1:
        raise InputError(f"{cons.shape[0]} constraints exceed {degree + 1} coefficients")
    all_x = np.concatenate([xs, cons[:, 0]])
    all_y = np.concatenate([ys, cons[:, 1]])
    if all_x.size == 0:
        raise InputError("no data to fit")
    lo, hi = float(all_x.min()), float(all_x.max())
    if hi == lo:
        hi = lo + 1.0
    domain = (lo, hi)

    def vander(x):
        return L.legvander(2.0 * (x - lo) / (hi - lo) - 1.0, degree)

    A_all = vander(all_x)
    free_coef = linalg.lstsq(A_all, all_y)[0]
    free_res = float(np.linalg.norm(A_all @ free_coef - all_y))

    A = vander(xs)
    if cons.shape[0] == 0:
        coef = linalg.lstsq(A, ys)[0] if xs.size else np.zeros(degree + 1)
    else:
        C = vander(cons[:, 0])
        if np.linalg.matrix_rank(C) < C.shape[0]:
            raise FitError("interpolation constraints are rank-deficient")
        c0 = linalg.lstsq(C, cons[:, 1])[0]
        Z = linalg.null_space(C)
        coef = c0
        if Z.shape[1] and xs.size:
            z = linalg.lstsq(A @ Z, ys - A @ c0)[0]
            coef = c0 + Z @ z
    cons_res = float(np.linalg.norm(A @ coef - ys)) if xs.size else 0.0
    return LegendreFit(Polynomial("legendre", tuple(float(v) for v in coef), domain=domain),
                       cons_res, free_res)


def reshaping_problem(n_outside: int = 20, hull_x=(-22.0, 11.0), outside_x=(11.0, 30.0)):
    """Fixture for reshaping the boundary outside the hull.

    Returns ``(constraints, xs, ys)``: eight exact samples of the degree-7
    boundary spread over the hull's x-range, and flat targets (held at the
    boundary's value at the hull edge) beyond it.
    """
    cx = np.linspace(hull_x[0], hull_x[1], 8)
    constraints = [(float(x), float(eval_poly7(x))) for x in cx]
    xs = np.linspace(outside_x[0], outside_x[1], n_outside + 1)[1:]
    ys = np.full_like(xs, eval_poly7(hull_x[1]))
    return constraints, xs, ys
