"""Projection of query points onto the convex hull of a sample matrix.

The hull point of a query ``q`` is ``alpha @ D`` where ``alpha`` lies on the
probability simplex and minimizes ``||q - alpha @ D||^2``.  The exact solver
is a gradient projection method: a projected-gradient step along the arc
``P(alpha - t g)`` with Armijo backtracking, followed by an exact
least-squares minimization on the affine hull of the current support.  The
result is certified with the first-order (KKT) conditions of the problem.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg

from hullgap.errors import InputError

ARMIJO_SHRINK = 0.5
ARMIJO_SLOPE = 1e-4
DEFAULT_SKETCH_BLOCK = 10_000
DEFAULT_MEMBERSHIP_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """An immutable ``n x d`` matrix of samples, one sample per row.

    ``bounds`` optionally records the feature domain as a ``(lo, hi)`` pair of
    scalars or length-``d`` arrays; every entry must lie inside it.
    """

    data: np.ndarray
    bounds: tuple | None = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise InputError(f"sample matrix must be 2-D, got shape {data.shape}")
        n, d = data.shape
        if n < 1 or d < 1:
            raise InputError(f"sample matrix must be nonempty, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InputError("sample matrix contains non-finite entries")
        if self.bounds is not None:
            lo, hi = (np.broadcast_to(np.asarray(b, dtype=np.float64), (d,)) for b in self.bounds)
            if np.any(lo > hi):
                raise InputError("bounds must satisfy lo <= hi")
            if np.any(data < lo) or np.any(data > hi):
                raise InputError("sample matrix has entries outside its bounds")
            object.__setattr__(self, "bounds", (lo.copy(), hi.copy()))
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def take(self, rows) -> "SampleMatrix":
        return SampleMatrix(self.data[np.asarray(rows)], self.bounds)

    def __len__(self):
        return self.n


def as_sample_matrix(data) -> SampleMatrix:
    if isinstance(data, SampleMatrix):
        return data
    return SampleMatrix(data)


def _as_query(query, d: int) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.shape[0] != d:
        raise InputError(f"query has dimension {q.shape[0]}, dataset has {d}")
    if not np.all(np.isfinite(q)):
        raise InputError("query contains non-finite entries")
    return q


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules and bookkeeping for the hull solvers.

    ``sketch_pieces=None`` picks ``ceil(n / 10000)`` contiguous blocks.
    """

    max_iterations: int = 5000
    gradient_tolerance: float = 1e-8
    kkt_tolerance: float = 1e-6
    support_threshold: float = 1e-6
    sketch_pieces: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InputError("max_iterations must be >= 1")
        for name in ("gradient_tolerance", "kkt_tolerance", "support_threshold"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be > 0")
        if self.sketch_pieces is not None and self.sketch_pieces < 1:
            raise InputError("sketch_pieces must be >= 1")
        if self.seed < 0:
            raise InputError("seed must be unsigned")

    def pieces_for(self, n: int) -> int:
        if self.sketch_pieces is None:
            return max(1, math.ceil(n / DEFAULT_SKETCH_BLOCK))
        return self.sketch_pieces


class KktReport(NamedTuple):
    residual: float
    satisfied: bool
    multiplier: float


@dataclass
class ProjectionResult:
    weights: np.ndarray
    hull_point: np.ndarray
    distance: float
    kkt_residual: float
    iterations: int
    converged: bool
    support: list = field(default_factory=list)
    # distance after each iteration; index 0 is the starting point
    trace: list = field(default_factory=list, repr=False)


@dataclass
class MembershipVerdict:
    inside: bool
    distance: float
    normal: np.ndarray | None = None
    offset: float | None = None
    margin: float | None = None

    @property
    def hyperplane(self):
        if self.inside:
            return None
        return self.normal, self.offset, self.margin


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{a : a >= 0, sum(a) = 1}``.

    Sort-based threshold method: find ``theta`` with
    ``sum(max(v - theta, 0)) = 1`` and clip.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        raise InputError("cannot project an empty vector onto the simplex")
    if not np.all(np.isfinite(v)):
        raise InputError("simplex projection input contains non-finite entries")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    rho = np.nonzero(u * ks > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def kkt_conditions(gradient: np.ndarray, weights: np.ndarray, bound_tol: float = 0.0):
    """Return ``(residual, multiplier)`` of the simplex KKT conditions."""
    g = gradient
    a = weights
    at_zero = a <= bound_tol
    at_one = a >= 1.0 - bound_tol
    interior = ~at_zero & ~at_one
    if np.any(interior):
        lam = float(np.mean(g[interior]))
    else:
        lam = float(np.mean(g[at_one]))
    viol = np.zeros_like(g)
    viol[interior] = np.abs(g[interior] - lam)
    viol[at_zero] = np.maximum(lam - g[at_zero], 0.0)
    viol[at_one] = np.maximum(g[at_one] - lam, 0.0)
    return float(np.max(viol)), lam


def _check_feasible(weights: np.ndarray, n: int, tol: float = 1e-9) -> np.ndarray:
    a = np.asarray(weights, dtype=np.float64).ravel()
    if a.shape[0] != n:
        raise InputError(f"weights have length {a.shape[0]}, dataset has {n} rows")
    if not np.all(np.isfinite(a)):
        raise InputError("weights contain non-finite entries")
    if np.any(a < -tol) or np.any(a > 1 + tol) or abs(a.sum() - 1.0) > tol:
        raise InputError("weights are not on the probability simplex")
    return a


def verify_kkt(query, dataset, weights, tol: float = 1e-6, bound_tol: float = 0.0) -> KktReport:
    """Certify first-order optimality of ``weights`` for the hull projection.

    The gradient is ``g = -2 D (q - D^T a)``.  The multiplier is the mean of
    ``g`` over the strictly interior coefficients; zero coefficients may have
    ``g_i`` above it and coefficients at one may have ``g_i`` below it.
    """
    D = as_sample_matrix(dataset).data
    q = _as_query(query, D.shape[1])
    a = _check_feasible(weights, D.shape[0])
    g = -2.0 * (D @ (q - a @ D))
    residual, lam = kkt_conditions(g, a, bound_tol)
    return KktReport(residual, residual <= tol, lam)


def _combine(D: np.ndarray, a: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(a)
    return a[idx] @ D[idx]


def _support_pairs(a: np.ndarray, threshold: float) -> list:
    idx = np.flatnonzero(a > threshold)
    order = np.lexsort((idx, -a[idx]))
    return [(int(i), float(a[i])) for i in idx[order]]


def _nearest_row(D: np.ndarray, q: np.ndarray) -> tuple[int, float]:
    dist = np.sqrt(np.einsum("ij,ij->i", D - q, D - q))
    i = int(np.argmin(dist))
    return i, float(dist[i])


def _reduce_support(D: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Shrink the support to at most ``d + 1`` rows without moving the hull point.

    Carathéodory reduction: walk along a null vector of the stacked
    ``[rows; ones]`` system until a coefficient reaches zero, and repeat.
    """
    a = a.copy()
    face = np.flatnonzero(a > 0)
    while face.size > D.shape[1] + 1:
        M = np.vstack([D[face].T, np.ones(face.size)])
        v = np.linalg.svd(M)[2][-1]
        if not np.any(v > 0):
            v = -v
        pos = v > 0
        ratios = a[face][pos] / v[pos]
        k = int(np.argmin(ratios))
        a[face] -= ratios[k] * v
        a[face[np.flatnonzero(pos)[k]]] = 0.0
        a[face] = np.maximum(a[face], 0.0)
        face = np.flatnonzero(a > 0)
    return a / a.sum()


def _face_step(D: np.ndarray, q: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Move toward the minimizer over the affine hull of the current support.

    A support larger than ``d + 1`` is first reduced to an affinely
    independent one.  The step is truncated at the first coefficient that
    reaches zero, so the result stays feasible; blocking coefficients are set
    to exactly zero.
    """
    face = np.flatnonzero(a > 0)
    if face.size > D.shape[1] + 1:
        a = _reduce_support(D, a)
        face = np.flatnonzero(a > 0)
    if face.size < 2:
        return a
    pivot = face[np.argmax(a[face])]
    others = face[face != pivot]
    A = (D[others] - D[pivot]).T
    beta = linalg.lstsq(A, q - D[pivot], lapack_driver="gelsd", check_finite=False)[0]
    target = np.zeros_like(a)
    target[others] = beta
    target[pivot] = 1.0 - beta.sum()
    delta = target - a
    shrinking = face[delta[face] < 0]
    step = 1.0
    if shrinking.size:
        ratios = a[shrinking] / -delta[shrinking]
        step = min(1.0, float(ratios.min()))
    out = a + step * delta
    if step < 1.0:
        out[shrinking[ratios <= step]] = 0.0
    out[face] = np.maximum(out[face], 0.0)
    return out / out.sum()


def _solve(D: np.ndarray, q: np.ndarray, a: np.ndarray, cfg: SolverConfig):
    """Gradient projection with Armijo backtracking plus face minimization."""
    lipschitz = 2.0 * float(np.max(np.einsum("ij,ij->i", D, D)))
    t = 1.0 / lipschitz if lipschitz > 0 else 1.0
    r = q - _combine(D, a)
    f = float(r @ r)
    g = -2.0 * (D @ r)
    trace = [math.sqrt(f)]
    prev = None
    converged = False
    it = 0
    while True:
        res, _ = kkt_conditions(g, a)
        if res <= cfg.kkt_tolerance:
            converged = True
            break
        pg = float(np.linalg.norm(project_simplex(a - g) - a))
        if pg <= cfg.gradient_tolerance or it >= cfg.max_iterations:
            break
        it += 1

        if prev is not None:
            s = a - prev[0]
            y = g - prev[1]
            sy = float(s @ y)
            if sy > 0:
                t = float(s @ s) / sy
        prev = (a, g)

        # Armijo backtracking along the projection arc.
        while True:
            trial = project_simplex(a - t * g)
            rt = q - _combine(D, trial)
            ft = float(rt @ rt)
            if ft <= f + ARMIJO_SLOPE * float(g @ (trial - a)):
                break
            t *= ARMIJO_SHRINK
            if t * lipschitz < 1e-12:
                trial, rt, ft = a, r, f
                break

        cand = _face_step(D, q, trial)
        rc = q - _combine(D, cand)
        fc = float(rc @ rc)
        if fc <= ft:
            trial, rt, ft = cand, rc, fc
        a, r, f = trial, rt, ft
        g = -2.0 * (D @ r)
        trace.append(math.sqrt(f))
    res, _ = kkt_conditions(g, a)
    return a, it, converged and res <= cfg.kkt_tolerance, res, trace


def _result(D, q, a, iterations, converged, residual, trace, cfg) -> ProjectionResult:
    x = _combine(D, a)
    return ProjectionResult(
        weights=a,
        hull_point=x,
        distance=float(np.linalg.norm(q - x)),
        kkt_residual=residual,
        iterations=iterations,
        converged=bool(converged),
        support=_support_pairs(a, cfg.support_threshold),
        trace=trace,
    )


def project_to_hull(query, dataset, config: SolverConfig | None = None) -> ProjectionResult:
    """Closest point to ``query`` on the convex hull of the dataset rows.

    Starts from the nearest training row.  If the iteration budget runs out
    before the KKT residual drops below ``config.kkt_tolerance``, the best
    iterate is returned with ``converged=False``.
    """
    cfg = config or SolverConfig()
    D = as_sample_matrix(dataset).data
    q = _as_query(query, D.shape[1])
    a = np.zeros(D.shape[0])
    a[_nearest_row(D, q)[0]] = 1.0
    a, its, ok, res, trace = _solve(D, q, a, cfg)
    return _result(D, q, a, its, ok, res, trace, cfg)


def sketched_project(query, dataset, config: SolverConfig | None = None) -> ProjectionResult:
    """Solve on growing prefixes of the dataset, warm-starting each solve.

    The rows are cut into ``config.sketch_pieces`` contiguous blocks.  The
    first block is solved from scratch; each later solve starts from the
    previous weights padded with zeros.  The last solve covers every row, so
    the optimum is the same as :func:`project_to_hull`.
    """
    cfg = config or SolverConfig()
    sm = as_sample_matrix(dataset)
    pieces = min(cfg.pieces_for(sm.n), sm.n)
    if pieces <= 1:
        return project_to_hull(query, sm, cfg)
    D = sm.data
    q = _as_query(query, D.shape[1])
    ends = [int(c[-1]) + 1 for c in np.array_split(np.arange(sm.n), pieces)]
    a = np.zeros(ends[0])
    a[_nearest_row(D[: ends[0]], q)[0]] = 1.0
    total = 0
    trace = []
    for end in ends:
        a = project_simplex(np.concatenate([a, np.zeros(end - a.size)]))
        a, its, ok, res, tr = _solve(D[:end], q, a, cfg)
        total += its
        trace.extend(tr)
    return _result(D, q, a, total, ok, res, trace, cfg)


def membership(query, dataset, tol: float = DEFAULT_MEMBERSHIP_TOL,
               config: SolverConfig | None = None) -> MembershipVerdict:
    """Decide whether ``query`` lies in the hull; witness a separating plane if not.

    Points within ``tol`` of the hull (including its boundary) count as inside.
    """
    sm = as_sample_matrix(dataset)
    q = _as_query(query, sm.d)
    res = project_to_hull(q, sm, config)
    if res.distance <= tol:
        return MembershipVerdict(True, res.distance)
    normal = (q - res.hull_point) / res.distance
    offset = float(np.max(sm.data @ normal))
    margin = float(normal @ q) - offset
    return MembershipVerdict(False, res.distance, normal, offset, margin)


def approx_project_fw(query, dataset, iterations: int = 100,
                      config: SolverConfig | None = None) -> ProjectionResult:
    """Frank-Wolfe approximation of the hull projection.

    Iteration 1 is the nearest training row.  Each later iteration moves
    toward the row minimizing the linearized objective with step
    ``min(2/(k+2), exact line minimizer)``; capping at the line minimizer
    keeps the distance non-increasing.  Every iterate is feasible, so the
    reported distance bounds the exact one from above.
    """
    if iterations < 1:
        raise InputError("iterations must be >= 1")
    cfg = config or SolverConfig()
    D = as_sample_matrix(dataset).data
    q = _as_query(query, D.shape[1])
    i0, _ = _nearest_row(D, q)
    a = np.zeros(D.shape[0])
    a[i0] = 1.0
    x = D[i0].copy()
    r = q - x
    trace = [float(np.linalg.norm(r))]
    converged = False
    gap = math.inf
    k = 0
    for k in range(1, iterations):
        g = -2.0 * (D @ r)
        s = int(np.argmin(g))
        gap = float(g @ a - g[s])
        if gap <= cfg.gradient_tolerance:
            converged = True
            k -= 1
            break
        direction = D[s] - x
        dd = float(direction @ direction)
        step = 2.0 / (k + 2.0)
        if dd > 0:
            step = min(step, float(r @ direction) / dd)
        a *= 1.0 - step
        a[s] += step
        x = x + step * direction
        r = q - x
        trace.append(float(np.linalg.norm(r)))
    else:
        g = -2.0 * (D @ r)
        gap = float(g @ a - g.min())
        converged = gap <= cfg.gradient_tolerance
    a = a / a.sum()
    x = _combine(D, a)
    g = -2.0 * (D @ (q - x))
    res, _ = kkt_conditions(g, a)
    return ProjectionResult(
        weights=a,
        hull_point=x,
        distance=float(np.linalg.norm(q - x)),
        kkt_residual=res,
        iterations=k + 1,
        converged=converged,
        support=_support_pairs(a, cfg.support_threshold),
        trace=trace,
    )


def support_set(result, threshold: float = 1e-6) -> list:
    """``(index, coefficient)`` pairs above ``threshold``, largest first.

    Ties are ordered by the lower index.
    """
    a = result.weights if isinstance(result, ProjectionResult) else result
    return _support_pairs(np.asarray(a, dtype=np.float64).ravel(), threshold)


def nearest_sample(query, dataset) -> tuple[int, float]:
    """Index and distance of the closest training row (lowest index on ties)."""
    D = as_sample_matrix(dataset).data
    return _nearest_row(D, _as_query(query, D.shape[1]))


def perturbation(query, result: ProjectionResult) -> np.ndarray:
    """The shortest vector that, subtracted from ``query``, lands on the hull."""
    q = np.asarray(query, dtype=np.float64).ravel()
    return q - result.hull_point


class PairwiseStats(NamedTuple):
    max: float
    mean: float
    min: float
    argmax_pair: tuple
    argmin_pair: tuple


def pairwise_stats(dataset, sample_limit: int | None = None, seed: int = 0,
                   block: int = 1024) -> PairwiseStats:
    """Max, mean and min Euclidean distance over distinct pairs of rows.

    With ``sample_limit`` the statistics are computed on a uniform subsample
    of that many rows drawn with ``numpy.random.PCG64(seed)``; pair indices
    refer to the original rows.
    """
    sm = as_sample_matrix(dataset)
    if sm.n < 2:
        raise InputError("pairwise statistics need at least two rows")
    rows = np.arange(sm.n)
    if sample_limit is not None and sample_limit < sm.n:
        if sample_limit < 2:
            raise InputError("sample_limit must be >= 2")
        rng = np.random.Generator(np.random.PCG64(seed))
        rows = np.sort(rng.choice(sm.n, size=sample_limit, replace=False))
    X = sm.data[rows]
    m = X.shape[0]
    sq = np.einsum("ij,ij->i", X, X)
    best_max, best_min = -1.0, math.inf
    arg_max = arg_min = (0, 1)
    total = 0.0
    for s in range(0, m, block):
        e = min(m, s + block)
        d2 = sq[s:e, None] + sq[None, :] - 2.0 * (X[s:e] @ X.T)
        np.maximum(d2, 0.0, out=d2)
        dist = np.sqrt(d2)
        # keep pairs (i, j) with j > i only
        upper = np.arange(m)[None, :] > np.arange(s, e)[:, None]
        total += float(dist[upper].sum())
        masked = np.where(upper, dist, -1.0)
        i, j = np.unravel_index(np.argmax(masked), masked.shape)
        if masked[i, j] > best_max:
            best_max, arg_max = masked[i, j], (s + i, j)
        masked = np.where(upper, dist, np.inf)
        i, j = np.unravel_index(np.argmin(masked), masked.shape)
        if masked[i, j] < best_min:
            best_min, arg_min = masked[i, j], (s + i, j)
    # refine the extremes without the Gram-matrix cancellation error
    dmax = float(np.linalg.norm(X[arg_max[0]] - X[arg_max[1]]))
    dmin = float(np.linalg.norm(X[arg_min[0]] - X[arg_min[1]]))
    npairs = m * (m - 1) / 2
    return PairwiseStats(
        max=dmax,
        mean=total / npairs,
        min=dmin,
        argmax_pair=(int(rows[arg_max[0]]), int(rows[arg_max[1]])),
        argmin_pair=(int(rows[arg_min[0]]), int(rows[arg_min[1]])),
    )


@dataclass
class DistanceReport:
    distances: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    support_sizes: np.ndarray
    errors: list
    histogram: np.ndarray
    bin_edges: np.ndarray
    results: list = field(repr=False, default_factory=list)

    def outside_fraction(self, tol: float = DEFAULT_MEMBERSHIP_TOL) -> float:
        ok = np.isfinite(self.distances)
        return float(np.mean(self.distances[ok] > tol)) if ok.any() else 0.0


def batch_distances(queries, dataset, config: SolverConfig | None = None,
                    bins: int = 50, threads: int = 1) -> DistanceReport:
    """Hull distance of every query row, solved independently.

    A query that raises is recorded in ``errors`` with a NaN distance; the
    rest of the batch still runs.  The histogram spans ``[0, max distance]``.
    """
    cfg = config or SolverConfig()
    sm = as_sample_matrix(dataset)
    Q = np.asarray(queries.data if isinstance(queries, SampleMatrix) else queries, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q[None, :]
    if Q.shape[1] != sm.d:
        raise InputError(f"queries have dimension {Q.shape[1]}, dataset has {sm.d}")

    def one(q):
        try:
            return sketched_project(q, sm, cfg), None
        except Exception as exc:  # recorded per query, never aborts the batch
            return None, f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, Q))
    else:
        out = [one(q) for q in Q]

    m = len(out)
    distances = np.full(m, np.nan)
    converged = np.zeros(m, dtype=bool)
    iterations = np.zeros(m, dtype=np.int64)
    support_sizes = np.zeros(m, dtype=np.int64)
    for k, (res, _) in enumerate(out):
        if res is not None:
            distances[k] = res.distance
            converged[k] = res.converged
            iterations[k] = res.iterations
            support_sizes[k] = len(res.support)
    finite = distances[np.isfinite(distances)]
    top = float(finite.max()) if finite.size else 0.0
    hist, edges = np.histogram(finite, bins=bins, range=(0.0, top if top > 0 else 1.0))
    return DistanceReport(
        distances=distances,
        converged=converged,
        iterations=iterations,
        support_sizes=support_sizes,
        errors=[err for _, err in out],
        histogram=hist,
        bin_edges=edges,
        results=[res for res, _ in out],
    )


