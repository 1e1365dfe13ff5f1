"""Cross-representation constructions and equivalence machinery.

The central tool is a closed difference-of-convex algebra: every model
here can be lowered to ``max of affines - max of affines``, from which a
two-term max-of-affines form falls out directly.  The lattice builder and
the canonical-form reconstruction work on region-wise models instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .affine import AffineFunction
from .conventional import (
    ConventionalPWL,
    check_consistent_variation,
    check_continuity,
)
from .errors import (
    DcSizeError,
    DimensionMismatchError,
    DiscontinuousModelError,
    NotCplrRepresentableError,
)
from .models import (
    AhhModel,
    CplrModel,
    GhhModel,
    HingeModel,
    HlCplrBasis,
    LatticeModel,
    NestedCplrModel,
    SbfModel,
)

# Hard cap on affine-set rows; growth past this fails loudly instead of
# silently pruning.
DC_SIZE_CAP = 4096


def _dedupe(rows):
    """Sort rows lexicographically and drop exact duplicates (value-safe)."""
    return np.unique(rows, axis=0)


class DCForm:
    """Difference of two convex max-of-affines functions.

    Stored as homogeneous coefficient rows ``[J | b]``; the value is
    ``max(plus rows) - max(minus rows)``.
    """

    def __init__(self, plus, minus):
        plus = np.atleast_2d(np.asarray(plus, dtype=float))
        minus = np.atleast_2d(np.asarray(minus, dtype=float))
        if plus.shape[1] != minus.shape[1]:
            raise DimensionMismatchError(plus.shape[1] - 1, minus.shape[1] - 1,
                                         what="minus side")
        if plus.shape[0] == 0 or minus.shape[0] == 0:
            raise ValueError("both sides need at least one affine row")
        self.plus = _dedupe(plus)
        self.minus = _dedupe(minus)
        worst = max(self.plus.shape[0], self.minus.shape[0])
        if worst > DC_SIZE_CAP:
            raise DcSizeError(worst, DC_SIZE_CAP)

    @property
    def dim(self):
        return self.plus.shape[1] - 1

    def value(self, x):
        return float(self.values(np.atleast_1d(np.asarray(x, dtype=float)))[0])

    def values(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None] if self.dim == 1 else points[None, :]
        if points.shape[1] != self.dim:
            raise DimensionMismatchError(self.dim, points.shape[1], what="points")
        H = np.column_stack([points, np.ones(points.shape[0])])
        return np.max(H @ self.plus.T, axis=1) - np.max(H @ self.minus.T, axis=1)

    def plus_affines(self):
        return [AffineFunction(r[:-1], r[-1]) for r in self.plus]

    def minus_affines(self):
        return [AffineFunction(r[:-1], r[-1]) for r in self.minus]


def _rows(affine):
    return np.concatenate([affine.jacobian, [affine.bias]])[None, :]


def _pairwise_sum(a, b):
    out = (a[:, None, :] + b[None, :, :]).reshape(-1, a.shape[1])
    if out.shape[0] > DC_SIZE_CAP:
        raise DcSizeError(out.shape[0], DC_SIZE_CAP)
    return out


def dc_from_affine(affine):
    """Lift an affine function: plus = {f}, minus = {0}."""
    zero = np.zeros((1, affine.dim + 1))
    return DCForm(_rows(affine), zero)


def dc_sum(f, g):
    if f.dim != g.dim:
        raise DimensionMismatchError(f.dim, g.dim, what="operand")
    return DCForm(_pairwise_sum(f.plus, g.plus), _pairwise_sum(f.minus, g.minus))


def dc_negate(f):
    return DCForm(f.minus, f.plus)


def dc_scale(f, c):
    c = float(c)
    if c < 0:
        return dc_negate(dc_scale(f, -c))
    return DCForm(c * f.plus, c * f.minus)


def dc_max(f, g):
    """max(P_f - Q_f, P_g - Q_g) = max(P_f + Q_g, P_g + Q_f) - (Q_f + Q_g)."""
    if f.dim != g.dim:
        raise DimensionMismatchError(f.dim, g.dim, what="operand")
    plus = np.vstack([_pairwise_sum(f.plus, g.minus),
                      _pairwise_sum(g.plus, f.minus)])
    if plus.shape[0] > DC_SIZE_CAP:
        raise DcSizeError(plus.shape[0], DC_SIZE_CAP)
    return DCForm(plus, _pairwise_sum(f.minus, g.minus))


def dc_min(f, g):
    return dc_negate(dc_max(dc_negate(f), dc_negate(g)))


def dc_abs(f):
    return dc_max(f, dc_negate(f))


def dc_prune(f, box, density=33, margin=1e-9):
    """Drop rows strictly dominated on a probe grid by the given margin.

    This is a grid-certified reduction: a row is removed only when it sits
    below the side's max by more than ``margin`` at every probe point.
    """
    lo, hi = box
    pts = grid_points(lo, hi, density)
    H = np.column_stack([pts, np.ones(pts.shape[0])])

    def keep(rows):
        vals = H @ rows.T
        top = np.max(vals, axis=1)
        mask = np.max(vals - top[:, None], axis=0) > -margin
        return rows[mask] if np.any(mask) else rows[:1]

    return DCForm(keep(f.plus), keep(f.minus))


def dc_from_model(model):
    """Lower any supported model to difference-of-convex form."""
    if isinstance(model, DCForm):
        return model
    if isinstance(model, AffineFunction):
        return dc_from_affine(model)
    if isinstance(model, CplrModel):
        out = dc_from_affine(AffineFunction(model.alpha0, model.beta0))
        for eta, alpha, beta in model.terms:
            term = dc_abs(dc_from_affine(AffineFunction(alpha, beta)))
            out = dc_sum(out, dc_scale(term, eta))
        return out
    if isinstance(model, NestedCplrModel):
        return _dc_from_expr(model.root)
    if isinstance(model, HingeModel):
        out = dc_from_affine(AffineFunction(model.alpha0, model.beta0))
        zero = AffineFunction(np.zeros(model.dim), 0.0)
        for w, alpha, beta in model.hinges:
            hinge = dc_max(dc_from_affine(AffineFunction(alpha, beta)),
                           dc_from_affine(zero))
            out = dc_sum(out, dc_scale(hinge, w))
        return out
    if isinstance(model, GhhModel):
        out = None
        zero = np.zeros((1, model.dim + 1))
        for w, affines in model.terms:
            term = DCForm(np.vstack([_rows(a) for a in affines]), zero)
            term = dc_scale(term, w)
            out = term if out is None else dc_sum(out, term)
        return out
    if isinstance(model, HlCplrBasis):
        factors = []
        for axis, knot in model.coordinates:
            alpha = np.zeros(model.dim)
            alpha[axis] = 1.0
            factors.append(dc_from_affine(
                AffineFunction(alpha, -knot * model.interval)))
        inner = factors[0]
        for fac in factors[1:]:
            inner = dc_min(inner, fac)
        zero = dc_from_affine(AffineFunction(np.zeros(model.dim), 0.0))
        return dc_max(zero, inner)
    if isinstance(model, AhhModel):
        out = dc_from_affine(AffineFunction(np.zeros(model.dim), model.intercept))
        zero = dc_from_affine(AffineFunction(np.zeros(model.dim), 0.0))
        for w, basis in model.bases:
            parts = []
            for delta, var, knot in basis.factors:
                alpha = np.zeros(model.dim)
                alpha[var] = float(delta)
                aff = AffineFunction(alpha, -delta * knot)
                parts.append(dc_max(dc_from_affine(aff), zero))
            acc = parts[0]
            for p in parts[1:]:
                acc = dc_min(acc, p)
            out = dc_sum(out, dc_scale(acc, w))
        return out
    if isinstance(model, SbfModel):
        out = dc_from_affine(AffineFunction(np.zeros(model.dim), 0.0))
        zero = dc_from_affine(AffineFunction(np.zeros(model.dim), 0.0))
        for w, gamma, zeta in model.bases:
            hat = dc_from_affine(AffineFunction(np.zeros(model.dim), 1.0))
            for i in range(model.dim):
                if gamma[i] == 0.0:
                    continue
                alpha = np.zeros(model.dim)
                alpha[i] = gamma[i]
                tent = dc_abs(dc_from_affine(AffineFunction(alpha, -gamma[i] * zeta[i])))
                hat = dc_sum(hat, dc_negate(tent))
            out = dc_sum(out, dc_scale(dc_max(zero, hat), w))
        return out
    if isinstance(model, LatticeModel):
        rows = None
        for s in model.sets:
            acc = dc_from_affine(model.affines[s[0]])
            for j in s[1:]:
                acc = dc_min(acc, dc_from_affine(model.affines[j]))
            rows = acc if rows is None else dc_max(rows, acc)
        return rows
    if isinstance(model, ConventionalPWL):
        return dc_from_model(lattice_from_conventional(model))
    raise TypeError(f"no difference-of-convex lowering for {type(model).__name__}")


def _dc_from_expr(node):
    out = dc_from_affine(node.affine)
    for coeff, child in node.children:
        out = dc_sum(out, dc_scale(dc_abs(_dc_from_expr(child)), coeff))
    return out


def ghh_from_dc(f):
    """Two-term max-of-affines model: ``(+1, plus) , (-1, minus)``."""
    return GhhModel([(1.0, f.plus_affines()), (-1.0, f.minus_affines())])


# ---------------------------------------------------------------------------
# Lattice from a region-wise model
# ---------------------------------------------------------------------------

def lattice_from_conventional(model, probe_density=33, box=None):
    """Build the max-min form by probing piece dominance region by region.

    Row ``i`` keeps every piece that never falls below piece ``i`` on the
    probed points of region ``i``.  The construction is verified: the
    lattice must reproduce the model at every probe point.
    """
    cont = check_continuity(model, box=box if model.domain is None else None)
    if not cont.ok:
        raise DiscontinuousModelError(
            "lattice construction requires a continuous model; "
            f"{len(cont.violations)} facet violations found"
        )
    if box is None:
        if model.domain is None:
            raise ValueError("model has no domain; pass an explicit probe box")
        box = model.domain_box()
    lo, hi = box
    pts = grid_points(lo, hi, probe_density)
    piece_vals = np.column_stack([p.values(pts) for p in model.pieces])
    d = model.piece_count
    sets = []
    for i in range(d):
        member = model.regions[i].contains_many(pts, tol=1e-9)
        if not np.any(member):
            center = _region_probe_point(model, i, box)
            vals_c = np.array([p.value(center) for p in model.pieces])
            dominated = vals_c >= vals_c[i]
        else:
            vi = piece_vals[member, i]
            dominated = np.all(piece_vals[member, :] >= vi[:, None], axis=0)
        s = set(np.nonzero(dominated)[0].tolist())
        s.add(i)
        sets.append(sorted(s))
    lattice = LatticeModel(model.pieces, sets)

    inside = np.ones(pts.shape[0], dtype=bool)
    if model.domain is not None:
        inside = model.domain.contains_many(pts, tol=1e-9)
    got = lattice.values(pts[inside])
    want = model.values(pts[inside])
    err = np.max(np.abs(got - want)) if np.any(inside) else 0.0
    if err > 1e-9:
        raise RuntimeError(
            f"lattice construction failed verification: max deviation {err:.3e}"
        )
    return lattice


def _region_probe_point(model, i, box):
    from .conventional import chebyshev_center

    center, radius = chebyshev_center(model.regions[i], box=box)
    if center is None:
        raise RuntimeError(f"region {i} has no feasible point inside the probe box")
    return center


# ---------------------------------------------------------------------------
# Canonical form from a consistent region-wise model
# ---------------------------------------------------------------------------

def cplr_from_consistent(model, grid_density=33, box=None):
    """Reconstruct the canonical sum-of-absolute-values form, fit free.

    One absolute-value term per boundary hyperplane; the affine part and
    per-hyperplane coefficients are solved by least squares over region
    Jacobians, then the result is verified on a dense grid.
    """
    from .conventional import chebyshev_center

    verdict = check_consistent_variation(model, box=None)
    if not verdict.representable:
        raise NotCplrRepresentableError(verdict.certificate)
    if box is None:
        box = model.domain_box()
    n = model.dimension
    planes = list(verdict.hyperplanes.values())   # (alpha, beta, jump scalar)
    h = len(planes)

    signs = np.zeros((model.piece_count, h))
    for i, region in enumerate(model.regions):
        center, _ = chebyshev_center(region, box=box)
        if center is None:
            raise RuntimeError(f"region {i} has no interior point for side probing")
        for k, (alpha, beta, _) in enumerate(planes):
            signs[i, k] = 1.0 if float(alpha @ center - beta) >= 0 else -1.0

    # alpha0 and per-plane coefficients from J_i = alpha0 + sum_k g_k s_ik alpha_k
    rows, want = [], []
    for i, piece in enumerate(model.pieces):
        block = np.zeros((n, n + h))
        block[:, :n] = np.eye(n)
        for k, (alpha, _, _) in enumerate(planes):
            block[:, n + k] = signs[i, k] * alpha
        rows.append(block)
        want.append(piece.jacobian)
    theta, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(want), rcond=None)
    alpha0, coeffs = theta[:n], theta[n:]

    beta0 = model.pieces[0].bias
    for k, (alpha, beta, _) in enumerate(planes):
        beta0 += coeffs[k] * signs[0, k] * beta

    terms = []
    for k, (alpha, beta, _) in enumerate(planes):
        g = coeffs[k]
        if abs(g) <= 1e-12:
            continue
        eta = 1 if g > 0 else -1
        terms.append((eta, abs(g) * alpha, -abs(g) * beta))
    cplr = CplrModel(alpha0, beta0, terms)

    lo, hi = box
    pts = grid_points(lo, hi, grid_density)
    keep = np.ones(pts.shape[0], dtype=bool)
    if model.domain is not None:
        keep = model.domain.contains_many(pts, tol=1e-9)
    err = np.max(np.abs(cplr.values(pts[keep]) - model.values(pts[keep])))
    if err > 1e-9:
        raise RuntimeError(
            f"canonical reconstruction failed verification: max deviation {err:.3e}"
        )
    return cplr


# ---------------------------------------------------------------------------
# Equivalence checking
# ---------------------------------------------------------------------------

def grid_points(lo, hi, density):
    """Full lattice grid over a box, ``density`` points per axis."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    axes = [np.linspace(lo[i], hi[i], int(density)) for i in range(lo.shape[0])]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


@dataclass
class EquivalenceReport:
    max_abs_deviation: float
    argmax_point: np.ndarray
    sample_count: int
    tolerance: float

    @property
    def equivalent(self):
        return self.max_abs_deviation <= self.tolerance

    def __str__(self):
        return "\n".join([
            f"max-abs-deviation: {self.max_abs_deviation!r}",
            f"argmax-point: {','.join(repr(v) for v in self.argmax_point)}",
            f"sample-count: {self.sample_count}",
            f"tolerance: {self.tolerance!r}",
            f"equivalent: {'yes' if self.equivalent else 'no'}",
        ])


def check_equivalence(a, b, box, grid_density=33, tolerance=1e-9, qmc_samples=512):
    """Max deviation between two evaluables over a grid plus Halton sweep."""
    if a.dim != b.dim:
        raise DimensionMismatchError(a.dim, b.dim, what="second model")
    lo, hi = box
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    pts = grid_points(lo, hi, grid_density)
    if qmc_samples > 0:
        sampler = qmc.Halton(d=a.dim, seed=11)
        extra = lo + sampler.random(qmc_samples) * (hi - lo)
        pts = np.vstack([pts, extra])
    dev = np.abs(a.values(pts) - b.values(pts))
    k = int(np.argmax(dev))
    return EquivalenceReport(float(dev[k]), pts[k], pts.shape[0], float(tolerance))
