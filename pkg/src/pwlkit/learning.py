"""Incremental fitting for shallow piecewise-linear models.

Three growers share one ridge-damped least-squares engine: hinge sums via
alternating partition/refit, adaptive hinge bases via greedy tree search
with backward pruning, and simplex tents via residual-peak placement with
a coordinate-descent shape search.  All fitting is deterministic for a
fixed seed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSplitError, SingularSystemError
from .models import AhhBasis, AhhModel, HingeModel, SbfModel

# Random re-splits allowed before hinge finding gives up on a side.
RESTART_BUDGET = 10

# Backfit sweeps over existing hinges after each accepted growth step.
BACKFIT_SWEEPS = 4

# Shape-search grid for simplex tents: powers of two, 1/8 .. 8.
SBF_GAMMA_GRID = tuple(2.0 ** k for k in range(-3, 4))

# Coordinate-descent sweeps over the shape grid.
SBF_SWEEPS = 2

# Knot candidates: empirical quantiles 5%, 10%, ..., 95% of the support.
AHH_KNOT_QUANTILES = tuple(q / 100.0 for q in range(5, 100, 5))


class Dataset:
    """Input matrix plus target vector, all entries finite."""

    def __init__(self, inputs, targets, feature_names=None):
        self.inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        self.targets = np.asarray(targets, dtype=float).ravel()
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"{self.inputs.shape[0]} input rows vs {self.targets.shape[0]} targets"
            )
        if self.inputs.shape[0] < 1:
            raise ValueError("dataset needs at least one sample")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("dataset contains non-finite entries")
        if feature_names is not None:
            feature_names = tuple(feature_names)
            if len(feature_names) != self.inputs.shape[1]:
                raise ValueError("one feature name per input column required")
        self.feature_names = feature_names

    @property
    def size(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    @classmethod
    def from_csv(cls, path, header="auto"):
        """Load a comma-separated file; the last column is the target.

        ``header`` may be True, False, or "auto" (non-numeric first row).
        """
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if not rows:
            raise ValueError(f"{path}: empty dataset")
        names = None
        if header == "auto":
            try:
                [float(v) for v in rows[0]]
                header = False
            except ValueError:
                header = True
        if header:
            names = tuple(rows[0][:-1])
            rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: no data rows")
        data = np.array([[float(v) for v in r] for r in rows])
        if data.shape[1] < 2:
            raise ValueError(f"{path}: need at least one input column plus target")
        return cls(data[:, :-1], data[:, -1], feature_names=names)


@dataclass
class FitConfig:
    """Budgets and knobs shared by all fitters."""

    max_terms: int = 10
    max_iterations: int = 50
    tolerance: float = 1e-10
    ridge: float = 1e-8
    seed: int = 0
    validation_split: float = 0.0

    def __post_init__(self):
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        if not 0.0 <= self.validation_split < 1.0:
            raise ValueError("validation_split must lie in [0, 1)")


@dataclass
class TraceRecord:
    step: int
    term_count: int
    train_sse: float
    validation_sse: float
    action: str


@dataclass
class FitTrace:
    records: list = field(default_factory=list)

    def add(self, term_count, train_sse, validation_sse, action):
        self.records.append(TraceRecord(len(self.records), int(term_count),
                                        float(train_sse), float(validation_sse),
                                        action))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "term_count", "train_sse", "validation_sse", "action"])
        for r in self.records:
            w.writerow([r.step, r.term_count, repr(r.train_sse),
                        repr(r.validation_sse), r.action])
        return buf.getvalue()

    @property
    def final(self):
        return self.records[-1] if self.records else None


def least_squares(X, y, ridge=0.0):
    """Minimize ``|X theta - y|^2 + ridge |theta|^2`` stably.

    Damping is applied through augmented rows so the solve stays a plain
    least-squares factorization.  A rank-deficient system with no damping
    raises instead of silently returning the pseudo-inverse solution.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    if ridge > 0:
        k = X.shape[1]
        Xa = np.vstack([X, np.sqrt(ridge) * np.eye(k)])
        ya = np.concatenate([y, np.zeros(k)])
        theta, *_ = np.linalg.lstsq(Xa, ya, rcond=None)
        return theta
    theta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise SingularSystemError(
            f"design matrix has rank {rank} < {X.shape[1]} columns; "
            "pass ridge > 0 to regularize"
        )
    return theta


def _augment(X):
    return np.column_stack([X, np.ones(X.shape[0])])


def _scan_candidate_blocks(B, y, blocks, ridge):
    """SSE of the ridge solve for ``[B | block]`` per candidate block.

    ``B`` holds the fixed design columns; ``blocks`` is (N, count, m) with
    one m-column block per candidate.  Normal equations are assembled from
    one Gram precompute plus one matmul across all candidates, so the scan
    costs O(N k m) per candidate instead of a full factorization.  Returns
    an SSE array (inf where the tiny system is singular).
    """
    N, k = B.shape
    _, count, m = blocks.shape
    G = B.T @ B
    gy = B.T @ y
    yy = float(y @ y)
    flat = blocks.reshape(N, count * m)
    cross = (B.T @ flat).reshape(k, count, m).transpose(1, 0, 2)   # (count, k, m)
    cc = np.einsum("nim,nil->iml", blocks, blocks)
    cy = np.einsum("nim,n->im", blocks, y)
    K = np.empty((count, k + m, k + m))
    K[:, :k, :k] = G
    K[:, :k, k:] = cross
    K[:, k:, :k] = cross.transpose(0, 2, 1)
    K[:, k:, k:] = cc
    rhs = np.empty((count, k + m))
    rhs[:, :k] = gy
    rhs[:, k:] = cy
    damp = max(ridge, 1e-12) * np.eye(k + m)
    try:
        theta = np.linalg.solve(K + damp, rhs[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        sse = np.full(count, np.inf)
        for i in range(count):
            try:
                th = np.linalg.solve(K[i] + damp, rhs[i])
            except np.linalg.LinAlgError:
                continue
            sse[i] = yy - 2.0 * float(rhs[i] @ th) + float(th @ K[i] @ th)
        return sse
    return (yy - 2.0 * np.einsum("ij,ij->i", rhs, theta)
            + np.einsum("ij,ijl,il->i", theta, K, theta))


def _split_indices(n_samples, fraction, rng):
    """Deterministic train/validation index split (validation may be empty)."""
    if fraction <= 0.0:
        idx = np.arange(n_samples)
        return idx, np.empty(0, dtype=int)
    perm = rng.permutation(n_samples)
    n_val = max(1, int(round(fraction * n_samples)))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


# ---------------------------------------------------------------------------
# Hinge finding
# ---------------------------------------------------------------------------

@dataclass
class HingeFit:
    """One fitted hinge: two half-planes in augmented coordinates."""

    theta_plus: np.ndarray       # length n+1, last entry is the bias
    theta_minus: np.ndarray
    plus_mask: np.ndarray        # membership of the positive side
    iterations: int
    converged: bool
    sse: float

    @property
    def direction(self):
        """Augmented difference vector; its sign splits the data."""
        return self.theta_plus - self.theta_minus

    def values(self, X):
        Xa = _augment(np.atleast_2d(np.asarray(X, dtype=float)))
        return np.maximum(Xa @ self.theta_plus, Xa @ self.theta_minus)


def find_hinge(data, cfg=None, init=None):
    """Locate one hinge on a dataset by alternating split and refit."""
    cfg = cfg or FitConfig()
    return _find_hinge(data.inputs, data.targets, cfg,
                       np.random.default_rng(cfg.seed), init=init)


def _hinge_sse(Xa, y, tp, tm):
    return float(np.sum((y - np.maximum(Xa @ tp, Xa @ tm)) ** 2))


def _find_hinge(X, y, cfg, rng, init=None):
    """Alternate membership split and per-side least squares.

    Stops when memberships repeat or the iteration budget runs out.  An
    empty side triggers a seeded random re-split; once the restart budget
    is spent the best hinge seen so far is returned, and a degenerate-split
    error is raised only if no two-sided refit ever succeeded.
    """
    N, n = X.shape
    if N < 2 * (n + 1):
        raise ValueError(f"need at least {2 * (n + 1)} samples for a hinge in "
                         f"dimension {n}, got {N}")
    Xa = _augment(X)

    if init is not None:
        tp0, tm0 = (np.asarray(t, dtype=float) for t in init)
        mask = Xa @ (tp0 - tm0) > 0
    else:
        theta0 = least_squares(Xa, y, cfg.ridge)
        mask = (y - Xa @ theta0) > 0
    if mask.all() or not mask.any():
        mask = rng.random(N) < 0.5

    best = None
    restarts = 0
    for it in range(1, cfg.max_iterations + 1):
        if mask.all() or not mask.any():
            restarts += 1
            if restarts > RESTART_BUDGET:
                break
            mask = rng.random(N) < 0.5
            continue
        tp = least_squares(Xa[mask], y[mask], cfg.ridge)
        tm = least_squares(Xa[~mask], y[~mask], cfg.ridge)
        sse = _hinge_sse(Xa, y, tp, tm)
        new_mask = Xa @ (tp - tm) > 0
        if np.array_equal(new_mask, mask):
            return HingeFit(tp, tm, mask.copy(), it, True, sse)
        if best is None or sse < best.sse:
            best = HingeFit(tp, tm, mask.copy(), it, False, sse)
        mask = new_mask
    if best is None:
        raise DegenerateSplitError(
            f"no two-sided split survived {RESTART_BUDGET} restarts"
        )
    return best


# ---------------------------------------------------------------------------
# Hinge-sum fitting
# ---------------------------------------------------------------------------

def _refit_hinges(X, y, directions, ridge):
    """Joint ridge refit of affine part plus one weight per hinge column."""
    Xa = _augment(X)
    cols = [X, np.ones((X.shape[0], 1))]
    for d in directions:
        cols.append(np.maximum(Xa @ d, 0.0)[:, None])
    C = np.column_stack(cols)
    theta = least_squares(C, y, ridge)
    sse = float(np.sum((C @ theta - y) ** 2))
    return theta, sse


def _normalized(direction):
    """Scale so the normal part has unit norm; weight refits absorb scale."""
    norm = float(np.linalg.norm(direction[:-1]))
    return direction / norm if norm > 1e-12 else direction


MAX_BIAS_CANDIDATES = 512


def _simultaneous_polish(X, y, directions, ridge, max_iters=15):
    """Joint alternation over all hinges at once.

    With every hinge's activity mask frozen, the model is linear in the
    per-hinge direction vectors, so one ridge solve updates them all
    together; masks are then recomputed and the loop repeats.  Moving all
    breakpoints simultaneously escapes the symmetric traps coordinate-wise
    relocation gets stuck in.  The best refit seen is returned.
    """
    if not directions:
        return directions, None, np.inf
    Xa = _augment(X)
    n1 = Xa.shape[1]
    dirs = [d.copy() for d in directions]
    best_dirs, best_theta, best_sse = None, None, np.inf
    prev_masks = None
    for _ in range(max_iters):
        masks = [Xa @ d > 0 for d in dirs]
        if any(m.all() or not m.any() for m in masks):
            break
        cols = [Xa] + [m[:, None] * Xa for m in masks]
        theta = least_squares(np.column_stack(cols), y, ridge)
        new_dirs = []
        degenerate = False
        for k in range(len(dirs)):
            gamma = theta[n1 * (k + 1): n1 * (k + 2)]
            if np.linalg.norm(gamma[:-1]) <= 1e-12:
                degenerate = True
                break
            new_dirs.append(_normalized(gamma))
        if degenerate:
            break
        dirs = new_dirs
        th, sse = _refit_hinges(X, y, dirs, ridge)
        if sse < best_sse:
            best_dirs, best_theta, best_sse = [d.copy() for d in dirs], th, sse
        stacked = tuple(m.tobytes() for m in (Xa @ d > 0 for d in dirs))
        if prev_masks == stacked:
            break
        prev_masks = stacked
    if best_dirs is None:
        return directions, None, np.inf
    return best_dirs, best_theta, best_sse


def _refine_bias(X, y, directions, k, ridge, sse):
    """Snap hinge k's breakpoint to the best data projection.

    Along a fixed normal the joint SSE is piecewise in the hinge bias and
    any exactly recoverable kink sits on a data projection, so scanning
    projections (subsampled when large) finds it.  Keeps the incumbent
    when nothing improves.
    """
    d = directions[k]
    proj = X @ d[:-1]
    cand = np.unique(proj)
    if cand.shape[0] > MAX_BIAS_CANDIDATES:
        idx = np.round(np.linspace(0, cand.shape[0] - 1,
                                   MAX_BIAS_CANDIDATES)).astype(int)
        cand = cand[idx]
    Xa = _augment(X)
    others = directions[:k] + directions[k + 1:]
    B = np.column_stack([X, np.ones(X.shape[0])] +
                        [np.maximum(Xa @ o, 0.0)[:, None] for o in others])
    blocks = np.maximum(proj[:, None] - cand[None, :], 0.0)[:, :, None]
    scan = _scan_candidate_blocks(B, y, blocks, ridge)
    i = int(np.argmin(scan))
    if not np.isfinite(scan[i]):
        return directions, None, sse, False
    trial_dir = d.copy()
    trial_dir[-1] = -float(cand[i])
    trial = list(directions)
    trial[k] = trial_dir
    theta, s = _refit_hinges(X, y, trial, ridge)
    if s >= sse - 1e-15:
        return directions, None, sse, False
    return trial, theta, s, True


def _hinge_model(n, theta, directions):
    alpha0, beta0 = theta[:n], theta[n]
    hinges = [(float(theta[n + 1 + k]), d[:n], float(d[n]))
              for k, d in enumerate(directions)]
    return HingeModel(alpha0, beta0, hinges)


def fit_hh(data, cfg=None):
    """Grow a hinge sum: find a hinge on the residual, append, refit all.

    After each accepted hinge a backfit sweep re-runs hinge finding for
    every existing hinge against the residual of the others, keeping any
    replacement that lowers the joint SSE.  Growth stops at the term
    budget or when a round fails to improve by the configured tolerance.
    """
    cfg = cfg or FitConfig()
    rng = np.random.default_rng(cfg.seed)
    X, y = data.inputs, data.targets
    train_idx, val_idx = _split_indices(data.size, cfg.validation_split, rng)
    Xt, yt = X[train_idx], y[train_idx]
    Xv, yv = X[val_idx], y[val_idx]
    n = data.dim
    trace = FitTrace()

    directions = []
    theta, sse = _refit_hinges(Xt, yt, directions, cfg.ridge)
    model = _hinge_model(n, theta, directions)
    val_sse = float(np.sum((model.values(Xv) - yv) ** 2)) if len(val_idx) else sse
    trace.add(0, sse, val_sse, "affine")

    for _ in range(cfg.max_terms):
        residual = yt - _hinge_model(n, theta, directions).values(Xt)
        try:
            hf = _find_hinge(Xt, residual, cfg, rng)
        except DegenerateSplitError:
            trace.add(len(directions), sse, val_sse, "skip-degenerate")
            break
        delta = hf.direction
        if np.linalg.norm(delta[:-1]) <= 1e-12:
            trace.add(len(directions), sse, val_sse, "skip-degenerate")
            break
        new_dirs = directions + [_normalized(delta)]
        new_theta, new_sse = _refit_hinges(Xt, yt, new_dirs, cfg.ridge)
        new_dirs, th_r, sse_r, moved = _refine_bias(
            Xt, yt, new_dirs, len(new_dirs) - 1, cfg.ridge, new_sse)
        if moved:
            new_theta, new_sse = th_r, sse_r
        if new_sse > sse - cfg.tolerance:
            trace.add(len(directions), sse, val_sse, "stop-no-progress")
            break
        directions, theta, sse = new_dirs, new_theta, new_sse

        # polish all hinges jointly, then re-snap breakpoints per hinge
        for _sweep in range(BACKFIT_SWEEPS):
            improved = False
            p_dirs, p_theta, p_sse = _simultaneous_polish(
                Xt, yt, directions, cfg.ridge)
            if p_sse < sse - cfg.tolerance:
                directions, theta, sse = p_dirs, p_theta, p_sse
                improved = True
            for k in range(len(directions)):
                others = directions[:k] + directions[k + 1 :]
                theta_o, _ = _refit_hinges(Xt, yt, others, cfg.ridge)
                partial = yt - _hinge_model(n, theta_o, others).values(Xt)
                try:
                    hk = _find_hinge(Xt, partial, cfg, rng,
                                     init=(directions[k], np.zeros(n + 1)))
                except DegenerateSplitError:
                    continue
                trial = list(directions)
                trial[k] = _normalized(hk.direction)
                t_theta, t_sse = _refit_hinges(Xt, yt, trial, cfg.ridge)
                if t_sse < sse - cfg.tolerance:
                    directions, theta, sse = trial, t_theta, t_sse
                    improved = True
                directions, th_k, sse_k, moved = _refine_bias(
                    Xt, yt, directions, k, cfg.ridge, sse)
                if moved:
                    theta, sse = th_k, sse_k
                    improved = True
            if not improved:
                break

        model = _hinge_model(n, theta, directions)
        val_sse = float(np.sum((model.values(Xv) - yv) ** 2)) if len(val_idx) else sse
        trace.add(len(directions), sse, val_sse, "add-hinge")

    model = _hinge_model(n, theta, directions)
    return model, trace


# ---------------------------------------------------------------------------
# Adaptive hinge tree search
# ---------------------------------------------------------------------------

@dataclass
class AhhTreeNode:
    """Provenance of one basis in the growth tree.

    ``parent_factors`` is None for children of the constant basis; pruned
    nodes stay in the tree so the full search history is reconstructable.
    """

    factors: tuple
    parent_factors: tuple | None
    delta: int
    variable: int
    knot: float
    pruned: bool = False


def _ahh_columns(X, bases):
    cols = [np.ones(X.shape[0])]
    for b in bases:
        cols.append(b.values(X))
    return np.column_stack(cols)


def _ahh_refit(X, y, bases, ridge):
    C = _ahh_columns(X, bases)
    theta = least_squares(C, y, ridge)
    return theta, float(np.sum((C @ theta - y) ** 2))


def fit_ahh(data, cfg=None):
    """Grow min-of-hinge bases by recursive partition search, then prune.

    Forward pass: every iteration scans (parent basis, variable, quantile
    knot) candidates, adds the sign pair whose joint weight refit gives
    the lowest SSE.  Backward pass: greedily delete bases while deletion
    improves validation SSE.  Returns the model, the trace, and the tree.
    """
    cfg = cfg or FitConfig()
    rng = np.random.default_rng(cfg.seed)
    X, y = data.inputs, data.targets
    train_idx, val_idx = _split_indices(data.size, cfg.validation_split, rng)
    Xt, yt = X[train_idx], y[train_idx]
    Xv, yv = X[val_idx], y[val_idx]
    n = data.dim
    trace = FitTrace()

    bases: list[AhhBasis] = []
    tree: list[AhhTreeNode] = []
    theta, sse = _ahh_refit(Xt, yt, bases, cfg.ridge)

    def val_sse_of(bs, th):
        if not len(val_idx):
            return float(np.sum((_ahh_columns(Xt, bs) @ th - yt) ** 2))
        return float(np.sum((_ahh_columns(Xv, bs) @ th - yv) ** 2))

    trace.add(0, sse, val_sse_of(bases, theta), "intercept")

    while len(bases) + 2 <= cfg.max_terms:
        B = _ahh_columns(Xt, bases)
        basis_cols = B[:, 1:]
        best = None   # (sse, parent, v, knot)
        for parent in range(-1, len(bases)):
            parent_col = (np.ones(Xt.shape[0]) if parent < 0
                          else basis_cols[:, parent])
            support = parent_col > 0
            if not np.any(support):
                continue
            for v in range(n):
                xs = Xt[support, v]
                if xs.max() - xs.min() <= 1e-12:
                    continue
                knots = np.unique(np.quantile(xs, AHH_KNOT_QUANTILES))
                up = np.maximum(Xt[:, v][:, None] - knots[None, :], 0.0)
                blocks = np.stack(
                    [np.minimum(parent_col[:, None], up),
                     np.minimum(parent_col[:, None],
                                np.maximum(knots[None, :] - Xt[:, v][:, None], 0.0))],
                    axis=2)
                scan = _scan_candidate_blocks(B, yt, blocks, cfg.ridge)
                i = int(np.argmin(scan))
                if np.isfinite(scan[i]) and (best is None or scan[i] < best[0] - 1e-15):
                    best = (float(scan[i]), parent, v, float(knots[i]))
        if best is None or best[0] > sse - cfg.tolerance:
            trace.add(len(bases), sse, val_sse_of(bases, theta), "stop-no-progress")
            break
        _, parent, v, knot = best
        parent_factors = () if parent < 0 else bases[parent].factors
        pair = [AhhBasis(parent_factors + ((+1, v, knot),)),
                AhhBasis(parent_factors + ((-1, v, knot),))]
        th, s = _ahh_refit(Xt, yt, bases + pair, cfg.ridge)
        if s > sse - cfg.tolerance:
            trace.add(len(bases), sse, val_sse_of(bases, theta), "stop-no-progress")
            break
        for delta, child in zip((+1, -1), pair):
            bases.append(child)
            tree.append(AhhTreeNode(child.factors,
                                    parent_factors if parent >= 0 else None,
                                    delta, v, knot))
        theta, sse = th, s
        trace.add(len(bases), sse, val_sse_of(bases, theta), "add-pair")

    # backward pruning on validation error
    current_val = val_sse_of(bases, theta)
    while bases:
        best = None   # (val_sse, index, theta, train_sse)
        for k in range(len(bases)):
            trial = bases[:k] + bases[k + 1 :]
            th, s = _ahh_refit(Xt, yt, trial, cfg.ridge)
            vs = val_sse_of(trial, th)
            if best is None or vs < best[0]:
                best = (vs, k, th, s)
        if best is None or best[0] >= current_val:
            break
        current_val, k, theta, sse = best[0], best[1], best[2], best[3]
        removed = bases.pop(k)
        for node in tree:
            if node.factors == removed.factors and not node.pruned:
                node.pruned = True
                break
        trace.add(len(bases), sse, current_val, "prune")

    model = AhhModel(n, float(theta[0]),
                     [(float(theta[1 + k]), b) for k, b in enumerate(bases)])
    return model, trace, tree


# ---------------------------------------------------------------------------
# Simplex tent fitting
# ---------------------------------------------------------------------------

def _sbf_column(X, gamma, zeta):
    return np.maximum(1.0 - np.abs(X - zeta) @ gamma, 0.0)


def _sbf_refit(X, y, bases, ridge):
    if not bases:
        return np.empty(0), float(np.sum(y ** 2))
    C = np.column_stack([_sbf_column(X, g, z) for g, z in bases])
    theta = least_squares(C, y, ridge)
    return theta, float(np.sum((C @ theta - y) ** 2))


def fit_sbf(data, cfg=None):
    """Grow simplex tents at residual peaks with a shape search per tent.

    Each round centers a new tent on the sample with the largest absolute
    residual, then tunes its per-coordinate widths by coordinate descent
    over a geometric grid, scoring each candidate by the SSE after a full
    weight refit.
    """
    cfg = cfg or FitConfig()
    rng = np.random.default_rng(cfg.seed)
    X, y = data.inputs, data.targets
    train_idx, val_idx = _split_indices(data.size, cfg.validation_split, rng)
    Xt, yt = X[train_idx], y[train_idx]
    Xv, yv = X[val_idx], y[val_idx]
    n = data.dim
    trace = FitTrace()

    bases = []   # (gamma, zeta)
    theta, sse = _sbf_refit(Xt, yt, bases, cfg.ridge)

    def val_sse_of(bs, th):
        if not len(val_idx):
            if not bs:
                return float(np.sum(yt ** 2))
            return float(np.sum((np.column_stack(
                [_sbf_column(Xt, g, z) for g, z in bs]) @ th - yt) ** 2))
        if not bs:
            return float(np.sum(yv ** 2))
        return float(np.sum((np.column_stack(
            [_sbf_column(Xv, g, z) for g, z in bs]) @ th - yv) ** 2))

    trace.add(0, sse, val_sse_of(bases, theta), "empty")

    for _ in range(cfg.max_terms):
        residual = yt if not bases else yt - np.column_stack(
            [_sbf_column(Xt, g, z) for g, z in bases]) @ theta
        peak = float(np.max(np.abs(residual)))
        if peak <= 1e-12:
            trace.add(len(bases), sse, val_sse_of(bases, theta), "stop-perfect")
            break
        zeta = Xt[int(np.argmax(np.abs(residual)))].copy()
        gamma = np.ones(n)
        B = (np.column_stack([_sbf_column(Xt, g, z) for g, z in bases])
             if bases else np.empty((Xt.shape[0], 0)))
        for _sweep in range(SBF_SWEEPS):
            for i in range(n):
                cols = []
                for g in SBF_GAMMA_GRID:
                    trial_gamma = gamma.copy()
                    trial_gamma[i] = g
                    cols.append(_sbf_column(Xt, trial_gamma, zeta))
                blocks = np.stack(cols, axis=1)[:, :, None]
                scan = _scan_candidate_blocks(B, yt, blocks, cfg.ridge)
                j = int(np.argmin(scan))
                if np.isfinite(scan[j]):
                    gamma[i] = SBF_GAMMA_GRID[j]
        new_bases = bases + [(gamma, zeta)]
        new_theta, new_sse = _sbf_refit(Xt, yt, new_bases, cfg.ridge)
        if new_sse > sse - cfg.tolerance:
            trace.add(len(bases), sse, val_sse_of(bases, theta), "stop-no-progress")
            break
        bases, theta, sse = new_bases, new_theta, new_sse
        trace.add(len(bases), sse, val_sse_of(bases, theta), "add-tent")

    model = SbfModel(n, [(float(theta[k]), g, z) for k, (g, z) in enumerate(bases)])
    return model, trace
