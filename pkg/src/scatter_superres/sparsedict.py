"""Blind estimation of the unordered, column-normalized sensing matrix from
unlabeled sparse-source measurements.

Two stages: a correlation/subspace initializer producing a coarse unordered
dictionary, followed by alternating sparse coding (generalized Lagrangian
multiplier l1 solver) and closed-form least-squares dictionary updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .wavefield import DataSet, SensingMatrix

__all__ = [
    "Dictionary",
    "SparseCodes",
    "GelmaParams",
    "GelmaResult",
    "Step1Params",
    "RefineResult",
    "RankDeficiencyError",
    "UnderRecoveryError",
    "SparseCodingError",
    "gelma_solve",
    "sparse_code_all",
    "mod_update",
    "refine_dictionary",
    "step1_initialize",
    "match_columns",
    "normalize_columns",
]


class RankDeficiencyError(RuntimeError):
    """The code Gram matrix is singular; lists dead (never-used) atoms."""

    def __init__(self, dead_atoms):
        self.dead_atoms = list(dead_atoms)
        super().__init__(
            f"code Gram matrix singular; dead atom rows: {self.dead_atoms}")


class UnderRecoveryError(RuntimeError):
    """Fewer column estimates found than requested."""

    def __init__(self, found: int, wanted: int):
        self.found = found
        self.wanted = wanted
        super().__init__(
            f"recovered only {found} of {wanted} requested columns; "
            f"enlarge the dataset or relax thresholds")


class SparseCodingError(RuntimeError):
    """Too many measurements failed to reach the coding tolerance."""


def normalize_columns(A: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise ValueError("cannot normalize a zero column")
    return A / norms


@dataclass(frozen=True)
class Dictionary:
    """Estimate of the sensing matrix, possibly unordered and unpruned."""

    columns: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        c = np.asarray(self.columns, dtype=complex)
        if c.ndim != 2:
            raise ValueError("dictionary columns must form a 2-D matrix")
        if self.normalized:
            norms = np.linalg.norm(c, axis=0)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise ValueError("normalized flag set but columns are not unit-norm")
        object.__setattr__(self, "columns", c)

    @property
    def n_atoms(self) -> int:
        return self.columns.shape[1]

    def normalize(self) -> "Dictionary":
        if self.normalized:
            return self
        return Dictionary(normalize_columns(self.columns), normalized=True)

    @staticmethod
    def from_sensing(sensing: SensingMatrix) -> "Dictionary":
        return Dictionary(sensing.normalized(), normalized=True)


@dataclass(frozen=True)
class SparseCodes:
    """Column-wise sparse representations of a dataset in a dictionary."""

    codes: np.ndarray
    sparsity_target: int

    def __post_init__(self):
        c = np.asarray(self.codes, dtype=complex)
        if c.ndim != 2:
            raise ValueError("codes must form a 2-D matrix")
        object.__setattr__(self, "codes", c)


@dataclass
class GelmaParams:
    """Hyperparameters for the Lagrangian-multiplier l1 solver.

    step_size and regularization default (when None) to 1/(2*||D||_2^2)
    and 1e-3 * max|D^H y| respectively, recomputed per problem.
    """

    step_size: Optional[float] = None
    regularization: Optional[float] = None
    max_iters: int = 5000
    residual_tol: float = 1e-6
    # optional residual-floor detection: a column is retired once its
    # relative residual improves by less than plateau_rtol over
    # plateau_window iterations.  Disabled by default (0): the constraint
    # solve is reduced to a square invertible system, so the residual can
    # always be driven to tolerance, and early retirement leaves codes
    # far from the minimizer.
    plateau_window: int = 0
    plateau_rtol: float = 1e-4

    def resolved(self, D: np.ndarray, Y: np.ndarray) -> Tuple[float, float]:
        spec = np.linalg.norm(D, 2)
        beta = self.step_size if self.step_size is not None else 1.0 / (2.0 * spec ** 2)
        if beta * spec ** 2 >= 2.0:
            raise ValueError("step size violates beta * ||D||_2^2 < 2")
        if self.regularization is not None:
            tau = self.regularization
        else:
            corr = np.abs(D.conj().T @ Y)
            tau = 1e-3 * float(corr.max()) if corr.size else 1e-3
        if tau <= 0 or beta <= 0:
            raise ValueError("step size and regularization must be positive")
        return beta, tau


@dataclass(frozen=True)
class GelmaResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual: float
    reason: str = "tolerance"


def _soft_threshold(z: np.ndarray, t: float) -> np.ndarray:
    """Complex modulus threshold: shrink |z| by t, preserve phase."""
    mag = np.abs(z)
    scale = np.maximum(mag - t, 0.0)
    out = np.zeros_like(z)
    nz = mag > 0
    out[nz] = z[nz] * (scale[nz] / mag[nz])
    return out


REASON_TOLERANCE = 0
REASON_PLATEAU = 1
REASON_MAX_ITERS = 2

_REASON_NAMES = {REASON_TOLERANCE: "tolerance",
                 REASON_PLATEAU: "plateau",
                 REASON_MAX_ITERS: "max_iters"}


def _gelma_batch(D: np.ndarray, Y: np.ndarray, params: GelmaParams,
                 X0: Optional[np.ndarray] = None
                 ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the multiplier iteration on all columns of Y at once.

    Returns (X, termination reason per column, iterations used per
    column).  Columns that reach the residual tolerance, or whose residual
    stops improving (the measurement has a component outside the column
    span, so the equality constraint has a residual floor), are frozen and
    dropped from the active set.

    When the dictionary is tall (more rows than atoms) the constraint
    D x = y is replaced by the equivalent reduced system R x = Q^H y from
    a thin QR factorization; the out-of-range component of y is constant
    in x, so the minimizer is unchanged and iterations are much cheaper.
    """
    if not (np.all(np.isfinite(D)) and np.all(np.isfinite(Y))):
        raise ValueError("non-finite inputs to the sparse coder")
    if D.shape[0] > D.shape[1]:
        Q, R = np.linalg.qr(D)
        return _gelma_batch_core(R, Q.conj().T @ Y, params, X0)
    return _gelma_batch_core(D, Y, params, X0)


def _gelma_batch_core(D: np.ndarray, Y: np.ndarray, params: GelmaParams,
                      X0: Optional[np.ndarray] = None
                      ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    NF, K = D.shape
    M = Y.shape[1]
    X = np.zeros((K, M), dtype=complex)
    ynorm = np.linalg.norm(Y, axis=0)
    zero_cols = ynorm == 0
    active = np.where(~zero_cols)[0]
    reasons = np.full(M, REASON_TOLERANCE, dtype=int)
    iters_used = np.zeros(M, dtype=int)
    if len(active) == 0:
        return X, reasons, iters_used
    beta, tau = params.resolved(D, Y[:, active])
    thr = beta * tau
    Dh = D.conj().T
    if X0 is not None:
        Xa = np.array(X0[:, active], dtype=complex)
    else:
        Xa = np.zeros((K, len(active)), dtype=complex)
    Za = np.zeros((NF, len(active)), dtype=complex)
    Ya = Y[:, active]
    yn = ynorm[active]
    checkpoint = np.full(len(active), np.inf)
    window = params.plateau_window

    def retire(done: np.ndarray, reason: int, it: int):
        nonlocal active, Xa, Za, Ya, yn, checkpoint
        idx = active[done]
        X[:, idx] = Xa[:, done]
        reasons[idx] = reason
        iters_used[idx] = it
        keep = ~done
        active = active[keep]
        Xa, Za, Ya, yn = Xa[:, keep], Za[:, keep], Ya[:, keep], yn[keep]
        checkpoint = checkpoint[keep]

    for it in range(1, params.max_iters + 1):
        R = Ya - D @ Xa
        Xa = _soft_threshold(Xa + beta * (Dh @ (Za + R)), thr)
        R = Ya - D @ Xa
        Za = Za + beta * R
        res = np.linalg.norm(R, axis=0) / yn
        done = res <= params.residual_tol
        if np.any(done):
            retire(done, REASON_TOLERANCE, it)
            if len(active) == 0:
                return X, reasons, iters_used
            res = res[~done]
        if window and it % window == 0:
            stuck = res >= (1.0 - params.plateau_rtol) * checkpoint
            if np.any(stuck):
                retire(stuck, REASON_PLATEAU, it)
                if len(active) == 0:
                    return X, reasons, iters_used
                res = res[~stuck]
            checkpoint = res.copy()
    X[:, active] = Xa
    reasons[active] = REASON_MAX_ITERS
    iters_used[active] = params.max_iters
    return X, reasons, iters_used


def gelma_solve(dictionary: Dictionary, y: np.ndarray,
                params: Optional[GelmaParams] = None) -> GelmaResult:
    """Approximately minimize ||x||_1 subject to D x = y.

    Iteration: x <- T_{beta tau}(x + beta D^H (z + y - D x)),
    z <- z + beta (y - D x), with T the complex modulus threshold.
    """
    if not dictionary.normalized:
        raise ValueError("dictionary must be normalized before sparse coding")
    params = params or GelmaParams()
    y = np.asarray(y, dtype=complex).reshape(-1)
    if y.shape[0] != dictionary.columns.shape[0]:
        raise ValueError("measurement dimension does not match dictionary rows")
    X, reasons, iters = _gelma_batch(dictionary.columns, y.reshape(-1, 1), params)
    resid = np.linalg.norm(dictionary.columns @ X[:, 0] - y)
    ynorm = np.linalg.norm(y)
    rel = resid / ynorm if ynorm else 0.0
    return GelmaResult(X[:, 0], reasons[0] == REASON_TOLERANCE, int(iters[0]),
                       rel, _REASON_NAMES[reasons[0]])


def _hard_sparsify(X: np.ndarray, s: int) -> np.ndarray:
    """Keep the s largest-modulus entries of each column, zero the rest."""
    if s >= X.shape[0]:
        return X.copy()
    out = np.zeros_like(X)
    if s == 0:
        return out
    order = np.argsort(np.abs(X), axis=0)[-s:, :]
    cols = np.arange(X.shape[1])[None, :]
    out[order, cols] = X[order, cols]
    return out


def _refit_support(D: np.ndarray, Y: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Least-squares re-solve of each code on its fixed support.

    The l1 solver's soft threshold biases the kept coefficients toward
    zero; replacing them with the exact projection onto the selected
    columns removes that bias without changing the support.
    """
    out = np.zeros_like(X)
    for j in range(X.shape[1]):
        sup = np.flatnonzero(X[:, j])
        if sup.size == 0:
            continue
        A = D[:, sup]
        G = A.conj().T @ A
        b = A.conj().T @ Y[:, j]
        try:
            out[sup, j] = np.linalg.solve(G, b)
        except np.linalg.LinAlgError:
            out[sup, j] = np.linalg.lstsq(A, Y[:, j], rcond=None)[0]
    return out


def sparse_code_all(dictionary: Dictionary, data: DataSet,
                    params: Optional[GelmaParams] = None, *,
                    sparsity: Optional[int] = None,
                    failure_fraction: float = 0.1,
                    warm_start: Optional[SparseCodes] = None,
                    refit: bool = False) -> SparseCodes:
    """Sparse-code every measurement; prune each code to its s largest
    entries when `sparsity` is given.  With `refit` the surviving entries
    are re-solved by least squares on their support.

    Raises SparseCodingError when more than `failure_fraction` of the
    measurements fail to reach the residual tolerance.
    """
    if not dictionary.normalized:
        raise ValueError("dictionary must be normalized before sparse coding")
    params = params or GelmaParams()
    X0 = warm_start.codes if warm_start is not None else None
    X, reasons, _ = _gelma_batch(dictionary.columns, data.measurements, params, X0)
    n_fail = int(np.count_nonzero(reasons == REASON_MAX_ITERS))
    if n_fail > failure_fraction * data.n_samples:
        raise SparseCodingError(
            f"{n_fail}/{data.n_samples} measurements failed to reach "
            f"tolerance {params.residual_tol:g}")
    if sparsity is not None:
        X = _hard_sparsify(X, sparsity)
    if refit:
        X = _refit_support(dictionary.columns, data.measurements, X)
    return SparseCodes(X, sparsity if sparsity is not None else X.shape[0])


def mod_update(codes: SparseCodes, data: DataSet,
               previous: Optional[Dictionary] = None, *,
               damping: float = 0.0) -> Dictionary:
    """Closed-form least-squares dictionary update D = Y X^H (X X^H)^{-1},
    then column normalization.

    Atom rows never used by any code are excluded from the solve; their
    columns are retained from `previous` when given, otherwise a
    rank-deficiency error names them.

    With `damping` > 0 (and `previous` given) the update minimizes
    ||Y - D X||^2 + lam ||D - D_prev||^2 with lam = damping * tr(G)/K,
    i.e. D = (Y X^H + lam D_prev)(X X^H + lam I)^{-1}.  Atoms with strong
    code energy are barely affected while atoms used by only a handful of
    samples stay near their previous estimate instead of jumping to a
    noisy least-squares fit.
    """
    X = codes.codes
    Y = data.measurements
    if Y.shape[1] != X.shape[1]:
        raise ValueError("codes and data sample counts differ")
    if damping < 0:
        raise ValueError("damping must be nonnegative")
    if damping > 0 and previous is None:
        raise ValueError("damping requires a previous dictionary")
    K = X.shape[0]
    used = np.any(X != 0, axis=1)
    dead = np.where(~used)[0]
    if len(dead) and previous is None:
        raise RankDeficiencyError(dead)
    Xu = X[used]
    G = Xu @ Xu.conj().T
    if damping > 0 and G.size:
        lam = damping * float(np.trace(G).real) / G.shape[0]
        G = G + lam * np.eye(G.shape[0])
    cond = np.linalg.cond(G) if G.size else 0.0
    ill = G.size and cond > 1e12
    if ill and previous is None:
        raise RankDeficiencyError(dead if len(dead) else _weak_rows(Xu, G))
    D = np.zeros((Y.shape[0], K), dtype=complex)
    if G.size:
        rhs = Xu @ Y.conj().T
        if damping > 0:
            rhs = rhs + lam * previous.columns[:, used].conj().T
        if ill:
            # near-collinear code rows (duplicate atoms); the minimum-norm
            # solution keeps the update finite and the duplicates harmless
            D[:, used] = np.linalg.lstsq(Xu.conj().T, Y.conj().T,
                                         rcond=1e-10)[0].conj().T
        else:
            # D = Y X^H G^{-1}; solved as G D^H = X Y^H (G is Hermitian)
            D[:, used] = np.linalg.solve(G, rhs).conj().T
    if len(dead):
        D[:, dead] = previous.columns[:, dead]
    return Dictionary(normalize_columns(D), normalized=True)


def _weak_rows(Xu: np.ndarray, G: np.ndarray):
    # Gram near-singularity without fully dead rows: report the smallest
    # singular directions' dominant rows.
    _, _, vh = np.linalg.svd(G)
    return list(np.argsort(np.abs(vh[-1]))[-3:])


@dataclass(frozen=True)
class RefineResult:
    dictionary: Dictionary
    residuals: np.ndarray
    correlations: Optional[np.ndarray] = None


def refine_dictionary(init: Dictionary, data: DataSet,
                      params: Optional[GelmaParams] = None, *,
                      outer_iters: int = 10, sparsity: int = 3,
                      refit: bool = True, patience: int = 3,
                      damping: float = 0.0,
                      truth: Optional[np.ndarray] = None) -> RefineResult:
    """Alternate sparse coding and least-squares dictionary updates.

    The coding residual ||D X - Y||_F is an observable proxy for column
    accuracy: it falls while the dictionary improves and rises once the
    alternation starts drifting.  The iterate with the smallest residual
    is therefore kept, and the loop stops early once `patience`
    iterations pass without a new best.  When `truth` columns are
    supplied the mean matched column correlation is tracked as well.
    Aborts if the residual grows by more than 2x over 3 consecutive
    iterations.
    """
    if outer_iters < 1:
        raise ValueError("need at least one outer iteration")
    D = init.normalize()
    params = params or GelmaParams()
    residuals = []
    corrs = [] if truth is not None else None
    codes = None
    best = None
    best_res = np.inf
    since_best = 0
    for it in range(outer_iters):
        # codes that ran out of iterations are still usable inside the
        # alternation; only the final coding quality matters
        codes = sparse_code_all(D, data, params, sparsity=sparsity,
                                failure_fraction=1.0, warm_start=codes,
                                refit=refit)
        D = mod_update(codes, data, previous=D, damping=damping)
        r = float(np.linalg.norm(D.columns @ codes.codes - data.measurements))
        residuals.append(r)
        if corrs is not None:
            _, c = match_columns(D, truth)
            corrs.append(float(np.mean(c)))
        if r < best_res:
            best, best_res, since_best = D, r, 0
        else:
            since_best += 1
            if since_best >= patience:
                break
        if len(residuals) >= 4 and all(
                residuals[-j] > 2.0 * residuals[-j - 1] for j in (1, 2, 3)):
            raise RuntimeError(
                f"dictionary refinement diverging at iteration {it}: "
                f"residuals {residuals[-4:]}")
    return RefineResult(best, np.asarray(residuals),
                        np.asarray(corrs) if corrs is not None else None)


def replace_duplicates(dictionary: Dictionary, data: DataSet,
                       params: Optional[GelmaParams] = None, *,
                       sparsity: int = 3,
                       threshold: float = 0.97) -> Tuple[Dictionary, int]:
    """Swap near-duplicate atoms for the worst-reconstructed samples.

    Two atoms above `threshold` |correlation| explain the same grid
    point, which usually means some other column of the sensing matrix
    has no atom at all.  For each duplicate pair the lower code-energy
    twin is replaced by the (normalized) measurement the current
    dictionary reconstructs worst, the standard atom-replacement move of
    dictionary learning.  Returns the repaired dictionary and the number
    of replacements; follow with further refinement.
    """
    codes = sparse_code_all(dictionary, data, params, sparsity=sparsity,
                            failure_fraction=1.0, refit=True)
    D = dictionary.normalize().columns.copy()
    resid = np.linalg.norm(data.measurements - D @ codes.codes, axis=0)
    energy = np.sum(np.abs(codes.codes) ** 2, axis=1)
    mu = np.abs(D.conj().T @ D)
    np.fill_diagonal(mu, 0.0)
    sample_order = np.argsort(resid)[::-1]
    replaced = 0
    retired = set()
    for j in range(D.shape[1]):
        if j in retired:
            continue
        for p in np.flatnonzero(mu[j] > threshold):
            if p in retired or p <= j:
                continue
            drop = j if energy[j] < energy[p] else int(p)
            y = data.measurements[:, sample_order[replaced % len(sample_order)]]
            D[:, drop] = y / np.linalg.norm(y)
            retired.add(drop)
            replaced += 1
            if drop == j:
                break
    return Dictionary(normalize_columns(D), normalized=True), replaced


def prune_dictionary(dictionary: Dictionary, data: DataSet, K_target: int,
                     params: Optional[GelmaParams] = None, *,
                     sparsity: int = 3,
                     dedup_threshold: float = 0.98) -> Dictionary:
    """Reduce an over-produced dictionary to its K_target most-used atoms.

    Atoms are ranked by total code energy over the data; near-duplicate
    atoms (|correlation| above `dedup_threshold` with an already kept
    atom) are skipped and only revisited if the energy ranking runs out.
    """
    if K_target > dictionary.n_atoms:
        raise ValueError("cannot prune below the requested atom count")
    codes = sparse_code_all(dictionary, data, params, sparsity=sparsity,
                            failure_fraction=1.0, refit=True)
    usage = np.sum(np.abs(codes.codes) ** 2, axis=1)
    order = np.argsort(usage)[::-1]
    Dn = dictionary.normalize().columns
    kept: list[int] = []
    skipped: list[int] = []
    for j in order:
        if len(kept) == K_target:
            break
        if kept and np.max(np.abs(Dn[:, kept].conj().T @ Dn[:, j])) > dedup_threshold:
            skipped.append(j)
            continue
        kept.append(j)
    for j in skipped:
        if len(kept) == K_target:
            break
        kept.append(j)
    return Dictionary(np.ascontiguousarray(Dn[:, sorted(kept)]), normalized=True)


@dataclass
class Step1Params:
    """Thresholds for the correlation/subspace initializer."""

    sparsity: int = 3
    group_size: int = 20
    pair_threshold: float = 0.35      # |corr| above which two measurements
                                      # are presumed to share a column
    principal_threshold: float = 0.92  # cos of smallest principal angle
    ambiguity_gap: float = 0.08        # demanded cos gap to the 2nd angle
    merge_threshold: float = 0.95      # collinearity for merging harvests
    max_leaders_factor: int = 4        # cluster cap = factor * K_target
    max_anchors: Optional[int] = None
    max_pairs: int = 60_000
    seed: int = 0


def _principal_pairs(U: np.ndarray, pairs: np.ndarray, s: int):
    """Batched principal angles/vectors for subspace pairs.

    U : (n_subspaces, NF, s) stacked orthonormal bases.
    Returns (cos1, cos2, principal direction) per pair.
    """
    A = U[pairs[:, 0]]
    B = U[pairs[:, 1]]
    C = np.einsum("pns,pnt->pst", A.conj(), B)
    W, sv, Vh = np.linalg.svd(C)
    cos1 = np.clip(sv[:, 0], 0.0, 1.0)
    cos2 = np.clip(sv[:, 1], 0.0, 1.0) if s > 1 else np.zeros(len(sv))
    da = np.einsum("pns,ps->pn", A, W[:, :, 0])
    db = np.einsum("pns,ps->pn", B, Vh[:, 0, :].conj())
    # phase-align the two copies of the shared direction before averaging
    phase = np.einsum("pn,pn->p", da.conj(), db)
    phase = np.where(np.abs(phase) > 0, phase / np.abs(np.where(phase == 0, 1, phase)), 1.0)
    d = da + db * phase.conj()[:, None]
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return cos1, cos2, d


def step1_initialize(data: DataSet, K_target: int,
                     params: Optional[Step1Params] = None) -> Dictionary:
    """Coarse unordered dictionary from measurement correlations.

    Pipeline: (i) pairwise |correlation| graph over normalized
    measurements; (ii) each measurement and its strongest partners span a
    candidate subspace (top-s left singular vectors of the group
    submatrix); (iii) subspace pairs with a near-zero smallest principal
    angle share a column, harvested as the corresponding principal vector;
    (iv) harvested vectors are merged by collinearity and the K_target
    best-supported cluster averages are returned.
    """
    p = params or Step1Params()
    Y = normalize_columns(data.measurements)
    NF, M = Y.shape
    s = p.sparsity
    rng = np.random.default_rng(p.seed)
    anchors = np.arange(M)
    if p.max_anchors is not None and p.max_anchors < M:
        anchors = np.sort(rng.choice(M, size=p.max_anchors, replace=False))
    C = np.abs(Y.conj().T @ Y)
    np.fill_diagonal(C, 0.0)

    # (ii) candidate subspaces, one per anchor
    q = min(p.group_size, M - 1)
    subspaces = np.empty((len(anchors), NF, s), dtype=complex)
    for a, i in enumerate(anchors):
        group = np.argpartition(C[i], -q)[-q:]
        group = np.concatenate(([i], group))
        u, _, _ = np.linalg.svd(Y[:, group], full_matrices=False)
        subspaces[a] = u[:, :s]

    # (iii) harvest shared columns from correlated anchor pairs
    Ca = C[np.ix_(anchors, anchors)]
    iu, ju = np.triu_indices(len(anchors), k=1)
    mask = Ca[iu, ju] >= p.pair_threshold
    pairs = np.stack([iu[mask], ju[mask]], axis=1)
    if len(pairs) > p.max_pairs:
        pairs = pairs[rng.choice(len(pairs), size=p.max_pairs, replace=False)]
    # (iv) streamed collinearity merge of the harvested principal vectors;
    # cluster accumulators stay bounded so memory does not scale with the
    # number of accepted pairs
    leaders: list[np.ndarray] = []
    sums: list[np.ndarray] = []
    counts: list[int] = []

    def accumulate(j: int, v: np.ndarray, inner: complex):
        # align v's phase to leader j before adding to the running mean
        if abs(inner):
            v = v * (inner / abs(inner))
        sums[j] += v
        counts[j] += 1

    max_leaders = max(p.max_leaders_factor * K_target, K_target + 16)

    def absorb(vecs: np.ndarray):
        if leaders:
            L = np.stack(leaders)
            inner = vecs.conj() @ L.T
            corr = np.abs(inner)
            j = np.argmax(corr, axis=1)
            best = corr[np.arange(len(vecs)), j]
            hit = best >= p.merge_threshold
        else:
            inner = None
            j = None
            hit = np.zeros(len(vecs), dtype=bool)
        fresh: list[np.ndarray] = []  # leaders created within this chunk
        for row in range(len(vecs)):
            v = vecs[row]
            if hit[row]:
                accumulate(j[row], v, inner[row, j[row]])
                continue
            matched = False
            for fi, lv in enumerate(fresh):
                ip = np.vdot(v, lv)
                if abs(ip) >= p.merge_threshold:
                    accumulate(len(leaders) - len(fresh) + fi, v, ip)
                    matched = True
                    break
            if not matched and len(leaders) < max_leaders:
                leaders.append(v)
                sums.append(v.copy())
                counts.append(1)
                fresh.append(v)

    n_harvested = 0
    for lo in range(0, len(pairs), 2000):
        chunk = pairs[lo:lo + 2000]
        cos1, cos2, d = _principal_pairs(subspaces, chunk, s)
        ok = (cos1 >= p.principal_threshold) & (cos1 - cos2 >= p.ambiguity_gap)
        n_harvested += int(np.count_nonzero(ok))
        if np.any(ok):
            absorb(d[ok])
    if n_harvested == 0 or len(leaders) < K_target:
        raise UnderRecoveryError(len(leaders), K_target)
    order = np.argsort(counts)[::-1][:K_target]
    cols = np.stack([sums[j] / np.linalg.norm(sums[j]) for j in order], axis=1)
    return Dictionary(cols, normalized=True)


def match_columns(estimate: Dictionary, truth) -> Tuple[np.ndarray, np.ndarray]:
    """Greedy one-to-one matching of estimated to true columns by maximal
    |correlation|.  Evaluation-only.

    Returns (assignment, correlations) where assignment[t] is the estimate
    column matched to true column t and correlations[t] its |inner product|.
    """
    E = estimate.normalize().columns
    if isinstance(truth, SensingMatrix):
        T = truth.normalized()
    elif isinstance(truth, Dictionary):
        T = truth.normalize().columns
    else:
        T = normalize_columns(np.asarray(truth, dtype=complex))
    if E.shape[0] != T.shape[0]:
        raise ValueError("estimate and truth row dimensions differ")
    K = T.shape[1]
    if estimate.n_atoms < K:
        raise ValueError("estimate has fewer columns than truth")
    C = np.abs(E.conj().T @ T)
    assignment = np.full(K, -1, dtype=int)
    corrs = np.zeros(K)
    work = C.copy()
    for _ in range(K):
        e, t = np.unravel_index(np.argmax(work), work.shape)
        assignment[t] = e
        corrs[t] = C[e, t]
        work[e, :] = -1.0
        work[:, t] = -1.0
    return assignment, corrs
