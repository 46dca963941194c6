"""Analysis chain: integrated power, two-way PCA and CP/PARAFAC by ALS."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .numerics import SvdFactors, fix_column_phase, solve_gram, svd
from .tensor import as_array, khatri_rao, unfold

log = logging.getLogger(__name__)


def power_matrix(t) -> np.ndarray:
    """Integrated power ``p[j, k] = sum_tau |x[tau, j, k]|^2``.

    Accumulates delay taps in order, so the result is bit-identical to a
    plain triple loop.
    """
    x = as_array(t)
    p = np.zeros(x.shape[1:])
    for tap in x:
        p += tap.real * tap.real + tap.imag * tap.imag
    return p


def interleave(t) -> np.ndarray:
    """Stack every scan's CIRs into one column: ``(n_dly * n_dir) x n_scan``.

    Row ``tau + j * n_dly`` holds delay ``tau`` of direction ``j``.
    """
    return unfold(t, 3).T


def trajectory_db(g) -> np.ndarray:
    """``20 log10 |g|`` with zeros clamped to the smallest positive double."""
    return 20 * np.log10(np.maximum(np.abs(g), np.finfo(float).tiny))


@dataclass(frozen=True)
class PcaModel:
    """Uncentered two-way PCA of the interleaved matrix."""

    factors: SvdFactors
    n_components: int

    @property
    def scree(self) -> np.ndarray:
        s = self.factors.S
        return s / s[0] if s[0] > 0 else s.copy()

    @property
    def trajectories(self) -> np.ndarray:
        """Column ``k`` is the ``k``-th right singular vector scaled by ``S[k]``."""
        n = self.n_components
        return self.factors.V[:, :n] * self.factors.S[:n]

    def reconstruct(self, n_components: int | None = None) -> np.ndarray:
        return self.factors.reconstruct(n_components)


def pca(t, n_components: int) -> PcaModel:
    x = interleave(t)
    limit = min(x.shape)
    if not 1 <= n_components <= limit:
        raise ValueError(f"n_components must be in [1, {limit}], got {n_components}")
    return PcaModel(factors=svd(x), n_components=n_components)


@dataclass
class AlsOptions:
    tol: float = 1e-8
    max_iter: int = 500
    n_init: int = 4
    svd_init: bool = True
    seed: int = 0
    # restart a run whose gain trajectories stay this collinear for `patience` sweeps
    degeneracy_corr: float = 0.999
    degeneracy_patience: int = 10
    max_restarts: int = 3
    # extrapolate along the last sweep's step, kept only when the fit improves
    line_search: bool = True
    threads: int | None = None


@dataclass(frozen=True)
class CpModel:
    """Rank-``L`` CP model ``sum_l d_l o s_l o g_l``.

    ``d`` and ``s`` have unit-norm columns whose first largest-magnitude entry
    is real nonnegative; magnitude and phase live in ``g``. Components are
    sorted by ``||g_l||`` descending.
    """

    d: np.ndarray
    s: np.ndarray
    g: np.ndarray
    fit: float
    iterations: int
    init: str = ""
    fit_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    # every ALS run tried, as (init label, fit per sweep)
    runs: tuple = ()

    @property
    def rank(self) -> int:
        return self.d.shape[1]

    def reconstruct(self):
        from .tensor import cp_reconstruct

        return cp_reconstruct(self.d, self.s, self.g)

    def trajectory_db(self) -> np.ndarray:
        return trajectory_db(self.g)


def _gram(a: np.ndarray) -> np.ndarray:
    return a.conj().T @ a


def _leading_left_vectors(m: np.ndarray, k: int) -> np.ndarray:
    rows, cols = m.shape
    if rows <= cols:
        _, vecs = scipy.linalg.eigh(m @ m.conj().T, subset_by_index=[rows - k, rows - 1])
        return vecs[:, ::-1]
    _, vecs = scipy.linalg.eigh(m.conj().T @ m, subset_by_index=[cols - k, cols - 1])
    u = m @ vecs[:, ::-1]
    return u / np.maximum(np.linalg.norm(u, axis=0), np.finfo(float).tiny)


def _random_factors(rng: np.random.Generator, shape, rank):
    return [
        (rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))) / np.sqrt(2)
        for n in shape
    ]


def _unit_columns(a: np.ndarray) -> np.ndarray:
    """Columns scaled to unit norm; zero columns stay zero."""
    norms = np.linalg.norm(a, axis=0)
    return a / np.where(norms > 0, norms, 1.0)


def _max_offdiag_corr(g: np.ndarray) -> float:
    if g.shape[1] < 2:
        return 0.0
    c = np.abs(_gram(_unit_columns(g)))
    np.fill_diagonal(c, 0.0)
    return float(c.max())


def normalize_factors(d, s, g):
    """Apply the CpModel normalization, phase convention and ordering."""
    d = np.array(d, dtype=np.complex128)
    s = np.array(s, dtype=np.complex128)
    g = np.array(g, dtype=np.complex128)
    for f in (d, s):
        norms = np.linalg.norm(f, axis=0)
        nz = norms > 0
        f[:, nz] /= norms[nz]
        g[:, nz] *= norms[nz]
        phase = fix_column_phase(f)
        f *= phase
        g /= phase
    order = np.argsort(-np.linalg.norm(g, axis=0), kind="stable")
    return d[:, order], s[:, order], g[:, order]


class _AlsRun:
    """One ALS trajectory (possibly restarted on degeneracy) from one init."""

    # below this residual-to-data energy ratio the Gram shortcut loses digits
    exact_residual_below = 1e-6

    def __init__(self, x, rank, opts):
        self.shape = x.shape
        # rows tau * n_dir + j, matching khatri_rao(d, s)
        self.flat = x.reshape(x.shape[0] * x.shape[1], x.shape[2])
        self.norm_sq = float(np.vdot(self.flat, self.flat).real)
        self.rank = rank
        self.opts = opts

    def fit(self, d, s, g, rhs_g) -> float:
        gd, gs, gg = _gram(d), _gram(s), _gram(g)
        model_sq = float(np.sum(gg * gs * gd).real)
        cross = float(np.sum(np.conj(g) * rhs_g).real)
        resid_sq = self.norm_sq - 2 * cross + model_sq
        if resid_sq < self.exact_residual_below * self.norm_sq:
            resid = self.flat - khatri_rao(d, s) @ g.T
            resid_sq = float(np.vdot(resid, resid).real)
        return 1.0 - np.sqrt(max(resid_sq, 0.0) / self.norm_sq)

    def sweep(self, d, s, g):
        n_dly, n_dir, _ = self.shape
        # contracting the scan mode once serves both the d and s updates
        y = (self.flat @ np.conj(g)).reshape(n_dly, n_dir, self.rank)
        d = solve_gram(np.conj(_gram(g) * _gram(s)), np.einsum("tjl,jl->tl", y, np.conj(s)))
        s = solve_gram(np.conj(_gram(g) * _gram(d)), np.einsum("tjl,tl->jl", y, np.conj(d)))
        return (d, s, *self.solve_g(d, s))

    def solve_g(self, d, s):
        rhs_g = self.flat.T @ np.conj(khatri_rao(d, s))
        return solve_gram(np.conj(_gram(s) * _gram(d)), rhs_g), rhs_g

    def extrapolate(self, prev, cur, fit, step):
        """Bro-style line search: move d and s past the current iterate."""
        d = prev[0] + step * (cur[0] - prev[0])
        s = prev[1] + step * (cur[1] - prev[1])
        g, rhs_g = self.solve_g(d, s)
        trial = self.fit(d, s, g, rhs_g)
        if trial > fit:
            return (d, s, g), trial
        return None, fit

    def run(self, factors, rng):
        opts = self.opts
        d, s, g = factors
        restarts = 0
        history: list[float] = []
        degenerate_streak = 0
        prev = None
        it = 0
        while it < opts.max_iter:
            it += 1
            before = (d, s)
            d, s, g, rhs_g = self.sweep(d, s, g)
            fit = self.fit(d, s, g, rhs_g)
            if opts.line_search and it > 2:
                jumped, fit = self.extrapolate(before, (d, s), fit, it ** (1 / 3))
                if jumped is not None:
                    d, s, g = jumped
            history.append(fit)

            if self.rank > 1 and _max_offdiag_corr(g) > opts.degeneracy_corr:
                degenerate_streak += 1
            else:
                degenerate_streak = 0
            if degenerate_streak >= opts.degeneracy_patience and restarts < opts.max_restarts:
                restarts += 1
                log.debug("degenerate components after %d sweeps; restart %d", it, restarts)
                d, s, g = _random_factors(rng, self.shape, self.rank)
                degenerate_streak = 0
                prev = None
                history = []
                continue

            if prev is not None and abs(fit - prev) < opts.tol * max(abs(prev), 1e-12):
                break
            prev = fit
        return (d, s, g), history, it


def _thread_count(opts: AlsOptions) -> int:
    if opts.threads is not None:
        return max(1, opts.threads)
    try:
        return max(1, int(os.environ.get("BEAMSCAN_THREADS", "1")))
    except ValueError:
        return 1


def parafac(t, rank: int, opts: AlsOptions | None = None) -> CpModel:
    """Fit a rank-``rank`` CP model by alternating least squares.

    Each sweep updates the delay, spatial and gain factors in that order by
    exact least squares. Runs start from the leading singular vectors of the
    unfoldings (if ``opts.svd_init``) and from ``opts.n_init`` random complex
    Gaussian factor sets; the run with the best fit is returned.
    """
    opts = opts or AlsOptions()
    x = as_array(t)
    if not np.all(np.isfinite(x)):
        raise ValueError("parafac input contains non-finite entries")
    if not 1 <= rank <= min(x.shape):
        raise ValueError(f"rank must be in [1, {min(x.shape)}], got {rank}")
    norm_x = float(np.linalg.norm(x))
    if norm_x == 0:
        raise ValueError("parafac input is the zero tensor")

    x = np.ascontiguousarray(x)
    solver = _AlsRun(x, rank, opts)

    seeds = np.random.SeedSequence(opts.seed).spawn(opts.n_init + 1)
    starts = []
    if opts.svd_init:
        init = [_leading_left_vectors(unfold(x, m), rank) for m in (1, 2, 3)]
        starts.append(("svd", init, seeds[-1]))
    for i in range(opts.n_init):
        rng = np.random.default_rng(seeds[i])
        starts.append((f"random-{i}", _random_factors(rng, x.shape, rank), seeds[i]))
    if not starts:
        raise ValueError("no initializations requested")

    def work(start):
        label, factors, seed = start
        rng = np.random.default_rng(seed.spawn(1)[0])
        return label, *solver.run(factors, rng)

    workers = _thread_count(opts)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, starts))
    else:
        results = [work(s) for s in starts]

    best = max(range(len(results)), key=lambda i: (results[i][2][-1], -i))
    label, (d, s, g), history, iters = results[best]
    d, s, g = normalize_factors(d, s, g)
    resid = solver.flat - khatri_rao(d, s) @ g.T
    fit = 1.0 - float(np.linalg.norm(resid)) / norm_x
    return CpModel(
        d=d,
        s=s,
        g=g,
        fit=fit,
        iterations=iters,
        init=label,
        fit_history=np.asarray(history),
        runs=tuple((r[0], np.asarray(r[2])) for r in results),
    )


def fit_vs_rank(t, max_rank: int, opts: AlsOptions | None = None) -> np.ndarray:
    """CP fit for ranks ``1..max_rank``; a scree of fits for choosing ``L`` by eye."""
    return np.array([parafac(t, r, opts).fit for r in range(1, max_rank + 1)])


@dataclass(frozen=True)
class Alignment:
    permutation: np.ndarray  # permutation[i] = estimated component matched to truth i
    scales: np.ndarray  # est[:, permutation[i]] * scales[i] ~ truth[:, i]
    correlations: np.ndarray


def _g_matrix(obj) -> np.ndarray:
    g = getattr(obj, "g", obj)
    return np.atleast_2d(np.asarray(g, dtype=np.complex128))


def correlation_matrix(est, truth) -> np.ndarray:
    """``|<est_i, truth_j>| / (||est_i|| ||truth_j||)`` for all column pairs."""
    est, truth = (_unit_columns(np.atleast_2d(np.asarray(m, dtype=np.complex128))) for m in (est, truth))
    return np.clip(np.abs(est.conj().T @ truth), 0.0, 1.0)


def align_components(est, truth) -> Alignment:
    """Match estimated to planted gain trajectories greedily by correlation.

    ``est`` and ``truth`` may be CpModel/GroundTruth objects or ``g`` matrices.
    """
    e, tr = _g_matrix(est), _g_matrix(truth)
    if e.shape != tr.shape:
        raise ValueError(f"rank/length mismatch: estimate {e.shape}, truth {tr.shape}")
    corr = correlation_matrix(e, tr)
    work = corr.copy()
    rank = tr.shape[1]
    perm = np.zeros(rank, dtype=int)
    for _ in range(rank):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        perm[j] = i
        work[i, :] = -1.0
        work[:, j] = -1.0
    matched = e[:, perm]
    denom = np.maximum(np.sum(np.abs(matched) ** 2, axis=0), np.finfo(float).tiny)
    scales = np.sum(matched.conj() * tr, axis=0) / denom
    return Alignment(
        permutation=perm,
        scales=scales,
        correlations=corr[perm, np.arange(rank)],
    )


def free_parameters(i: int, j: int, k: int, rank: int, model: str) -> int:
    """Number of free parameters of a rank-``rank`` model of an ``i x j x k`` tensor.

    ``"pca"`` unfolds to ``i x jk`` (``rank * (i + j*k)``); ``"parafac"`` keeps
    one vector per mode (``rank * (i + j + k)``).
    """
    if model == "pca":
        return rank * (i + j * k)
    if model == "parafac":
        return rank * (i + j + k)
    raise ValueError(f"unknown model {model!r}; expected 'pca' or 'parafac'")
