"""Exhaustive-enumeration oracle over full configuration spaces.

Exact Boltzmann distributions, partition functions, logical-subspace
restrictions, broken-chain profiles, KL divergences and inverse-temperature
fits.  Enumeration runs through the Gray-code kernels in
:mod:`isingembed._kernels`; all Boltzmann weights are accumulated relative
to a lower energy bound so sums stay inside float range, with an automatic
second pass anchored at the true minimum when the bound is too loose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .embedding import ChainEmbedding
from .model import (
    DEFAULT_ENUMERATION_CAP,
    IsingModel,
    all_config_matrix,
    check_enumeration_cap,
)

MATERIALIZE_CAP = 2**26
BETA_SEARCH_INTERVAL = (1e-3, 5.0)

_RESCALE_THRESHOLD = 400.0  # on beta * (E_min - E_ref)


@dataclass(frozen=True)
class DistributionTable:
    """Probability mass over unique configuration (or level) indices."""

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if support.shape != probs.shape or support.ndim != 1:
            raise ValueError("support and probs must be matching 1-d arrays")
        order = np.argsort(support, kind="stable")
        support = support[order]
        probs = probs[order]
        if np.any(np.diff(support) == 0):
            raise ValueError("support entries must be unique")
        if np.any(probs < 0):
            raise ValueError("probabilities must be non-negative")
        total = probs.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        support.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    def prob_of(self, index: int) -> float:
        pos = int(np.searchsorted(self.support, index))
        if pos == len(self.support) or self.support[pos] != index:
            return 0.0
        return float(self.probs[pos])


@dataclass(frozen=True)
class BrokenChainProfile:
    """Exact mass per broken-chain count (p_n) and domain-wall count (p_ell)."""

    p_n: np.ndarray
    p_ell: np.ndarray

    def __post_init__(self):
        for arr, name in ((self.p_n, "p_n"), (self.p_ell, "p_ell")):
            if abs(arr.sum() - 1.0) > 1e-12:
                raise ValueError(f"{name} sums to {arr.sum()!r}, not 1")
        if self.p_n[0] != self.p_ell[0]:
            raise ValueError("p_n[0] and p_ell[0] must agree")

    @property
    def p_logical(self) -> float:
        return float(self.p_n[0])


def energy_lower_bound(model: IsingModel) -> float:
    """-(sum |J| + sum |h|), attained or not; anchors weight accumulation."""
    return -float(np.abs(model.edge_w).sum() + np.abs(model.fields).sum())


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + math.log(float(np.sum(np.exp(x - m))))


def all_energies(model: IsingModel, cap: int | None = None) -> np.ndarray:
    """Energy of every configuration, indexed by configuration index
    (bit i set <=> s_i = +1).  Materializes 2^N floats; capped accordingly."""
    cap = MATERIALIZE_CAP if cap is None else cap
    check_enumeration_cap(model.num_spins, cap)
    total = 2**model.num_spins
    indptr, nbr, nw = _kernels.model_csr(model)
    out = np.empty(total, dtype=np.float64)
    chunk = 2**20
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        walk = _kernels.energies_of_range(
            model.num_spins,
            model.edge_i,
            model.edge_j,
            model.edge_w,
            model.fields,
            indptr,
            nbr,
            nw,
            start,
            stop,
        )
        idx = np.arange(start, stop, dtype=np.int64)
        out[idx ^ (idx >> 1)] = walk
    return out


def log_partition_function(
    model: IsingModel, beta: float, cap: int | None = None
) -> float:
    """log Z by exhaustive enumeration with stable shifted accumulation."""
    check_enumeration_cap(model.num_spins, cap)
    total = 2**model.num_spins
    indptr, nbr, nw = _kernels.model_csr(model)
    lo, hi = _kernels.task_ranges(total, _kernels.MAX_TASKS_PROFILE)
    n_tasks = lo.shape[0]

    def run(e_ref: float):
        zsum_rows = np.zeros(n_tasks)
        emin_rows = np.zeros(n_tasks)
        # chain_len=1 degenerates the chain bookkeeping; wn/wl stay tiny
        wn_rows = np.zeros((n_tasks, model.num_spins + 1))
        wl_rows = np.zeros((n_tasks, 1))
        _kernels.profile_tasks(
            model.num_spins, 1, model.num_spins,
            model.edge_i, model.edge_j, model.edge_w, model.fields,
            indptr, nbr, nw,
            float(beta), e_ref, total, lo, hi,
            zsum_rows, emin_rows, wn_rows, wl_rows,
        )
        return float(np.sum(zsum_rows)), float(np.min(emin_rows))

    e_ref = energy_lower_bound(model)
    zsum, emin = run(e_ref)
    if beta * (emin - e_ref) > _RESCALE_THRESHOLD:
        e_ref = emin
        zsum, _ = run(e_ref)
    return math.log(zsum) - beta * e_ref


def boltzmann_distribution(
    model: IsingModel, beta: float, cap: int | None = None
) -> DistributionTable:
    """Exact probability of every configuration."""
    energies = all_energies(model, cap)
    logw = -beta * energies
    logw -= _logsumexp(logw)
    return DistributionTable(np.arange(energies.shape[0], dtype=np.int64), np.exp(logw))


def level_probabilities(histogram, beta: float) -> np.ndarray:
    """Per-level Boltzmann mass g_i e^{-beta E_i} / Z from an exact spectrum."""
    logw = -beta * histogram.energies + np.log(histogram.degeneracies)
    logw -= _logsumexp(logw)
    return np.exp(logw)


def logical_subspace_distribution(
    embedded: IsingModel,
    emb: ChainEmbedding,
    beta: float,
    cap: int | None = None,
) -> DistributionTable:
    """Embedded Boltzmann distribution conditioned on the logical subspace,
    re-indexed by native configuration.  Energies are computed on the
    embedded model directly, so agreement with the native distribution is a
    real identity check, not a tautology."""
    if embedded.num_spins != emb.num_embedded:
        raise ValueError("embedded model does not match the embedding")
    n = emb.native_n
    check_enumeration_cap(n, MATERIALIZE_CAP if cap is None else cap)
    energies = np.empty(2**n, dtype=np.float64)
    block = 2**16
    for start in range(0, 2**n, block):
        stop = min(start + block, 2**n)
        cfgs = all_config_matrix_block(n, start, stop)
        emb_cfgs = np.repeat(cfgs, emb.chain_len, axis=1)
        prod = emb_cfgs[:, embedded.edge_i].astype(np.float64) * emb_cfgs[
            :, embedded.edge_j
        ].astype(np.float64)
        energies[start:stop] = prod @ embedded.edge_w + emb_cfgs @ embedded.fields
    logw = -beta * energies
    logw -= _logsumexp(logw)
    return DistributionTable(np.arange(2**n, dtype=np.int64), np.exp(logw))


def all_config_matrix_block(num_spins: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(num_spins, dtype=np.int64)[None, :]) & 1
    return (2 * bits - 1).astype(np.int8)


def broken_chain_profile(
    embedded: IsingModel,
    emb: ChainEmbedding,
    beta: float,
    cap: int | None = None,
) -> BrokenChainProfile:
    """Exact P_n and P^(ell) by classifying every embedded configuration."""
    if embedded.num_spins != emb.num_embedded:
        raise ValueError("embedded model does not match the embedding")
    check_enumeration_cap(embedded.num_spins, cap)
    total = 2**embedded.num_spins
    n, k = emb.native_n, emb.chain_len
    indptr, nbr, nw = _kernels.model_csr(embedded)
    lo, hi = _kernels.task_ranges(total, _kernels.MAX_TASKS_PROFILE)
    n_tasks = lo.shape[0]

    def run(e_ref: float):
        zsum_rows = np.zeros(n_tasks)
        emin_rows = np.zeros(n_tasks)
        wn_rows = np.zeros((n_tasks, n + 1))
        wl_rows = np.zeros((n_tasks, n * (k - 1) + 1))
        _kernels.profile_tasks(
            embedded.num_spins, k, n,
            embedded.edge_i, embedded.edge_j, embedded.edge_w, embedded.fields,
            indptr, nbr, nw,
            float(beta), e_ref, total, lo, hi,
            zsum_rows, emin_rows, wn_rows, wl_rows,
        )
        return (
            float(np.sum(zsum_rows)),
            float(np.min(emin_rows)),
            wn_rows.sum(axis=0),
            wl_rows.sum(axis=0),
        )

    e_ref = energy_lower_bound(embedded)
    zsum, emin, wn, wl = run(e_ref)
    if beta * (emin - e_ref) > _RESCALE_THRESHOLD:
        zsum, _, wn, wl = run(emin)
    return BrokenChainProfile(p_n=wn / zsum, p_ell=wl / zsum)


def kl_divergence(p: DistributionTable, q: DistributionTable) -> float:
    """sum p log(p/q) with 0 log 0 = 0; requires support(p) within support(q)
    and q positive wherever p is."""
    pos = np.searchsorted(q.support, p.support)
    if np.any(pos >= q.support.shape[0]) or np.any(q.support[pos] != p.support):
        raise ValueError("support of p is not contained in support of q")
    mask = p.probs > 0
    qv = q.probs[pos][mask]
    if np.any(qv <= 0):
        raise ValueError("q must be strictly positive wherever p is")
    pv = p.probs[mask]
    return float(np.sum(pv * np.log(pv / qv)))


def fit_inverse_temperature(energies, probs) -> tuple[float, float]:
    """Ordinary least squares of ln P against E; returns (-slope, intercept).

    The negated slope is the effective inverse temperature of the points."""
    e = np.asarray(energies, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    if e.shape != p.shape or e.ndim != 1 or e.shape[0] < 2:
        raise ValueError("need at least two (E, P) points")
    if np.any(p <= 0):
        raise ValueError("probabilities must be positive for a log fit")
    if np.unique(e).shape[0] < 2:
        raise ValueError("singular fit: need at least two distinct energies")
    slope, intercept = np.polyfit(e, np.log(p), 1)
    return float(-slope), float(intercept)


def optimal_beta(
    p_projected: DistributionTable,
    model: IsingModel,
    search: tuple[float, float] = BETA_SEARCH_INTERVAL,
    tol: float = 1e-6,
    grid_points: int = 64,
) -> float:
    """argmin over beta of KL(p_projected || Boltzmann(model, beta)),
    coarse grid then golden-section refinement."""
    energies = all_energies(model)
    mask = p_projected.probs > 0
    plogp = float(np.sum(p_projected.probs[mask] * np.log(p_projected.probs[mask])))
    mean_e = float(np.dot(p_projected.probs, energies[p_projected.support]))

    def kl_at(beta: float) -> float:
        return plogp + beta * mean_e + _logsumexp(-beta * energies)

    lo, hi = search
    grid = np.linspace(lo, hi, grid_points)
    values = [kl_at(b) for b in grid]
    i = int(np.argmin(values))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid_points - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    while b - a > tol:
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        if kl_at(c) < kl_at(d):
            b = d
        else:
            a = c
    return float(0.5 * (a + b))


def exact_ring_partition_ratio(n_ring: int, j_f_mag: float, beta: float) -> float:
    """Z/Z_L - 1 for the split ferromagnetic ring, by enumeration over all
    2^(n_ring+1) configurations (Z_L restricts to equal split-pair spins)."""
    from .theory import ring_model

    model = ring_model(n_ring, j_f_mag)
    energies = all_energies(model)
    idx = np.arange(energies.shape[0], dtype=np.int64)
    logical = ((idx & 1) == ((idx >> 1) & 1))
    w = np.exp(-beta * (energies - energies.min()))
    return float(w.sum() / w[logical].sum() - 1.0)
