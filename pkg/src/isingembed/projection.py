"""Projections from the embedded space back to the logical space.

Two per-sample projections are provided, each with a batch variant and an
exact-distribution variant:

* majority vote: every broken chain is replaced by its majority value,
  exact ties (even chain length) by a fair coin per tied chain;
* restricted resampling: unbroken chains keep their value and the broken
  set is redrawn from the conditional Boltzmann distribution on the native
  model -- exactly (enumerating the 2^b completions) while the broken set
  is small, through a subset Metropolis chain beyond that.

The exact-distribution variants sweep every embedded configuration once,
binning Boltzmann mass by the per-chain outcome (majority sign or aligned
value, with a third symbol for ties/breaks) and then folding the bins onto
native configurations with the corresponding projection kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .embedding import ChainEmbedding, classify
from .exact import (
    DistributionTable,
    all_energies,
    energy_lower_bound,
    _RESCALE_THRESHOLD,
)
from .model import IsingModel, as_spin_config, check_enumeration_cap
from .rng import SplitMix64
from .sampler import DEFAULT_BUDGET_FLOOR, DEFAULT_BUDGET_MULT

RRS_EXACT_CAP = 20


@dataclass(frozen=True)
class ProjectionReport:
    """Result of projecting one embedded configuration."""

    projected: np.ndarray  # int8, native length
    broken_count: int
    method: str  # "mv" | "rrs-exact" | "rrs-mcmc"


def majority_vote(
    emb: ChainEmbedding, embedded, rng: SplitMix64 | None = None
) -> ProjectionReport:
    """Per-chain majority; aligned chains pass through, exact ties (even
    chain length only) are fair coins drawn independently per tied chain in
    chain order.  Odd chain lengths never consume the generator."""
    cfg = as_spin_config(embedded, emb.num_embedded)
    chains = cfg.reshape(emb.native_n, emb.chain_len)
    sums = chains.sum(axis=1, dtype=np.int64)
    out = np.sign(sums).astype(np.int8)
    ties = np.flatnonzero(sums == 0)
    if ties.size:
        if rng is None:
            raise ValueError("tie encountered and no rng supplied")
        for ch in ties:
            out[ch] = rng.rand_spin()
    cls = classify(emb, cfg)
    return ProjectionReport(out, cls.broken_count, "mv")


def rrs(
    emb: ChainEmbedding,
    native_model: IsingModel,
    embedded,
    beta: float,
    rng: SplitMix64,
    mode: str = "exact",
    exact_cap: int = RRS_EXACT_CAP,
    budget: int | None = None,
) -> ProjectionReport:
    """Restricted resampling of one embedded configuration.

    Builds the broken set, fixes unbroken chains, then redraws the broken
    chains from the conditional Boltzmann law at ``beta``: exactly when
    ``mode="exact"`` and at most ``exact_cap`` chains are broken (one
    generator draw), otherwise through a subset Metropolis chain started
    from random values on the broken chains (one spin draw per broken
    chain, then one draw seeding the chain's stream).
    """
    if mode not in ("exact", "mcmc"):
        raise ValueError(f"unknown rrs mode {mode!r}")
    if native_model.num_spins != emb.native_n:
        raise ValueError("native model does not match the embedding")
    cfg = as_spin_config(embedded, emb.num_embedded)
    cls = classify(emb, cfg)
    broken = np.flatnonzero(cls.broken).astype(np.int64)
    out = cls.aligned_values.copy()
    if broken.size == 0:
        return ProjectionReport(out, 0, f"rrs-{mode}")

    indptr, nbr, nw = _kernels.model_csr(native_model)
    if mode == "exact" and broken.size <= exact_cap:
        out[broken] = -1
        _kernels.rrs_exact_draw(
            out, broken, indptr, nbr, nw, native_model.fields,
            float(beta), rng.random(),
        )
        return ProjectionReport(out, int(broken.size), "rrs-exact")

    for ch in broken:
        out[ch] = rng.rand_spin()
    if budget is None:
        budget = max(DEFAULT_BUDGET_FLOOR, DEFAULT_BUDGET_MULT * int(broken.size))
    _kernels.subset_chain(
        out, broken, indptr, nbr, nw, native_model.fields,
        float(beta), int(budget), np.uint64(rng.next_u64()),
    )
    return ProjectionReport(out, int(broken.size), "rrs-mcmc")


def project_batch_mv(emb: ChainEmbedding, configs: np.ndarray, seed: int = 0) -> np.ndarray:
    """Majority vote over a batch, one tie-coin stream per sample (seed^s)."""
    configs = np.ascontiguousarray(configs, dtype=np.int8)
    out = np.empty((configs.shape[0], emb.native_n), dtype=np.int8)
    _kernels.mv_project_batch(
        configs, emb.chain_len, emb.native_n, np.uint64(seed), out
    )
    return out


def project_batch_rrs(
    emb: ChainEmbedding,
    native_model: IsingModel,
    configs: np.ndarray,
    beta: float,
    seed: int = 0,
    exact_cap: int = RRS_EXACT_CAP,
) -> np.ndarray:
    """Restricted resampling over a batch, one stream per sample (seed^s)."""
    configs = np.ascontiguousarray(configs, dtype=np.int8)
    indptr, nbr, nw = _kernels.model_csr(native_model)
    out = np.empty((configs.shape[0], emb.native_n), dtype=np.int8)
    _kernels.rrs_project_batch(
        configs, emb.chain_len, emb.native_n,
        indptr, nbr, nw, native_model.fields,
        float(beta), np.uint64(seed), exact_cap,
        DEFAULT_BUDGET_FLOOR, DEFAULT_BUDGET_MULT, out,
    )
    return out


def _group_weights(
    emb: ChainEmbedding,
    embedded: IsingModel,
    beta: float,
    cap: int | None,
):
    check_enumeration_cap(embedded.num_spins, cap)
    total = 2**embedded.num_spins
    n, k = emb.native_n, emb.chain_len
    pow3 = 3 ** np.arange(n, dtype=np.int64)
    indptr, nbr, nw = _kernels.model_csr(embedded)
    lo, hi = _kernels.task_ranges(total, _kernels.MAX_TASKS_GROUPS)
    n_tasks = lo.shape[0]

    def run(e_ref: float):
        zsum_rows = np.zeros(n_tasks)
        emin_rows = np.zeros(n_tasks)
        mv_rows = np.zeros((n_tasks, 3**n))
        rrs_rows = np.zeros((n_tasks, 3**n))
        _kernels.group_tasks(
            embedded.num_spins, k, n,
            embedded.edge_i, embedded.edge_j, embedded.edge_w, embedded.fields,
            indptr, nbr, nw,
            float(beta), e_ref, total, lo, hi, pow3,
            zsum_rows, emin_rows, mv_rows, rrs_rows,
        )
        return (
            float(np.sum(zsum_rows)),
            float(np.min(emin_rows)),
            mv_rows.sum(axis=0),
            rrs_rows.sum(axis=0),
        )

    e_ref = energy_lower_bound(embedded)
    zsum, emin, mv, rrs_w = run(e_ref)
    if beta * (emin - e_ref) > _RESCALE_THRESHOLD:
        zsum, _, mv, rrs_w = run(emin)
    return zsum, mv, rrs_w, pow3


def exact_projected_distributions(
    emb: ChainEmbedding,
    native_model: IsingModel,
    embedded: IsingModel,
    beta: float,
    cap: int | None = None,
) -> dict[str, DistributionTable]:
    """Exact post-projection distributions for both methods from a single
    sweep of the embedded configuration space."""
    if native_model.num_spins != emb.native_n:
        raise ValueError("native model does not match the embedding")
    if embedded.num_spins != emb.num_embedded:
        raise ValueError("embedded model does not match the embedding")
    n = emb.native_n
    zsum, mv_groups, rrs_groups, pow3 = _group_weights(emb, embedded, beta, cap)

    mv_native = np.zeros(2**n)
    _kernels.mv_groups_to_native(mv_groups, n, pow3, mv_native)

    e_nat = all_energies(native_model)
    rrs_native = np.zeros(2**n)
    _kernels.rrs_groups_to_native(rrs_groups, n, pow3, e_nat, float(beta), rrs_native)

    support = np.arange(2**n, dtype=np.int64)
    return {
        "mv": DistributionTable(support, mv_native / zsum),
        "rrs": DistributionTable(support, rrs_native / zsum),
    }


def exact_projected_distribution(
    emb: ChainEmbedding,
    native_model: IsingModel,
    embedded: IsingModel,
    beta: float,
    method: str,
    cap: int | None = None,
) -> DistributionTable:
    """Exact distribution after projecting every embedded configuration."""
    if method not in ("mv", "rrs"):
        raise ValueError(f"unknown projection method {method!r}")
    return exact_projected_distributions(emb, native_model, embedded, beta, cap)[method]
