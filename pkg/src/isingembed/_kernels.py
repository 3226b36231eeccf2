"""Compiled kernels: Gray-code exhaustive enumeration and Metropolis chains.

Enumeration walks configurations in Gray-code order (configuration
``gray(t) = t ^ (t >> 1)`` at step ``t``), so consecutive states differ by
one spin and the energy is updated through the flipped spin's local field.
Work is split into fixed 2**16-state chunks; chunks are grouped into
contiguous tasks whose boundaries depend only on the state count, never on
the thread count.  Each chunk re-derives spins, energy and chain counters
from scratch (bounding incremental float drift), each task accumulates into
a private row, and rows are reduced in task order afterwards -- so every
result is bit-identical for any number of threads.

The pseudo-random generator is splitmix64, kept in lockstep with the pure
Python reference in :mod:`isingembed.rng`.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

CHUNK_BITS = 16
CHUNK_STATES = 1 << CHUNK_BITS
MAX_TASKS_PROFILE = 4096
MAX_TASKS_GROUPS = 256

def build_csr(num_spins, edge_i, edge_j, edge_w):
    """Symmetric CSR adjacency (both edge directions) for local-field sums."""
    counts = np.bincount(edge_i, minlength=num_spins) + np.bincount(
        edge_j, minlength=num_spins
    )
    indptr = np.zeros(num_spins + 1, np.int64)
    indptr[1:] = np.cumsum(counts)
    nbr = np.empty(indptr[-1], np.int64)
    nw = np.empty(indptr[-1], np.float64)
    fill = indptr[:-1].copy()
    for i, j, w in zip(edge_i, edge_j, edge_w):
        nbr[fill[i]] = j
        nw[fill[i]] = w
        fill[i] += 1
        nbr[fill[j]] = i
        nw[fill[j]] = w
        fill[j] += 1
    return indptr, nbr, nw


def model_csr(model):
    if model._csr is None:
        model._csr = build_csr(
            model.num_spins, model.edge_i, model.edge_j, model.edge_w
        )
    return model._csr


def task_ranges(total_states, max_tasks):
    """Contiguous chunk-index ranges per task; depends only on the state count."""
    n_chunks = (total_states + CHUNK_STATES - 1) >> CHUNK_BITS
    n_tasks = min(n_chunks, max_tasks)
    base, rem = divmod(n_chunks, n_tasks)
    lo = np.empty(n_tasks, np.int64)
    hi = np.empty(n_tasks, np.int64)
    c = 0
    for t in range(n_tasks):
        step = base + (1 if t < rem else 0)
        lo[t] = c
        hi[t] = c + step
        c += step
    return lo, hi


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S63 = np.uint64(63)
_INV53 = 1.1102230246251565e-16  # 2**-53


# --- splitmix64 -----------------------------------------------------------

@njit(cache=True, inline="always")
def rng_next(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> _S30)) * _MIX_A
    z = (z ^ (z >> _S27)) * _MIX_B
    return state, z ^ (z >> _S31)


@njit(cache=True, inline="always")
def rng_uniform(state):
    state, z = rng_next(state)
    return state, np.float64(z >> _S11) * _INV53


@njit(cache=True, inline="always")
def rng_spin(state):
    state, z = rng_next(state)
    if z >> _S63:
        return state, np.int8(-1)
    return state, np.int8(1)


@njit(cache=True, inline="always")
def rng_below(state, n):
    state, z = rng_next(state)
    return state, np.int64(z % np.uint64(n))


@njit(cache=True)
def rng_sequence(seed, count):
    """Raw splitmix64 outputs; parity check against the Python reference."""
    out = np.empty(count, np.uint64)
    state = seed
    for i in range(count):
        state, z = rng_next(state)
        out[i] = z
    return out


# --- energies -------------------------------------------------------------

@njit(cache=True)
def full_energy(spins, edge_i, edge_j, edge_w, fields):
    """Canonical summation order: sorted edges first, then fields."""
    e = 0.0
    for t in range(edge_i.shape[0]):
        e += edge_w[t] * spins[edge_i[t]] * spins[edge_j[t]]
    for b in range(fields.shape[0]):
        e += fields[b] * spins[b]
    return e


@njit(cache=True, inline="always")
def _local_field(b, spins, indptr, nbr, nw, fields):
    lf = fields[b]
    for p in range(indptr[b], indptr[b + 1]):
        lf += nw[p] * spins[nbr[p]]
    return lf


@njit(cache=True)
def _init_gray_state(n, idx, edge_i, edge_j, edge_w, fields, spins):
    g = idx ^ (idx >> 1)
    for b in range(n):
        if (g >> b) & 1:
            spins[b] = np.int8(1)
        else:
            spins[b] = np.int8(-1)
    return full_energy(spins, edge_i, edge_j, edge_w, fields)


@njit(cache=True)
def _init_chains(spins, n_chains, chain_len, sums, dw):
    for c in range(n_chains):
        base = c * chain_len
        s = np.int64(spins[base])
        d = np.int64(0)
        for k in range(1, chain_len):
            s += spins[base + k]
            if spins[base + k] != spins[base + k - 1]:
                d += 1
        sums[c] = s
        dw[c] = d


@njit(cache=True)
def energies_of_range(n, edge_i, edge_j, edge_w, fields, indptr, nbr, nw, start, stop):
    """Energies of configurations gray(start)..gray(stop-1), in walk order."""
    out = np.empty(stop - start, np.float64)
    spins = np.empty(n, np.int8)
    e = _init_gray_state(n, start, edge_i, edge_j, edge_w, fields, spins)
    idx = start
    pos = 0
    while True:
        out[pos] = e
        pos += 1
        idx += 1
        if idx == stop:
            break
        x = idx
        b = 0
        while not (x & 1):
            x >>= 1
            b += 1
        sold = spins[b]
        e -= 2.0 * sold * _local_field(b, spins, indptr, nbr, nw, fields)
        spins[b] = -sold
    return out


@njit(cache=True)
def energies_for_configs(cfgs, edge_i, edge_j, edge_w, fields, out):
    for s in range(cfgs.shape[0]):
        out[s] = full_energy(cfgs[s], edge_i, edge_j, edge_w, fields)


# --- exhaustive broken-chain profile ---------------------------------------

@njit(cache=True, parallel=True)
def profile_tasks(
    n_emb,
    chain_len,
    n_chains,
    edge_i,
    edge_j,
    edge_w,
    fields,
    indptr,
    nbr,
    nw,
    beta,
    e_ref,
    total,
    task_lo,
    task_hi,
    zsum_rows,
    emin_rows,
    wn_rows,
    wl_rows,
):
    """Boltzmann mass per broken-chain count and per domain-wall count.

    ``task_lo/hi`` are chunk-index ranges; rows are task-private.
    """
    n_tasks = task_lo.shape[0]
    for t in prange(n_tasks):
        spins = np.empty(n_emb, np.int8)
        sums = np.empty(n_chains, np.int64)
        dw = np.empty(n_chains, np.int64)
        wn = np.zeros(n_chains + 1, np.float64)
        wl = np.zeros(n_chains * (chain_len - 1) + 1, np.float64)
        zsum = 0.0
        emin = np.inf
        for c in range(task_lo[t], task_hi[t]):
            start = c << CHUNK_BITS
            stop = min(start + CHUNK_STATES, total)
            e = _init_gray_state(n_emb, start, edge_i, edge_j, edge_w, fields, spins)
            _init_chains(spins, n_chains, chain_len, sums, dw)
            nbroken = 0
            nwalls = 0
            for ch in range(n_chains):
                if dw[ch] > 0:
                    nbroken += 1
                nwalls += dw[ch]
            idx = start
            while True:
                w = math.exp(-beta * (e - e_ref))
                zsum += w
                wn[nbroken] += w
                wl[nwalls] += w
                if e < emin:
                    emin = e
                idx += 1
                if idx == stop:
                    break
                x = idx
                b = 0
                while not (x & 1):
                    x >>= 1
                    b += 1
                sold = spins[b]
                e -= 2.0 * sold * _local_field(b, spins, indptr, nbr, nw, fields)
                snew = -sold
                spins[b] = snew
                ch = b // chain_len
                k = b - ch * chain_len
                sums[ch] += 2 * snew
                dold = dw[ch]
                dnew = dold
                if k > 0:
                    if sold == spins[b - 1]:
                        dnew += 1
                    else:
                        dnew -= 1
                if k < chain_len - 1:
                    if sold == spins[b + 1]:
                        dnew += 1
                    else:
                        dnew -= 1
                if dold == 0 and dnew > 0:
                    nbroken += 1
                elif dold > 0 and dnew == 0:
                    nbroken -= 1
                nwalls += dnew - dold
                dw[ch] = dnew
        zsum_rows[t] = zsum
        emin_rows[t] = emin
        for q in range(wn.shape[0]):
            wn_rows[t, q] = wn[q]
        for q in range(wl.shape[0]):
            wl_rows[t, q] = wl[q]


@njit(cache=True, inline="always")
def _mv_trit(chain_sum):
    if chain_sum > 0:
        return np.int64(0)
    if chain_sum < 0:
        return np.int64(1)
    return np.int64(2)


@njit(cache=True, inline="always")
def _rrs_trit(chain_sum, chain_dw):
    if chain_dw == 0:
        if chain_sum > 0:
            return np.int64(0)
        return np.int64(1)
    return np.int64(2)


@njit(cache=True, parallel=True)
def group_tasks(
    n_emb,
    chain_len,
    n_chains,
    edge_i,
    edge_j,
    edge_w,
    fields,
    indptr,
    nbr,
    nw,
    beta,
    e_ref,
    total,
    task_lo,
    task_hi,
    pow3,
    zsum_rows,
    emin_rows,
    mv_rows,
    rrs_rows,
):
    """Boltzmann mass per projection group, in base-3 chain encoding.

    Majority-vote trit: 0 majority +1, 1 majority -1, 2 tie.
    Resampling trit:    0 aligned +1, 1 aligned -1, 2 broken.
    """
    n_groups = pow3[n_chains - 1] * 3
    n_tasks = task_lo.shape[0]
    for t in prange(n_tasks):
        spins = np.empty(n_emb, np.int8)
        sums = np.empty(n_chains, np.int64)
        dw = np.empty(n_chains, np.int64)
        mv = np.zeros(n_groups, np.float64)
        rrs = np.zeros(n_groups, np.float64)
        zsum = 0.0
        emin = np.inf
        for c in range(task_lo[t], task_hi[t]):
            start = c << CHUNK_BITS
            stop = min(start + CHUNK_STATES, total)
            e = _init_gray_state(n_emb, start, edge_i, edge_j, edge_w, fields, spins)
            _init_chains(spins, n_chains, chain_len, sums, dw)
            mv_idx = np.int64(0)
            rrs_idx = np.int64(0)
            for ch in range(n_chains):
                mv_idx += _mv_trit(sums[ch]) * pow3[ch]
                rrs_idx += _rrs_trit(sums[ch], dw[ch]) * pow3[ch]
            idx = start
            while True:
                w = math.exp(-beta * (e - e_ref))
                zsum += w
                mv[mv_idx] += w
                rrs[rrs_idx] += w
                if e < emin:
                    emin = e
                idx += 1
                if idx == stop:
                    break
                x = idx
                b = 0
                while not (x & 1):
                    x >>= 1
                    b += 1
                sold = spins[b]
                e -= 2.0 * sold * _local_field(b, spins, indptr, nbr, nw, fields)
                snew = -sold
                spins[b] = snew
                ch = b // chain_len
                k = b - ch * chain_len
                mv_old = _mv_trit(sums[ch])
                rrs_old = _rrs_trit(sums[ch], dw[ch])
                sums[ch] += 2 * snew
                dnew = dw[ch]
                if k > 0:
                    if sold == spins[b - 1]:
                        dnew += 1
                    else:
                        dnew -= 1
                if k < chain_len - 1:
                    if sold == spins[b + 1]:
                        dnew += 1
                    else:
                        dnew -= 1
                dw[ch] = dnew
                mv_idx += (_mv_trit(sums[ch]) - mv_old) * pow3[ch]
                rrs_idx += (_rrs_trit(sums[ch], dnew) - rrs_old) * pow3[ch]
        zsum_rows[t] = zsum
        emin_rows[t] = emin
        for q in range(n_groups):
            mv_rows[t, q] = mv[q]
        for q in range(n_groups):
            rrs_rows[t, q] = rrs[q]


# --- projection-group post-processing --------------------------------------

@njit(cache=True)
def mv_groups_to_native(groups, n_chains, pow3, out):
    """Fold tie trits: mass 2**-t spread uniformly over t tied chains."""
    tied = np.empty(n_chains, np.int64)
    for g in range(groups.shape[0]):
        w = groups[g]
        if w == 0.0:
            continue
        base = np.int64(0)
        n_tied = 0
        rem = g
        for ch in range(n_chains):
            trit = rem % 3
            rem //= 3
            if trit == 0:
                base |= np.int64(1) << ch
            elif trit == 2:
                tied[n_tied] = ch
                n_tied += 1
        share = w / (1 << n_tied)
        for comp in range(1 << n_tied):
            idx = base
            for jj in range(n_tied):
                if (comp >> jj) & 1:
                    idx |= np.int64(1) << tied[jj]
            out[idx] += share


@njit(cache=True)
def rrs_groups_to_native(groups, n_chains, pow3, e_nat, beta, out):
    """Distribute each group's mass over broken-chain completions
    proportionally to the native Boltzmann weight."""
    broken = np.empty(n_chains, np.int64)
    max_b = 0
    for g in range(groups.shape[0]):
        if groups[g] == 0.0:
            continue
        rem = g
        nb = 0
        for ch in range(n_chains):
            if rem % 3 == 2:
                nb += 1
            rem //= 3
        if nb > max_b:
            max_b = nb
    comp_idx = np.empty(1 << max_b, np.int64)
    weights = np.empty(1 << max_b, np.float64)
    for g in range(groups.shape[0]):
        w = groups[g]
        if w == 0.0:
            continue
        base = np.int64(0)
        nb = 0
        rem = g
        for ch in range(n_chains):
            trit = rem % 3
            rem //= 3
            if trit == 0:
                base |= np.int64(1) << ch
            elif trit == 2:
                broken[nb] = ch
                nb += 1
        n_comp = 1 << nb
        emin = np.inf
        for comp in range(n_comp):
            idx = base
            for jj in range(nb):
                if (comp >> jj) & 1:
                    idx |= np.int64(1) << broken[jj]
            comp_idx[comp] = idx
            if e_nat[idx] < emin:
                emin = e_nat[idx]
        qsum = 0.0
        for comp in range(n_comp):
            q = math.exp(-beta * (e_nat[comp_idx[comp]] - emin))
            weights[comp] = q
            qsum += q
        for comp in range(n_comp):
            out[comp_idx[comp]] += w * weights[comp] / qsum


# --- Metropolis sampling ----------------------------------------------------

@njit(cache=True)
def _metropolis_chain(
    n,
    edge_i,
    edge_j,
    edge_w,
    fields,
    indptr,
    nbr,
    nw,
    beta,
    n_t,
    n_s,
    stream,
    audit_every,
    out_cfg,
    out_en,
):
    """One realization: random start, single-spin Metropolis, one sample
    per ``n_t`` proposals.  Two generator draws per proposal (spin pick,
    acceptance uniform), one per spin for the start.  Emitted energies are
    recomputed in full; the incremental energy is audited every
    ``audit_every`` proposals and the largest deviation returned.
    """
    state = stream
    spins = np.empty(n, np.int8)
    for b in range(n):
        state, s = rng_spin(state)
        spins[b] = s
    e = full_energy(spins, edge_i, edge_j, edge_w, fields)
    drift = 0.0
    steps = 0
    for s_ix in range(n_s):
        for _ in range(n_t):
            state, b = rng_below(state, n)
            de = -2.0 * spins[b] * _local_field(b, spins, indptr, nbr, nw, fields)
            state, u = rng_uniform(state)
            # downhill moves always pass (exp >= 1 > u); skip the exp
            if de <= 0.0 or u < math.exp(-beta * de):
                e += de
                spins[b] = -spins[b]
            steps += 1
            if steps % audit_every == 0:
                ef = full_energy(spins, edge_i, edge_j, edge_w, fields)
                d = abs(e - ef)
                if d > drift:
                    drift = d
                e = ef
        for b in range(n):
            out_cfg[s_ix, b] = spins[b]
        out_en[s_ix] = full_energy(spins, edge_i, edge_j, edge_w, fields)
    return drift


@njit(cache=True, parallel=True)
def metropolis_batch(
    n,
    edge_i,
    edge_j,
    edge_w,
    fields,
    indptr,
    nbr,
    nw,
    beta,
    n_t,
    n_s,
    seed,
    realizations,
    audit_every,
    cfgs,
    ens,
    drifts,
):
    for r in prange(realizations):
        stream = seed ^ np.uint64(r)
        drifts[r] = _metropolis_chain(
            n, edge_i, edge_j, edge_w, fields, indptr, nbr, nw,
            beta, n_t, n_s, stream, audit_every, cfgs[r], ens[r],
        )


@njit(cache=True)
def subset_chain(spins, subset, indptr, nbr, nw, fields, beta, budget, stream):
    """Metropolis proposing flips only inside ``subset``; in-place."""
    m = subset.shape[0]
    if m == 0:
        return
    state = stream
    for _ in range(budget):
        state, pick = rng_below(state, m)
        b = subset[pick]
        de = -2.0 * spins[b] * _local_field(b, spins, indptr, nbr, nw, fields)
        state, u = rng_uniform(state)
        if de <= 0.0 or u < math.exp(-beta * de):
            spins[b] = -spins[b]


# --- per-sample projections -------------------------------------------------

@njit(cache=True)
def rrs_exact_draw(spins, broken, indptr, nbr, nw, fields, beta, u):
    """Exact conditional draw over the 2**b completions of broken spins.

    ``spins`` must hold the base configuration with every broken position
    set to -1; the drawn completion is written in place.  Completion ``t``
    flips the broken spins selected by ``gray(t)`` relative to the base.
    """
    nb = broken.shape[0]
    n_comp = np.int64(1) << nb
    deltas = np.empty(n_comp, np.float64)
    d = 0.0
    dmin = 0.0
    t = np.int64(0)
    while True:
        deltas[t] = d
        t += 1
        if t == n_comp:
            break
        x = t
        jb = 0
        while not (x & 1):
            x >>= 1
            jb += 1
        b = broken[jb]
        d -= 2.0 * spins[b] * _local_field(b, spins, indptr, nbr, nw, fields)
        spins[b] = -spins[b]
        if d < dmin:
            dmin = d
    total = 0.0
    for t in range(n_comp):
        q = math.exp(-beta * (deltas[t] - dmin))
        deltas[t] = q
        total += q
    target = u * total
    acc = 0.0
    chosen = n_comp - 1
    for t in range(n_comp):
        acc += deltas[t]
        if target < acc:
            chosen = t
            break
    g = chosen ^ (chosen >> 1)
    for jb in range(nb):
        if (g >> jb) & 1:
            spins[broken[jb]] = np.int8(1)
        else:
            spins[broken[jb]] = np.int8(-1)


@njit(cache=True, parallel=True)
def mv_project_batch(emb_cfgs, chain_len, n_chains, seed, out):
    """Per-chain majority vote; tie chains get a fair coin (stream seed^s)."""
    for s in prange(emb_cfgs.shape[0]):
        state = seed ^ np.uint64(s)
        for ch in range(n_chains):
            base = ch * chain_len
            tot = np.int64(0)
            for k in range(chain_len):
                tot += emb_cfgs[s, base + k]
            if tot > 0:
                out[s, ch] = np.int8(1)
            elif tot < 0:
                out[s, ch] = np.int8(-1)
            else:
                state, v = rng_spin(state)
                out[s, ch] = v


@njit(cache=True, parallel=True)
def rrs_project_batch(
    emb_cfgs,
    chain_len,
    n_chains,
    indptr,
    nbr,
    nw,
    fields,
    beta,
    seed,
    exact_cap,
    budget_floor,
    budget_mult,
    out,
):
    """Restricted resampling over the native model, one stream per sample.

    Unbroken chains keep their value.  With at most ``exact_cap`` broken
    chains the completion is drawn exactly (one uniform); otherwise broken
    chains start at random spins and a subset Metropolis chain of
    ``max(budget_floor, budget_mult * |B|)`` proposals runs over them.
    """
    for s in prange(emb_cfgs.shape[0]):
        state = seed ^ np.uint64(s)
        broken = np.empty(n_chains, np.int64)
        nb = 0
        for ch in range(n_chains):
            base = ch * chain_len
            v = emb_cfgs[s, base]
            aligned = True
            for k in range(1, chain_len):
                if emb_cfgs[s, base + k] != v:
                    aligned = False
                    break
            if aligned:
                out[s, ch] = v
            else:
                broken[nb] = ch
                nb += 1
                out[s, ch] = np.int8(-1)
        if nb == 0:
            continue
        if nb <= exact_cap:
            state, u = rng_uniform(state)
            rrs_exact_draw(out[s], broken[:nb], indptr, nbr, nw, fields, beta, u)
        else:
            for t in range(nb):
                state, v = rng_spin(state)
                out[s, broken[t]] = v
            budget = budget_floor
            if budget_mult * nb > budget:
                budget = budget_mult * nb
            state, sub = rng_next(state)
            subset_chain(out[s], broken[:nb], indptr, nbr, nw, fields, beta, budget, sub)
