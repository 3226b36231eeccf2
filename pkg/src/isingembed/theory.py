"""Annealed-approximation closed forms for broken-chain statistics.

Averaging the quenched couplings as dynamical variables makes the
probability of an embedded configuration depend only on its domain-wall
count, which collapses the broken-chain distribution to a binomial with
per-chain penalty weight ``P_w = (1 + exp(2*beta*j_f))**(K-1) - 1``.
Everything here is evaluated in log space (log1p/expm1/lgamma) so the
calculator stays finite far beyond what enumeration can reach (N ~ 1e6).

Also hosts the ferromagnetic-ring counterexample: closed-form energies and
the two single-configuration estimates of Z/Z_L - 1 whose disagreement
certifies that no per-sample projection can preserve the Boltzmann law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import IsingModel


@dataclass(frozen=True)
class TheoryParams:
    """Embedding ensemble parameters: N chains of K spins at inverse
    temperature beta, glued with ferromagnetic coupling j_f < 0."""

    n_logical: int
    chain_len: int
    beta: float
    j_f: float

    def __post_init__(self):
        if self.n_logical < 1:
            raise ValueError("n_logical must be >= 1")
        if self.chain_len < 1:
            raise ValueError("chain_len must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not self.j_f < 0:
            raise ValueError("j_f must be negative")


_LN2 = math.log(2.0)


def _log_one_plus_x(beta: float, j_f: float) -> float:
    # log(1 + e^{2 beta j_f}); j_f < 0 keeps the exponent non-positive.
    return math.log1p(math.exp(2.0 * beta * j_f))


def log_penalty_weight_plus_one(chain_len: int, beta: float, j_f: float) -> float:
    """log(1 + P_w) for one chain of length K."""
    return (chain_len - 1) * _log_one_plus_x(beta, j_f)


def penalty_weight(chain_len: int, beta: float, j_f: float) -> float:
    """P_w = (1 + e^{2 beta j_f})^(K-1) - 1, the per-chain break weight."""
    if chain_len < 1:
        raise ValueError("chain_len must be >= 1")
    if not j_f < 0:
        raise ValueError("j_f must be negative")
    return math.expm1(log_penalty_weight_plus_one(chain_len, beta, j_f))


def p0(params: TheoryParams) -> float:
    """Probability of sampling inside the logical subspace:
    (1 + e^{2 beta j_f})^{-(K-1) N}.

    Evaluated as a base-2 power so the beta = 0 limit is exactly
    2^N / 2^(N K), matching enumeration bit for bit."""
    exponent = (
        -params.n_logical
        * (params.chain_len - 1)
        * (_log_one_plus_x(params.beta, params.j_f) / _LN2)
    )
    return 2.0**exponent


def p_out(params: TheoryParams) -> float:
    """Probability of landing outside the logical subspace, 1 - p0."""
    return -math.expm1(
        -params.n_logical
        * log_penalty_weight_plus_one(params.chain_len, params.beta, params.j_f)
    )


def pn(params: TheoryParams, n: int) -> float:
    """Probability of exactly n broken chains: C(N,n) P_w^n / (1+P_w)^N."""
    if not 0 <= n <= params.n_logical:
        raise ValueError(f"n must lie in [0, {params.n_logical}]")
    big_n = params.n_logical
    log1p_pw = log_penalty_weight_plus_one(params.chain_len, params.beta, params.j_f)
    if n == 0:
        return p0(params)
    pw = math.expm1(log1p_pw)
    if pw == 0.0:
        return 0.0
    log_binom = (
        math.lgamma(big_n + 1) - math.lgamma(n + 1) - math.lgamma(big_n - n + 1)
    )
    return math.exp(log_binom + n * math.log(pw) - big_n * log1p_pw)


def pn_ratio(params: TheoryParams, n: int) -> float:
    """P_n / P_{n-1} = ((N+1)/n - 1) * P_w, valid for 1 <= n <= N."""
    if not 1 <= n <= params.n_logical:
        raise ValueError(f"n must lie in [1, {params.n_logical}]")
    pw = penalty_weight(params.chain_len, params.beta, params.j_f)
    return ((params.n_logical + 1) / n - 1.0) * pw


def n_max(params: TheoryParams) -> int:
    """Most probable broken-chain count, floor((N+1) / (1 + 1/P_w))."""
    log1p_pw = log_penalty_weight_plus_one(params.chain_len, params.beta, params.j_f)
    # (N+1) * P_w / (1 + P_w) = (N+1) * (1 - e^{-log(1+P_w)})
    return int(math.floor((params.n_logical + 1) * -math.expm1(-log1p_pw)))


def jf_schedule(n_logical: int, chain_len: int, beta: float) -> float:
    """Chain strength |J_F| that pins P_w = 1/N, keeping the typical broken
    set O(1): (1/beta) * -log[((N+1)/N)^{1/(K-1)} - 1]."""
    if chain_len < 2:
        raise ValueError("jf_schedule requires chain_len >= 2")
    if beta <= 0:
        raise ValueError("jf_schedule requires beta > 0")
    if n_logical < 1:
        raise ValueError("n_logical must be >= 1")
    inner = math.expm1(math.log1p(1.0 / n_logical) / (chain_len - 1))
    return -math.log(inner) / beta


# --- ferromagnetic-ring counterexample --------------------------------------

RING_COLUMNS = ((-1, -1), (-1, 1), (1, -1), (1, 1))


def ring_model(n_ring: int, j_f_mag: float) -> IsingModel:
    """Ferromagnetic ring of n_ring+1 spins with the split pair (0, 1)
    coupled at -|J_F| and every other neighbour at -1."""
    if n_ring < 3 or n_ring % 2 == 0:
        raise ValueError("ring size must be an odd integer >= 3")
    couplings = [(0, 1, -abs(float(j_f_mag)))]
    couplings += [(i, i + 1, -1.0) for i in range(1, n_ring)]
    couplings.append((0, n_ring, -1.0))
    return IsingModel(n_ring + 1, couplings)


def ring_config(n_ring: int, variant: str, s0: int, s1: int) -> np.ndarray:
    """Full ring configuration with split-pair values (s0, s1) and the fixed
    remainder: variant C1 is all -1, variant C2 alternates with spin 2 = +1
    (the phase that reproduces the closed-form energy table)."""
    cfg = np.empty(n_ring + 1, dtype=np.int8)
    cfg[0] = s0
    cfg[1] = s1
    for i in range(2, n_ring + 1):
        if variant == "C1":
            cfg[i] = -1
        elif variant == "C2":
            cfg[i] = 1 if i % 2 == 0 else -1
        else:
            raise ValueError(f"unknown ring variant {variant!r}")
    return cfg


def ring_energy_table(n_ring: int, j_f_mag: float) -> np.ndarray:
    """Closed-form energies, rows (C1, C2) by columns RING_COLUMNS."""
    if n_ring < 3 or n_ring % 2 == 0:
        raise ValueError("ring size must be an odd integer >= 3")
    n, jf = float(n_ring), abs(float(j_f_mag))
    c1 = [-n - jf, -n + 2 + jf, -n + 2 + jf, -n + 4 - jf]
    c2 = [n - 2 - jf, n - 4 + jf, n + jf, n - 2 - jf]
    return np.array([c1, c2], dtype=np.float64)


def ring_r_values(beta: float, j_f_mag: float) -> tuple[float, float]:
    """Single-configuration estimates r(C) = Z/Z_L - 1 for the two reference
    remainders; they disagree for every beta > 0."""
    jf = abs(float(j_f_mag))
    r1 = math.exp(-2.0 * beta * jf) / math.cosh(2.0 * beta)
    r2 = math.exp(-2.0 * beta * jf) * math.cosh(2.0 * beta)
    return r1, r2
