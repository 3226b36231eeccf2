"""Chain embeddings: map N logical spins to N chains of K physical spins.

The hardware graph couples consecutive spins of each chain ferromagnetically
(weight ``j_f < 0``) and carries every native coupling on exactly one
inter-chain edge of identical weight; local fields are split evenly over the
chain.  Embedded vertices are numbered chain-major: spin ``(k, i)`` (position
``k`` of chain ``i``, both 0-based) is embedded index ``i * K + k``.

The deterministic connection rule places the edge for native coupling
``(i, j)``, ``i < j``, at equal positions ``k = (K - ((j - i) % K)) % K`` of
both chains; random mode draws the two positions uniformly, two generator
outputs per edge in sorted-edge order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import IsingModel, as_spin_config
from .rng import SplitMix64


class BrokenChainError(ValueError):
    """A configuration expected in the logical subspace has a broken chain."""

    def __init__(self, chain_index: int):
        self.chain_index = int(chain_index)
        super().__init__(f"chain {chain_index} is broken")


@dataclass(frozen=True)
class ChainEmbedding:
    """Layout of one chain embedding; immutable after construction."""

    native_n: int
    chain_len: int
    j_f: float
    mode: str  # "deterministic" | "random"
    seed: int | None
    native_edges: np.ndarray  # (E, 2) int64, sorted native couplings (i < j)
    edge_positions: np.ndarray  # (E, 2) int64, (k_i, k_j) per native edge

    def __post_init__(self):
        for arr in (self.native_edges, self.edge_positions):
            arr.flags.writeable = False

    @property
    def num_embedded(self) -> int:
        return self.native_n * self.chain_len

    def vertex(self, chain: int, pos: int) -> int:
        """Embedded index of spin (pos, chain)."""
        if not (0 <= chain < self.native_n and 0 <= pos < self.chain_len):
            raise ValueError(f"coordinate ({pos},{chain}) out of range")
        return chain * self.chain_len + pos


@dataclass(frozen=True)
class ChainClassification:
    """Per-chain alignment report for one embedded configuration."""

    domain_walls_per_chain: np.ndarray  # int64[N]
    aligned_values: np.ndarray  # int8[N], 0 where the chain is broken
    broken_count: int
    domain_walls: int

    @property
    def broken(self) -> np.ndarray:
        return self.domain_walls_per_chain > 0


def deterministic_position(distance: int, chain_len: int) -> int:
    """Chain position carrying a native edge at chain distance d = j - i."""
    return (chain_len - (distance % chain_len)) % chain_len


def build_embedding(
    model: IsingModel,
    chain_len: int,
    j_f: float,
    mode: str = "deterministic",
    seed: int | None = None,
) -> tuple[ChainEmbedding, IsingModel]:
    """Embed ``model`` into chains of length ``chain_len`` glued by ``j_f``.

    Returns the embedding plus the embedded model on ``N * K`` spins whose
    couplings list the chain edges first (by chain, then position) and the
    native edges after, in sorted-edge order.
    """
    chain_len = int(chain_len)
    if chain_len < 1:
        raise ValueError("chain_len must be >= 1")
    j_f = float(j_f)
    if not j_f < 0:
        raise ValueError("chain coupling j_f must be negative (ferromagnetic)")
    if mode not in ("deterministic", "random"):
        raise ValueError(f"unknown embedding mode {mode!r}")
    if mode == "random" and seed is None:
        raise ValueError("random embedding mode requires a seed")

    n = model.num_spins
    edges = np.stack([model.edge_i, model.edge_j], axis=1).astype(np.int64)

    if mode == "deterministic":
        pos = np.empty_like(edges)
        for t, (i, j) in enumerate(edges):
            k = deterministic_position(int(j - i), chain_len)
            pos[t, 0] = k
            pos[t, 1] = k
    else:
        rng = SplitMix64(seed)
        pos = np.empty_like(edges)
        for t in range(edges.shape[0]):
            pos[t, 0] = rng.randrange(chain_len)
            pos[t, 1] = rng.randrange(chain_len)

    emb = ChainEmbedding(
        native_n=n,
        chain_len=chain_len,
        j_f=j_f,
        mode=mode,
        seed=None if mode == "deterministic" else int(seed),
        native_edges=edges,
        edge_positions=pos,
    )

    couplings: list[tuple[int, int, float]] = []
    for i in range(n):
        for k in range(chain_len - 1):
            couplings.append((i * chain_len + k, i * chain_len + k + 1, j_f))
    for t in range(edges.shape[0]):
        i, j = edges[t]
        couplings.append(
            (
                int(i) * chain_len + int(pos[t, 0]),
                int(j) * chain_len + int(pos[t, 1]),
                float(model.edge_w[t]),
            )
        )
    fields = np.repeat(model.fields / chain_len, chain_len)
    embedded = IsingModel(n * chain_len, couplings, fields)
    return emb, embedded


def embed_config(emb: ChainEmbedding, logical) -> np.ndarray:
    """Uniformly extend a native configuration over every chain."""
    cfg = as_spin_config(logical, emb.native_n)
    return np.repeat(cfg, emb.chain_len)


def classify(emb: ChainEmbedding, embedded) -> ChainClassification:
    """Count domain walls (adjacent unequal spins) and broken chains."""
    cfg = as_spin_config(embedded, emb.num_embedded)
    chains = cfg.reshape(emb.native_n, emb.chain_len)
    dw = (chains[:, 1:] != chains[:, :-1]).sum(axis=1).astype(np.int64)
    aligned = np.where(dw == 0, chains[:, 0], 0).astype(np.int8)
    return ChainClassification(
        domain_walls_per_chain=dw,
        aligned_values=aligned,
        broken_count=int((dw > 0).sum()),
        domain_walls=int(dw.sum()),
    )


def project_logical(emb: ChainEmbedding, embedded) -> np.ndarray:
    """Contract chains of a logical-subspace configuration; the inverse of
    :func:`embed_config`.  Raises :class:`BrokenChainError` otherwise."""
    cfg = as_spin_config(embedded, emb.num_embedded)
    chains = cfg.reshape(emb.native_n, emb.chain_len)
    broken = (chains[:, 1:] != chains[:, :-1]).any(axis=1)
    if broken.any():
        raise BrokenChainError(int(np.flatnonzero(broken)[0]))
    return chains[:, 0].copy()


def energy_shift(emb: ChainEmbedding) -> float:
    """Constant offset between embedded and native energies of logical
    configurations: ``j_f * N * (K - 1)`` for uniform chains."""
    return emb.j_f * emb.native_n * (emb.chain_len - 1)


# --- embedding descriptor (serialized alongside the instance file) ----------
#
#   EMB <N> <K> <J_F> <mode> <seed>
#   EDGE <i> <j> <k_i> <k_j>       one line per native coupling


def embedding_text(emb: ChainEmbedding) -> str:
    seed = 0 if emb.seed is None else emb.seed
    lines = [f"EMB {emb.native_n} {emb.chain_len} {emb.j_f!r} {emb.mode} {seed}"]
    for (i, j), (ki, kj) in zip(emb.native_edges, emb.edge_positions):
        lines.append(f"EDGE {i} {j} {ki} {kj}")
    return "\n".join(lines) + "\n"


def write_embedding(emb: ChainEmbedding, path) -> None:
    from pathlib import Path

    Path(path).write_text(embedding_text(emb))


def parse_embedding(text: str) -> ChainEmbedding:
    header = None
    edges = []
    positions = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "EMB":
            header = tok[1:]
        elif tok[0] == "EDGE":
            edges.append((int(tok[1]), int(tok[2])))
            positions.append((int(tok[3]), int(tok[4])))
        else:
            raise ValueError(f"unrecognised embedding line: {raw!r}")
    if header is None:
        raise ValueError("embedding descriptor missing 'EMB' line")
    n, k, j_f, mode, seed = header
    return ChainEmbedding(
        native_n=int(n),
        chain_len=int(k),
        j_f=float(j_f),
        mode=mode,
        seed=None if mode == "deterministic" else int(seed),
        native_edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        edge_positions=np.array(positions, dtype=np.int64).reshape(-1, 2),
    )


def read_embedding(path) -> ChainEmbedding:
    from pathlib import Path

    return parse_embedding(Path(path).read_text())
