"""Classical Ising Hamiltonians on sparse coupling graphs.

The energy convention is ``H(s) = sum_{i<j} J_ij s_i s_j + sum_i h_i s_i``
with spins in ``{-1, +1}``.  Couplings are stored as a sorted sparse edge
list; units are relative to ``max{|J_ij|, |h_i|}``, which callers are
expected to keep at 1.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_ENUMERATION_CAP = 2**30
HISTOGRAM_TOL = 1e-9

_ENUM_CHUNK = 2**20


class SizeCapError(ValueError):
    """An exhaustive enumeration would exceed the configured state cap."""


def check_enumeration_cap(num_spins: int, cap: int | None) -> None:
    cap = DEFAULT_ENUMERATION_CAP if cap is None else int(cap)
    if 2**num_spins > cap:
        raise SizeCapError(
            f"2^{num_spins} states exceed the enumeration cap of {cap}"
        )


class IsingModel:
    """Immutable sparse Ising model.

    Parameters
    ----------
    num_spins:
        Number of binary spin variables.
    couplings:
        Iterable of ``(i, j, J_ij)`` with ``i != j``.  Pairs are normalised
        to ``i < j`` and stored sorted; duplicates are rejected.
    fields:
        Sequence of ``num_spins`` local fields ``h_i`` (default all zero).
    """

    __slots__ = ("num_spins", "edge_i", "edge_j", "edge_w", "fields", "_csr")

    def __init__(
        self,
        num_spins: int,
        couplings: Iterable[tuple[int, int, float]] = (),
        fields: Sequence[float] | None = None,
    ):
        num_spins = int(num_spins)
        if num_spins < 1:
            raise ValueError("num_spins must be a positive integer")
        self.num_spins = num_spins

        triples = []
        for i, j, w in couplings:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-coupling on spin {i}")
            if not (0 <= i < num_spins and 0 <= j < num_spins):
                raise ValueError(f"coupling ({i},{j}) out of range")
            if i > j:
                i, j = j, i
            triples.append((i, j, float(w)))
        triples.sort(key=lambda t: (t[0], t[1]))
        for a, b in zip(triples, triples[1:]):
            if a[0] == b[0] and a[1] == b[1]:
                raise ValueError(f"duplicate coupling ({a[0]},{a[1]})")

        self.edge_i = np.array([t[0] for t in triples], dtype=np.int64)
        self.edge_j = np.array([t[1] for t in triples], dtype=np.int64)
        self.edge_w = np.array([t[2] for t in triples], dtype=np.float64)

        if fields is None:
            self.fields = np.zeros(num_spins, dtype=np.float64)
        else:
            self.fields = np.asarray(fields, dtype=np.float64).copy()
            if self.fields.shape != (num_spins,):
                raise ValueError("fields length must equal num_spins")

        for arr in (self.edge_i, self.edge_j, self.edge_w, self.fields):
            arr.flags.writeable = False
        self._csr = None

    @property
    def num_couplings(self) -> int:
        return int(self.edge_w.shape[0])

    def couplings(self) -> list[tuple[int, int, float]]:
        return [
            (int(i), int(j), float(w))
            for i, j, w in zip(self.edge_i, self.edge_j, self.edge_w)
        ]

    def __repr__(self) -> str:
        return (
            f"IsingModel(num_spins={self.num_spins}, "
            f"num_couplings={self.num_couplings})"
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, IsingModel):
            return NotImplemented
        return (
            self.num_spins == other.num_spins
            and np.array_equal(self.edge_i, other.edge_i)
            and np.array_equal(self.edge_j, other.edge_j)
            and np.array_equal(self.edge_w, other.edge_w)
            and np.array_equal(self.fields, other.fields)
        )


def as_spin_config(values, num_spins: int | None = None) -> np.ndarray:
    """Validate and convert to an int8 array over {-1, +1}."""
    cfg = np.asarray(values)
    if cfg.ndim != 1:
        raise ValueError("spin configuration must be one-dimensional")
    if num_spins is not None and cfg.shape[0] != num_spins:
        raise ValueError(
            f"configuration length {cfg.shape[0]} != num_spins {num_spins}"
        )
    out = cfg.astype(np.int8)
    if not np.all((out == 1) | (out == -1)) or not np.all(out == cfg):
        raise ValueError("spin values must be exactly -1 or +1")
    return out


def config_index(config: np.ndarray) -> int:
    """Pack a configuration into an integer index (bit i set <=> s_i = +1)."""
    idx = 0
    for b in range(len(config) - 1, -1, -1):
        idx = (idx << 1) | (1 if config[b] > 0 else 0)
    return idx


def config_from_index(index: int, num_spins: int) -> np.ndarray:
    """Inverse of :func:`config_index`."""
    out = np.empty(num_spins, dtype=np.int8)
    for b in range(num_spins):
        out[b] = 1 if (index >> b) & 1 else -1
    return out


def all_config_matrix(num_spins: int) -> np.ndarray:
    """(2^N, N) int8 matrix of every configuration, row c = config_from_index(c)."""
    idx = np.arange(2**num_spins, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(num_spins, dtype=np.int64)[None, :]) & 1
    return (2 * bits - 1).astype(np.int8)


def energy(model: IsingModel, config) -> float:
    """Energy ``sum J_ij s_i s_j + sum h_i s_i`` of one configuration.

    Summation order (edges in sorted order, then fields) is shared with the
    enumeration and sampling kernels, so values agree bit-for-bit.
    """
    from ._kernels import full_energy

    cfg = as_spin_config(config, model.num_spins)
    return float(
        full_energy(cfg, model.edge_i, model.edge_j, model.edge_w, model.fields)
    )


@dataclass(frozen=True)
class EnergyLevelHistogram:
    """Exact spectrum: strictly increasing energies with degeneracies."""

    energies: np.ndarray
    degeneracies: np.ndarray
    num_spins: int
    tol: float = HISTOGRAM_TOL

    def __post_init__(self):
        if self.energies.shape != self.degeneracies.shape:
            raise ValueError("energies/degeneracies length mismatch")
        if np.any(np.diff(self.energies) <= 0):
            raise ValueError("energies must be strictly increasing")
        if int(self.degeneracies.sum()) != 2**self.num_spins:
            raise ValueError("degeneracies must sum to 2^num_spins")

    @property
    def num_levels(self) -> int:
        return int(self.energies.shape[0])

    def level_of(self, e: float, tol: float = 1e-6) -> int:
        """Index of the level containing energy ``e`` (within ``tol``)."""
        pos = int(np.searchsorted(self.energies, e))
        best, dist = -1, tol
        for cand in (pos - 1, pos):
            if 0 <= cand < self.num_levels:
                d = abs(self.energies[cand] - e)
                if d <= dist:
                    best, dist = cand, d
        if best < 0:
            raise ValueError(f"energy {e} matches no level within {tol}")
        return best


def _merge_levels(energies: np.ndarray, counts: np.ndarray, tol: float):
    order = np.argsort(energies, kind="stable")
    e, c = energies[order], counts[order]
    out_e, out_c = [], []
    for k in range(e.shape[0]):
        if out_e and e[k] - out_e[-1] <= tol:
            out_c[-1] += int(c[k])
        else:
            out_e.append(float(e[k]))
            out_c.append(int(c[k]))
    return np.array(out_e), np.array(out_c, dtype=np.int64)


def energy_histogram(
    model: IsingModel,
    tol: float = HISTOGRAM_TOL,
    cap: int | None = None,
) -> EnergyLevelHistogram:
    """Exact energy-level degeneracies by exhaustive enumeration."""
    from ._kernels import energies_of_range, model_csr

    check_enumeration_cap(model.num_spins, cap)
    total = 2**model.num_spins
    indptr, nbr, nw = model_csr(model)
    part_e: list[np.ndarray] = []
    part_c: list[np.ndarray] = []
    for start in range(0, total, _ENUM_CHUNK):
        stop = min(start + _ENUM_CHUNK, total)
        chunk = energies_of_range(
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
        chunk.sort()
        # Level representative is the smallest member of its bucket.
        boundaries = np.flatnonzero(np.diff(chunk) > tol) + 1
        starts = np.concatenate(([0], boundaries))
        stops = np.concatenate((boundaries, [chunk.shape[0]]))
        part_e.append(chunk[starts])
        part_c.append((stops - starts).astype(np.int64))
    merged_e, merged_c = _merge_levels(np.concatenate(part_e), np.concatenate(part_c), tol)
    return EnergyLevelHistogram(merged_e, merged_c, model.num_spins, tol)


# --- instance text format (canonical interchange for all modules) ---------
#
#   N <num_spins>
#   J <i> <j> <value>      one line per coupling, 0-based indices
#   H <i> <value>          one line per nonzero-capable field entry
#   # comment lines are ignored


def instance_text(model: IsingModel) -> str:
    lines = [f"N {model.num_spins}"]
    for i, j, w in zip(model.edge_i, model.edge_j, model.edge_w):
        lines.append(f"J {i} {j} {w!r}")
    for i, h in enumerate(model.fields):
        lines.append(f"H {i} {h!r}")
    return "\n".join(lines) + "\n"


def write_instance(model: IsingModel, path) -> None:
    Path(path).write_text(instance_text(model))


def parse_instance(text: str) -> IsingModel:
    num_spins = None
    couplings: list[tuple[int, int, float]] = []
    fields: dict[int, float] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "N":
            num_spins = int(tok[1])
        elif tok[0] == "J":
            couplings.append((int(tok[1]), int(tok[2]), float(tok[3])))
        elif tok[0] == "H":
            fields[int(tok[1])] = float(tok[2])
        else:
            raise ValueError(f"unrecognised instance line: {raw!r}")
    if num_spins is None:
        raise ValueError("instance file missing 'N' line")
    h = np.zeros(num_spins)
    for i, v in fields.items():
        h[i] = v
    return IsingModel(num_spins, couplings, h)


def read_instance(path) -> IsingModel:
    return parse_instance(Path(path).read_text())


def model_hash(model: IsingModel) -> str:
    """sha256 of the canonical instance text; stable provenance key."""
    return hashlib.sha256(instance_text(model).encode()).hexdigest()
