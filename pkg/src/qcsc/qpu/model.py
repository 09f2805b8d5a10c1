"""XXZ spin chain restricted to fixed-magnetization sectors.

Basis states are bitstrings; character ``i`` of the string is site ``i`` and
the integer encoding puts site 0 in the most significant bit, so
``int(s, 2)`` and ``format(x, f"0{n}b")`` convert between the two.  An up
spin is ``1``; the Hamming weight of a state is its number of up spins and is
conserved by the Hamiltonian

    H = J * sum_<i,j> (Sx_i Sx_j + Sy_i Sy_j + delta * Sz_i Sz_j)

"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from qcsc.errors import ModelTooLarge

MAX_SITES = 24
DENSE_LIMIT = 2000


@dataclass(frozen=True)
class ToyModel:
    sites: int
    delta: float = 1.0
    k: int = 0
    coupling: float = 1.0
    periodic: bool = True
    kind: str = "XXZChain"

    def __post_init__(self):
        if self.kind != "XXZChain":
            raise ValueError(f"unsupported toy model {self.kind!r}")
        if self.sites < 1:
            raise ValueError("sites must be positive")
        if not 0 <= self.k <= self.sites:
            raise ValueError(f"sector k={self.k} outside [0, {self.sites}]")

    @property
    def bonds(self) -> list[tuple[int, int]]:
        bonds = [(i, i + 1) for i in range(self.sites - 1)]
        if self.periodic and self.sites > 2:
            bonds.append((self.sites - 1, 0))
        return bonds

    @property
    def sector_dim(self) -> int:
        return comb(self.sites, self.k)

    def check_size(self) -> None:
        if self.sites > MAX_SITES:
            raise ModelTooLarge(f"{self.sites} sites exceeds the {MAX_SITES}-site limit")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "sites": self.sites,
            "delta": self.delta,
            "k": self.k,
            "coupling": self.coupling,
            "periodic": self.periodic,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ToyModel":
        return cls(
            sites=int(d["sites"]),
            delta=float(d.get("delta", 1.0)),
            k=int(d.get("k", 0)),
            coupling=float(d.get("coupling", 1.0)),
            periodic=bool(d.get("periodic", True)),
            kind=d.get("kind", "XXZChain"),
        )


def to_bitstring(x: int, n: int) -> str:
    return format(int(x), f"0{n}b")


def from_bitstring(s: str) -> int:
    return int(s, 2)


def hamming_weight(s: str) -> int:
    return s.count("1")


def sector_states(sites: int, k: int) -> np.ndarray:
    """All ``sites``-bit integers of weight ``k``, ascending."""
    if sites > MAX_SITES:
        raise ModelTooLarge(f"{sites} sites exceeds the {MAX_SITES}-site limit")
    vals = [sum(1 << (sites - 1 - i) for i in combo) for combo in itertools.combinations(range(sites), k)]
    return np.array(sorted(vals), dtype=np.int64)


def diagonal_energies(model: ToyModel, states: np.ndarray) -> np.ndarray:
    n = model.sites
    diag = np.zeros(len(states))
    for i, j in model.bonds:
        bi = (states >> (n - 1 - i)) & 1
        bj = (states >> (n - 1 - j)) & 1
        diag += np.where(bi == bj, 0.25, -0.25)
    return model.coupling * model.delta * diag


def hamiltonian_block(model: ToyModel, states: np.ndarray) -> sp.csr_matrix:
    """H restricted to span(states); ``states`` must be sorted ascending and unique."""
    n = model.sites
    dim = len(states)
    rows = [np.arange(dim)]
    cols = [np.arange(dim)]
    vals = [diagonal_energies(model, states)]
    half_j = 0.5 * model.coupling
    for i, j in model.bonds:
        mask = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
        bi = (states >> (n - 1 - i)) & 1
        bj = (states >> (n - 1 - j)) & 1
        src = np.nonzero(bi != bj)[0]
        flipped = states[src] ^ mask
        pos = np.searchsorted(states, flipped)
        pos_c = np.minimum(pos, dim - 1)
        hit = states[pos_c] == flipped
        rows.append(src[hit])
        cols.append(pos_c[hit])
        vals.append(np.full(int(hit.sum()), half_j))
    h = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )
    h.sum_duplicates()
    return h


def lowest_eigenpair(h: sp.spmatrix) -> tuple[float, np.ndarray]:
    dim = h.shape[0]
    if dim <= DENSE_LIMIT:
        w, v = np.linalg.eigh(h.toarray())
        return float(w[0]), v[:, 0]
    v0 = np.ones(dim) / np.sqrt(dim)
    w, v = spla.eigsh(h, k=1, which="SA", v0=v0, tol=1e-12)
    return float(w[0]), v[:, 0]


@dataclass(frozen=True, eq=False)
class SectorSolution:
    states: np.ndarray
    diagonal: np.ndarray
    energy: float
    ground_state: np.ndarray
    mean_field_index: int

    @property
    def mean_field_energy(self) -> float:
        return float(self.diagonal[self.mean_field_index])


@lru_cache(maxsize=32)
def solve_sector(model: ToyModel) -> SectorSolution:
    """Exact ground state of ``model`` in its weight-k sector.

    The eigenvector sign is fixed so the mean-field configuration (lowest
    diagonal energy, lowest index on ties) has a non-negative amplitude.
    """
    model.check_size()
    states = sector_states(model.sites, model.k)
    h = hamiltonian_block(model, states)
    energy, vec = lowest_eigenpair(h)
    diag = diagonal_energies(model, states)
    mf = int(np.argmin(diag))
    if vec[mf] < 0 or (vec[mf] == 0 and vec[np.argmax(np.abs(vec))] < 0):
        vec = -vec
    return SectorSolution(states, diag, energy, vec / np.linalg.norm(vec), mf)


def interpolated_state(model: ToyModel, theta: float) -> np.ndarray:
    """normalize(cos(theta)|mean-field> + sin(theta)|ground>) over the sector basis."""
    sol = solve_sector(model)
    psi = np.sin(theta) * sol.ground_state
    psi[sol.mean_field_index] += np.cos(theta)
    norm = np.linalg.norm(psi)
    if norm < 1e-12:
        raise ValueError(f"theta={theta} gives a null state")
    return psi / norm
