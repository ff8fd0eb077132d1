"""Basis bookkeeping for two three-level atoms sharing one cavity mode.

Product states ``|j k, n>`` (atom-1 level ``j``, atom-2 level ``k``, photon
number ``n``) are stored photon-major: ``index = 9 n + 3 j + k``, so that
truncating the Fock ladder drops a contiguous trailing block.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

LEVELS = 3
ATOM_BLOCK = LEVELS * LEVELS

# Order of the symmetric/antisymmetric basis inside one Fock block.  The first
# four states span the effective ground-state model.
BELL_LABELS = ("00", "s01", "a01", "11", "s02", "a02", "s12", "a12", "22")


@dataclass(frozen=True)
class SpaceSpec:
    """Two atoms, three levels each, one cavity mode truncated at ``n_max``."""

    n_max: int = 2

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError(f"n_max must be a non-negative integer, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return ATOM_BLOCK * (self.n_max + 1)


def dim(spec: SpaceSpec) -> int:
    return spec.dim


def flat_index(j: int, k: int, n: int, spec: SpaceSpec) -> int:
    """Flat index of the product state ``|j k, n>``."""
    if not (0 <= j < LEVELS and 0 <= k < LEVELS):
        raise IndexError(f"atomic levels must lie in 0..2, got j={j}, k={k}")
    if not 0 <= n <= spec.n_max:
        raise IndexError(f"photon number {n} outside 0..{spec.n_max}")
    return ATOM_BLOCK * n + LEVELS * j + k


def unflat_index(index: int, spec: SpaceSpec) -> tuple[int, int, int]:
    """Inverse of :func:`flat_index`; returns ``(j, k, n)``."""
    if not 0 <= index < spec.dim:
        raise IndexError(f"index {index} outside 0..{spec.dim - 1}")
    n, rest = divmod(index, ATOM_BLOCK)
    j, k = divmod(rest, LEVELS)
    return j, k, n


def _atom_pair_vector(label: str) -> np.ndarray:
    """Nine-component vector of a two-atom label such as ``"01"``, ``"a12"``."""
    vec = np.zeros(ATOM_BLOCK, dtype=complex)
    if len(label) == 2 and label.isdigit():
        vec[LEVELS * int(label[0]) + int(label[1])] = 1.0
        return vec
    kind, j, k = label[0], int(label[1]), int(label[2])
    if kind not in "as" or j == k:
        raise ValueError(f"unknown two-atom label {label!r}")
    sign = -1.0 if kind == "a" else 1.0
    vec[LEVELS * j + k] = 1.0 / np.sqrt(2.0)
    vec[LEVELS * k + j] = sign / np.sqrt(2.0)
    return vec


def bell_block() -> np.ndarray:
    """9x9 unitary whose columns are the :data:`BELL_LABELS` states."""
    return np.column_stack([_atom_pair_vector(lab) for lab in BELL_LABELS])


def bell_transform(spec: SpaceSpec) -> np.ndarray:
    """Unitary ``U`` with columns the symmetric/antisymmetric basis states.

    An operator ``A`` in the product basis becomes ``U^dag A U``.
    """
    return np.kron(np.eye(spec.n_max + 1), bell_block())


def exchange_operator(spec: SpaceSpec) -> np.ndarray:
    """Permutation swapping the two atoms, ``|j k, n> -> |k j, n>``."""
    d = spec.dim
    swap = np.zeros((d, d))
    for idx in range(d):
        j, k, n = unflat_index(idx, spec)
        swap[flat_index(k, j, n, spec), idx] = 1.0
    return swap


_LABEL_RE = re.compile(r"^\|?\s*([as]?\d\d)\s*,\s*(\d+)\s*>?$")


def state_vector(label: str, spec: SpaceSpec, basis: str = "product") -> np.ndarray:
    """Normalised state for labels like ``"a01,0"``, ``"|11,1>"`` or ``"s02,0"``.

    With ``basis="bell"`` the amplitudes are returned in the symmetric /
    antisymmetric basis instead of the product basis.
    """
    match = _LABEL_RE.match(label.strip())
    if match is None:
        raise ValueError(f"cannot parse state label {label!r}")
    pair, n = match.group(1), int(match.group(2))
    if not 0 <= n <= spec.n_max:
        raise ValueError(f"photon number {n} outside 0..{spec.n_max}")
    atoms = _atom_pair_vector(pair)
    if any(int(c) >= LEVELS for c in pair.lstrip("as")):
        raise ValueError(f"atomic level out of range in {label!r}")
    fock = np.zeros(spec.n_max + 1)
    fock[n] = 1.0
    psi = np.kron(fock, atoms)
    if basis == "bell":
        psi = bell_transform(spec).conj().T @ psi
    elif basis != "product":
        raise ValueError(f"unknown basis {basis!r}")
    return psi
