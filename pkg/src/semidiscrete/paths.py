"""Reproducible Brownian increments with exact coarse/fine coupling.

Each path owns a counter-keyed stream: a Philox generator keyed by
(seed, path_index), so regeneration is bit-identical regardless of execution
order or worker count. Gaussian draws use numpy's ``standard_normal``
(ziggurat); this choice is fixed because downstream tests assert
bit-determinism of whole experiments.

Coarse increments are derived by repeated adjacent-pair summation, so for any
two levels the coarser increments are exact floating-point sums of the finer
ones by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError


@dataclass(frozen=True)
class GridSpec:
    """Dyadic step-size ladder: level e means step dt = T * 2^-e."""

    T: float
    levels: tuple[int, ...]
    reference_exponent: int = 14

    def __post_init__(self):
        if not (self.T > 0):
            raise UsageError(f"T must be positive, got {self.T}")
        levels = tuple(int(e) for e in self.levels)
        object.__setattr__(self, "levels", levels)
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise UsageError(f"levels must be strictly increasing, got {levels}")
        if levels and (levels[0] < 0 or levels[-1] > self.reference_exponent):
            raise UsageError(
                f"levels must lie in [0, reference_exponent={self.reference_exponent}], got {levels}"
            )

    def dt(self, level_exponent: int) -> float:
        return self.T * 2.0 ** (-level_exponent)


@dataclass(frozen=True)
class BrownianLattice:
    seed: int
    path_index: int
    T: float
    reference_exponent: int
    fine_increments: np.ndarray  # length 2^reference_exponent, ~N(0, T*2^-ref)


def _stream(seed: int, path_index: int) -> np.random.Generator:
    if not (0 <= seed < 2**64):
        raise UsageError(f"seed must fit in 64 bits, got {seed}")
    if not (0 <= path_index < 2**64):
        raise UsageError(f"path_index must fit in 64 bits, got {path_index}")
    key = np.array([seed, path_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def gaussian_increments(seed: int, path_index: int, n: int, dt: float) -> np.ndarray:
    """n i.i.d. N(0, dt) increments from the (seed, path_index) stream.

    This is the non-dyadic sibling of :func:`generate_lattice` for grids such
    as dt = 1e-3 that are not powers of two.
    """
    if n < 1:
        raise UsageError(f"need at least one increment, got n={n}")
    if not (dt > 0):
        raise UsageError(f"dt must be positive, got {dt}")
    return _stream(seed, path_index).standard_normal(n) * np.sqrt(dt)


def generate_lattice(seed: int, path_index: int, grid: GridSpec) -> BrownianLattice:
    """Fine-grid increments for one path, deterministic in (seed, path_index)."""
    n = 2**grid.reference_exponent
    fine = gaussian_increments(seed, path_index, n, grid.T * 2.0 ** (-grid.reference_exponent))
    return BrownianLattice(
        seed=seed,
        path_index=path_index,
        T=grid.T,
        reference_exponent=grid.reference_exponent,
        fine_increments=fine,
    )


def pairwise_halve(increments: np.ndarray) -> np.ndarray:
    """Sum adjacent pairs along the last axis (one coarsening level)."""
    if increments.shape[-1] % 2 != 0:
        raise UsageError("pairwise_halve needs an even number of increments")
    return increments[..., 0::2] + increments[..., 1::2]


def coarsen_increments(fine: np.ndarray, halvings: int) -> np.ndarray:
    out = fine
    for _ in range(halvings):
        out = pairwise_halve(out)
    return out


def coarsen(lattice: BrownianLattice, level_exponent: int) -> np.ndarray:
    """Increments of the lattice's Brownian path at step T * 2^-level_exponent.

    Entry i is the exact pairwise sum of the 2^(ref - level) fine increments
    it spans. At the reference exponent the fine array itself is returned;
    treat it as read-only.
    """
    ref = lattice.reference_exponent
    if not (0 <= level_exponent <= ref):
        raise UsageError(
            f"level_exponent must lie in [0, {ref}], got {level_exponent}"
        )
    if level_exponent == ref:
        return lattice.fine_increments
    return coarsen_increments(lattice.fine_increments, ref - level_exponent)


def increment_matrix(seed: int, first_index: int, count: int, grid: GridSpec) -> np.ndarray:
    """Stack of fine-increment rows for paths first_index .. first_index+count-1."""
    if count < 1:
        raise UsageError(f"count must be >= 1, got {count}")
    return np.stack(
        [generate_lattice(seed, first_index + i, grid).fine_increments for i in range(count)]
    )


_DUMP_MAGIC = "semidiscrete-lattice v1"


def dump_lattice(lattice: BrownianLattice, path) -> None:
    """Write a lattice to a binary file.

    Format: one ASCII header line
    ``semidiscrete-lattice v1 seed=<u64> path=<u64> ref=<int> T=<repr>\\n``
    followed by the raw little-endian binary64 increment array.
    """
    header = (
        f"{_DUMP_MAGIC} seed={lattice.seed} path={lattice.path_index} "
        f"ref={lattice.reference_exponent} T={lattice.T!r}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(lattice.fine_increments.astype("<f8", copy=False).tobytes())


def load_lattice(path) -> BrownianLattice:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").rstrip("\n")
        raw = fh.read()
    if not header.startswith(_DUMP_MAGIC):
        raise UsageError(f"not a lattice dump: {path}")
    fields = dict(part.split("=", 1) for part in header[len(_DUMP_MAGIC):].split())
    fine = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    ref = int(fields["ref"])
    if fine.size != 2**ref:
        raise UsageError(f"lattice dump length {fine.size} does not match ref={ref}")
    return BrownianLattice(
        seed=int(fields["seed"]),
        path_index=int(fields["path"]),
        T=float(fields["T"]),
        reference_exponent=ref,
        fine_increments=fine,
    )
