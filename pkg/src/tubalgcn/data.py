"""Dataset ingestion, splitting, adjacency assembly, and synthetic graphs.

File format (UTF-8 text): optional header lines ``#nodes=<N>`` and
``#slots=<T>``; other ``#`` lines are comments; data lines are
``t<TAB>src<TAB>dst<TAB>weight`` with t one-based and node ids zero-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .head_loss import LinkObservation

__all__ = [
    "DynamicGraphDataset",
    "SynthSpec",
    "parse_dataset",
    "serialize_dataset",
    "split_dataset",
    "build_adjacency",
    "generate_synthetic",
]

PATTERNS = ("periodic", "trend", "mixed")

# Weights are clipped into (0, 1]; the lower edge stays strictly positive.
WEIGHT_FLOOR = 1e-3


@dataclass
class DynamicGraphDataset:
    """A dynamic graph as a list of observed weighted links plus splits."""

    n_nodes: int
    n_slots: int
    observations: list
    train_idx: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    val_idx: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    test_idx: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    def __post_init__(self):
        if self.n_nodes < 1 or self.n_slots < 1:
            raise ValueError("dataset needs at least one node and one time slot")
        for obs in self.observations:
            if not (1 <= obs.t <= self.n_slots):
                raise ValueError(f"time slot {obs.t} out of range 1..{self.n_slots}")
            if not (0 <= obs.i < self.n_nodes and 0 <= obs.j < self.n_nodes):
                raise ValueError(f"node id out of range in observation {obs}")

    @property
    def has_splits(self) -> bool:
        return len(self.train_idx) > 0

    def subset_arrays(self, idx: np.ndarray):
        """Return (t, i, j, y) index arrays for the given observation indices."""
        t = np.array([self.observations[k].t for k in idx], dtype=int)
        i = np.array([self.observations[k].i for k in idx], dtype=int)
        j = np.array([self.observations[k].j for k in idx], dtype=int)
        y = np.array([self.observations[k].y for k in idx], dtype=np.float64)
        return t, i, j, y


def parse_dataset(path) -> DynamicGraphDataset:
    """Load a dataset file; N and T come from headers or observed maxima."""
    n_header = None
    t_header = None
    observations = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("nodes="):
                    n_header = int(body[len("nodes="):])
                elif body.startswith("slots="):
                    t_header = int(body[len("slots="):])
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
            try:
                t, i, j = int(parts[0]), int(parts[1]), int(parts[2])
                y = float(parts[3])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed line: {exc}") from None
            key = (t, i, j)
            if key in seen:
                raise ValueError(f"{path}:{lineno}: duplicate entry (t={t}, i={i}, j={j})")
            seen.add(key)
            observations.append(LinkObservation(t, i, j, y))
    if not observations and (n_header is None or t_header is None):
        raise ValueError(f"{path}: empty dataset without #nodes=/#slots= headers")
    n = n_header if n_header is not None else max(max(o.i, o.j) for o in observations) + 1
    t = t_header if t_header is not None else max(o.t for o in observations)
    return DynamicGraphDataset(n, t, observations)


def serialize_dataset(ds: DynamicGraphDataset, path):
    """Write the exact format parse_dataset reads (round-trip safe)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#nodes={ds.n_nodes}\n")
        fh.write(f"#slots={ds.n_slots}\n")
        for obs in ds.observations:
            fh.write(f"{obs.t}\t{obs.i}\t{obs.j}\t{obs.y!r}\n")


def split_dataset(ds: DynamicGraphDataset, ratios=(0.6, 0.2, 0.2), seed: int = 0) -> DynamicGraphDataset:
    """Uniform random entrywise split; floor-based sizes, remainder to train."""
    n_obs = len(ds.observations)
    if n_obs < 5:
        raise ValueError(f"need at least 5 observations to split, got {n_obs}")
    n_val = int(np.floor(ratios[1] * n_obs))
    n_test = int(np.floor(ratios[2] * n_obs))
    n_train = n_obs - n_val - n_test
    if n_val == 0 or n_test == 0:
        raise ValueError("degenerate split: empty validation or test set")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_obs)
    return DynamicGraphDataset(
        ds.n_nodes,
        ds.n_slots,
        ds.observations,
        train_idx=np.sort(perm[:n_train]),
        val_idx=np.sort(perm[n_train : n_train + n_val]),
        test_idx=np.sort(perm[n_train + n_val :]),
    )


def build_adjacency(ds: DynamicGraphDataset) -> np.ndarray:
    """Assemble (N, N, T) from TRAIN observations only; direction preserved.

    Validation and test weights never enter the tensor, so the model never
    sees the values it is evaluated on.
    """
    if not ds.has_splits:
        raise ValueError("assign splits before building the adjacency tensor")
    a = np.zeros((ds.n_nodes, ds.n_nodes, ds.n_slots))
    for k in ds.train_idx:
        obs = ds.observations[k]
        a[obs.i, obs.j, obs.t - 1] = obs.y
    return a


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for the synthetic dynamic-graph generator."""

    n: int
    t: int
    density: float = 0.1
    pattern: str = "mixed"
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.t < 1:
            raise ValueError("need n >= 2 nodes and t >= 1 slots")
        if not (0.0 < self.density <= 1.0):
            raise ValueError("density must lie in (0, 1]")
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")


def generate_synthetic(spec: SynthSpec) -> DynamicGraphDataset:
    """Random directed graph with node-driven temporal weight series.

    Each present edge (i, j) carries w(t) = base_ij * f_ij(t) + noise.
    The base and the temporal profile are derived from per-node latent
    attributes (activity levels, phases, trend directions) so that the
    patterns are low-rank and learnable from node embeddings: f is either
    a sinusoid whose per-edge phase is the sum of the endpoint phases
    (periodic), a linear ramp in the source node's direction (trend), or
    a per-source-node choice between the two (mixed).  Weights are
    clipped into (0, 1].
    """
    rng = np.random.default_rng(spec.seed)
    src_level = rng.uniform(0.5, 1.0, size=spec.n)
    dst_level = rng.uniform(0.5, 1.0, size=spec.n)
    node_phase = rng.uniform(0.0, 2.0 * np.pi, size=spec.n)
    trend_dir = rng.choice([-1.0, 1.0], size=spec.n)
    prefers_periodic = rng.random(size=spec.n) < 0.5

    observations = []
    tt = np.arange(1, spec.t + 1, dtype=np.float64)
    ramp = (tt - 1) / max(spec.t - 1, 1)
    cycles = 2.0
    for i in range(spec.n):
        for j in range(spec.n):
            if i == j:
                continue
            if rng.random() >= spec.density:
                continue
            base = src_level[i] * dst_level[j]
            phase = node_phase[i] + node_phase[j]
            periodic = 0.5 + 0.5 * np.sin(2.0 * np.pi * cycles * ramp + phase)
            trend = 0.5 + 0.5 * trend_dir[i] * (2.0 * ramp - 1.0)
            if spec.pattern == "periodic":
                f = periodic
            elif spec.pattern == "trend":
                f = trend
            else:
                f = periodic if prefers_periodic[i] else trend
            w = base * f
            if spec.noise > 0:
                w = w + rng.normal(0.0, spec.noise, size=spec.t)
            w = np.clip(w, WEIGHT_FLOOR, 1.0)
            for t in range(1, spec.t + 1):
                observations.append(LinkObservation(t, i, j, float(w[t - 1])))
    return DynamicGraphDataset(spec.n, spec.t, observations)
