"""Reproducible splits of a training set across agents."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["PartitionPlan", "make_partition", "SCHEMES"]

SCHEMES = ("balanced", "unbalanced", "class_biased")


@dataclass(frozen=True)
class PartitionPlan:
    """Disjoint per-agent index lists covering ``range(n_samples)``.

    ``reserved`` lists, per agent, the indices handed out deliberately by the
    class-biased scheme before the rest of the data was pooled.
    """

    scheme: str
    seed: int
    assignment: tuple[tuple[int, ...], ...]
    fraction: float | None = None
    concentration: float | None = None
    reserved: tuple[tuple[int, ...], ...] = field(default=())

    @property
    def n_agents(self) -> int:
        return len(self.assignment)

    @property
    def sizes(self) -> list[int]:
        return [len(a) for a in self.assignment]

    def indices(self, j: int) -> np.ndarray:
        return np.asarray(self.assignment[j], dtype=int)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "seed": self.seed,
            "fraction": self.fraction,
            "concentration": self.concentration,
            "assignment": [list(a) for a in self.assignment],
            "reserved": [list(r) for r in self.reserved],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PartitionPlan":
        plan = cls(
            scheme=data["scheme"],
            seed=int(data["seed"]),
            assignment=tuple(tuple(int(i) for i in a) for a in data["assignment"]),
            fraction=data.get("fraction"),
            concentration=data.get("concentration"),
            reserved=tuple(tuple(int(i) for i in r) for r in data.get("reserved", ())),
        )
        _check_cover(plan.assignment, sum(plan.sizes))
        return plan

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "PartitionPlan":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _check_cover(assignment, n_samples):
    flat = np.concatenate([np.asarray(a, dtype=int) for a in assignment]) if assignment else np.array([], int)
    if len(flat) != n_samples or not np.array_equal(np.sort(flat), np.arange(n_samples)):
        raise ValueError("partition is not a disjoint cover of the dataset")


def _split_by_sizes(perm: np.ndarray, sizes) -> list[np.ndarray]:
    cuts = np.cumsum(sizes)[:-1]
    return np.split(perm, cuts)


def _unbalanced_sizes(n_samples, n_agents, rng, concentration):
    # Every agent first gets half of the equal share; the rest follows Dirichlet weights.
    floor = math.ceil(n_samples / n_agents / 2)
    spare = n_samples - floor * n_agents
    weights = rng.dirichlet(np.full(n_agents, concentration))
    raw = weights * spare
    extra = np.floor(raw).astype(int)
    leftover = spare - extra.sum()
    order = np.argsort(-(raw - extra), kind="stable")
    extra[order[:leftover]] += 1
    return floor + extra


def make_partition(
    n_samples: int,
    n_agents: int,
    scheme: str = "balanced",
    seed: int = 0,
    labels=None,
    fraction: float = 0.2,
    concentration: float = 1.0,
) -> PartitionPlan:
    """Assign sample indices to agents.

    Parameters
    ----------
    n_samples, n_agents : int
    scheme : {"balanced", "unbalanced", "class_biased"}
        ``balanced`` gives sizes differing by at most one.  ``unbalanced``
        draws random unequal sizes, each at least half of the equal share.
        ``class_biased`` first gives agent ``j`` ``floor(fraction * n_c)``
        samples of each of its two bias classes ``c`` (classes assigned
        cyclically), then pools, shuffles and splits the remainder evenly.
    seed : int
        Makes the plan reproducible.
    labels : array-like, optional
        Class labels, required by ``class_biased``.
    """
    if n_agents < 1 or n_samples < n_agents:
        raise ValueError(f"cannot split {n_samples} samples across {n_agents} agents")
    rng = np.random.default_rng(seed)
    reserved: list[list[int]] = []

    if scheme == "balanced":
        parts = np.array_split(rng.permutation(n_samples), n_agents)
    elif scheme == "unbalanced":
        if concentration <= 0:
            raise ValueError("Dirichlet concentration must be positive")
        sizes = _unbalanced_sizes(n_samples, n_agents, rng, concentration)
        parts = _split_by_sizes(rng.permutation(n_samples), sizes)
    elif scheme == "class_biased":
        if labels is None:
            raise ValueError("class_biased partition requires labels")
        labels = np.asarray(labels)
        if len(labels) != n_samples:
            raise ValueError("labels length does not match n_samples")
        if not 0.0 < fraction < 1.0:
            raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
        classes = np.unique(labels)
        if len(classes) < 2:
            raise ValueError("class_biased partition needs at least two classes")
        pools = {c: list(rng.permutation(np.flatnonzero(labels == c))) for c in classes}
        counts = {c: len(pools[c]) for c in classes}
        for j in range(n_agents):
            mine = []
            for c in (classes[(2 * j) % len(classes)], classes[(2 * j + 1) % len(classes)]):
                take = min(int(math.floor(fraction * counts[c])), len(pools[c]))
                mine.extend(pools[c][:take])
                pools[c] = pools[c][take:]
            reserved.append(sorted(int(i) for i in mine))
        rest = rng.permutation(np.concatenate([np.asarray(p, dtype=int) for p in pools.values()]))
        parts = [np.concatenate([np.asarray(r, dtype=int), extra]) for r, extra in zip(reserved, np.array_split(rest, n_agents))]
    else:
        raise ValueError(f"unknown partition scheme {scheme!r}")

    assignment = tuple(tuple(int(i) for i in np.sort(p)) for p in parts)
    _check_cover(assignment, n_samples)
    return PartitionPlan(
        scheme=scheme,
        seed=int(seed),
        assignment=assignment,
        fraction=fraction if scheme == "class_biased" else None,
        concentration=concentration if scheme == "unbalanced" else None,
        reserved=tuple(tuple(r) for r in reserved),
    )
