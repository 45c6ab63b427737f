"""Two-parameter controls.

A control is the superadditive modulus omega(s, t) every Hoelder-type estimate in
this library is measured against.  Two representations are supported: the
time-scale control ``omega(s, t) = scale * (t - s)`` and a tabulated control
holding values on a fixed grid (used for degenerate drivers whose control is not
a multiple of t - s).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGrid

SUPERADD_SLACK = 1e-12


@dataclass(frozen=True)
class Control:
    """Superadditive modulus omega(s, t) with roughness exponent p in [1, 3)."""

    p: float
    kind: str = "time-scale"  # "time-scale" | "table"
    scale: float = 1.0
    times: np.ndarray | None = field(default=None, repr=False)
    table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (1.0 <= self.p < 3.0):
            raise InvalidGrid(f"p={self.p} outside [1, 3)")
        if self.kind == "time-scale":
            if self.scale < 0:
                raise InvalidGrid("time-scale control needs a nonnegative scale")
        elif self.kind == "table":
            if self.times is None or self.table is None:
                raise InvalidGrid("table control needs times and table")
            t = np.asarray(self.times, dtype=float)
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "table", np.asarray(self.table, dtype=float))
            if self.table.shape != (t.size, t.size):
                raise InvalidGrid("table must be square over the grid")
        else:
            raise InvalidGrid(f"unknown control kind {self.kind!r}")

    # -- evaluation -----------------------------------------------------------

    def omega(self, s, t):
        """omega(s, t), vectorized over numpy-broadcastable arguments."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.kind == "time-scale":
            return self.scale * np.maximum(t - s, 0.0)
        i = np.searchsorted(self.times, s)
        j = np.searchsorted(self.times, t)
        return self.table[i, j]

    def __call__(self, s, t):
        return self.omega(s, t)

    # -- construction ---------------------------------------------------------

    @staticmethod
    def time_scale(scale, p):
        return Control(p=p, kind="time-scale", scale=float(scale))

    @staticmethod
    def from_callable(fn, times, p):
        """Tabulate ``fn(s, t)`` over all grid pairs."""
        t = np.asarray(times, dtype=float)
        ss, tt = np.meshgrid(t, t, indexing="ij")
        table = np.where(tt >= ss, fn(ss, tt), 0.0)
        return Control(p=p, kind="table", times=t, table=table)

    def restrict(self, times):
        """Restriction to a subgrid (used when coarsening paths)."""
        if self.kind == "time-scale":
            return self
        t = np.asarray(times, dtype=float)
        idx = np.searchsorted(self.times, t)
        return Control(p=self.p, kind="table", times=t, table=self.table[np.ix_(idx, idx)])

    # -- invariants -----------------------------------------------------------

    def check_superadditive(self, times, rng=None, max_triples=200_000):
        """Largest violation of superadditivity over grid triples.

        Checks every triple when the count is small, otherwise a seeded sample.
        Returns the worst value of omega(s,t) + omega(t,u) - omega(s,u)
        (positive means violation beyond the documented slack).
        """
        t = np.asarray(times, dtype=float)
        n = t.size
        if n < 3:
            return 0.0
        total = n * (n - 1) * (n - 2) // 6
        if total <= max_triples:
            i, j, k = np.array(
                [(a, b, c) for a in range(n - 2) for b in range(a + 1, n - 1) for c in range(b + 1, n)]
            ).T
        else:
            rng = rng or np.random.default_rng(0)
            i = rng.integers(0, n - 2, size=max_triples)
            j = i + 1 + rng.integers(0, np.maximum(n - 1 - (i + 1), 1))
            j = np.minimum(j, n - 2)
            k = j + 1 + rng.integers(0, np.maximum(n - (j + 1), 1))
            k = np.minimum(k, n - 1)
        osu = self.omega(t[i], t[k])
        viol = self.omega(t[i], t[j]) + self.omega(t[j], t[k]) - osu - SUPERADD_SLACK * np.maximum(1.0, osu)
        return float(np.max(viol))

    # -- serialization --------------------------------------------------------

    def to_json(self):
        doc = {"kind": self.kind, "scale": self.scale, "p": self.p}
        if self.kind == "table":
            doc["times"] = self.times.tolist()
            doc["table"] = self.table.tolist()
        return doc

    @staticmethod
    def from_json(doc):
        if doc["kind"] == "table":
            return Control(
                p=doc["p"],
                kind="table",
                times=np.asarray(doc["times"], dtype=float),
                table=np.asarray(doc["table"], dtype=float),
            )
        return Control(p=doc["p"], kind="time-scale", scale=doc["scale"])
