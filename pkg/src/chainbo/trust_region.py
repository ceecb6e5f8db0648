"""Single adaptive trust region for candidate proposal.

The region is an axis-aligned box around the incumbent best point in
normalized coordinates.  Consecutive improving rounds double the side
lengths (capped), consecutive non-improving rounds halve them (floored);
when the region bottoms out the harness restarts it at a fresh location.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .validation import check_vector

__all__ = ["TrustRegion"]


@dataclass
class TrustRegion:
    center: np.ndarray
    side_lengths: np.ndarray
    success_count: int = 0
    failure_count: int = 0
    success_threshold: int = 3
    failure_threshold: int = 4
    min_side: float = 2.0**-7
    max_side: float = 1.6
    initial_side: float = 0.8
    restarts: int = field(default=0, compare=False)

    @classmethod
    def create(cls, center, initial_side=0.8, success_threshold=3,
               failure_threshold=None, min_side=2.0**-7, max_side=1.6):
        """Fresh region centered on ``center`` (normalized coordinates)."""
        center = check_vector(center, "center")
        d = center.shape[0]
        if failure_threshold is None:
            failure_threshold = max(4, math.ceil(d / 10))
        return cls(
            center=center.copy(),
            side_lengths=np.full(d, float(initial_side)),
            success_threshold=int(success_threshold),
            failure_threshold=int(failure_threshold),
            min_side=float(min_side),
            max_side=float(max_side),
            initial_side=float(initial_side),
        )

    @property
    def dim(self):
        return self.center.shape[0]

    def bounds(self):
        """Region box intersected with the unit cube: (lower, upper)."""
        lo = np.clip(self.center - 0.5 * self.side_lengths, 0.0, 1.0)
        hi = np.clip(self.center + 0.5 * self.side_lengths, 0.0, 1.0)
        return lo, hi

    def propose(self, engine, n):
        """``n`` Sobol points mapped into the clipped region box."""
        lo, hi = self.bounds()
        return lo + engine.draw(n) * (hi - lo)

    def update(self, batch_best, incumbent, best_point=None):
        """Record one round's outcome and adapt the side lengths.

        ``batch_best`` is the best value observed this round and
        ``incumbent`` the best value before the round; on improvement the
        center moves to ``best_point`` (normalized) when provided.
        """
        improved = batch_best > incumbent
        if improved:
            self.success_count += 1
            self.failure_count = 0
            if best_point is not None:
                self.center = np.asarray(best_point, dtype=float).copy()
        else:
            self.failure_count += 1
            self.success_count = 0
        if self.success_count >= self.success_threshold:
            self.side_lengths = np.minimum(2.0 * self.side_lengths, self.max_side)
            self.success_count = 0
            self.failure_count = 0
        elif self.failure_count >= self.failure_threshold:
            self.side_lengths = np.maximum(0.5 * self.side_lengths, self.min_side)
            self.success_count = 0
            self.failure_count = 0
        return self

    @property
    def needs_restart(self):
        return bool(np.all(self.side_lengths <= self.min_side * (1.0 + 1e-12)))

    def restart(self, center):
        """Reset to the initial size around a fresh center."""
        self.center = check_vector(center, "center", length=self.dim).copy()
        self.side_lengths = np.full(self.dim, self.initial_side)
        self.success_count = 0
        self.failure_count = 0
        self.restarts += 1
        return self
