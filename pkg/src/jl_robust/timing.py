"""Wall-clock breakdown of a reduce / solve / recover pipeline."""

import time
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import asdict, dataclass


@dataclass
class Timing:
    """Seconds spent in the three pipeline stages.

    `t_jl` covers building and applying the projection, `t_blackbox` the solver run
    in the reduced space and `t_recover` inlier selection, sparsification and the
    lift back to the original space.
    """

    t_jl: float = 0.0
    t_blackbox: float = 0.0
    t_recover: float = 0.0

    @property
    def total(self) -> float:
        return self.t_jl + self.t_blackbox + self.t_recover

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """Accumulate the elapsed time of the block into the named stage."""
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            setattr(self, name, getattr(self, name) + elapsed)

    def as_dict(self) -> dict[str, float]:
        out = asdict(self)
        out['total'] = self.total
        return out
