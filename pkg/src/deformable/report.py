from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class EvolutionReport:
    """Outcome of one contour evolution."""

    iterations: int = 0
    wall_time: float = 0.0
    converged: bool = False
    clamped_vertices: int = 0
    reinit_count: int = 0

    def to_dict(self) -> dict:
        return asdict(self)
