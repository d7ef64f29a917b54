"""Per-hop delay model for point-to-point links."""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..errors import InvalidParameter


@dataclass(frozen=True)
class LinkModel:
    """Frame delay = size_bits / bandwidth + latency +/- uniform jitter (all microseconds).

    ``bandwidth_bps=None`` disables the serialization term.  With ``fifo`` set,
    frames on the same directed link queue behind each other at the bandwidth
    limit instead of overlapping.
    """

    bandwidth_bps: int | None = 250_000
    latency_us: int = 100
    jitter_us: int = 0
    fifo: bool = False

    def __post_init__(self):
        if self.bandwidth_bps is not None and self.bandwidth_bps <= 0:
            raise InvalidParameter("bandwidth_bps must be positive")
        if self.latency_us < 0 or self.jitter_us < 0:
            raise InvalidParameter("latency and jitter must be non-negative")

    def tx_time(self, size_bytes: int) -> int:
        if self.bandwidth_bps is None:
            return 0
        return -(-size_bytes * 8 * 1_000_000 // self.bandwidth_bps)

    def jitter(self, rng: random.Random) -> int:
        return rng.randint(-self.jitter_us, self.jitter_us) if self.jitter_us else 0

    def hop_delay(self, size_bytes: int, rng: random.Random | None = None) -> int:
        """Delay of one frame; never shorter than the transmission time."""
        base = self.tx_time(size_bytes)
        extra = self.latency_us
        if rng is not None and self.jitter_us:
            extra = max(0, extra + self.jitter(rng))
        return base + extra

    def worst_hop(self, size_bytes: int) -> int:
        return self.tx_time(size_bytes) + self.latency_us + self.jitter_us
