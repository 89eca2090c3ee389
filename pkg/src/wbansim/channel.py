"""Stochastic link model: i.i.d. bit flips at a configurable error rate.

Randomness comes from counter-based Philox generators, one substream per
(seed, stream id).  Distinct stream ids are statistically independent and
reproducible regardless of how transmissions interleave across links, so
adding a node to a simulation never perturbs the noise seen by the others.

The distance calibration maps test distance to bit error rate.  The bundled
``wireless`` and ``wired`` presets are calibration artifacts: the targets
are frame error rates (what a test rig can actually measure), inverted
through the analytic payload/FER model at the 10-byte reference payload.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .analytics import invert_fer_analytic
from .errors import RangeError

CALIBRATION_PAYLOAD = 10   # reference payload (bytes) for preset inversion

# Measured-FER targets per distance (m).  Flat-ish out to 4 m, growing
# beyond, with the wired rig cleaner than the wireless one.
WIRELESS_FER_TARGETS = ((1.0, 0.00475), (2.0, 0.005), (4.0, 0.0056),
                        (5.0, 0.012), (10.0, 0.025))
WIRED_FER_TARGETS = ((1.0, 0.0026), (2.0, 0.0030), (4.0, 0.0034),
                     (5.0, 0.0040), (10.0, 0.0050))


def _stream_spawn_key(stream_id) -> tuple[int, ...]:
    """Stable 128-bit spawn key for an arbitrary (hashable, repr-stable) id."""
    digest = hashlib.sha256(repr(stream_id).encode()).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


@dataclass
class ChannelModel:
    """Bit-flip channel: error rate, RNG seed, optional distance calibration."""

    ber: float = 0.0
    rng_seed: int = 0
    distance_map: tuple[tuple[float, float], ...] | None = None
    _streams: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise RangeError(f"ber={self.ber} is not a probability")
        if self.distance_map is not None:
            self.distance_map = tuple((float(d), float(b)) for d, b in self.distance_map)
            distances = [d for d, _ in self.distance_map]
            bers = [b for _, b in self.distance_map]
            if any(b < a for a, b in zip(distances, distances[1:])) or \
               len(set(distances)) != len(distances):
                raise RangeError("calibration distances must be strictly increasing")
            if any(b < a for a, b in zip(bers, bers[1:])):
                raise RangeError("calibration BERs must be non-decreasing with distance")
            if any(not 0.0 <= b <= 1.0 for b in bers):
                raise RangeError("calibration BERs must be probabilities")

    def stream(self, stream_id) -> np.random.Generator:
        """Philox substream for (rng_seed, stream_id); cached per id."""
        rng = self._streams.get(stream_id)
        if rng is None:
            seq = np.random.SeedSequence(entropy=self.rng_seed,
                                         spawn_key=_stream_spawn_key(stream_id))
            rng = np.random.Generator(np.random.Philox(seq))
            self._streams[stream_id] = rng
        return rng


def corrupt(data: bytes, ber: float, rng: np.random.Generator) -> bytes:
    """Flip each bit of `data` independently with probability `ber`.

    Bit positions are MSB-first within each byte.  The flip count is drawn
    binomially and positions uniformly without replacement, which realizes
    exactly the i.i.d. per-bit law while keeping the clean-frame case cheap.
    """
    if ber == 0.0 or not data:
        return data
    if ber == 1.0:
        return bytes(b ^ 0xFF for b in data)
    nbits = len(data) * 8
    nflips = int(rng.binomial(nbits, ber))
    if nflips == 0:
        return data
    positions = rng.choice(nbits, size=nflips, replace=False)
    out = bytearray(data)
    for pos in positions:
        out[pos >> 3] ^= 0x80 >> (pos & 7)
    return bytes(out)


def transmit(data: bytes, model: ChannelModel, stream_id) -> bytes:
    """Send `data` through the channel on the given substream."""
    return corrupt(data, model.ber, model.stream(stream_id))


class FrameCorruptor:
    """Per-substream corruptor that pre-draws flip counts in blocks.

    Distributionally identical to `corrupt` (binomial count, then uniform
    positions); batching only amortizes the generator call across frames
    of the same length.  One instance per substream keeps results
    reproducible and independent across links.
    """

    __slots__ = ("rng", "_ber", "block", "_counts")

    def __init__(self, rng: np.random.Generator, ber: float, block: int = 4096):
        self.rng = rng
        self.block = block
        self._counts: dict = {}   # nbits -> [list of pending counts]
        self.ber = ber

    @property
    def ber(self) -> float:
        return self._ber

    @ber.setter
    def ber(self, value: float) -> None:
        if not 0.0 <= value <= 1.0:
            raise RangeError(f"ber={value} is not a probability")
        self._ber = value
        self._counts = {}   # pre-drawn counts belong to the old rate

    def corrupt(self, data: bytes) -> bytes:
        ber = self._ber
        if ber == 0.0 or not data:
            return data
        if ber == 1.0:
            return bytes(b ^ 0xFF for b in data)
        nbits = len(data) * 8
        pending = self._counts.get(nbits)
        if not pending:
            pending = self.rng.binomial(nbits, ber, size=self.block).tolist()
            pending.reverse()
            self._counts[nbits] = pending
        nflips = pending.pop()
        if nflips == 0:
            return data
        positions = self.rng.choice(nbits, size=nflips, replace=False)
        out = bytearray(data)
        for pos in positions:
            out[pos >> 3] ^= 0x80 >> (pos & 7)
        return bytes(out)


def ber_for_distance(distance_m: float, model: ChannelModel) -> float:
    """Piecewise-linear interpolation over the calibration table, clamped
    at both endpoints."""
    if distance_m <= 0:
        raise RangeError(f"distance_m={distance_m} must be positive")
    if not model.distance_map:
        raise RangeError("channel model has no distance calibration table")
    distances = [d for d, _ in model.distance_map]
    bers = [b for _, b in model.distance_map]
    return float(np.interp(distance_m, distances, bers))


def _invert_targets(targets) -> tuple[tuple[float, float], ...]:
    return tuple((d, invert_fer_analytic(f, CALIBRATION_PAYLOAD)) for d, f in targets)


def preset(name: str, rng_seed: int = 0) -> ChannelModel:
    """Calibrated channel preset: ``wireless`` or ``wired``."""
    if name == "wireless":
        table = _invert_targets(WIRELESS_FER_TARGETS)
    elif name == "wired":
        table = _invert_targets(WIRED_FER_TARGETS)
    else:
        raise RangeError(f"unknown channel preset {name!r}")
    return ChannelModel(ber=table[0][1], rng_seed=rng_seed, distance_map=table)
