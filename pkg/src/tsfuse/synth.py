"""Deterministic generator of multimodal irregular event streams.

Stands in for access-restricted clinical data: each event type fires
quasi-periodically at its own rate, attributes are typed scalar readings,
and the binary label is planted as a rare high-valued "signal" event inside
the final quarter of the sequence. Generation is a pure function of the
spec (including its seed); every sequence draws from an independent RNG
substream so parallel generation stays reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

from .events import Attribute, Dataset, Sequence, normalize_sequence, PAD_TOKEN
from .numerics import Rng

SIGNAL_THRESHOLD = 2.0


class SynthConfigError(ValueError):
    """Infeasible or inconsistent generator spec."""


@dataclass
class SynthSpec:
    n_sequences: int = 1000
    seq_len_range: tuple[int, int] = (20, 40)
    n_event_types: int = 8
    base_period: float = 1.0          # type k fires with period base_period*(k+1)
    jitter: float = 0.3               # fractional inter-arrival jitter, in [0,1)
    n_attr_types: int = 4
    positive_rate: float = 0.3
    signal_type_count: int = 1
    signal_rate: float = 0.0          # extra plants per final-quarter event
    seed: int = 1

    def validate(self) -> None:
        lo, hi = self.seq_len_range
        if self.n_sequences <= 0:
            raise SynthConfigError("n_sequences must be positive")
        if lo < 1 or lo > hi:
            raise SynthConfigError(f"bad seq_len_range {self.seq_len_range}")
        if self.n_event_types < 1:
            raise SynthConfigError("n_event_types must be positive")
        if self.base_period <= 0:
            raise SynthConfigError("base_period must be positive")
        if not (0.0 <= self.jitter < 1.0):
            raise SynthConfigError("jitter must be in [0, 1)")
        if self.n_attr_types < 1:
            raise SynthConfigError("n_attr_types must be positive")
        if not (0.0 <= self.positive_rate < 1.0):
            raise SynthConfigError("positive_rate must be in [0, 1)")
        if not (1 <= self.signal_type_count <= self.n_event_types):
            raise SynthConfigError(
                f"signal_type_count {self.signal_type_count} exceeds "
                f"n_event_types {self.n_event_types}")
        if self.signal_rate < 0.0:
            raise SynthConfigError("signal_rate must be >= 0")
        self.seq_len_range = (int(lo), int(hi))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seq_len_range"] = list(self.seq_len_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise SynthConfigError(f"unknown spec keys: {sorted(unknown)}")
        spec = cls(**d)
        spec.seq_len_range = tuple(spec.seq_len_range)
        spec.validate()
        return spec


def event_type_token(k: int) -> str:
    return f"ev{k}"


def attr_type_token(k: int) -> str:
    return f"attr{k}"


def signal_types(spec: SynthSpec) -> list[str]:
    """Signal-carrying types: the slowest (rarest) event types."""
    first = spec.n_event_types - spec.signal_type_count
    return [event_type_token(k) for k in range(first, spec.n_event_types)]


def type_period(spec: SynthSpec, k: int) -> float:
    return spec.base_period * (k + 1)


def _generate_sequence(spec: SynthSpec, idx: int, rng: Rng) -> Sequence:
    lo, hi = spec.seq_len_range
    length = int(rng.integers(lo, hi + 1))
    positive = bool(rng.random() < spec.positive_rate)

    # quasi-periodic arrivals per type, pooled and truncated to `length`
    pool: list[tuple[float, str, float]] = []  # (time, type, value)
    horizon = type_period(spec, 0) * (length + 1)
    for k in range(spec.n_event_types):
        period = type_period(spec, k)
        t = float(rng.uniform(0.0, period))
        while t < horizon:
            pool.append((t, event_type_token(k), float(rng.normal())))
            t += period * (1.0 + spec.jitter * float(rng.uniform(-1.0, 1.0)))
    pool.sort(key=lambda e: e[0])
    pool = pool[:length]

    sig = set(signal_types(spec))
    cut = pool[-1][0] * 0.75 if pool else 0.0  # final-quarter boundary

    events = []
    for t, etype, value in pool:
        if etype in sig and t >= cut and value > SIGNAL_THRESHOLD:
            value = float(rng.uniform(-1.0, 1.0))  # scrub; planted below if positive
        attr = attr_type_token(int(rng.integers(0, spec.n_attr_types)))
        events.append((t, etype, [Attribute(attr, value)]))

    # plant extreme-valued signal-type events in the final quarter of every
    # sequence: strongly positive values for label 1, strongly negative for
    # label 0. Both classes receive the same number of plants, so event-type
    # counts carry no label information; only the (value, timing) pattern
    # does. With a positive signal_rate the evidence scales with the
    # quarter's size, so longer contexts carry more signal.
    span = max(events[-1][0] - cut, 1e-6)
    fq_count = sum(1 for t, _, _ in events if t >= cut)
    n_plant = 1 + int(fq_count * spec.signal_rate)
    sign = 1.0 if positive else -1.0
    for stype in sorted(sig):
        for _ in range(n_plant):
            t_sig = cut + span * float(rng.uniform(0.1, 0.95))
            value = sign * (SIGNAL_THRESHOLD + 0.5 + abs(float(rng.normal())))
            attr = attr_type_token(int(rng.integers(0, spec.n_attr_types)))
            events.append((t_sig, stype, [Attribute(attr, value)]))
    events.sort(key=lambda e: e[0])
    events = events[-length:] if len(events) > length else events

    return normalize_sequence(f"seq{idx:06d}", int(positive), events)


def generate_dataset(spec: SynthSpec) -> Dataset:
    """Generate the full dataset; pure function of (spec, spec.seed)."""
    spec.validate()
    master = Rng(spec.seed)
    ds = Dataset()
    for i in range(spec.n_sequences):
        ds.sequences.append(_generate_sequence(spec, i, master.split(i + 1)))
    return ds


def label_oracle_score(seq: Sequence, sig: set[str]) -> float:
    """Score a sequence by the planted-signal rule itself (AUC-1.0 oracle)."""
    if not seq.events:
        return 0.0
    cut = seq.events[-1].time * 0.75
    best = -math.inf
    for ev in seq.events:
        if ev.event_type in sig and ev.time >= cut:
            for a in ev.attrs:
                if a.value_type != PAD_TOKEN:
                    best = max(best, a.value_u)
    return best if best > -math.inf else -10.0
