"""Data model for sequences of irregular multimodal events.

A dataset is a list of labeled sequences; each sequence is a chronologically
ordered list of typed events carrying up to three (attribute type, value)
pairs and a time offset in hours from the sequence's first event.

On-disk format: UTF-8 JSON lines, one sequence per line:
    {"seq_id": "...", "label": 0|1,
     "events": [{"t": 5.0, "type": "hr", "attrs": [["bpm", 72.0]]}, ...]}
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

PAD_TOKEN = "<pad>"
PAD_ID = 0
UNK_ID = 1
N_ATTR_SLOTS = 3


class ParseError(ValueError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class ValidationError(ValueError):
    """Structurally valid input violating a domain invariant."""


@dataclass(frozen=True)
class Attribute:
    value_type: str
    value_u: float

    def is_pad(self) -> bool:
        return self.value_type == PAD_TOKEN


PAD_ATTRIBUTE = Attribute(PAD_TOKEN, 0.0)


@dataclass(frozen=True)
class Event:
    event_type: str
    attrs: tuple[Attribute, ...]
    time: float


@dataclass(frozen=True)
class Sequence:
    seq_id: str
    events: tuple[Event, ...]
    label: int


@dataclass
class Dataset:
    sequences: list[Sequence] = field(default_factory=list)

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)


def pad_attributes(attrs: list[Attribute]) -> tuple[Attribute, ...]:
    """Keep the first three attributes in order, pad missing slots with zeros."""
    kept = list(attrs[:N_ATTR_SLOTS])
    while len(kept) < N_ATTR_SLOTS:
        kept.append(PAD_ATTRIBUTE)
    return tuple(kept)


def normalize_sequence(seq_id: str, label: int,
                       raw_events: list[tuple[float, str, list[Attribute]]]) -> Sequence:
    """Stable-sort events by time, rebase to the first event, pad attributes."""
    if not raw_events:
        raise ValidationError(f"sequence '{seq_id}' has no events")
    if label not in (0, 1):
        raise ValidationError(f"sequence '{seq_id}': label must be 0 or 1, got {label!r}")
    for t, _, _ in raw_events:
        if not math.isfinite(t) or t < 0:
            raise ValidationError(f"sequence '{seq_id}': negative or non-finite time {t}")
    ordered = sorted(raw_events, key=lambda e: e[0])
    t0 = ordered[0][0]
    events = tuple(
        Event(event_type=etype, attrs=pad_attributes(attrs), time=t - t0)
        for t, etype, attrs in ordered)
    return Sequence(seq_id=seq_id, events=events, label=label)


def validate_sequence(seq: Sequence) -> None:
    """Check the post-parse invariants; raises ValidationError on failure."""
    if not seq.events:
        raise ValidationError(f"sequence '{seq.seq_id}' has no events")
    if seq.label not in (0, 1):
        raise ValidationError(f"sequence '{seq.seq_id}': bad label {seq.label!r}")
    if seq.events[0].time != 0.0:
        raise ValidationError(f"sequence '{seq.seq_id}': first event time is not 0")
    prev = 0.0
    for ev in seq.events:
        if not math.isfinite(ev.time) or ev.time < prev:
            raise ValidationError(
                f"sequence '{seq.seq_id}': times not non-decreasing at t={ev.time}")
        prev = ev.time
        if len(ev.attrs) != N_ATTR_SLOTS:
            raise ValidationError(
                f"sequence '{seq.seq_id}': event has {len(ev.attrs)} attribute slots")
        for a in ev.attrs:
            if not math.isfinite(a.value_u):
                raise ValidationError(
                    f"sequence '{seq.seq_id}': non-finite attribute value")
            if not a.value_type:
                raise ValidationError(
                    f"sequence '{seq.seq_id}': empty attribute type token")


def _parse_line(lineno: int, line: str) -> Sequence:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError(lineno, f"invalid JSON ({e.msg})") from e
    if not isinstance(obj, dict):
        raise ParseError(lineno, "record is not an object")
    try:
        seq_id = str(obj["seq_id"])
        label = obj["label"]
        raw = obj["events"]
    except KeyError as e:
        raise ParseError(lineno, f"missing field {e.args[0]!r}") from e
    if not isinstance(raw, list):
        raise ParseError(lineno, "'events' is not an array")
    raw_events = []
    for ev in raw:
        try:
            t = float(ev["t"])
            etype = str(ev["type"])
            attrs = [Attribute(str(a[0]), float(a[1])) for a in ev.get("attrs", [])]
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise ParseError(lineno, f"malformed event: {e}") from e
        raw_events.append((t, etype, attrs))
    # domain violations (bad label, empty events, negative time) surface as
    # ValidationError, not ParseError
    return normalize_sequence(seq_id, label, raw_events)


def parse_dataset(path) -> Dataset:
    """Read a line-delimited dataset, normalizing every sequence."""
    ds = Dataset()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            ds.sequences.append(_parse_line(lineno, line))
    return ds


def serialize_sequence(seq: Sequence) -> str:
    events = []
    for ev in seq.events:
        attrs = [[a.value_type, a.value_u] for a in ev.attrs if not a.is_pad()]
        events.append({"t": ev.time, "type": ev.event_type, "attrs": attrs})
    return json.dumps({"seq_id": seq.seq_id, "label": seq.label, "events": events})


def serialize_dataset(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in ds:
            fh.write(serialize_sequence(seq))
            fh.write("\n")


@dataclass
class Vocab:
    """Token-to-id maps for event and attribute types; 0 = PAD, 1 = UNK."""
    event_types: dict[str, int] = field(default_factory=dict)
    attr_types: dict[str, int] = field(default_factory=dict)

    def event_id(self, token: str) -> int:
        return self.event_types.get(token, UNK_ID)

    def attr_id(self, token: str) -> int:
        if token == PAD_TOKEN:
            return PAD_ID
        return self.attr_types.get(token, UNK_ID)

    @property
    def n_event_tokens(self) -> int:
        return len(self.event_types) + 2

    @property
    def n_attr_tokens(self) -> int:
        return len(self.attr_types) + 2

    def digest(self) -> str:
        """Stable hash for checkpoint/dataset compatibility checks."""
        payload = json.dumps(
            [sorted(self.event_types.items()), sorted(self.attr_types.items())])
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_json(self) -> str:
        return json.dumps({"event_types": self.event_types,
                           "attr_types": self.attr_types})

    @classmethod
    def from_json(cls, s: str) -> "Vocab":
        obj = json.loads(s)
        return cls(event_types=dict(obj["event_types"]),
                   attr_types=dict(obj["attr_types"]))


def build_vocab(train: Dataset) -> Vocab:
    """Map every token in the training set to a dense id, by first occurrence."""
    if len(train) == 0:
        raise ValidationError("cannot build a vocabulary from an empty dataset")
    vocab = Vocab()
    next_event = 2
    next_attr = 2
    for seq in train:
        for ev in seq.events:
            if ev.event_type not in vocab.event_types:
                vocab.event_types[ev.event_type] = next_event
                next_event += 1
            for a in ev.attrs:
                if a.is_pad():
                    continue
                if a.value_type not in vocab.attr_types:
                    vocab.attr_types[a.value_type] = next_attr
                    next_attr += 1
    return vocab
