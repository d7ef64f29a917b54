"""Event trace records and their on-disk form.

Binary layout: the magic ``TRNT\\x01`` followed by records, each prefixed by
its length as a big-endian u32::

    time:i64 instance:u32 node:u32 kind:u8 before:i8 after:i8
    value_tag:u8 [value:i64 | len:u16 utf8]   (tag 0 none, 1 int, 2 str)
    data_len:u32 data                          (message bytes verbatim)

The sidecar is JSON holding each prover's attestation instants per instance.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterator, NamedTuple

MAGIC = b"TRNT\x01"

KINDS = (
    "initiate", "deliver", "accept", "discard", "attest", "forward", "fwd_expire",
    "verifier_report", "tally", "adversary", "malformed", "undeliverable", "ignored",
    "renewal", "depleted",
)
KIND_CODE = {k: i + 1 for i, k in enumerate(KINDS)}
NO_STATE = -1

_HEAD = struct.Struct(">qIIBbbB")
_I64 = struct.Struct(">q")
_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")


class TraceRecord(NamedTuple):
    time: int
    node: int
    kind: str
    instance: int
    before: int = NO_STATE
    after: int = NO_STATE
    data: bytes | None = None
    value: int | str | None = None


def encode_record(rec: TraceRecord) -> bytes:
    parts = [_HEAD.pack(rec.time, rec.instance, rec.node, KIND_CODE[rec.kind], rec.before,
                        rec.after, 0 if rec.value is None else 1 if isinstance(rec.value, int) else 2)]
    if isinstance(rec.value, int):
        parts.append(_I64.pack(rec.value))
    elif rec.value is not None:
        raw = rec.value.encode()
        parts.append(_U16.pack(len(raw)) + raw)
    data = rec.data or b""
    parts.append(_U32.pack(len(data)) + data)
    body = b"".join(parts)
    return _U32.pack(len(body)) + body


def decode_records(blob: bytes) -> Iterator[TraceRecord]:
    if not blob.startswith(MAGIC):
        raise ValueError("not a trace file")
    off = len(MAGIC)
    names = {v: k for k, v in KIND_CODE.items()}
    while off < len(blob):
        (size,) = _U32.unpack_from(blob, off)
        off += 4
        end = off + size
        time, inst, node, code, before, after, tag = _HEAD.unpack_from(blob, off)
        p = off + _HEAD.size
        value = None
        if tag == 1:
            (value,) = _I64.unpack_from(blob, p)
            p += 8
        elif tag == 2:
            (ln,) = _U16.unpack_from(blob, p)
            value = blob[p + 2:p + 2 + ln].decode()
            p += 2 + ln
        (dlen,) = _U32.unpack_from(blob, p)
        data = blob[p + 4:p + 4 + dlen] if dlen else None
        yield TraceRecord(time, node, names[code], inst, before, after, data, value)
        off = end


class EventTrace:
    """Ordered records of one run plus the metadata analyses need."""

    def __init__(self, records: list[TraceRecord], meta: dict, attest_log: list[dict]):
        self.records = records
        self.meta = meta
        # attest_log[instance][node] = (true time, t_attest_prime); kept apart from the
        # records so analyses can be cross-checked against an independent source
        self.attest_log = attest_log

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def of_kind(self, *kinds: str) -> Iterator[TraceRecord]:
        wanted = set(kinds)
        return (r for r in self.records if r.kind in wanted)

    @property
    def compromised(self) -> frozenset:
        return frozenset(self.meta.get("compromised", ()))

    def to_bytes(self) -> bytes:
        return MAGIC + b"".join(encode_record(r) for r in self.records)

    def sidecar(self) -> dict:
        return {
            "variant": self.meta["variant"],
            "n": self.meta["n"],
            "compromised": sorted(self.compromised),
            "instances": [
                {
                    "instance": i,
                    "attest_times": {str(node): {"true_time_us": tt, "t_attest_prime": tp}
                                     for node, (tt, tp) in sorted(log.items())},
                }
                for i, log in enumerate(self.attest_log)
            ],
        }

    def sidecar_json(self) -> str:
        return json.dumps(self.sidecar(), sort_keys=True, separators=(",", ":"))

    def write(self, path: str | Path) -> tuple[Path, Path]:
        """Write the binary trace to ``path`` and the sidecar next to it (``.json`` appended)."""
        path = Path(path)
        path.write_bytes(self.to_bytes())
        side = path.with_name(path.name + ".json")
        side.write_text(self.sidecar_json() + "\n")
        return path, side
