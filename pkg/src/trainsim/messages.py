"""Attestation request/report types and their binary wire format.

Layout (all integers big-endian)::

    byte 0   type      0x01 request, 0x02 report
    byte 1   flags     bit0 variant B, bit1 renewal present, bit2 LMT present
    request  id_snd:u32 hash_new:32 hash_ind_new:u32 t_attest:u64
             [height_cur:u32 height_net:u32]          (variant B)
             [new_anchor:32 auth:32 k:u32]             (renewal)
    report   id_dev:u32 id_par:u32 t_attest_prime:u64 hash_new:32
             [lmt_dev:32] auth_report:32
"""

from __future__ import annotations

import dataclasses
import enum
import struct
from dataclasses import dataclass
from typing import Union

from .crypto import DIGEST_SIZE, RenewalPayload
from .errors import InvalidParameter, MalformedMessage, UnknownMessageType

TYPE_REQUEST = 0x01
TYPE_REPORT = 0x02

FLAG_VARIANT_B = 0x01
FLAG_RENEWAL = 0x02
FLAG_LMT = 0x04

VERIFIER_ID = 0

_HEAD = struct.Struct(">BB")
_REQ_BODY = struct.Struct(">I32sIQ")
_HEIGHTS = struct.Struct(">II")
_RENEWAL = struct.Struct(">32s32sI")
_REP_BODY = struct.Struct(">IIQ32s")

REQUEST_A_SIZE = _HEAD.size + _REQ_BODY.size
REQUEST_B_SIZE = REQUEST_A_SIZE + _HEIGHTS.size
RENEWAL_SIZE = _RENEWAL.size
REPORT_CASU_SIZE = _HEAD.size + _REP_BODY.size + DIGEST_SIZE
REPORT_RATA_SIZE = REPORT_CASU_SIZE + DIGEST_SIZE


class Variant(str, enum.Enum):
    A = "A"
    B = "B"


class PacketClass(enum.Enum):
    TRAIN_REQUEST = "train_request"
    TRAIN_REPORT = "train_report"
    OTHER = "other"


@dataclass(frozen=True, slots=True)
class AttRequest:
    variant: Variant
    id_snd: int
    hash_new: bytes
    hash_ind_new: int
    t_attest: int
    height_cur: int | None = None
    height_net: int | None = None
    renewal: RenewalPayload | None = None

    msg_type = "req"

    def replace(self, **changes) -> "AttRequest":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, slots=True)
class AttReport:
    id_dev: int
    id_par: int
    t_attest_prime: int
    hash_new: bytes
    auth_report: bytes
    lmt_dev: bytes | None = None

    msg_type = "rep"

    def replace(self, **changes) -> "AttReport":
        return dataclasses.replace(self, **changes)


Message = Union[AttRequest, AttReport]


def report_mac_fields(
    id_par: int, t_attest_prime: int, hash_new: bytes, lmt_dev: bytes | None
) -> list[bytes]:
    """Fields covered by Auth_report, in order: ID_Par, t_attest', Hash_New, {LMT}."""
    fields = [id_par.to_bytes(4, "big"), t_attest_prime.to_bytes(8, "big"), hash_new]
    if lmt_dev is not None:
        fields.append(lmt_dev)
    return fields


def _need_digest(name, value):
    if not isinstance(value, (bytes, bytearray)) or len(value) != DIGEST_SIZE:
        raise InvalidParameter(f"{name} must be {DIGEST_SIZE} bytes")


def encode(msg: Message) -> bytes:
    try:
        if isinstance(msg, AttRequest):
            return _encode_request(msg)
        if isinstance(msg, AttReport):
            return _encode_report(msg)
    except struct.error as exc:
        raise InvalidParameter(f"field out of range: {exc}") from None
    raise InvalidParameter(f"cannot encode {type(msg).__name__}")


def _encode_request(req: AttRequest) -> bytes:
    _need_digest("hash_new", req.hash_new)
    flags = 0
    variant = Variant(req.variant)
    if variant is Variant.B:
        if req.height_cur is None or req.height_net is None:
            raise InvalidParameter("variant B request needs height_cur and height_net")
        flags |= FLAG_VARIANT_B
    elif req.height_cur is not None or req.height_net is not None:
        raise InvalidParameter("variant A request carries no height fields")
    if req.renewal is not None:
        flags |= FLAG_RENEWAL
    parts = [
        _HEAD.pack(TYPE_REQUEST, flags),
        _REQ_BODY.pack(req.id_snd, req.hash_new, req.hash_ind_new, req.t_attest),
    ]
    if flags & FLAG_VARIANT_B:
        parts.append(_HEIGHTS.pack(req.height_cur, req.height_net))
    if req.renewal is not None:
        r = req.renewal
        parts.append(_RENEWAL.pack(r.new_chain_anchor, r.auth, r.switch_margin_k))
    return b"".join(parts)


def _encode_report(rep: AttReport) -> bytes:
    _need_digest("hash_new", rep.hash_new)
    _need_digest("auth_report", rep.auth_report)
    flags = 0
    if rep.lmt_dev is not None:
        _need_digest("lmt_dev", rep.lmt_dev)
        flags |= FLAG_LMT
    out = _HEAD.pack(TYPE_REPORT, flags) + _REP_BODY.pack(
        rep.id_dev, rep.id_par, rep.t_attest_prime, rep.hash_new
    )
    if rep.lmt_dev is not None:
        out += rep.lmt_dev
    return out + rep.auth_report


def decode(data: bytes) -> Message:
    if not data:
        raise MalformedMessage("empty input")
    kind = data[0]
    if kind == TYPE_REQUEST:
        return _decode_request(data)
    if kind == TYPE_REPORT:
        return _decode_report(data)
    raise UnknownMessageType(f"unknown type byte 0x{kind:02x}")


def _decode_request(data: bytes) -> AttRequest:
    if len(data) < 2:
        raise MalformedMessage("truncated header")
    flags = data[1]
    if flags & ~(FLAG_VARIANT_B | FLAG_RENEWAL):
        raise MalformedMessage(f"bad request flags 0x{flags:02x}")
    expected = REQUEST_A_SIZE
    if flags & FLAG_VARIANT_B:
        expected += _HEIGHTS.size
    if flags & FLAG_RENEWAL:
        expected += _RENEWAL.size
    if len(data) != expected:
        raise MalformedMessage(f"request length {len(data)}, expected {expected}")
    id_snd, hash_new, ind, t_attest = _REQ_BODY.unpack_from(data, 2)
    off = REQUEST_A_SIZE
    height_cur = height_net = None
    variant = Variant.A
    if flags & FLAG_VARIANT_B:
        variant = Variant.B
        height_cur, height_net = _HEIGHTS.unpack_from(data, off)
        off += _HEIGHTS.size
    renewal = None
    if flags & FLAG_RENEWAL:
        anchor, auth, k = _RENEWAL.unpack_from(data, off)
        renewal = RenewalPayload(anchor, auth, k)
    return AttRequest(variant, id_snd, hash_new, ind, t_attest, height_cur, height_net, renewal)


def _decode_report(data: bytes) -> AttReport:
    if len(data) < 2:
        raise MalformedMessage("truncated header")
    flags = data[1]
    if flags & ~FLAG_LMT:
        raise MalformedMessage(f"bad report flags 0x{flags:02x}")
    expected = REPORT_RATA_SIZE if flags & FLAG_LMT else REPORT_CASU_SIZE
    if len(data) != expected:
        raise MalformedMessage(f"report length {len(data)}, expected {expected}")
    id_dev, id_par, t_prime, hash_new = _REP_BODY.unpack_from(data, 2)
    off = _HEAD.size + _REP_BODY.size
    lmt = None
    if flags & FLAG_LMT:
        lmt = data[off:off + DIGEST_SIZE]
        off += DIGEST_SIZE
    return AttReport(id_dev, id_par, t_prime, hash_new, data[off:off + DIGEST_SIZE], lmt)


def classify(data: bytes) -> PacketClass:
    if data and data[0] == TYPE_REQUEST:
        return PacketClass.TRAIN_REQUEST
    if data and data[0] == TYPE_REPORT:
        return PacketClass.TRAIN_REPORT
    return PacketClass.OTHER


def report_hash_new(data: bytes) -> bytes:
    """Hash_New of an encoded report without a full decode (forwarders only look at this)."""
    return data[18:50]
