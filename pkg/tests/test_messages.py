import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trainsim import messages
from trainsim.crypto import RenewalPayload
from trainsim.errors import InvalidParameter, MalformedMessage, UnknownMessageType
from trainsim.messages import AttReport, AttRequest, PacketClass, Variant, decode, encode

digest = st.binary(min_size=32, max_size=32)
u32 = st.integers(0, 2**32 - 1)
u64 = st.integers(0, 2**64 - 1)
renewals = st.none() | st.builds(RenewalPayload, digest, digest, u32)


@st.composite
def requests(draw):
    variant = draw(st.sampled_from([Variant.A, Variant.B]))
    heights = (draw(u32), draw(u32)) if variant is Variant.B else (None, None)
    return AttRequest(variant, draw(u32), draw(digest), draw(u32), draw(u64), *heights,
                      renewal=draw(renewals))


reports = st.builds(AttReport, u32, u32, u64, digest, digest, st.none() | digest)
any_message = requests() | reports


def test_sizes():
    assert messages.REQUEST_A_SIZE == 50
    assert messages.REQUEST_B_SIZE == messages.REQUEST_A_SIZE + 8
    assert messages.RENEWAL_SIZE == 68
    assert messages.REPORT_CASU_SIZE == 82
    assert messages.REPORT_RATA_SIZE == 114


def test_zero_request_layout():
    data = encode(AttRequest(Variant.A, 0, bytes(32), 0, 0))
    assert data == b"\x01\x00" + bytes(48)


def test_field_order_big_endian():
    req = AttRequest(Variant.B, 0x01020304, b"\xaa" * 32, 7, 0x0102030405060708, 1, 9)
    data = encode(req)
    assert data[:2] == b"\x01\x01"
    assert data[2:6] == b"\x01\x02\x03\x04"
    assert data[6:38] == b"\xaa" * 32
    assert data[38:42] == (7).to_bytes(4, "big")
    assert data[42:50] == bytes(range(1, 9))
    assert data[50:58] == (1).to_bytes(4, "big") + (9).to_bytes(4, "big")


def test_report_hash_new_offset():
    rep = AttReport(3, 1, 99, b"\x11" * 32, b"\x22" * 32, b"\x33" * 32)
    data = encode(rep)
    assert data[1] == messages.FLAG_LMT
    assert messages.report_hash_new(data) == rep.hash_new


@settings(max_examples=10_000, deadline=None)
@given(any_message)
def test_round_trip(msg):
    data = encode(msg)
    assert decode(data) == msg
    with pytest.raises(MalformedMessage):
        decode(data[:-1])


@settings(max_examples=300, deadline=None)
@given(any_message, any_message)
def test_encode_injective(a, b):
    assert (encode(a) == encode(b)) == (a == b)


def test_sizes_constant_per_flags():
    rng = random.Random(0)
    for _ in range(50):
        h = rng.randbytes(32)
        assert len(encode(AttRequest(Variant.A, rng.getrandbits(32), h, 1, rng.getrandbits(64)))) == 50
        assert len(encode(AttReport(1, 2, rng.getrandbits(64), h, h))) == 82


def test_decode_errors():
    with pytest.raises(MalformedMessage):
        decode(b"")
    with pytest.raises(UnknownMessageType):
        decode(b"\x7f" + bytes(49))
    with pytest.raises(MalformedMessage):
        decode(b"\x01")
    with pytest.raises(MalformedMessage):
        decode(b"\x01\x80" + bytes(48))
    with pytest.raises(MalformedMessage):
        decode(b"\x02\x01" + bytes(80))
    with pytest.raises(MalformedMessage):
        decode(encode(AttRequest(Variant.A, 0, bytes(32), 0, 0)) + b"\x00")


def test_encode_rejects_invalid():
    with pytest.raises(InvalidParameter):
        encode(AttRequest(Variant.A, 0, b"short", 0, 0))
    with pytest.raises(InvalidParameter):
        encode(AttRequest(Variant.B, 0, bytes(32), 0, 0))
    with pytest.raises(InvalidParameter):
        encode(AttRequest(Variant.A, 0, bytes(32), 0, 0, 1, 2))
    with pytest.raises(InvalidParameter):
        encode(AttRequest(Variant.A, 2**32, bytes(32), 0, 0))
    with pytest.raises(InvalidParameter):
        encode("not a message")


def test_classify():
    assert messages.classify(b"\x01") is PacketClass.TRAIN_REQUEST
    assert messages.classify(b"\x02\x00") is PacketClass.TRAIN_REPORT
    assert messages.classify(b"\xaa") is PacketClass.OTHER
    assert messages.classify(b"") is PacketClass.OTHER


def test_report_mac_fields():
    h = b"\x01" * 32
    assert len(messages.report_mac_fields(1, 2, h, None)) == 3
    fields = messages.report_mac_fields(1, 2, h, b"\x02" * 32)
    assert fields[0] == b"\x00\x00\x00\x01"
    assert fields[1] == (2).to_bytes(8, "big")
    assert len(fields) == 4
