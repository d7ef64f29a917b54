import hashlib
import hmac
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import RFC4231, all_iterates, chain_ref, framed_ref, hmac_ref, link_oracle, sha256_ref
from trainsim import crypto
from trainsim.crypto import ChainPosition, HashChain, RenewalPayload
from trainsim.errors import ChainDepleted, ChainFormatError, InvalidParameter

ZERO = bytes(32)


def test_reference_sha256_matches_fips_vectors():
    assert sha256_ref(b"abc").hex() == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
    assert sha256_ref(b"").hex() == (
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855")
    for n in (55, 56, 63, 64, 65, 119, 200):
        assert sha256_ref(bytes(n)) == hashlib.sha256(bytes(n)).digest()


@pytest.mark.parametrize("key,data,expected,size", RFC4231)
def test_hmac_rfc4231(key, data, expected, size):
    assert crypto.hmac_sha256(key, data)[:size].hex() == expected
    assert hmac_ref(key, data)[:size].hex() == expected


def test_generate_chain_small_examples():
    assert crypto.generate_chain(ZERO, 1).anchor() == hashlib.sha256(ZERO).digest()
    # frozen from the reference implementation
    assert crypto.generate_chain(ZERO, 2).anchor() == sha256_ref(sha256_ref(ZERO))


def test_generate_chain_64_links():
    root = bytes(range(32))
    chain = crypto.generate_chain(root, 64)
    ref = chain_ref(root, 64)
    assert chain.root == root
    assert list(chain.links) == ref[1:]
    assert chain.anchor() == ref[64]
    for i in range(65):
        assert chain.link(i) == ref[i]


def test_generate_chain_rejects_bad_input():
    with pytest.raises(InvalidParameter):
        crypto.generate_chain(ZERO, 0)
    with pytest.raises(InvalidParameter):
        crypto.generate_chain(b"short", 4)


def test_no_repeated_links():
    chain = crypto.generate_chain(b"\x07" * 32, 64)
    values = [chain.link(i) for i in range(65)]
    assert len(set(values)) == len(values)


def test_verify_link_examples():
    chain = crypto.generate_chain(b"\x01" * 32, 10)
    i = 7
    pos = ChainPosition(chain.link(i), i)
    assert crypto.verify_link(chain.link(i - 1), i - 1, pos)
    assert crypto.verify_link(chain.link(i - 3), i - 3, pos)
    assert sha256_ref(sha256_ref(sha256_ref(chain.link(4)))) == chain.link(7)
    assert not crypto.verify_link(chain.link(i), i, pos)
    assert not crypto.verify_link(chain.link(8), 8, pos)
    assert not crypto.verify_link(chain.link(5), 4, pos)


def test_verify_link_exhaustive_against_oracle():
    rng = random.Random(5)
    for m in (1, 2, 3, 17, 64):
        root = rng.randbytes(32)
        chain = crypto.generate_chain(root, m)
        for i in range(m + 1):
            pos = ChainPosition(chain.link(i), i)
            for j in range(m + 1):
                cand = chain.link(j)
                expected = link_oracle(all_iterates(cand, max(i - j, 0)), j, chain.link(i), i)
                got = crypto.verify_link(cand, j, pos)
                assert got == expected, (m, i, j)
                assert got == (j < i)


def test_mac_framing():
    key = b"k" * 32
    assert crypto.mac(key, [b"ab"]) == hmac_ref(key, framed_ref([b"ab"]))
    assert crypto.frame_fields([b"ab", b""]) == framed_ref([b"ab", b""])
    assert crypto.mac(key, [b"b"]) != crypto.mac(key, [b"b", b""])
    assert crypto.mac(key, [b"ab", b"c"]) != crypto.mac(key, [b"a", b"bc"])
    with pytest.raises(InvalidParameter):
        crypto.mac(key, [])


def test_mac_single_byte_flip_changes_tag():
    rng = random.Random(11)
    for _ in range(1000):
        key = rng.randbytes(32)
        fields = [rng.randbytes(rng.randint(1, 40)) for _ in range(rng.randint(1, 4))]
        tag = crypto.mac(key, fields)
        f = rng.randrange(len(fields))
        pos = rng.randrange(len(fields[f]))
        flipped = bytearray(fields[f])
        flipped[pos] ^= 1 << rng.randrange(8)
        assert crypto.mac(key, fields[:f] + [bytes(flipped)] + fields[f + 1:]) != tag


@settings(max_examples=300, deadline=None)
@given(st.lists(st.binary(max_size=12), min_size=1, max_size=4),
       st.lists(st.binary(max_size=12), min_size=1, max_size=4))
def test_mac_framing_injective(a, b):
    key = b"\x42" * 32
    assert (crypto.mac(key, a) == crypto.mac(key, b)) == (a == b)


def test_build_renewal_key_indices():
    old = crypto.generate_chain(b"\x03" * 32, 8)
    new_anchor = crypto.generate_chain(b"\x04" * 32, 8).anchor()
    p = crypto.build_renewal(old, 1, new_anchor, 0)
    assert p.auth == crypto.mac(old.link(0), [new_anchor])
    p = crypto.build_renewal(old, old.m, new_anchor, 2)
    assert p.auth == hmac.new(old.link(old.m - 3), framed_ref([new_anchor]), "sha256").digest()
    with pytest.raises(ChainDepleted):
        crypto.build_renewal(old, 2, new_anchor, 2)
    with pytest.raises(InvalidParameter):
        crypto.build_renewal(old, 2, new_anchor, -1)


def test_renewal_round_trip_all_k_and_indices():
    old = crypto.generate_chain(b"\x05" * 32, 12)
    new_anchor = crypto.generate_chain(b"\x06" * 32, 12).anchor()
    for k in range(5):
        for cur in range(k + 1, old.m + 1):
            payload = crypto.build_renewal(old, cur, new_anchor, k)
            key_link = old.link(crypto.renewal_key_index(cur, k))
            assert crypto.verify_renewal(payload, key_link)
            assert not crypto.verify_renewal(payload, old.link(cur))


def test_renewal_tamper_rejected():
    old = crypto.generate_chain(b"\x08" * 32, 8)
    new_anchor = crypto.generate_chain(b"\x09" * 32, 8).anchor()
    payload = crypto.build_renewal(old, 5, new_anchor, 2)
    key = old.link(2)
    other = crypto.generate_chain(b"\x0a" * 32, 8).anchor()
    assert not crypto.verify_renewal(RenewalPayload(other, payload.auth, 2), key)
    rng = random.Random(3)
    for _ in range(1000):
        auth = bytearray(payload.auth)
        auth[rng.randrange(32)] ^= 1 << rng.randrange(8)
        assert not crypto.verify_renewal(RenewalPayload(new_anchor, bytes(auth), 2), key)


def test_chain_text_round_trip():
    chain = crypto.generate_chain(b"\x0b" * 32, 5)
    text = chain.to_text()
    assert len(text.splitlines()) == 5 + 2
    assert HashChain.from_text(text) == chain


@pytest.mark.parametrize("mutate", [
    lambda t: "",
    lambda t: t.replace("m=5", "m=x"),
    lambda t: t.replace("m=5", "m=0"),
    lambda t: "\n".join(t.splitlines()[:-1]),
    lambda t: t.replace(t.splitlines()[3], "zz" * 32),
    lambda t: t.replace(t.splitlines()[3], "00" * 32),
    lambda t: t.replace(t.splitlines()[3], "00" * 16),
])
def test_chain_text_errors(mutate):
    text = crypto.generate_chain(b"\x0c" * 32, 5).to_text()
    with pytest.raises(ChainFormatError):
        HashChain.from_text(mutate(text))


def test_chain_position_validation():
    with pytest.raises(InvalidParameter):
        ChainPosition(b"x", 1)
    with pytest.raises(InvalidParameter):
        ChainPosition(ZERO, -1)
