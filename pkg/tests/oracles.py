"""Independent reference implementations used as test oracles.

Nothing here imports trainsim.  SHA-256 follows the FIPS 180-4 description
directly; HMAC follows RFC 2104; the timing equations are re-evaluated term by
term from their published form.
"""

from __future__ import annotations

import struct

_K = [
    0x428A2F98, 0x71374491, 0xB5C0FBCF, 0xE9B5DBA5, 0x3956C25B, 0x59F111F1, 0x923F82A4, 0xAB1C5ED5,
    0xD807AA98, 0x12835B01, 0x243185BE, 0x550C7DC3, 0x72BE5D74, 0x80DEB1FE, 0x9BDC06A7, 0xC19BF174,
    0xE49B69C1, 0xEFBE4786, 0x0FC19DC6, 0x240CA1CC, 0x2DE92C6F, 0x4A7484AA, 0x5CB0A9DC, 0x76F988DA,
    0x983E5152, 0xA831C66D, 0xB00327C8, 0xBF597FC7, 0xC6E00BF3, 0xD5A79147, 0x06CA6351, 0x14292967,
    0x27B70A85, 0x2E1B2138, 0x4D2C6DFC, 0x53380D13, 0x650A7354, 0x766A0ABB, 0x81C2C92E, 0x92722C85,
    0xA2BFE8A1, 0xA81A664B, 0xC24B8B70, 0xC76C51A3, 0xD192E819, 0xD6990624, 0xF40E3585, 0x106AA070,
    0x19A4C116, 0x1E376C08, 0x2748774C, 0x34B0BCB5, 0x391C0CB3, 0x4ED8AA4A, 0x5B9CCA4F, 0x682E6FF3,
    0x748F82EE, 0x78A5636F, 0x84C87814, 0x8CC70208, 0x90BEFFFA, 0xA4506CEB, 0xBEF9A3F7, 0xC67178F2,
]
_H0 = [0x6A09E667, 0xBB67AE85, 0x3C6EF372, 0xA54FF53A, 0x510E527F, 0x9B05688C, 0x1F83D9AB, 0x5BE0CD19]
_M = 0xFFFFFFFF


def _rotr(x, n):
    return ((x >> n) | (x << (32 - n))) & _M


def sha256_ref(data: bytes) -> bytes:
    msg = bytes(data) + b"\x80"
    msg += b"\x00" * ((56 - len(msg)) % 64)
    msg += struct.pack(">Q", len(data) * 8)
    h = list(_H0)
    for off in range(0, len(msg), 64):
        w = list(struct.unpack(">16I", msg[off:off + 64]))
        for t in range(16, 64):
            s0 = _rotr(w[t - 15], 7) ^ _rotr(w[t - 15], 18) ^ (w[t - 15] >> 3)
            s1 = _rotr(w[t - 2], 17) ^ _rotr(w[t - 2], 19) ^ (w[t - 2] >> 10)
            w.append((w[t - 16] + s0 + w[t - 7] + s1) & _M)
        a, b, c, d, e, f, g, hh = h
        for t in range(64):
            S1 = _rotr(e, 6) ^ _rotr(e, 11) ^ _rotr(e, 25)
            ch = (e & f) ^ (~e & g)
            t1 = (hh + S1 + ch + _K[t] + w[t]) & _M
            S0 = _rotr(a, 2) ^ _rotr(a, 13) ^ _rotr(a, 22)
            maj = (a & b) ^ (a & c) ^ (b & c)
            t2 = (S0 + maj) & _M
            a, b, c, d, e, f, g, hh = (t1 + t2) & _M, a, b, c, (d + t1) & _M, e, f, g
        h = [(x + y) & _M for x, y in zip(h, (a, b, c, d, e, f, g, hh))]
    return struct.pack(">8I", *h)


def hmac_ref(key: bytes, msg: bytes) -> bytes:
    block = 64
    if len(key) > block:
        key = sha256_ref(key)
    key = key.ljust(block, b"\x00")
    ipad = bytes(b ^ 0x36 for b in key)
    opad = bytes(b ^ 0x5C for b in key)
    return sha256_ref(opad + sha256_ref(ipad + msg))


# RFC 4231 test cases for HMAC-SHA-256: (key, data, expected hex, truncate-to bytes)
RFC4231 = [
    (b"\x0b" * 20, b"Hi There",
     "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7", 32),
    (b"Jefe", b"what do ya want for nothing?",
     "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843", 32),
    (b"\xaa" * 20, b"\xdd" * 50,
     "773ea91e36800e46854db8ebd09181a72959098b3ef8c122d9635514ced565fe", 32),
    (bytes(range(1, 26)), b"\xcd" * 50,
     "82558a389a443c0ea4cc819899f2083a85f0faa3e578f8077a2e3ff46729665b", 32),
    (b"\x0c" * 20, b"Test With Truncation", "a3b6167473100ee06e0c796c2955552b", 16),
    (b"\xaa" * 131, b"Test Using Larger Than Block-Size Key - Hash Key First",
     "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54", 32),
    (b"\xaa" * 131,
     b"This is a test using a larger than block-size key and a larger than block-size data."
     b" The key needs to be hashed before being used by the HMAC algorithm.",
     "9b09ffa71b942fcb27635fbcd5b0e944bfdc63644f0713938a7f51535c3a35e2", 32),
]


def chain_ref(root: bytes, m: int) -> list[bytes]:
    values = [root]
    for _ in range(m):
        values.append(sha256_ref(values[-1]))
    return values


def all_iterates(start: bytes, upto: int) -> list[bytes]:
    """[H^0(start), H^1(start), ..., H^upto(start)] with the reference hash."""
    out = [start]
    for _ in range(upto):
        out.append(sha256_ref(out[-1]))
    return out


def link_oracle(iterates: list[bytes], cand_index: int, hash_cur: bytes, ind_cur: int) -> bool:
    """Brute force: does hashing the candidate (ind_cur - cand_index) times land on hash_cur?"""
    s = ind_cur - cand_index
    if cand_index < 0 or s <= 0:
        return False
    return iterates[s] == hash_cur


def framed_ref(fields) -> bytes:
    out = b""
    for f in fields:
        out += struct.pack(">I", len(f)) + f
    return out


# timing equations, evaluated the long way round

def timeout_ref(n, t_request, t_hash, t_report, t_mac, t_slack) -> int:
    per_device = 0
    for _ in range(n):
        per_device += t_request
        per_device += t_hash
        per_device += t_report
    return per_device + t_mac + t_slack


def attest_time_ref(height_net, t_request, t_hash, t_slack, t_current) -> int:
    propagation = sum(t_request + t_hash for _ in range(height_net))
    return propagation + t_slack + t_current


def attest_wait_ref(height_net, height_cur, t_request, t_hash) -> int:
    return max(0, height_net - height_cur) * t_request + max(0, height_net - height_cur) * t_hash


def bfs_heights(parent: dict[int, int]) -> dict[int, int]:
    """Heights by repeatedly walking parent pointers; independent of the topology builder."""
    out = {}
    for node in parent:
        h, cur = 0, node
        while cur != 0:
            cur = parent[cur]
            h += 1
        out[node] = h
    return out


def bfs_tree_parent(n: int, d: int) -> dict[int, int]:
    """Grow a d-ary tree breadth-first with an explicit queue, filling children left to right."""
    from collections import deque

    parent = {1: 0}
    queue = deque([1])
    nxt = 2
    while nxt <= n:
        p = queue.popleft()
        for _ in range(d):
            if nxt > n:
                break
            parent[nxt] = p
            queue.append(nxt)
            nxt += 1
    return parent


def ceil_log2(x: int) -> int:
    k = 0
    while (1 << k) < x:
        k += 1
    return k
