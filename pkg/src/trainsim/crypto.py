"""Hash chains, chain renewal and HMAC framing.

The verifier owns a Lamport chain ``x_0 -> x_1 -> ... -> x_m`` with
``x_{i+1} = SHA-256(x_i)``.  Provers hold the anchor ``x_m`` and the verifier
reveals links downward (``x_{m-1}`` first).  Indices always refer to the
subscript of ``x``: the root has index 0, the anchor index ``m``.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ChainDepleted, ChainFormatError, InvalidParameter

DIGEST_SIZE = 32

_sha256 = hashlib.sha256


def H(data: bytes) -> bytes:
    return _sha256(data).digest()


def hash_iter(value: bytes, times: int) -> bytes:
    """Apply ``H`` ``times`` times (``times == 0`` returns ``value`` unchanged)."""
    for _ in range(times):
        value = _sha256(value).digest()
    return value


def _check_digest(name: str, value: bytes) -> None:
    if not isinstance(value, (bytes, bytearray)) or len(value) != DIGEST_SIZE:
        raise InvalidParameter(f"{name} must be {DIGEST_SIZE} bytes")


@dataclass(frozen=True, slots=True)
class ChainPosition:
    """A prover's view of the chain: ``(Hash_Cur, HashInd_Cur)``."""

    hash_cur: bytes
    ind_cur: int

    def __post_init__(self):
        _check_digest("hash_cur", self.hash_cur)
        if self.ind_cur < 0:
            raise InvalidParameter("ind_cur must be non-negative")


class HashChain:
    """An ``m``-link hash chain with every link precomputed.

    ``link(i)`` returns ``x_i`` for ``0 <= i <= m``; ``link(0)`` is the secret root.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Sequence[bytes]):
        self._values = tuple(values)

    @property
    def m(self) -> int:
        return len(self._values) - 1

    @property
    def root(self) -> bytes:
        return self._values[0]

    @property
    def links(self) -> tuple[bytes, ...]:
        """``x_1 .. x_m`` in order."""
        return self._values[1:]

    def anchor(self) -> bytes:
        return self._values[-1]

    def link(self, index: int) -> bytes:
        if not 0 <= index <= self.m:
            raise InvalidParameter(f"link index {index} outside 0..{self.m}")
        return self._values[index]

    def anchor_position(self) -> ChainPosition:
        return ChainPosition(self.anchor(), self.m)

    def __eq__(self, other):
        return isinstance(other, HashChain) and self._values == other._values

    def __hash__(self):
        return hash(self._values)

    def __repr__(self):
        return f"HashChain(m={self.m}, anchor={self.anchor().hex()[:16]}...)"

    # text export: "m=<int>", hex root, then x_1..x_m one per line
    def to_text(self) -> str:
        lines = [f"m={self.m}", self.root.hex()]
        lines.extend(v.hex() for v in self.links)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "HashChain":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("m="):
            raise ChainFormatError("first line must be 'm=<int>'")
        try:
            m = int(lines[0][2:])
        except ValueError:
            raise ChainFormatError("chain length is not an integer") from None
        if m < 1:
            raise ChainFormatError("chain length must be positive")
        body = lines[1:]
        if len(body) != m + 1:
            raise ChainFormatError(f"expected {m + 1} hex lines after header, got {len(body)}")
        try:
            values = [bytes.fromhex(line.strip()) for line in body]
        except ValueError:
            raise ChainFormatError("non-hex chain line") from None
        for i, v in enumerate(values):
            if len(v) != DIGEST_SIZE:
                raise ChainFormatError(f"line {i + 2} is not a {DIGEST_SIZE}-byte value")
            if i and H(values[i - 1]) != v:
                raise ChainFormatError(f"link x_{i} is not H(x_{i - 1})")
        return cls(values)


def generate_chain(root: bytes, m: int) -> HashChain:
    _check_digest("root", root)
    if m < 1:
        raise InvalidParameter("chain length m must be >= 1")
    values = [bytes(root)]
    for _ in range(m):
        values.append(_sha256(values[-1]).digest())
    return HashChain(values)


def verify_link(candidate: bytes, cand_index: int, position: ChainPosition) -> bool:
    """Accept iff ``cand_index < ind_cur`` and ``H^(ind_cur - cand_index)(candidate) == hash_cur``."""
    if cand_index < 0 or cand_index >= position.ind_cur:
        return False
    return hmac.compare_digest(
        hash_iter(candidate, position.ind_cur - cand_index), position.hash_cur
    )


def frame_fields(fields: Iterable[bytes]) -> bytes:
    """Length-prefix every field (4-byte big-endian) and concatenate."""
    return b"".join(len(f).to_bytes(4, "big") + f for f in fields)


def hmac_sha256(key: bytes, msg: bytes) -> bytes:
    return hmac.digest(key, msg, "sha256")


def mac(key: bytes, fields: Sequence[bytes]) -> bytes:
    if not fields:
        raise InvalidParameter("mac needs at least one field")
    return hmac.digest(key, frame_fields(fields), "sha256")


@dataclass(frozen=True, slots=True)
class RenewalPayload:
    """NewChain anchor plus its delayed-disclosure authenticator."""

    new_chain_anchor: bytes
    auth: bytes
    switch_margin_k: int

    def __post_init__(self):
        _check_digest("new_chain_anchor", self.new_chain_anchor)
        _check_digest("auth", self.auth)
        if self.switch_margin_k < 0:
            raise InvalidParameter("switch margin k must be non-negative")


def renewal_key_index(current_index: int, k: int) -> int:
    """Index of the link that keys a payload announced alongside ``x_current_index``."""
    return current_index - k - 1


def build_renewal(
    old_chain: HashChain, current_index: int, new_anchor: bytes, k: int
) -> RenewalPayload:
    if k < 0:
        raise InvalidParameter("k must be non-negative")
    if not 0 <= current_index <= old_chain.m:
        raise InvalidParameter(f"current_index {current_index} outside 0..{old_chain.m}")
    key_index = renewal_key_index(current_index, k)
    if key_index < 0:
        raise ChainDepleted(
            f"no unreleased link {k + 1} steps below index {current_index}"
        )
    auth = mac(old_chain.link(key_index), [new_anchor])
    return RenewalPayload(bytes(new_anchor), auth, k)


def verify_renewal(stored: RenewalPayload, revealed_link: bytes) -> bool:
    expected = mac(revealed_link, [stored.new_chain_anchor])
    return hmac.compare_digest(expected, stored.auth)
