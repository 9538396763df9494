"""Optical security-frame codec.

A frame is 7 two-headlight flashes (14 bits): a start flash ``11``, an
interrupt ``00``, then three information flashes separated by two more
interrupts.  The three information flashes (each one of ``11``, ``10``,
``01``) select one of 27 payload classes.  Two sentinel codes extend the
class space: 28 for arbitrary flashing that does not form a frame, 29 for
no light at all.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "Symbol",
    "SecurityFrame",
    "ClassLabel",
    "FRAME_SYMBOLS",
    "NUM_VALID_CLASSES",
    "RANDOM_FLASH_CODE",
    "ALL_ZERO_CODE",
    "symbol_value",
    "value_symbol",
    "encode_class",
    "decode_symbols",
    "mirror",
    "mirror_symbol",
]

FRAME_SYMBOLS = 7
NUM_VALID_CLASSES = 27
RANDOM_FLASH_CODE = 28
ALL_ZERO_CODE = 29


class Symbol(enum.IntEnum):
    """One simultaneous flash of the two headlights, packed as (left << 1) | right."""

    OFF = 0b00
    RIGHT = 0b01
    LEFT = 0b10
    BOTH = 0b11

    @property
    def left_bit(self) -> int:
        return (self.value >> 1) & 1

    @property
    def right_bit(self) -> int:
        return self.value & 1

    @classmethod
    def from_bits(cls, left: int, right: int) -> "Symbol":
        return cls((int(left) << 1) | int(right))

    @classmethod
    def from_text(cls, text: str) -> "Symbol":
        if len(text) != 2 or text[0] not in "01" or text[1] not in "01":
            raise ValueError(f"bad symbol text {text!r}")
        return cls.from_bits(int(text[0]), int(text[1]))

    def to_text(self) -> str:
        return f"{self.left_bit}{self.right_bit}"


# Payload digit map.  Fitted to the four published class/pattern pairs
# (3: 11-11-01, 4: 11-10-11, 14: 10-10-10, 15: 10-10-01); the fit is unique
# over all digit-value permutations and digit orders, see the codec tests.
_SYMBOL_DIGIT = {Symbol.BOTH: 0, Symbol.LEFT: 1, Symbol.RIGHT: 2}
_DIGIT_SYMBOL = {v: k for k, v in _SYMBOL_DIGIT.items()}


def symbol_value(s: Symbol) -> int:
    """Base-3 digit carried by an information symbol (interrupts carry none)."""
    s = Symbol(s)
    if s is Symbol.OFF:
        raise ValueError("00 is an interrupt symbol and carries no payload digit")
    return _SYMBOL_DIGIT[s]


def value_symbol(v: int) -> Symbol:
    """Inverse of :func:`symbol_value`."""
    if v not in _DIGIT_SYMBOL:
        raise ValueError(f"digit must be 0, 1 or 2, got {v}")
    return _DIGIT_SYMBOL[v]


def mirror_symbol(s: Symbol) -> Symbol:
    """Swap the left/right bits, as seen by a camera facing the vehicle."""
    s = Symbol(s)
    return Symbol.from_bits(s.right_bit, s.left_bit)


@dataclass(frozen=True)
class ClassLabel:
    """Decoded payload class: 1..27 valid, 28 random flash, 29 all zero."""

    code: int

    def __post_init__(self):
        if not (1 <= self.code <= NUM_VALID_CLASSES
                or self.code in (RANDOM_FLASH_CODE, ALL_ZERO_CODE)):
            raise ValueError(f"class code out of range: {self.code}")

    @classmethod
    def valid(cls, index: int) -> "ClassLabel":
        if not 1 <= index <= NUM_VALID_CLASSES:
            raise ValueError(f"valid class index must be 1..27, got {index}")
        return cls(index)

    @classmethod
    def random_flash(cls) -> "ClassLabel":
        return cls(RANDOM_FLASH_CODE)

    @classmethod
    def all_zero(cls) -> "ClassLabel":
        return cls(ALL_ZERO_CODE)

    @property
    def is_valid(self) -> bool:
        return 1 <= self.code <= NUM_VALID_CLASSES

    @property
    def kind(self) -> str:
        if self.is_valid:
            return "valid"
        return "random_flash" if self.code == RANDOM_FLASH_CODE else "all_zero"

    def __str__(self) -> str:
        return f"class{self.code}" if self.is_valid else self.kind


@dataclass(frozen=True)
class SecurityFrame:
    """The 7-symbol (14-bit) flash sequence, stored transmitter-side."""

    symbols: tuple

    def __post_init__(self):
        syms = tuple(Symbol(s) for s in self.symbols)
        object.__setattr__(self, "symbols", syms)
        if len(syms) != FRAME_SYMBOLS:
            raise ValueError(f"frame must have {FRAME_SYMBOLS} symbols, got {len(syms)}")
        if not is_well_formed(syms):
            raise ValueError(f"not a well-formed security frame: {render_symbols(syms)}")

    @property
    def info_symbols(self) -> tuple:
        """The three payload flashes (positions 2, 4, 6)."""
        return self.symbols[2], self.symbols[4], self.symbols[6]

    @property
    def bit_count(self) -> int:
        return 2 * FRAME_SYMBOLS

    def __str__(self) -> str:
        return render_symbols(self.symbols)

    @classmethod
    def from_text(cls, text: str) -> "SecurityFrame":
        return cls(parse_symbols(text))


def render_symbols(symbols: Iterable[Symbol]) -> str:
    """Dash-separated bit pairs, e.g. ``11-00-10-00-10-00-01``."""
    return "-".join(Symbol(s).to_text() for s in symbols)


def parse_symbols(text: str) -> tuple:
    return tuple(Symbol.from_text(part) for part in text.strip().split("-"))


def is_well_formed(symbols: Sequence[Symbol]) -> bool:
    """Frame structure check: preamble 11-00, interrupts at 3 and 5, payload never 00."""
    if len(symbols) != FRAME_SYMBOLS:
        return False
    s = [Symbol(x) for x in symbols]
    if s[0] is not Symbol.BOTH or s[1] is not Symbol.OFF:
        return False
    if s[3] is not Symbol.OFF or s[5] is not Symbol.OFF:
        return False
    return all(s[i] is not Symbol.OFF for i in (2, 4, 6))


def encode_class(label) -> SecurityFrame:
    """Build the frame whose payload encodes a valid class index.

    The index is read base-3 from the information symbols, most significant
    first: index = 9*v(a) + 3*v(b) + v(c) + 1.
    """
    index = label.code if isinstance(label, ClassLabel) else int(label)
    if not 1 <= index <= NUM_VALID_CLASSES:
        raise ValueError(f"encodable class index must be 1..27, got {index}")
    rem = index - 1
    a, rem = divmod(rem, 9)
    b, c = divmod(rem, 3)
    return SecurityFrame((
        Symbol.BOTH, Symbol.OFF,
        value_symbol(a), Symbol.OFF,
        value_symbol(b), Symbol.OFF,
        value_symbol(c),
    ))


def decode_symbols(seq: Sequence[Symbol]) -> ClassLabel:
    """Classify any 7-symbol observation.

    Well-formed frames map to their class, a fully dark sequence maps to the
    all-zero code, and anything else counts as random flashing.  Total: every
    input yields a label.
    """
    syms = [Symbol(s) for s in seq]
    if len(syms) != FRAME_SYMBOLS:
        raise ValueError(f"expected {FRAME_SYMBOLS} symbols, got {len(syms)}")
    if all(s is Symbol.OFF for s in syms):
        return ClassLabel.all_zero()
    if not is_well_formed(syms):
        return ClassLabel.random_flash()
    a, b, c = (symbol_value(syms[i]) for i in (2, 4, 6))
    return ClassLabel.valid(9 * a + 3 * b + c + 1)


def mirror(frame):
    """Left/right swap of every symbol (10 and 01 trade places); an involution.

    Accepts a :class:`SecurityFrame`, a single :class:`Symbol`, or a symbol
    sequence, and returns the same type.
    """
    if isinstance(frame, SecurityFrame):
        return SecurityFrame(tuple(mirror_symbol(s) for s in frame.symbols))
    if isinstance(frame, Symbol):
        return mirror_symbol(frame)
    return tuple(mirror_symbol(s) for s in frame)
