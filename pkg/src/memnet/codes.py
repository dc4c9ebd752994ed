"""Emergent output codes, Hamming bookkeeping and radius-1 decoding."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import Network, forward
from .imaging import LETTERS, GlyphSet, bitmap_to_inputs


class AmbiguousCodebookError(ValueError):
    """Decoding requested from a codebook whose radius-1 balls overlap."""


def hamming(a, b) -> int:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"code lengths differ: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def pairwise_distances(codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes)
    return np.count_nonzero(codes[:, None, :] != codes[None, :, :], axis=-1)


def spacing_of(codes: np.ndarray) -> int:
    """Minimum pairwise distance of a ``(n, bits)`` code array."""
    codes = np.asarray(codes)
    if len(codes) < 2:
        raise ValueError("need at least two codes")
    d = pairwise_distances(codes)
    return int(d[np.triu_indices(len(codes), 1)].min())


def code_to_str(code) -> str:
    return "".join(str(int(b)) for b in code)


def str_to_code(text: str) -> np.ndarray:
    if not text or set(text) - {"0", "1"}:
        raise ValueError(f"not a binary code: {text!r}")
    return np.frombuffer(text.encode(), dtype=np.uint8) - ord("0")


@dataclass(frozen=True, eq=False)
class Codebook:
    main_codes: np.ndarray = field(repr=False)  # (n_chars, n_bits) uint8
    letters: tuple[str, ...] = LETTERS

    def __post_init__(self):
        codes = np.array(self.main_codes, dtype=np.uint8)
        if codes.ndim != 2 or len(codes) != len(self.letters):
            raise ValueError("one code per letter required")
        codes.flags.writeable = False
        object.__setattr__(self, "main_codes", codes)

    def __eq__(self, other):
        return (isinstance(other, Codebook) and self.letters == other.letters
                and np.array_equal(self.main_codes, other.main_codes))

    @property
    def n_bits(self) -> int:
        return self.main_codes.shape[1]

    def code(self, letter: str) -> np.ndarray:
        return self.main_codes[self._index(letter)]

    def _index(self, letter: str) -> int:
        try:
            return self.letters.index(letter)
        except ValueError:
            raise KeyError(f"unknown character {letter!r}") from None

    @property
    def code_sets(self) -> np.ndarray:
        """Main code plus every one-bit neighbour, ``(n_chars, n_bits + 1, n_bits)``."""
        n = self.n_bits
        flips = np.vstack([np.zeros((1, n), np.uint8), np.eye(n, dtype=np.uint8)])
        return self.main_codes[:, None, :] ^ flips[None, :, :]

    @property
    def is_unique(self) -> bool:
        return len({code_to_str(c) for c in self.main_codes}) == len(self.main_codes)

    def to_text(self) -> str:
        return "".join(f"{ch} {code_to_str(c)}\n" for ch, c in zip(self.letters, self.main_codes))

    @classmethod
    def from_text(cls, text: str) -> "Codebook":
        letters, codes = [], []
        for line in text.splitlines():
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"malformed codebook line: {line!r}")
            letters.append(parts[0])
            codes.append(str_to_code(parts[1]))
        return cls(np.array(codes), tuple(letters))


def extract_main_codes(net: Network, glyphs: GlyphSet) -> Codebook:
    x = bitmap_to_inputs(glyphs.bitmaps, net.arch.n_inputs)
    return Codebook(forward(net, x), glyphs.letters)


def min_pairwise_distance(cb: Codebook) -> int:
    return spacing_of(cb.main_codes)


def decode_indices(cb: Codebook, observed: np.ndarray, radius: int = 1) -> np.ndarray:
    """Vectorised decode: character index per observed code, -1 for reject.

    Radius 0 is exact matching and only needs unique codes.
    """
    if len(cb.main_codes) > 1 and min_pairwise_distance(cb) < 2 * radius + 1:
        raise AmbiguousCodebookError(
            f"codebook spacing {min_pairwise_distance(cb)} cannot decode at radius {radius}"
        )
    obs = np.asarray(observed, dtype=np.uint8)
    if obs.shape[-1] != cb.n_bits:
        raise ValueError(f"observed code has {obs.shape[-1]} bits, codebook {cb.n_bits}")
    d = np.count_nonzero(obs[..., None, :] != cb.main_codes, axis=-1)
    best = d.argmin(axis=-1)
    return np.where(d.min(axis=-1) <= radius, best, -1)


def decode(cb: Codebook, observed) -> str | None:
    """Letter whose main code lies within one bit of ``observed``, else ``None``."""
    idx = int(decode_indices(cb, np.asarray(observed)[None, :])[0])
    return None if idx < 0 else cb.letters[idx]


def bit_errors(cb: Codebook, character: str, observed) -> int:
    return hamming(observed, cb.code(character))
