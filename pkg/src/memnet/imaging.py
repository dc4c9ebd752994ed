"""Character bitmaps and the random deformation model.

Bitmaps are 2-D ``uint8`` numpy arrays indexed ``[y, x]`` with 1 = ink.
Geometric operations use inverse-mapped nearest-neighbour sampling about the
pixel-centre midpoint ``((W-1)/2, (H-1)/2)`` and fill with background 0.
"""
from __future__ import annotations

import string
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

LETTERS = tuple(string.ascii_uppercase)
GLYPH_SIZE = 36
DEFAULT_ORDER = ("scale", "rotate", "shift", "noise")


class GlyphError(Exception):
    """Base class for glyph-set loading problems."""


class MissingGlyphError(GlyphError):
    pass


class GlyphDimensionError(GlyphError):
    pass


class PBMParseError(GlyphError):
    pass


# --- portable bitmap (P1) -------------------------------------------------

def parse_pbm(text: str) -> np.ndarray:
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "P1":
        raise PBMParseError("missing P1 magic")
    try:
        width, height = int(tokens[1]), int(tokens[2])
    except (IndexError, ValueError):
        raise PBMParseError("bad width/height header") from None
    # Plain PBM allows bits without separating whitespace.
    bits = "".join(tokens[3:])
    if set(bits) - {"0", "1"}:
        raise PBMParseError("pixel data must be 0/1")
    if len(bits) != width * height:
        raise PBMParseError(f"expected {width * height} pixels, found {len(bits)}")
    return np.frombuffer(bits.encode(), dtype=np.uint8).reshape(height, width) - ord("0")


def format_pbm(bmp: np.ndarray) -> str:
    bmp = np.asarray(bmp, dtype=np.uint8)
    rows = "\n".join(" ".join(str(int(b)) for b in row) for row in bmp)
    return f"P1\n{bmp.shape[1]} {bmp.shape[0]}\n{rows}\n"


def read_pbm(path) -> np.ndarray:
    try:
        return parse_pbm(Path(path).read_text())
    except PBMParseError as exc:
        raise PBMParseError(f"{path}: {exc}") from None


def write_pbm(path, bmp: np.ndarray) -> None:
    Path(path).write_text(format_pbm(bmp))


# --- glyph sets -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GlyphSet:
    bitmaps: np.ndarray = field(repr=False)  # (26, H, W) uint8
    provenance: str = "builtin"
    letters: tuple[str, ...] = LETTERS

    def __len__(self):
        return len(self.bitmaps)

    def __getitem__(self, key):
        if isinstance(key, str):
            key = self.letters.index(key)
        return self.bitmaps[key]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bitmaps.shape[1:]


def load_glyphs(source="builtin", size: int = GLYPH_SIZE) -> GlyphSet:
    """Load 26 glyphs A-Z from the built-in set or a directory of ``X.pbm`` files."""
    if str(source) == "builtin":
        root = resources.files("memnet") / "glyphs"
        provenance = "builtin:DejaVuSans-Bold-36"
    else:
        root = Path(source)
        if not root.is_dir():
            raise GlyphError(f"glyph directory {root} does not exist")
        provenance = str(root)
    bitmaps = []
    for ch in LETTERS:
        item = root / f"{ch}.pbm"
        if not item.is_file():
            raise MissingGlyphError(f"missing glyph {ch}")
        try:
            bmp = parse_pbm(item.read_text())
        except PBMParseError as exc:
            raise PBMParseError(f"{item}: {exc}") from None
        if bmp.shape != (size, size):
            raise GlyphDimensionError(
                f"{item}: glyph {ch} is {bmp.shape[1]}x{bmp.shape[0]}, expected {size}x{size}"
            )
        bitmaps.append(bmp)
    arr = np.stack(bitmaps)
    arr.flags.writeable = False
    return GlyphSet(arr, provenance)


def export_glyphs(glyphs: GlyphSet, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for ch, bmp in zip(glyphs.letters, glyphs.bitmaps):
        path = directory / f"{ch}.pbm"
        write_pbm(path, bmp)
        paths.append(path)
    return paths


# --- deformations ---------------------------------------------------------

def apply_salt_pepper(bmp: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    """Replace each pixel, with probability ``p``, by a fair random bit."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise probability {p} outside [0, 1]")
    bmp = np.asarray(bmp, dtype=np.uint8)
    hit = rng.random(bmp.shape) < p
    coin = rng.integers(0, 2, size=bmp.shape, dtype=np.uint8)
    return np.where(hit, coin, bmp)


def _resample(bmp: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    h, w = bmp.shape
    ix = np.floor(sx + 0.5).astype(np.int64)
    iy = np.floor(sy + 0.5).astype(np.int64)
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    out = np.zeros_like(bmp)
    out[inside] = bmp[iy[inside], ix[inside]]
    return out


def _offsets(shape):
    h, w = shape
    y, x = np.mgrid[0:h, 0:w].astype(float)
    return x - (w - 1) / 2, y - (h - 1) / 2


def rotate(bmp: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate clockwise (as displayed, y pointing down) by ``degrees``."""
    bmp = np.asarray(bmp, dtype=np.uint8)
    if degrees == 0:
        return bmp.copy()
    h, w = bmp.shape
    dx, dy = _offsets(bmp.shape)
    t = np.deg2rad(degrees)
    c, s = np.cos(t), np.sin(t)
    sx = (w - 1) / 2 + c * dx + s * dy
    sy = (h - 1) / 2 - s * dx + c * dy
    return _resample(bmp, sx, sy)


def scale(bmp: np.ndarray, factor: float) -> np.ndarray:
    if not factor > 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    bmp = np.asarray(bmp, dtype=np.uint8)
    if factor == 1:
        return bmp.copy()
    h, w = bmp.shape
    dx, dy = _offsets(bmp.shape)
    return _resample(bmp, (w - 1) / 2 + dx / factor, (h - 1) / 2 + dy / factor)


def shift(bmp: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Output pixel ``(x, y)`` takes input pixel ``(x - dx, y - dy)``."""
    bmp = np.asarray(bmp, dtype=np.uint8)
    h, w = bmp.shape
    dx, dy = int(dx), int(dy)
    out = np.zeros_like(bmp)
    if abs(dx) >= w or abs(dy) >= h:
        return out
    out[max(dy, 0):h + min(dy, 0), max(dx, 0):w + min(dx, 0)] = \
        bmp[max(-dy, 0):h - max(dy, 0), max(-dx, 0):w - max(dx, 0)]
    return out


@dataclass(frozen=True)
class DeformationParams:
    noise_p: float = 0.0
    rotation_deg: float = 0.0
    scale: float = 1.0
    shift_x: int = 0
    shift_y: int = 0

    def __post_init__(self):
        if not 0.0 <= self.noise_p <= 1.0:
            raise ValueError("noise_p must lie in [0, 1]")
        if not self.scale > 0:
            raise ValueError("scale must be positive")


IDENTITY = DeformationParams()


@dataclass(frozen=True)
class DeformationDistribution:
    """Spread of each deformation.

    In ``"normal"`` mode every field is a centred normal with the given
    standard deviation, truncated to +-3 sigma.  In ``"uniform"`` mode the
    values are half-widths of uniform ranges.  With ``composed=False`` each
    sample applies a single, randomly chosen kind of deformation.
    """

    sigma_noise: float = 0.0
    sigma_rot: float = 0.0
    sigma_scale: float = 0.0
    sigma_shift: float = 0.0
    mode: str = "normal"
    composed: bool = True
    order: tuple[str, ...] = DEFAULT_ORDER

    def __post_init__(self):
        if min(self.sigma_noise, self.sigma_rot, self.sigma_scale, self.sigma_shift) < 0:
            raise ValueError("deformation spreads must be nonnegative")
        if self.mode not in ("normal", "uniform"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if sorted(self.order) != sorted(DEFAULT_ORDER):
            raise ValueError(f"order must be a permutation of {DEFAULT_ORDER}")
        if self.mode == "normal" and self.sigma_scale * 3 >= 1:
            raise ValueError("sigma_scale too large: scale factor could reach zero")

    @property
    def is_identity(self) -> bool:
        return not (self.sigma_noise or self.sigma_rot or self.sigma_scale or self.sigma_shift)


TRAIN_DIST = DeformationDistribution(0.04, 5.0, 0.05, 5.0)
TEST_DIST = DeformationDistribution(0.12, 15.0, 0.15, 15.0)


def truncated_normal(sigma: float, rng: np.random.Generator, bound: float = 3.0) -> float:
    if sigma == 0:
        return 0.0
    while True:
        x = rng.normal(0.0, sigma)
        if abs(x) <= bound * sigma:
            return float(x)


def sample_params(dist: DeformationDistribution, rng: np.random.Generator) -> DeformationParams:
    if dist.mode == "normal":
        draw = lambda s: truncated_normal(s, rng)  # noqa: E731
    else:
        draw = lambda s: float(rng.uniform(-s, s)) if s else 0.0  # noqa: E731
    active = {"noise", "rotate", "scale", "shift"}
    if not dist.composed:
        active = {("noise", "rotate", "scale", "shift")[rng.integers(4)]}
    # Every draw is made regardless of ``active`` so the stream layout is fixed.
    noise = min(abs(draw(dist.sigma_noise)), 1.0)
    rot = draw(dist.sigma_rot)
    sc = 1.0 + draw(dist.sigma_scale)
    sx = int(np.rint(draw(dist.sigma_shift)))
    sy = int(np.rint(draw(dist.sigma_shift)))
    return DeformationParams(
        noise_p=noise if "noise" in active else 0.0,
        rotation_deg=rot if "rotate" in active else 0.0,
        scale=sc if "scale" in active else 1.0,
        shift_x=sx if "shift" in active else 0,
        shift_y=sy if "shift" in active else 0,
    )


def deform(bmp: np.ndarray, params: DeformationParams, rng: np.random.Generator,
           order: tuple[str, ...] = DEFAULT_ORDER) -> np.ndarray:
    out = np.asarray(bmp, dtype=np.uint8)
    for step in order:
        if step == "scale":
            out = scale(out, params.scale)
        elif step == "rotate":
            out = rotate(out, params.rotation_deg)
        elif step == "shift":
            out = shift(out, params.shift_x, params.shift_y)
        elif step == "noise":
            out = apply_salt_pepper(out, params.noise_p, rng)
        else:
            raise ValueError(f"unknown deformation step {step!r}")
    return out


def deformed_batch(glyphs: GlyphSet, dist: DeformationDistribution, trials: int,
                   rng: np.random.Generator) -> np.ndarray:
    """``trials`` deformed copies of every glyph, shape ``(trials, 26, H, W)``.

    Trial-major so that trial ``t`` of every character is drawn before trial
    ``t + 1`` of any.
    """
    h, w = glyphs.shape
    out = np.empty((trials, len(glyphs), h, w), dtype=np.uint8)
    for t in range(trials):
        for c, bmp in enumerate(glyphs.bitmaps):
            if dist.is_identity:
                out[t, c] = bmp
            else:
                out[t, c] = deform(bmp, sample_params(dist, rng), rng, dist.order)
    return out


def bitmap_to_inputs(bmp: np.ndarray, n_inputs: int | None = None) -> np.ndarray:
    """Row-major flattening; works on a single bitmap or any stack of them."""
    bmp = np.asarray(bmp, dtype=np.uint8)
    flat = bmp.reshape(bmp.shape[:-2] + (-1,))
    if n_inputs is not None and flat.shape[-1] != n_inputs:
        raise ValueError(f"bitmap has {flat.shape[-1]} pixels, network expects {n_inputs}")
    return flat


def with_order(dist: DeformationDistribution, order) -> DeformationDistribution:
    return replace(dist, order=tuple(order))
