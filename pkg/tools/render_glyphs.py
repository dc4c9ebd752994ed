"""Regenerate the built-in glyph set (src/memnet/glyphs/*.pbm).

Needs Pillow and DejaVu Sans Bold; the package itself only reads the
resulting P1 files.

    python tools/render_glyphs.py [font.ttf]
"""
import string
import sys
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from memnet.imaging import write_pbm  # noqa: E402

FONT = "/usr/share/fonts/truetype/dejavu/DejaVuSans-Bold.ttf"
SIZE = 36
BOX = 30  # glyph bounding box inside the canvas


def render(ch, font):
    img = Image.new("L", (400, 400), 0)
    ImageDraw.Draw(img).text((50, 50), ch, fill=255, font=font)
    img = img.crop(img.getbbox())
    w, h = img.size
    k = BOX / max(w, h)
    img = img.resize((max(1, round(w * k)), max(1, round(h * k))), Image.LANCZOS)
    glyph = (np.asarray(img) >= 128).astype(np.uint8)
    canvas = np.zeros((SIZE, SIZE), dtype=np.uint8)
    gh, gw = glyph.shape
    y0, x0 = (SIZE - gh) // 2, (SIZE - gw) // 2
    canvas[y0:y0 + gh, x0:x0 + gw] = glyph
    return canvas


def main():
    font = ImageFont.truetype(sys.argv[1] if len(sys.argv) > 1 else FONT, 200)
    out = Path(__file__).resolve().parents[1] / "src" / "memnet" / "glyphs"
    out.mkdir(exist_ok=True)
    for ch in string.ascii_uppercase:
        write_pbm(out / f"{ch}.pbm", render(ch, font))


if __name__ == "__main__":
    main()
