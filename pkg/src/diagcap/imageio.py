"""Read and write 8-bit grayscale images (binary PGM, optionally PNG)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

IMAGE_SUFFIXES = (".pgm", ".png")


def _pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    tokens: list[int] = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(int(data[start:pos]))
    return tokens, pos


def decode_pgm(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise ValueError(f"not a PGM file (magic {magic!r})")
    (width, height, maxval), pos = _pgm_tokens(data[2:], 3)
    pos += 2
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ValueError(f"bad PGM header: {width}x{height} maxval {maxval}")
    n = width * height
    if magic == b"P2":
        values, _ = _pgm_tokens(data[pos:], n)
        raw = np.array(values, dtype=np.float64)
    else:
        pos += 1  # single whitespace byte after maxval
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        raw = np.frombuffer(data, dtype=dtype, count=n, offset=pos).astype(np.float64)
    return np.clip(raw.reshape(height, width) / maxval, 0.0, 1.0)


def encode_pgm(img) -> bytes:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected 2-D image, got {arr.shape}")
    pixels = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    return header + pixels.tobytes()


def read_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    return decode_pgm(path.read_bytes())


def write_image(path, img) -> None:
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        pixels = np.rint(np.clip(np.asarray(img), 0.0, 1.0) * 255.0).astype(np.uint8)
        Image.fromarray(pixels, mode="L").save(path)
        return
    path.write_bytes(encode_pgm(img))


def list_images(directory) -> list[Path]:
    return sorted(
        p for p in Path(directory).iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )
