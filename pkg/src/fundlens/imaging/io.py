"""PNG/JPEG decoding into ImageBuffer (8-bit only)."""

from __future__ import annotations

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import ImageDecodeError
from .core import ImageBuffer


def load_image(path) -> ImageBuffer:
    """Decode an 8-bit PNG or JPEG file. Failures raise ImageDecodeError(path)."""
    try:
        with Image.open(path) as im:
            if im.mode in ("L",):
                arr = np.asarray(im, dtype=np.uint8)
            elif im.mode in ("I;16", "I", "F"):
                raise ImageDecodeError(path, f"unsupported bit depth (mode {im.mode})")
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except ImageDecodeError:
        raise
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageDecodeError(path, str(exc)) from exc
    return ImageBuffer.from_array(arr)


def save_png(img: ImageBuffer, path) -> None:
    """Write an ImageBuffer as PNG (used by fixtures and the image cache)."""
    arr = img.data[:, :, 0] if img.channels == 1 else img.data
    Image.fromarray(arr).save(path, format="PNG")
