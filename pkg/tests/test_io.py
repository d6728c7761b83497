import numpy as np
import pytest
from PIL import Image

from fundlens.errors import ImageDecodeError
from fundlens.imaging.core import ImageBuffer
from fundlens.imaging.io import load_image, save_png


class TestLoadImage:
    def test_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.integers(0, 256, (10, 12, 3), dtype=np.uint8)
        path = tmp_path / "img.png"
        save_png(ImageBuffer.from_array(arr), path)
        back = load_image(path)
        assert back.channels == 3
        assert np.array_equal(back.data, arr)

    def test_jpeg_decodes(self, tmp_path):
        arr = np.full((16, 16, 3), 200, dtype=np.uint8)
        path = tmp_path / "img.jpg"
        Image.fromarray(arr).save(path, format="JPEG")
        img = load_image(path)
        assert (img.width, img.height, img.channels) == (16, 16, 3)

    def test_grayscale_png_stays_single_channel(self, tmp_path):
        arr = np.arange(64, dtype=np.uint8).reshape(8, 8)
        path = tmp_path / "gray.png"
        Image.fromarray(arr, mode="L").save(path)
        img = load_image(path)
        assert img.channels == 1

    def test_corrupt_file_raises_typed_error_with_path(self, tmp_path):
        path = tmp_path / "broken.png"
        path.write_bytes(b"definitely not a png")
        with pytest.raises(ImageDecodeError) as exc:
            load_image(path)
        assert str(path) in str(exc.value)
        assert exc.value.path == str(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ImageDecodeError):
            load_image(tmp_path / "absent.png")

    def test_16bit_png_rejected(self, tmp_path):
        arr = (np.arange(64, dtype=np.uint16) * 1000).reshape(8, 8)
        path = tmp_path / "deep.png"
        Image.fromarray(arr).save(path)  # infers a 16-bit grayscale mode
        with pytest.raises(ImageDecodeError, match="bit depth"):
            load_image(path)
