import json

import numpy as np
import pytest

from fundlens.assets import face_cascade_path
from fundlens.errors import CascadeFormatError
from fundlens.imaging.core import ImageBuffer
from fundlens.imaging.faces import (
    CascadeClassifier,
    CascadeStage,
    HaarRect,
    WeakClassifier,
    detect_faces,
    load_cascade,
    save_cascade,
)
from fundlens.imaging.io import load_image

FIXTURE_DIR = face_cascade_path().parent / "fixtures"


@pytest.fixture(scope="module")
def cascade():
    return load_cascade(face_cascade_path())


@pytest.fixture(scope="module")
def face_scene():
    img = load_image(FIXTURE_DIR / "face_scene.png")
    box = json.loads((FIXTURE_DIR / "face_scene.json").read_text())["face_box"]
    return img, tuple(box)


def box_iou(a, b):
    ix0, iy0 = max(a[0], b[0]), max(a[1], b[1])
    ix1 = min(a[0] + a[2], b[0] + b[2])
    iy1 = min(a[1] + a[3], b[1] + b[3])
    inter = max(0.0, ix1 - ix0) * max(0.0, iy1 - iy0)
    return inter / (a[2] * a[3] + b[2] * b[3] - inter)


class TestLoadCascade:
    def test_bundled_cascade_loads_with_many_stages(self, cascade):
        assert len(cascade.stages) > 10
        assert cascade.window_w == cascade.window_h == 24

    def test_empty_file_is_parse_error(self, tmp_path):
        empty = tmp_path / "empty.xml"
        empty.write_text("")
        with pytest.raises(CascadeFormatError):
            load_cascade(empty)

    def test_rect_exceeding_window_rejected(self):
        weak = WeakClassifier(
            rects=(HaarRect(x=20, y=0, w=10, h=4, weight=-1.0),),
            threshold=0.0,
            left_val=1.0,
            right_val=-1.0,
        )
        with pytest.raises(CascadeFormatError):
            CascadeClassifier(
                window_w=24,
                window_h=24,
                stages=(CascadeStage(threshold=0.0, classifiers=(weak,)),),
            )

    def test_no_stages_rejected(self):
        with pytest.raises(CascadeFormatError):
            CascadeClassifier(window_w=24, window_h=24, stages=())

    def test_save_load_roundtrip(self, cascade, tmp_path):
        out = tmp_path / "roundtrip.xml"
        save_cascade(cascade, out)
        again = load_cascade(out)
        assert again == cascade


class TestDetectFaces:
    def test_constant_image_no_faces(self, cascade):
        img = ImageBuffer.from_array(np.full((96, 96, 3), 140, dtype=np.uint8))
        assert detect_faces(img, cascade).count == 0

    def test_fixture_single_face_with_iou(self, cascade, face_scene):
        img, truth = face_scene
        det = detect_faces(img, cascade)
        assert det.count == 1
        assert box_iou(det.boxes[0], truth) >= 0.5

    def test_rotated_fixture_no_faces(self, cascade, face_scene):
        img, _ = face_scene
        rotated = ImageBuffer.from_array(np.rot90(img.data).copy())
        assert detect_faces(rotated, cascade).count == 0

    def test_deterministic(self, cascade, face_scene):
        img, _ = face_scene
        d1 = detect_faces(img, cascade)
        d2 = detect_faces(img, cascade)
        assert d1 == d2
