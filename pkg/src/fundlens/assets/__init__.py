"""Paths to data files bundled with the package."""

from pathlib import Path

_HERE = Path(__file__).parent


def quality_model_path() -> Path:
    return _HERE / "quality_model.txt"


def face_cascade_path() -> Path:
    return _HERE / "frontal_face_cascade.xml"


def dictionary_dir() -> Path:
    return _HERE / "dictionaries"


def mini_dataset_dir() -> Path:
    return _HERE / "mini"
