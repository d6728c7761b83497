from .core import FloatPlane, ImageBuffer

__all__ = ["FloatPlane", "ImageBuffer"]
