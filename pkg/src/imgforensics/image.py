"""Planar 8-bit image container and the raw interchange format.

Raw format: three little-endian uint32 values (width, height, channels)
followed by width*height*channels uint8 samples, row-major, channels
interleaved per pixel.
"""

import struct
from dataclasses import dataclass

import numpy as np

RAW_HEADER = struct.Struct("<III")


@dataclass
class PixelImage:
    width: int
    height: int
    planes: list
    color_space: str = "RGB"  # "RGB", "Grayscale" or "YCbCr"
    subsampling: str = "none"  # provenance: "4:4:4", "4:2:0", "4:2:2", "none"

    def __post_init__(self):
        expected = 1 if self.color_space == "Grayscale" else 3
        if len(self.planes) != expected:
            raise ValueError(f"{self.color_space} image needs {expected} planes, got {len(self.planes)}")
        for plane in self.planes:
            if plane.shape != (self.height, self.width):
                raise ValueError(f"plane shape {plane.shape} != {(self.height, self.width)}")

    @classmethod
    def from_array(cls, array, subsampling="none"):
        """Build from an (H, W) or (H, W, 3) array; values are clipped to 0..255."""
        arr = np.clip(np.rint(np.asarray(array, dtype=np.float64)), 0, 255).astype(np.uint8)
        if arr.ndim == 2:
            return cls(arr.shape[1], arr.shape[0], [arr], "Grayscale", subsampling)
        if arr.ndim == 3 and arr.shape[2] == 3:
            planes = [np.ascontiguousarray(arr[:, :, i]) for i in range(3)]
            return cls(arr.shape[1], arr.shape[0], planes, "RGB", subsampling)
        raise ValueError(f"unsupported array shape {arr.shape}")

    @property
    def channels(self):
        return len(self.planes)

    def to_array(self):
        if self.channels == 1:
            return self.planes[0].copy()
        return np.stack(self.planes, axis=-1)

    def rgb(self):
        """(H, W, 3) float array; grayscale is replicated."""
        arr = self.to_array().astype(np.float64)
        if arr.ndim == 2:
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        return arr

    def luminance(self):
        """BT.601 luma as float."""
        if self.channels == 1:
            return self.planes[0].astype(np.float64)
        r, g, b = (p.astype(np.float64) for p in self.planes)
        return 0.299 * r + 0.587 * g + 0.114 * b


def to_raw(img):
    arr = img.to_array()
    return RAW_HEADER.pack(img.width, img.height, img.channels) + arr.tobytes()


def from_raw(data):
    if len(data) < RAW_HEADER.size:
        raise ValueError("raw image shorter than its header")
    width, height, channels = RAW_HEADER.unpack_from(data)
    if channels not in (1, 3):
        raise ValueError(f"raw image has {channels} channels; 1 or 3 supported")
    need = width * height * channels
    body = data[RAW_HEADER.size:]
    if len(body) != need:
        raise ValueError(f"raw image body is {len(body)} bytes, header implies {need}")
    arr = np.frombuffer(body, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return PixelImage.from_array(arr.reshape(shape))
