"""Image files and dataset manifests.

Two formats are supported:

``.png``  16-bit grayscale, intensities quantised to 1/65535.
``.pfim`` lossless float32: magic ``PFIM``, u16 height, u16 width (little
          endian), then height*width float32 values in row-major order.
"""

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

PFIM_MAGIC = b"PFIM"
MANIFEST_VERSION = "pfad-manifest/1"
IMAGE_SUFFIXES = (".png", ".pfim")


def write_pfim(path, image):
    image = np.asarray(image)
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(PFIM_MAGIC + struct.pack("<HH", h, w))
        fh.write(image.astype("<f4").tobytes())


def read_pfim(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != PFIM_MAGIC:
        raise ValueError(f"{path}: not a PFIM file")
    h, w = struct.unpack_from("<HH", buf, 4)
    if len(buf) != 8 + 4 * h * w:
        raise ValueError(f"{path}: truncated PFIM payload")
    return np.frombuffer(buf, dtype="<f4", offset=8).reshape(h, w).astype(np.float64)


def write_png16(path, image):
    q = np.rint(np.clip(image, 0.0, 1.0) * 65535.0).astype(np.uint16)
    Image.fromarray(q).save(path, format="PNG")


def read_png(path):
    with Image.open(path) as im:
        arr = np.array(im)
    if arr.ndim == 3:
        arr = arr[..., :3].mean(axis=-1)
    scale = 65535.0 if arr.dtype == np.uint16 or arr.max(initial=0) > 255 else 255.0
    return np.clip(arr.astype(np.float64) / scale, 0.0, 1.0)


def write_image(path, image):
    path = os.fspath(path)
    if path.endswith(".pfim"):
        write_pfim(path, image)
    elif path.endswith(".png"):
        write_png16(path, image)
    else:
        raise ValueError(f"{path}: unsupported image suffix")


def read_image(path):
    path = os.fspath(path)
    if path.endswith(".pfim"):
        return read_pfim(path)
    if path.endswith(".png"):
        return read_png(path)
    raise ValueError(f"{path}: unsupported image suffix")


def list_images(directory):
    return sorted(f for f in os.listdir(directory) if f.endswith(IMAGE_SUFFIXES))


@dataclass
class ManifestEntry:
    clean_path: str
    corrupted_path: str
    kind: str
    params: dict
    seed: int


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    version: str = MANIFEST_VERSION

    def to_json(self):
        return json.dumps({
            "version": self.version,
            "entries": [vars(e) for e in self.entries],
        }, indent=2, sort_keys=True) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        """Read a manifest; relative image paths resolve against its directory."""
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("version") != MANIFEST_VERSION:
            raise ValueError(f"{path}: unsupported manifest version {doc.get('version')!r}")
        base = os.path.dirname(os.path.abspath(path))
        entries = []
        for rec in doc["entries"]:
            e = ManifestEntry(**rec)
            e.clean_path = os.path.join(base, e.clean_path)
            e.corrupted_path = os.path.join(base, e.corrupted_path)
            for p in (e.clean_path, e.corrupted_path):
                if not os.path.exists(p):
                    raise FileNotFoundError(f"manifest references missing file {p}")
            entries.append(e)
        return cls(entries, doc["version"])
