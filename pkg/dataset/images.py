"""
Image ingestion: ``<root>/<class-name>/<image files>`` to labeled vectors.

Images are read with Pillow (8-bit PGM P5 and PNG), converted to grayscale,
resized bilinearly to ``target_size`` = (height, width), flattened row-major
and scaled to [0, 1].
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from dataset.records import LabeledVector
from shared.constants import DEFAULT_TARGET_SIZE
from shared.exceptions import ConfigError, DatasetError

logger = logging.getLogger(__name__)

SUPPORTED_SUFFIXES = {".pgm", ".png"}


@dataclass
class ImageCollection:
    """Loaded vectors plus the files that had to be skipped"""

    items: List[LabeledVector] = field(default_factory=list)
    class_names: Tuple[str, ...] = ()
    skipped: List[Tuple[Path, str]] = field(default_factory=list)


def _check_size(target_size: Tuple[int, int]) -> Tuple[int, int]:
    height, width = (int(v) for v in target_size)
    if height < 1 or width < 1:
        raise ConfigError(f"target size must be positive, got {target_size}")
    return height, width


def load_image_vector(path: Union[str, Path], target_size: Tuple[int, int] = DEFAULT_TARGET_SIZE) -> np.ndarray:
    """Decode one image into a length h*w vector in [0, 1]"""
    height, width = _check_size(target_size)
    with Image.open(path) as image:
        image.load()
        if image.mode != "L":
            image = image.convert("L")
        if image.size != (width, height):
            image = image.resize((width, height), Image.Resampling.BILINEAR)
        pixels = np.asarray(image, dtype=np.float64)
    return pixels.reshape(-1) / 255.0


def write_pgm(vector, target_size: Tuple[int, int], path: Union[str, Path]) -> None:
    """Write a [0, 1] vector as a binary 8-bit PGM of the given (height, width)"""
    height, width = _check_size(target_size)
    pixels = np.clip(np.rint(np.asarray(vector, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(pixels.reshape(height, width)).save(path, format="PPM")


def load_image_directory(path: Union[str, Path],
                         target_size: Tuple[int, int] = DEFAULT_TARGET_SIZE) -> ImageCollection:
    """
    Load every class directory under ``path``.

    Class ids follow the lexicographic order of the directory names. Corrupt
    files are skipped with a warning and recorded; a class directory without
    a single readable image is an error.
    """
    root = Path(path)
    if not root.is_dir():
        raise DatasetError(f"image root {root} is not a directory")
    class_dirs = sorted((p for p in root.iterdir() if p.is_dir()), key=lambda p: p.name)
    if not class_dirs:
        raise DatasetError(f"no class directories under {root}")

    collection = ImageCollection(class_names=tuple(p.name for p in class_dirs))
    for class_id, class_dir in enumerate(class_dirs, start=1):
        loaded = 0
        for file_path in sorted(class_dir.iterdir()):
            if file_path.suffix.lower() not in SUPPORTED_SUFFIXES:
                continue
            try:
                vector = load_image_vector(file_path, target_size)
            except (OSError, UnidentifiedImageError, ValueError) as e:
                logger.warning(f"Skipping unreadable image {file_path}: {e}")
                collection.skipped.append((file_path, str(e)))
                continue
            collection.items.append(LabeledVector(vector, class_id, ""))
            loaded += 1
        if loaded == 0:
            raise DatasetError(f"class directory {class_dir} contains no readable images")

    logger.info(f"Loaded {len(collection.items)} images in {len(class_dirs)} classes from {root}"
                + (f" ({len(collection.skipped)} skipped)" if collection.skipped else ""))
    return collection
