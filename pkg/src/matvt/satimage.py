"""Ingestion of the Statlog (Landsat satellite) text files.

Each line of ``sat.trn``/``sat.tst`` holds 36 whitespace-separated integer
attributes (the 4 spectral band values of each of the 9 pixels in a 3x3
segment, pixel by pixel) followed by the terrain-class code of the central
pixel.  A record is reshaped to a 4x9 matrix whose column j carries the 4
band values of pixel j, in file order, so flattening a matrix
column-by-column reproduces the source line.
"""

import numpy as np

from .datamodel import MatrixStack
from .errors import DataFormatError

# Statlog codebook: terrain name -> class code in the data files.
CLASS_CODES = {
    "red-soil": 1,
    "cotton-crop": 2,
    "grey-soil": 3,
    "damp-grey-soil": 4,
    "vegetation-stubble": 5,
    "very-damp-grey-soil": 7,
}

# the three-terrain subset used for the satellite experiment
DEFAULT_CLASSES = ("grey-soil", "damp-grey-soil", "vegetation-stubble")

N_BANDS = 4
N_PIXELS = 9


def resolve_classes(classes):
    """Map terrain names (or raw codes) to a sorted list of Statlog codes."""
    codes = []
    for c in classes:
        if isinstance(c, str) and not c.isdigit():
            if c not in CLASS_CODES:
                raise ValueError(
                    f"unknown terrain class {c!r}; known: {sorted(CLASS_CODES)}"
                )
            codes.append(CLASS_CODES[c])
        else:
            codes.append(int(c))
    return sorted(set(codes))


def _parse_file(path, codes):
    data, labels = [], []
    remap = {c: i for i, c in enumerate(codes)}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != N_BANDS * N_PIXELS + 1:
                raise DataFormatError(
                    f"expected {N_BANDS * N_PIXELS + 1} fields, found {len(fields)}",
                    line=lineno,
                )
            try:
                values = np.array([float(v) for v in fields[:-1]])
                label = int(fields[-1])
            except ValueError as exc:
                raise DataFormatError(f"non-numeric cell: {exc}", line=lineno) from None
            if label not in CLASS_CODES.values():
                raise DataFormatError(f"unknown class code {label}", line=lineno)
            if label not in remap:
                continue
            # pixel-major layout: 9 runs of 4 band values
            data.append(values.reshape(N_PIXELS, N_BANDS).T)
            labels.append(remap[label])
    if not data:
        raise DataFormatError(f"no observations for classes {codes} in {path}")
    return MatrixStack(np.stack(data), labels=labels)


def parse_satimage(train_path, test_path, classes=DEFAULT_CLASSES):
    """Parse the Statlog train/test files restricted to the given classes.

    Labels are remapped to 0..G-1 in ascending class-code order.
    Returns ``(train, test)`` labeled MatrixStacks of 4x9 matrices.
    """
    codes = resolve_classes(classes)
    return _parse_file(train_path, codes), _parse_file(test_path, codes)
