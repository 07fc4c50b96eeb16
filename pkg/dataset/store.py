"""
On-disk formats: matrix CSV files, dictionary sidecars, dataset manifests
(CSV or XLSX) and the result tables written by the launcher.

Every CSV is UTF-8, comma-delimited, written with ``newline=''``; floats are
written with 17 significant digits so a reload is bit-exact.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import openpyxl

from dataset.images import load_image_vector
from dataset.records import LabeledVector
from michs.model import Dictionary, build_dictionary
from shared.constants import (
    CLASS_NAMES_FILE,
    DEFAULT_TARGET_SIZE,
    DICTIONARY_CLASSES_FILE,
    DICTIONARY_FILE,
    MANIFEST_COLUMNS,
)
from shared.exceptions import DatasetError, DimensionError
from shared.utils import format_float

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    class_name: str
    view_tag: str = ""


# Matrix files

def write_matrix_csv(path: PathLike, matrix) -> None:
    """m rows, one column per vector, no header"""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        for row in matrix:
            writer.writerow([format_float(v) for v in row])


def read_matrix_csv(path: PathLike) -> np.ndarray:
    rows = []
    try:
        with open(path, 'r', newline='', encoding='utf-8') as f:
            for line_no, row in enumerate(csv.reader(f), start=1):
                if not row:
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError as e:
                    raise DatasetError(f"{path}:{line_no}: {e}")
    except OSError as e:
        raise DatasetError(f"cannot read matrix file {path}: {e}")
    if not rows:
        raise DatasetError(f"matrix file {path} is empty")
    width = len(rows[0])
    for line_no, row in enumerate(rows, start=1):
        if len(row) != width:
            raise DimensionError(f"{path}: row {line_no} has {len(row)} values, expected {width}",
                                 index=line_no - 1)
    return np.array(rows, dtype=np.float64)


# Dictionary

def save_dictionary(dictionary: Dictionary, out_dir: PathLike) -> Path:
    """dictionary.csv + dictionary_classes.txt + classes.csv"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(out / DICTIONARY_FILE, dictionary.atoms)
    with open(out / DICTIONARY_CLASSES_FILE, 'w', newline='', encoding='utf-8') as f:
        for class_id in dictionary.class_of.tolist():
            f.write(f"{class_id}\n")
    with open(out / CLASS_NAMES_FILE, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(["class_id", "class_name"])
        for class_id in dictionary.class_ids:
            writer.writerow([class_id, dictionary.class_name(class_id)])
    logger.info(f"Saved dictionary ({dictionary.m} x {dictionary.n}, C={dictionary.num_classes}) to {out}")
    return out / DICTIONARY_FILE


def read_class_names(path: PathLike) -> Tuple[str, ...]:
    names: Dict[int, str] = {}
    try:
        with open(path, 'r', newline='', encoding='utf-8') as f:
            reader = csv.reader(f)
            next(reader, None)
            for line_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    names[int(row[0])] = row[1]
                except (ValueError, IndexError) as e:
                    raise DatasetError(f"{path}:{line_no}: bad class row {row!r}: {e}")
    except (OSError, UnicodeDecodeError) as e:
        raise DatasetError(f"cannot read class names {path}: {e}")
    return tuple(names[k] for k in sorted(names))


def load_dictionary(directory: PathLike) -> Dictionary:
    """Reload a dictionary written by save_dictionary"""
    root = Path(directory)
    atoms = read_matrix_csv(root / DICTIONARY_FILE)
    try:
        labels = [int(line) for line in (root / DICTIONARY_CLASSES_FILE).read_text(encoding='utf-8').split()]
    except (OSError, ValueError) as e:
        raise DatasetError(f"cannot read {root / DICTIONARY_CLASSES_FILE}: {e}")
    if len(labels) != atoms.shape[1]:
        raise DimensionError(f"{len(labels)} class labels for {atoms.shape[1]} dictionary columns")
    names_path = root / CLASS_NAMES_FILE
    names = read_class_names(names_path) if names_path.exists() else None
    return build_dictionary(list(zip(atoms.T, labels)), class_names=names)


# Manifests

def write_manifest(path: PathLike, entries: Iterable[ManifestEntry]) -> None:
    path = Path(path)
    rows = [[e.path, e.class_name, e.view_tag] for e in entries]
    if path.suffix.lower() == '.xlsx':
        wb = openpyxl.Workbook()
        ws = wb.active
        ws.title = "manifest"
        ws.append(MANIFEST_COLUMNS)
        for row in rows:
            ws.append(row)
        wb.save(path)
        return
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_COLUMNS)
        writer.writerows(rows)


def read_manifest(path: PathLike) -> List[ManifestEntry]:
    """Read a CSV or XLSX manifest (first worksheet, header row first)"""
    path = Path(path)
    entries = []
    try:
        if path.suffix.lower() == '.xlsx':
            wb = openpyxl.load_workbook(path, read_only=True)
            ws = wb.worksheets[0]
            for row in ws.iter_rows(min_row=2, values_only=True):
                if not any(row) or not row[0]:
                    continue
                view = row[2] if len(row) > 2 and row[2] is not None else ""
                entries.append(ManifestEntry(str(row[0]), str(row[1]), str(view)))
            wb.close()
        else:
            with open(path, 'r', newline='', encoding='utf-8') as f:
                reader = csv.DictReader(f)
                missing = set(MANIFEST_COLUMNS[:2]) - set(reader.fieldnames or ())
                if missing:
                    raise DatasetError(f"manifest {path} lacks columns {sorted(missing)}")
                for row in reader:
                    if not row.get("path"):
                        continue
                    entries.append(ManifestEntry(row["path"], row["class_name"], row.get("view_tag") or ""))
    except OSError as e:
        raise DatasetError(f"cannot read manifest {path}: {e}")
    if not entries:
        raise DatasetError(f"manifest {path} lists no vectors")
    return entries


def _split_matrix_ref(ref: str) -> Optional[Tuple[str, int]]:
    """'train_matrix.csv:3' -> ('train_matrix.csv', 3); image paths -> None"""
    head, sep, tail = ref.rpartition(':')
    if sep and tail.isdigit() and head.lower().endswith('.csv'):
        return head, int(tail)
    return None


def load_manifest_vectors(path: PathLike, class_names: Optional[Sequence[str]] = None,
                          target_size: Tuple[int, int] = DEFAULT_TARGET_SIZE
                          ) -> Tuple[List[LabeledVector], Tuple[str, ...]]:
    """
    Resolve every manifest entry to a vector.

    Class ids come from ``class_names`` when given (so a test manifest lines up
    with a saved dictionary), otherwise from the sorted distinct class names.
    """
    path = Path(path)
    entries = read_manifest(path)
    names = tuple(class_names) if class_names else tuple(sorted({e.class_name for e in entries}))
    ids = {name: index for index, name in enumerate(names, start=1)}

    matrices: Dict[Path, np.ndarray] = {}
    items = []
    for row_no, entry in enumerate(entries, start=2):
        if entry.class_name not in ids:
            raise DatasetError(f"{path}:{row_no}: unknown class {entry.class_name!r}")
        ref = _split_matrix_ref(entry.path)
        if ref is not None:
            matrix_path = (path.parent / ref[0]).resolve()
            if matrix_path not in matrices:
                matrices[matrix_path] = read_matrix_csv(matrix_path)
            matrix = matrices[matrix_path]
            if ref[1] >= matrix.shape[1]:
                raise DatasetError(f"{path}:{row_no}: column {ref[1]} outside {matrix_path.name}")
            vector = matrix[:, ref[1]].copy()
        else:
            try:
                vector = load_image_vector(path.parent / entry.path, target_size)
            except OSError as e:
                raise DatasetError(f"{path}:{row_no}: cannot read image {entry.path}: {e}")
        items.append(LabeledVector(vector, ids[entry.class_name], entry.view_tag))
    return items, names


def save_vectors(items: Sequence[LabeledVector], class_names: Sequence[str],
                 matrix_path: PathLike, manifest_path: PathLike) -> None:
    """Matrix CSV plus a manifest whose paths reference its columns"""
    matrix_path = Path(matrix_path)
    write_matrix_csv(matrix_path, np.column_stack([item.vector for item in items]))
    write_manifest(manifest_path, [
        ManifestEntry(f"{matrix_path.name}:{k}", class_names[item.class_id - 1], item.view)
        for k, item in enumerate(items)
    ])


# Result tables

def write_table(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    """Header plus rows; floats are written exactly; returns the row count"""
    count = 0
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise DimensionError(f"row has {len(row)} fields, header has {len(header)}")
            writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
            count += 1
    return count


def results_header(num_classes: int) -> List[str]:
    return (["sample_id", "true_class", "predicted"]
            + [f"cost_{r}" for r in range(1, num_classes + 1)] + ["wall_ms"])


def write_confusion(path: PathLike, confusion: np.ndarray, class_names: Sequence[str]) -> None:
    """Rows are true classes, columns predicted classes"""
    rows = [[name] + [int(v) for v in confusion[r]] for r, name in enumerate(class_names)]
    write_table(path, ["true\\predicted"] + list(class_names), rows)
