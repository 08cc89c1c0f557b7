"""
Dataset ingestion, the dataset container and report writers.

Binary loaders are total: every malformed file raises a typed ``ParseError``
subclass naming the byte offset, never a silent truncation.
"""
import csv
import dataclasses
import enum
import gzip
import io
import json
import math
import pathlib
import struct
import uuid
from dataclasses import dataclass
from datetime import datetime
from decimal import Decimal
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel
from scipy import ndimage

from redlab.entropy import TextPair
from redlab.exceptions import (
    BadMagic,
    BadValue,
    DimOverflow,
    EmptyInput,
    ParseError,
    TruncatedPayload,
    Unwritable,
)
from redlab.nn import Dataset
from redlab.utils import derive_rng, isoformat, logd

log = logd.getChild('io')

IDX_UBYTE = 0x08
CIFAR_RECORD = 3073
CIFAR_SHAPE = (3, 32, 32)
DATASET_MAGIC = b'RLDS'
DATASET_VERSION = 1
MAX_IDX_ELEMENTS = 2**31
SIGNIFICANT_DIGITS = 9

SCHEMA_PATH = pathlib.Path(__file__).parent / 'schemas' / 'report.schema.json'


@dataclass(frozen=True)
class IdxHeader:
    type_code: int
    rank: int
    dims: Tuple[int, ...]

    @property
    def size(self):
        return 4 + 4 * self.rank

    @property
    def n_elements(self):
        return math.prod(self.dims) if self.dims else 0


def _maybe_gunzip(data: bytes) -> bytes:
    if data[:2] == b'\x1f\x8b':
        try:
            return gzip.decompress(data)
        except (OSError, EOFError) as e:
            raise TruncatedPayload(f'corrupt gzip stream: {e}', offset=0) from e

    return data


def parse_idx_header(data: bytes, expected_rank: Optional[int] = None) -> IdxHeader:
    if len(data) < 4:
        raise TruncatedPayload('IDX magic is truncated', offset=len(data))
    if data[0] != 0 or data[1] != 0:
        raise BadMagic(f'IDX magic must start with two zero bytes, got {data[:2].hex()}', offset=0)

    type_code, rank = data[2], data[3]
    if type_code != IDX_UBYTE:
        raise BadMagic(f'IDX type code 0x{type_code:02x} is not unsigned byte (0x08)', offset=2)
    if expected_rank is not None and rank != expected_rank:
        raise BadMagic(f'IDX rank {rank}, expected {expected_rank}', offset=3)
    if len(data) < 4 + 4 * rank:
        raise TruncatedPayload(f'IDX header declares rank {rank} but dims are truncated', offset=len(data))

    dims = struct.unpack_from(f'>{rank}I', data, 4)
    header = IdxHeader(type_code=type_code, rank=rank, dims=tuple(dims))
    if header.n_elements > MAX_IDX_ELEMENTS:
        raise DimOverflow(f'IDX dims {dims} exceed {MAX_IDX_ELEMENTS} elements', offset=4)

    return header


def _idx_payload(data: bytes, header: IdxHeader) -> np.ndarray:
    end = header.size + header.n_elements
    if len(data) < end:
        raise TruncatedPayload(f'IDX payload needs {end} bytes, file has {len(data)}', offset=len(data))

    return np.frombuffer(data, dtype=np.uint8, count=header.n_elements, offset=header.size).reshape(header.dims)


def _default_labels_path(path: pathlib.Path) -> pathlib.Path:
    name = path.name.replace('images-idx3', 'labels-idx1').replace('images.idx3', 'labels.idx1')
    if name == path.name:
        raise BadValue(f'cannot infer the labels file for {path}, pass labels_path')

    return path.with_name(name)


def load_idx(path, limit: Optional[int] = None, labels_path=None, num_classes: int = 10) -> Dataset:
    """Load an IDX image file (rank 3) with its IDX label file (rank 1).

    Parameters
    ----------
    path : path-like
        Image file, optionally gzip-compressed.
    limit : int, optional
        Keep only the first ``limit`` examples.
    labels_path : path-like, optional
        Label file. Defaults to the MNIST naming convention
        (``*-images-idx3-ubyte`` -> ``*-labels-idx1-ubyte``).

    Returns
    -------
    Dataset
        Pixels scaled to [0, 1], ``image_shape`` ``(rows, cols)``.
    """
    path = pathlib.Path(path)
    labels_path = _default_labels_path(path) if labels_path is None else pathlib.Path(labels_path)

    images = _maybe_gunzip(path.read_bytes())
    header = parse_idx_header(images, expected_rank=3)
    pixels = _idx_payload(images, header)

    raw_labels = _maybe_gunzip(labels_path.read_bytes())
    lheader = parse_idx_header(raw_labels, expected_rank=1)
    labels = _idx_payload(raw_labels, lheader)

    if lheader.dims[0] != header.dims[0]:
        raise ParseError(f'{header.dims[0]} images but {lheader.dims[0]} labels', offset=4)
    bad = np.flatnonzero(labels >= num_classes)
    if bad.size:
        raise ParseError(f'label {labels[bad[0]]} >= {num_classes}', offset=lheader.size + int(bad[0]))

    if limit is not None:
        pixels, labels = pixels[:limit], labels[:limit]

    n, rows, cols = pixels.shape
    log.info(f'loaded {n} IDX images {rows}x{cols} from {path}')
    return Dataset(
        inputs=pixels.reshape(n, rows * cols) / 255.0,
        labels=labels,
        num_classes=num_classes,
        image_shape=(rows, cols),
        name=path.name,
    )


def load_cifar10(path, limit: Optional[int] = None) -> Dataset:
    """Load a CIFAR-10 binary batch of 3073-byte records (label, 3x32x32 planar)."""
    path = pathlib.Path(path)
    data = path.read_bytes()
    if not data:
        raise EmptyInput(f'{path} is empty')
    if len(data) % CIFAR_RECORD:
        whole = len(data) // CIFAR_RECORD * CIFAR_RECORD
        raise TruncatedPayload(f'file length {len(data)} is not a multiple of {CIFAR_RECORD}', offset=whole)

    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    if limit is not None:
        records = records[:limit]

    labels = records[:, 0]
    bad = np.flatnonzero(labels >= 10)
    if bad.size:
        raise ParseError(f'label {labels[bad[0]]} >= 10', offset=int(bad[0]) * CIFAR_RECORD)

    log.info(f'loaded {records.shape[0]} CIFAR-10 records from {path}')
    return Dataset(
        inputs=records[:, 1:] / 255.0,
        labels=labels,
        num_classes=10,
        image_shape=CIFAR_SHAPE,
        name=path.name,
    )


def load_text_pairs(path) -> List[TextPair]:
    """Read ``benign<TAB>adversarial`` lines; blank lines are skipped."""
    path = pathlib.Path(path)
    try:
        text = path.read_bytes().decode('utf-8')
    except UnicodeDecodeError as e:
        raise ParseError(f'{path} is not valid UTF-8: {e.reason}', offset=e.start) from e

    pairs = []
    for line_no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split('\t')
        if len(fields) != 2:
            raise ParseError(f'expected exactly one tab, found {len(fields) - 1}', line=line_no)
        benign, adversarial = fields
        if not benign or not adversarial:
            raise ParseError('empty word field', line=line_no)
        pairs.append(TextPair(benign.encode('utf-8'), adversarial.encode('utf-8')))

    return pairs


# dataset container


def dump_dataset(dataset: Dataset, path) -> None:
    """Write the RLDS container.

    Layout: ``RLDS``, version u32, n u32, d u32, num_classes u32, shape rank u32,
    shape dims u32 each, name length u32 + utf-8 name, inputs ``<f8`` row-major,
    labels ``<u4``.
    """
    shape = dataset.image_shape or ()
    name = dataset.name.encode('utf-8')
    parts = [
        struct.pack('<4sIIIII', DATASET_MAGIC, DATASET_VERSION, len(dataset), dataset.dim, dataset.num_classes, len(shape)),
        struct.pack(f'<{len(shape)}I', *shape),
        struct.pack('<I', len(name)),
        name,
        dataset.inputs.astype('<f8').tobytes(),
        dataset.labels.astype('<u4').tobytes(),
    ]
    pathlib.Path(path).write_bytes(b''.join(parts))


def load_dataset(path) -> Dataset:
    data = pathlib.Path(path).read_bytes()
    head = struct.calcsize('<4sIIIII')
    if len(data) < head:
        raise TruncatedPayload('dataset header is truncated', offset=len(data))

    magic, version, n, d, num_classes, rank = struct.unpack_from('<4sIIIII', data, 0)
    if magic != DATASET_MAGIC:
        raise BadMagic(f'expected {DATASET_MAGIC!r}, got {magic!r}', offset=0)
    if version != DATASET_VERSION:
        raise BadMagic(f'unsupported dataset container version {version}', offset=4)

    offset = head
    if len(data) < offset + 4 * rank + 4:
        raise TruncatedPayload('dataset shape is truncated', offset=len(data))
    shape = struct.unpack_from(f'<{rank}I', data, offset)
    offset += 4 * rank
    (name_len,) = struct.unpack_from('<I', data, offset)
    offset += 4
    end = offset + name_len + 8 * n * d + 4 * n
    if len(data) < end:
        raise TruncatedPayload(f'expected {end} bytes, file has {len(data)}', offset=len(data))

    name = data[offset : offset + name_len].decode('utf-8')
    offset += name_len
    inputs = np.frombuffer(data, dtype='<f8', count=n * d, offset=offset).reshape(n, d)
    offset += 8 * n * d
    labels = np.frombuffer(data, dtype='<u4', count=n, offset=offset)
    return Dataset(inputs=inputs, labels=labels, num_classes=num_classes, image_shape=shape or None, name=name)


def load_any(path, limit: Optional[int] = None) -> Dataset:
    """Dispatch on the file's leading bytes: RLDS container, IDX or CIFAR-10."""
    path = pathlib.Path(path)
    with open(path, 'rb') as f:
        lead = f.read(4)

    if lead == DATASET_MAGIC:
        dataset = load_dataset(path)
        return dataset if limit is None else dataset.subset(np.arange(min(limit, len(dataset))))
    if lead[:2] in (b'\x00\x00', b'\x1f\x8b'):
        return load_idx(path, limit=limit)

    return load_cifar10(path, limit=limit)


# synthetic fixtures

# 5x7 glyphs, one string per row
GLYPHS = (
    ('01110', '10001', '10011', '10101', '11001', '10001', '01110'),
    ('00100', '01100', '00100', '00100', '00100', '00100', '01110'),
    ('01110', '10001', '00001', '00010', '00100', '01000', '11111'),
    ('11111', '00010', '00100', '00010', '00001', '10001', '01110'),
    ('00010', '00110', '01010', '10010', '11111', '00010', '00010'),
    ('11111', '10000', '11110', '00001', '00001', '10001', '01110'),
    ('00110', '01000', '10000', '11110', '10001', '10001', '01110'),
    ('11111', '00001', '00010', '00100', '01000', '01000', '01000'),
    ('01110', '10001', '10001', '01110', '10001', '10001', '01110'),
    ('01110', '10001', '10001', '01111', '00001', '00010', '01100'),
)
GLYPH_SCALE = 3
DIGIT_SIDE = 28


def _glyph_bitmap(digit):
    rows = np.array([[c == '1' for c in row] for row in GLYPHS[digit]], dtype=bool)
    return np.kron(rows, np.ones((GLYPH_SCALE, GLYPH_SCALE), dtype=bool))


def _render_digit(digit, rng):
    glyph = _glyph_bitmap(digit)
    if rng.random() < 0.5:
        glyph = ndimage.binary_dilation(glyph)
    glyph = glyph & (rng.random(glyph.shape) > 0.05)

    canvas = np.zeros((DIGIT_SIDE, DIGIT_SIDE))
    gh, gw = glyph.shape
    top = rng.integers(0, DIGIT_SIDE - gh + 1)
    left = rng.integers(2, DIGIT_SIDE - gw - 1)
    canvas[top : top + gh, left : left + gw] = glyph * rng.uniform(0.75, 1.0)

    slant = rng.uniform(-0.15, 0.15)
    centre = top + gh / 2
    for r in range(DIGIT_SIDE):
        canvas[r] = np.roll(canvas[r], int(round(slant * (r - centre))))

    canvas = ndimage.gaussian_filter(canvas, sigma=rng.uniform(0.4, 0.8))
    # 8-bit grid like the real byte formats
    return np.floor(np.clip(canvas, 0.0, 1.0) * 255 + 0.5) / 255


def mini_digits(n: int = 64, seed: int = 0) -> Dataset:
    """Synthetic 28x28 ten-class digits, balanced and deterministic in ``seed``.

    ``mini_digits(64, 0)`` is the shipped 64-image fixture; larger ``n`` extends
    the same generator for desk-scale runs.
    """
    if n < 1:
        raise EmptyInput('mini_digits needs n >= 1')

    rng = derive_rng(seed, 0x6D696E69)
    labels = rng.permutation(np.arange(n) % 10)
    images = np.stack([_render_digit(int(d), rng) for d in labels])
    return Dataset(
        inputs=images.reshape(n, -1),
        labels=labels,
        num_classes=10,
        image_shape=(DIGIT_SIDE, DIGIT_SIDE),
        name='mini',
    )


def make_blobs(n: int = 200, seed: int = 0, spread: float = 0.05) -> Dataset:
    """Two linearly separable 2D classes inside the unit square."""
    rng = derive_rng(seed, 0x626C6F62)
    labels = np.arange(n) % 2
    centres = np.array([[0.25, 0.25], [0.75, 0.75]])
    points = centres[labels] + rng.normal(0.0, spread, size=(n, 2))
    return Dataset(inputs=np.clip(points, 0.0, 1.0), labels=labels, num_classes=2, name='blobs')


def split(dataset: Dataset, n_train: int, n_test: int, seed: int = 0) -> Tuple[Dataset, Dataset]:
    if n_train + n_test > len(dataset):
        raise BadValue(f'cannot split {len(dataset)} examples into {n_train} + {n_test}')

    order = derive_rng(seed, 0x73706C74).permutation(len(dataset))
    return dataset.subset(order[:n_train]), dataset.subset(order[n_train : n_train + n_test])


# reports


class ReportDocument(BaseModel):
    """JSON report layout; ``schemas/report.schema.json`` mirrors it."""

    experiment: str
    columns: List[str]
    records: List[Dict[str, Any]]
    manifest: Optional[Dict[str, Any]]


class JEncode(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, uuid.UUID):
            return str(obj)
        elif isinstance(obj, datetime):
            return isoformat(obj)
        elif isinstance(obj, Decimal):
            return float(obj)
        elif isinstance(obj, pathlib.PurePath):
            return str(obj)
        elif isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return _round(float(obj))
        elif isinstance(obj, np.bool_):
            return bool(obj)
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        elif isinstance(obj, BaseModel):
            return obj.model_dump(mode='json')
        elif dataclasses.is_dataclass(obj):
            return dataclasses.asdict(obj)

        return json.JSONEncoder.default(self, obj)


def _round(value: float) -> float:
    if not np.isfinite(value):
        return value

    return float(f'{value:.{SIGNIFICANT_DIGITS}g}')


def _normalize(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return _round(float(value))
    if isinstance(value, pathlib.PurePath):
        return str(value)
    if isinstance(value, enum.Enum):
        return value.value

    return value


def _json_safe(value):
    # strict JSON has no nan or inf
    if isinstance(value, float) and not np.isfinite(value):
        return None if np.isnan(value) else ('inf' if value > 0 else '-inf')

    return value


def _as_mapping(record) -> Dict[str, Any]:
    if isinstance(record, dict):
        return record
    if isinstance(record, BaseModel):
        return record.model_dump()
    if dataclasses.is_dataclass(record):
        return {f.name: getattr(record, f.name) for f in dataclasses.fields(record)}
    if isinstance(record, tuple) and hasattr(record, '_asdict'):
        return record._asdict()

    raise BadValue(f'cannot turn {type(record).__name__} into a report record')


def _tabulate(records: Iterable, columns: Optional[Sequence[str]]):
    rows = [_as_mapping(r) for r in records]
    if columns is None:
        if not rows:
            raise BadValue('an empty report needs explicit columns')
        columns = list(rows[0])

    columns = list(columns)
    for i, row in enumerate(rows):
        if set(row) != set(columns):
            raise BadValue(f'record {i} has columns {sorted(row)}, expected {columns}')

    return columns, [{c: _normalize(row[c]) for c in columns} for row in rows]


def write_report(
    records: Iterable,
    format: str,
    path,
    columns: Optional[Sequence[str]] = None,
    experiment: str = '',
    manifest: Optional[Dict[str, Any]] = None,
) -> pathlib.Path:
    """Write homogeneous records as CSV or JSON.

    Parameters
    ----------
    records : iterable of dict, dataclass or pydantic model
        All records must share one set of columns.
    format : {'csv', 'json'}
    path : path-like
    columns : sequence of str, optional
        Column order; defaults to the first record's order. Required when
        ``records`` is empty.
    experiment : str
        Name of the experiment the report reproduces; written as a ``#``
        comment header in CSV and as the ``experiment`` key in JSON.
    manifest : dict, optional
        Run manifest, embedded in JSON reports.

    Returns
    -------
    pathlib.Path
        The written path.

    Notes
    -----
    Reals are rounded to 9 significant digits in both formats so that equal
    runs produce equal bytes.
    """
    format = format.lower()
    if format not in ('csv', 'json'):
        raise BadValue(f'unknown report format {format!r}')

    columns, rows = _tabulate(records, columns)
    path = pathlib.Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if format == 'csv':
            buf = io.StringIO()
            if experiment:
                buf.write(f'# experiment: {experiment}\n')
            pd.DataFrame(rows, columns=columns).to_csv(
                buf, index=False, float_format=f'%.{SIGNIFICANT_DIGITS}g', quoting=csv.QUOTE_MINIMAL, lineterminator='\n'
            )
            path.write_text(buf.getvalue(), encoding='utf-8')
        else:
            records = [{c: _json_safe(v) for c, v in row.items()} for row in rows]
            doc = {'experiment': experiment, 'columns': columns, 'records': records, 'manifest': manifest}
            path.write_text(json.dumps(doc, cls=JEncode, indent=2, sort_keys=False) + '\n', encoding='utf-8')
    except OSError as e:
        raise Unwritable(f'cannot write report {path}: {e}') from e

    log.info(f'wrote {len(rows)} records to {path}')
    return path


def read_report(path) -> List[Dict[str, Any]]:
    """Parse a report written by ``write_report`` back into records."""
    path = pathlib.Path(path)
    if path.suffix == '.json':
        doc = ReportDocument.model_validate(json.loads(path.read_text(encoding='utf-8')))
        return doc.records

    df = pd.read_csv(path, comment='#')
    return df.to_dict('records')


def load_report_schema() -> Dict[str, Any]:
    return json.loads(SCHEMA_PATH.read_text(encoding='utf-8'))
