"""
Tests for the dataset loaders, the dataset container and the report writers.
"""
import gzip
import json
import math
import struct

import numpy as np
import pytest

from redlab.dataio import (
    CIFAR_RECORD,
    JEncode,
    ReportDocument,
    dump_dataset,
    load_any,
    load_cifar10,
    load_dataset,
    load_idx,
    load_report_schema,
    load_text_pairs,
    make_blobs,
    mini_digits,
    parse_idx_header,
    read_report,
    split,
    write_report,
)
from redlab.exceptions import BadMagic, BadValue, DimOverflow, ParseError, TruncatedPayload, Unwritable


def idx_images(n, rows=2, cols=3):
    pixels = (np.arange(n * rows * cols) % 256).astype(np.uint8)
    return struct.pack('>BBBBIII', 0, 0, 0x08, 3, n, rows, cols) + pixels.tobytes()


def idx_labels(labels):
    return struct.pack('>BBBBI', 0, 0, 0x08, 1, len(labels)) + bytes(labels)


@pytest.fixture
def idx_pair(tmp_path):
    images = tmp_path / 'train-images-idx3-ubyte'
    labels = tmp_path / 'train-labels-idx1-ubyte'
    images.write_bytes(idx_images(4))
    labels.write_bytes(idx_labels([3, 1, 4, 1]))
    return images, labels


class TestIdx:
    def test_load(self, idx_pair):
        images, _ = idx_pair
        data = load_idx(images)
        assert len(data) == 4
        assert data.image_shape == (2, 3)
        assert data.labels.tolist() == [3, 1, 4, 1]
        assert data.inputs[0, 1] == pytest.approx(1 / 255)

    def test_limit(self, idx_pair):
        images, _ = idx_pair
        assert len(load_idx(images, limit=2)) == 2

    def test_gzip(self, tmp_path, idx_pair):
        images, labels = idx_pair
        gz = tmp_path / 'gz-images-idx3-ubyte.gz'
        gz.write_bytes(gzip.compress(images.read_bytes()))
        data = load_idx(gz, labels_path=labels)
        np.testing.assert_array_equal(data.inputs, load_idx(images).inputs)

    def test_bad_magic(self):
        with pytest.raises(BadMagic) as excinfo:
            parse_idx_header(b'\x01\x00\x08\x03' + bytes(12))
        assert excinfo.value.offset == 0

    def test_wrong_type_code(self):
        with pytest.raises(BadMagic):
            parse_idx_header(b'\x00\x00\x0d\x03' + bytes(12))

    def test_truncated_dims(self):
        with pytest.raises(TruncatedPayload):
            parse_idx_header(b'\x00\x00\x08\x03\x00\x00')

    def test_dim_overflow(self):
        with pytest.raises(DimOverflow):
            parse_idx_header(struct.pack('>BBBBIII', 0, 0, 8, 3, 2**31 - 1, 2**16, 2**16))

    def test_dim_product_past_int64(self, tmp_path, idx_pair):
        """Test dims whose product wraps a 64-bit integer still overflow."""
        header = struct.pack('>BBBBIII', 0, 0, 8, 3, 2**31, 2**31, 4)
        with pytest.raises(DimOverflow):
            parse_idx_header(header)

        _, labels = idx_pair
        images = tmp_path / 'huge-images-idx3-ubyte'
        images.write_bytes(header + bytes(16))
        with pytest.raises(DimOverflow):
            load_idx(images, labels_path=labels)

    def test_truncated_payload(self, tmp_path, idx_pair):
        images, labels = idx_pair
        cut = tmp_path / 'cut-images-idx3-ubyte'
        cut.write_bytes(images.read_bytes()[:-1])
        with pytest.raises(TruncatedPayload):
            load_idx(cut, labels_path=labels)

    def test_label_count_mismatch(self, tmp_path, idx_pair):
        images, _ = idx_pair
        labels = tmp_path / 'short.idx1'
        labels.write_bytes(idx_labels([0, 1]))
        with pytest.raises(ParseError):
            load_idx(images, labels_path=labels)


class TestCifar:
    def test_load(self, tmp_path):
        record = bytes([7]) + bytes(range(256)) * 12
        path = tmp_path / 'data_batch_1.bin'
        path.write_bytes(record * 2)
        data = load_cifar10(path)
        assert len(data) == 2
        assert data.image_shape == (3, 32, 32)
        assert data.labels.tolist() == [7, 7]
        assert data.images().shape == (2, 3, 32, 32)

    def test_truncated(self, tmp_path):
        path = tmp_path / 'cut.bin'
        path.write_bytes(bytes(CIFAR_RECORD + 10))
        with pytest.raises(TruncatedPayload) as excinfo:
            load_cifar10(path)
        assert excinfo.value.offset == CIFAR_RECORD

    def test_bad_label(self, tmp_path):
        path = tmp_path / 'bad.bin'
        path.write_bytes(bytes([12]) + bytes(CIFAR_RECORD - 1))
        with pytest.raises(ParseError):
            load_cifar10(path)


class TestTextPairs:
    def test_load(self, tmp_path):
        path = tmp_path / 'pairs.tsv'
        path.write_text('good\tg00d\n\nfilm\tfi1m\n', encoding='utf-8')
        pairs = load_text_pairs(path)
        assert [(p.benign_word, p.adversarial_word) for p in pairs] == [(b'good', b'g00d'), (b'film', b'fi1m')]

    def test_missing_tab(self, tmp_path):
        path = tmp_path / 'pairs.tsv'
        path.write_text('good\tg00d\nfilm fi1m\n', encoding='utf-8')
        with pytest.raises(ParseError) as excinfo:
            load_text_pairs(path)
        assert excinfo.value.line == 2

    def test_not_utf8(self, tmp_path):
        path = tmp_path / 'pairs.tsv'
        path.write_bytes(b'ok\t\xff\n')
        with pytest.raises(ParseError):
            load_text_pairs(path)


class TestContainer:
    def test_round_trip(self, tmp_path):
        data = mini_digits(12, seed=2)
        dump_dataset(data, tmp_path / 'mini.rlds')
        back = load_dataset(tmp_path / 'mini.rlds')
        np.testing.assert_array_equal(back.inputs, data.inputs)
        np.testing.assert_array_equal(back.labels, data.labels)
        assert back.image_shape == data.image_shape
        assert back.name == 'mini'

    def test_load_any_dispatch(self, tmp_path, idx_pair):
        dump_dataset(make_blobs(10), tmp_path / 'blobs.rlds')
        assert load_any(tmp_path / 'blobs.rlds').image_shape is None
        assert len(load_any(tmp_path / 'blobs.rlds', limit=3)) == 3
        assert load_any(idx_pair[0]).image_shape == (2, 3)

    def test_truncated(self, tmp_path):
        dump_dataset(make_blobs(10), tmp_path / 'b.rlds')
        raw = (tmp_path / 'b.rlds').read_bytes()
        (tmp_path / 'b.rlds').write_bytes(raw[:-3])
        with pytest.raises(TruncatedPayload):
            load_dataset(tmp_path / 'b.rlds')


class TestFixtures:
    def test_mini_digits(self):
        data = mini_digits()
        assert len(data) == 64
        assert data.image_shape == (28, 28)
        assert np.all(np.bincount(data.labels, minlength=10) >= 6)
        assert data.inputs.min() >= 0.0 and data.inputs.max() <= 1.0
        np.testing.assert_array_equal(mini_digits().inputs, data.inputs)

    def test_split(self):
        train_set, test_set = split(make_blobs(20), 15, 5)
        assert (len(train_set), len(test_set)) == (15, 5)
        with pytest.raises(BadValue):
            split(make_blobs(20), 15, 6)


class TestReports:
    ROWS = [{'q': 100, 'accuracy': 0.9512345678912}, {'q': 50, 'accuracy': 0.94}]

    def test_csv(self, out_dir):
        path = write_report(self.ROWS, 'csv', out_dir / 'sweep.csv', experiment='accuracy-vs-jpeg-quality')
        lines = path.read_text().splitlines()
        assert lines[0] == '# experiment: accuracy-vs-jpeg-quality'
        assert lines[1] == 'q,accuracy'
        assert lines[2] == '100,0.951234568'
        assert read_report(path) == [{'q': 100, 'accuracy': 0.951234568}, {'q': 50, 'accuracy': 0.94}]

    def test_json(self, out_dir):
        rows = [{'x': 1.0, 'y': math.nan}, {'x': math.inf, 'y': 2.0}]
        path = write_report(rows, 'json', out_dir / 'r.json', experiment='e', manifest={'seed': 3})
        doc = json.loads(path.read_text())
        assert doc['records'] == [{'x': 1.0, 'y': None}, {'x': 'inf', 'y': 2.0}]
        assert doc['manifest'] == {'seed': 3}
        assert set(load_report_schema()['required']) == set(doc)

    def test_json_matches_schema(self, out_dir):
        path = write_report(self.ROWS, 'json', out_dir / 'r.json', experiment='e (Table 1)', manifest=None)
        doc = json.loads(path.read_text())
        schema = load_report_schema()
        types = {'string': str, 'array': list, 'object': dict, 'null': type(None)}

        def conforms(value, spec):
            if 'anyOf' in spec:
                return any(conforms(value, option) for option in spec['anyOf'])
            if not isinstance(value, types[spec['type']]):
                return False
            if spec['type'] == 'array' and 'items' in spec:
                return all(conforms(v, spec['items']) for v in value)
            return True

        assert set(schema['required']) <= set(doc)
        for key, spec in schema['properties'].items():
            assert conforms(doc[key], spec), key
        assert set(ReportDocument.model_json_schema()['properties']) == set(schema['properties'])

    def test_same_records_same_bytes(self, out_dir):
        a = write_report(self.ROWS, 'csv', out_dir / 'a.csv', experiment='e')
        b = write_report(self.ROWS, 'csv', out_dir / 'b.csv', experiment='e')
        assert a.read_bytes() == b.read_bytes()

    def test_heterogeneous_rows(self, out_dir):
        with pytest.raises(BadValue):
            write_report([{'a': 1}, {'b': 2}], 'csv', out_dir / 'x.csv')

    def test_unknown_format(self, out_dir):
        with pytest.raises(BadValue):
            write_report(self.ROWS, 'xml', out_dir / 'x.xml')

    def test_unwritable(self, out_dir):
        blocker = out_dir / 'file'
        blocker.write_text('')
        with pytest.raises(Unwritable):
            write_report(self.ROWS, 'csv', blocker / 'sub' / 'x.csv')

    def test_encoder(self, tmp_path):
        doc = {'n': np.int64(3), 'a': np.arange(2), 'p': tmp_path / 'x', 'b': np.bool_(True)}
        assert json.loads(json.dumps(doc, cls=JEncode)) == {'n': 3, 'a': [0, 1], 'p': str(tmp_path / 'x'), 'b': True}
