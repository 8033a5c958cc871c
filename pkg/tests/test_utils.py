"""
Tests for storage, hashing, CSV and PGM helpers and logging setup.
"""
import logging

import numpy as np
import pandas as pd
import pytest

from kdn.config import configure_logging
from kdn.errors import ArtifactError, ChecksumMismatch, IoError, ManifestVersionMismatch, ParseError
from kdn.utils.csv_parser import read_matrix_csv, resolve_label_column, write_matrix_csv
from kdn.utils.hashing import derive_seed, file_sha256
from kdn.utils.pgm import kernel_to_pixels, read_pgm, write_pgm
from kdn.utils.storage import ModelStore, dumps, ensure_dir, io_errors


class TestModelStore:

    def test_matrix_round_trip(self, tmp_path, rng):
        store = ModelStore(tmp_path)
        matrix = rng.standard_normal((4, 3))
        entry = store.save_matrix('layer_01/W.csv', matrix)
        assert entry['path'] == 'layer_01/W.csv'
        assert len(entry['sha256']) == 64
        assert np.array_equal(store.load_matrix(entry), matrix)

    def test_checksum_mismatch(self, tmp_path):
        store = ModelStore(tmp_path)
        entry = store.save_matrix('m.csv', np.eye(2))
        (tmp_path / 'm.csv').write_text("9,9\n9,9\n")
        with pytest.raises(ChecksumMismatch):
            store.load_matrix(entry)

    def test_missing_matrix(self, tmp_path):
        with pytest.raises(ArtifactError):
            ModelStore(tmp_path).load_matrix({'path': 'gone.csv', 'sha256': '0' * 64})

    def test_manifest_round_trip(self, tmp_path):
        store = ModelStore(tmp_path / 'model')
        store.save_manifest({'layers': []})
        assert store.load_manifest() == {'layers': [], 'schema_version': 1}

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ArtifactError):
            ModelStore(tmp_path).load_manifest()

    def test_corrupt_manifest(self, tmp_path):
        (tmp_path / 'manifest.json').write_text("{not json")
        with pytest.raises(ArtifactError):
            ModelStore(tmp_path).load_manifest()

    def test_manifest_without_version(self, tmp_path):
        (tmp_path / 'manifest.json').write_text("{}")
        with pytest.raises(ManifestVersionMismatch):
            ModelStore(tmp_path).load_manifest()

    def test_layer_dir(self, tmp_path):
        assert ModelStore(tmp_path).layer_dir(3) == 'layer_03'

    def test_matrix_under_a_file(self, tmp_path):
        (tmp_path / 'blocker').write_text('')
        with pytest.raises(IoError):
            ModelStore(tmp_path / 'blocker').save_matrix('layer_01/W.csv', np.eye(2))


class TestIoErrors:

    def test_converts_os_error(self, tmp_path):
        with pytest.raises(IoError, match='cannot write'):
            with io_errors(tmp_path / 'x'):
                raise PermissionError(13, 'Permission denied')

    def test_io_error_is_artifact_error(self):
        assert issubclass(IoError, ArtifactError)

    def test_ensure_dir_through_a_file(self, tmp_path):
        (tmp_path / 'blocker').write_text('')
        with pytest.raises(IoError, match='cannot create'):
            ensure_dir(tmp_path / 'blocker' / 'run')

    def test_ensure_dir_existing(self, tmp_path):
        assert ensure_dir(tmp_path) == tmp_path


def test_dumps_is_canonical():
    assert dumps({'b': 1, 'a': [1, 2]}) == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'


class TestHashing:

    def test_known_digest(self, tmp_path):
        path = tmp_path / 'abc.txt'
        path.write_bytes(b'abc')
        assert file_sha256(path) == 'ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad'

    def test_seed_is_stable(self):
        assert derive_seed(1, 'fold', 2) == derive_seed(1, 'fold', 2)
        assert 0 <= derive_seed(1, 'fold', 2) < 2 ** 64

    def test_seed_normalizes_labels(self):
        assert derive_seed(1, 'Fold ', 2) == derive_seed(1, 'fold', 2)

    def test_seed_depends_on_every_component(self):
        seeds = {derive_seed(1, 'fold', 0), derive_seed(1, 'fold', 1), derive_seed(2, 'fold', 0)}
        assert len(seeds) == 3


class TestCsvHelpers:

    def test_label_column_by_name_and_index(self):
        columns = pd.Index(['a', 'b', 'label'])
        assert resolve_label_column(columns, 'label') == 'label'
        assert resolve_label_column(columns, 0) == 'a'
        assert resolve_label_column(columns, '1') == 'b'
        assert resolve_label_column(columns, -1) == 'label'

    def test_label_column_out_of_range(self):
        with pytest.raises(ParseError):
            resolve_label_column(pd.Index(['a', 'label']), 5)

    def test_vector_becomes_column(self, tmp_path):
        path = tmp_path / 'v.csv'
        write_matrix_csv(path, np.array([0.1, 1 / 3, -2e-300]))
        back = read_matrix_csv(path)
        assert back.shape == (3, 1)
        assert back[:, 0].tolist() == [0.1, 1 / 3, -2e-300]

    def test_unreadable_matrix(self, tmp_path):
        path = tmp_path / 'empty.csv'
        path.write_text('')
        with pytest.raises(ParseError):
            read_matrix_csv(path)


class TestPgm:

    def test_gray_levels(self):
        assert kernel_to_pixels(np.array([0.0, 1.0, 0.5, -0.5, 1.5])).tolist() == [255, 0, 128, 255, 0]

    def test_round_trip(self, tmp_path):
        path = tmp_path / 'k.pgm'
        values = np.array([[1.0, 0.25, 0.0], [0.25, 1.0, 0.5]])
        write_pgm(path, values)
        assert path.read_text().splitlines()[:3] == ['P2', '3 2', '255']
        assert np.array_equal(read_pgm(path), kernel_to_pixels(values))

    def test_needs_matrix(self, tmp_path):
        with pytest.raises(ValueError):
            write_pgm(tmp_path / 'v.pgm', np.zeros(4))

    def test_rejects_other_formats(self, tmp_path):
        path = tmp_path / 'x.pgm'
        path.write_text("P5\n1 1\n255\n0\n")
        with pytest.raises(ValueError):
            read_pgm(path)


class TestLogging:

    def test_named_level(self):
        logger = configure_logging('debug')
        assert logger.name == 'kdn'
        assert logging.getLogger().level == logging.DEBUG

    def test_unknown_level_falls_back_to_info(self):
        configure_logging('chatty')
        assert logging.getLogger().level == logging.INFO
