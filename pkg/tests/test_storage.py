"""Unit tests for staged artifact writes and the basis container"""

import unittest
import tempfile
import os
import json
import sys
import numpy as np
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tests.helpers import atomic, delta_basis
from src.core.models import RunManifest
from src.core.storage import MANIFEST_NAME, ArtifactStore, load_basis, save_basis
from src.core.wannier import relabel_to_lattice
from src.utils.error_handler import NumericalError, ValidationError


class TestArtifactStore(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = os.path.join(self.temp_dir.name, "out")
        self.store = ArtifactStore(self.root)

    def tearDown(self):
        self.temp_dir.cleanup()

    def _manifest(self):
        return RunManifest("hash", "1.0.0", "spectrum", "t0", checks={"ok": True})

    def test_csv_format(self):
        """Test header, 15 significant digits, booleans and LF line endings"""
        with self.store.transaction():
            self.store.write_csv("values.csv", ("name", "x", "flag"), [("a", 1 / 3, True), ("b", 2, False)])
        with open(os.path.join(self.root, "values.csv"), "rb") as f:
            content = f.read().decode("utf-8")
        self.assertEqual(content, "name,x,flag\na,0.333333333333333,true\nb,2,false\n")

    def test_json_sorted(self):
        """Test JSON artifacts have sorted keys"""
        with self.store.transaction():
            self.store.write_json("summary.json", {"b": 1, "a": [1.5, None]})
        with open(os.path.join(self.root, "summary.json"), encoding="utf-8") as f:
            text = f.read()
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertEqual(json.loads(text), {"a": [1.5, None], "b": 1})

    def test_rollback_leaves_nothing(self):
        """Test an error inside the transaction publishes no file"""
        with self.assertRaises(NumericalError):
            with self.store.transaction():
                self.store.write_csv("values.csv", ("x",), [(1.0,)])
                raise NumericalError("invariant failed")
        self.assertEqual(os.listdir(self.root), [])

    def test_manifest_lists_artifacts(self):
        """Test the manifest names every other artifact and is published with them"""
        manifest = self._manifest()
        with self.store.transaction():
            self.store.write_csv("a.csv", ("x",), [(1,)])
            self.store.write_json("b.json", {"k": 1})
            self.store.write_manifest(manifest)
        self.assertEqual(sorted(os.listdir(self.root)), ["a.csv", "b.json", MANIFEST_NAME])
        with open(os.path.join(self.root, MANIFEST_NAME), encoding="utf-8") as f:
            data = json.load(f)
        self.assertEqual(data["artifacts"], ["a.csv", "b.json"])
        self.assertTrue(data["success"])

    def test_invalid_names(self):
        """Test path separators, hidden names and duplicates are refused"""
        with self.assertRaises(ValidationError):
            with self.store.transaction():
                self.store.write_json("b.json", {})
                self.store.write_json("b.json", {})
        for name in ("../escape.csv", ".hidden.csv"):
            with self.subTest(name=name):
                with self.assertRaises(ValidationError):
                    with self.store.transaction():
                        self.store.write_csv(name, ("x",), [])
        self.assertEqual(os.listdir(self.root), [])

    def test_write_outside_transaction(self):
        """Test writes need an open transaction"""
        with self.assertRaises(RuntimeError):
            self.store.write_json("a.json", {})


class TestBasisContainer(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.temp_dir.name, "basis.gwb")

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_relabeled_basis(self):
        """Test functions, centers, labels and padding survive a save/load"""
        run = atomic(N=3)
        save_basis(self.path, run.basis, run.N)
        basis, N = load_basis(self.path)
        self.assertEqual(N, 3)
        self.assertTrue(np.array_equal(basis.functions, run.basis.functions))
        self.assertTrue(np.array_equal(basis.lattice_labels, run.basis.lattice_labels))
        self.assertTrue(np.array_equal(basis.centers, run.basis.centers))

    def test_padding_recovered(self):
        """Test zero padding columns are marked again on load"""
        padded = relabel_to_lattice(delta_basis(8, [[0.0, 0.0], [0.1, 0.2], [2.0, 1.0]]))
        save_basis(self.path, padded, 1)
        basis, _ = load_basis(self.path)
        self.assertEqual(basis.degeneracy, 2)
        self.assertTrue(np.array_equal(basis.padding, padded.padding))

    def test_unlabeled_basis(self):
        """Test a basis without labels loads without labels"""
        save_basis(self.path, delta_basis(4, [[0.2, 0.3]]), 1)
        basis, _ = load_basis(self.path)
        self.assertFalse(basis.is_relabeled)

    def test_corrupt_container(self):
        """Test a wrong magic or truncated payload is rejected"""
        save_basis(self.path, delta_basis(4, [[0.0, 0.0]]), 1)
        with open(self.path, "rb") as f:
            raw = f.read()
        with open(self.path, "wb") as f:
            f.write(raw[:-8])
        with self.assertRaises(ValidationError):
            load_basis(self.path)
        with open(self.path, "wb") as f:
            f.write(b"XXXX" + raw[4:])
        with self.assertRaises(ValidationError):
            load_basis(self.path)


if __name__ == '__main__':
    unittest.main()
