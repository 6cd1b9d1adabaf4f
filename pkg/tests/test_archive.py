# tests/test_archive.py
import json
import numpy as np
import pytest

from core.exceptions import ArchiveError
from models.parameters import ParameterPoint
from services.external.archive_handler import load_basis, read_header, save_basis
from services.rbm_service import corrected_output, online_solve

MU = ParameterPoint(k=1.7, M=0.15)


def test_archive_round_trip(tmp_path, small_basis, small_dual):
    path = save_basis(small_basis, tmp_path / "out" / "basis.npz", small_dual, config_path="box.toml", costs={"C_off": 1.5})
    rb, dual, header = load_basis(path)

    assert header.N == small_basis.N and header.N_du == small_dual.N_du
    assert header.config_path == "box.toml"
    assert header.costs == {"C_off": 1.5}
    assert rb.snapshot_params == small_basis.snapshot_params
    assert rb.operator_ids == small_basis.operator_ids
    np.testing.assert_array_equal(rb.phi, small_basis.phi)
    np.testing.assert_array_equal(rb.gram_aa, small_basis.gram_aa)
    assert rb.riesz_a is None

    # the loaded basis answers queries exactly like the one in memory
    np.testing.assert_array_equal(online_solve(rb, MU), online_solve(small_basis, MU))
    assert corrected_output(rb, dual, MU) == corrected_output(small_basis, small_dual, MU)


def test_archive_without_dual(tmp_path, small_basis):
    path = save_basis(small_basis, tmp_path / "basis.npz")
    _, dual, header = load_basis(path)
    assert dual is None
    assert header.N_du == 0
    assert read_header(path).n_dofs == small_basis.n_dofs


def test_archive_version_mismatch(tmp_path, small_basis):
    path = save_basis(small_basis, tmp_path / "basis.npz")
    with np.load(path, allow_pickle=False) as data:
        arrays = {name: data[name] for name in data.files}
    header = json.loads(str(arrays.pop("header")))
    header["version"] = 2
    np.savez_compressed(path, header=np.array(json.dumps(header)), **arrays)

    with pytest.raises(ArchiveError, match="version 2"):
        load_basis(path)


def test_archive_with_inconsistent_arrays(tmp_path, small_basis):
    path = save_basis(small_basis, tmp_path / "basis.npz")
    with np.load(path, allow_pickle=False) as data:
        arrays = {name: data[name] for name in data.files}
    arrays["gram_aa"] = arrays["gram_aa"][:-1]
    np.savez_compressed(path, **arrays)

    with pytest.raises(ArchiveError, match="inconsistent"):
        load_basis(path)


def test_missing_archive(tmp_path):
    with pytest.raises(ArchiveError, match="not found"):
        load_basis(tmp_path / "missing.npz")


def test_file_that_is_not_an_archive(tmp_path):
    path = tmp_path / "basis.npz"
    path.write_text("k,M\n1,0\n", encoding="utf-8")
    with pytest.raises(ArchiveError, match="not a basis archive"):
        read_header(path)
