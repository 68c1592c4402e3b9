import numpy as np
import pytest

from bilqctrl.exceptions import SystemFileError, ValidationError
from bilqctrl.system import (
    GalerkinSystem,
    a_matrix,
    build_molecule,
    load_system,
    parse_system,
    resolve_system,
    save_system,
)


def test_molecule_matrices():
    system = build_molecule(2)
    np.testing.assert_array_equal(a_matrix(system), np.diag([-1j, -4j]))
    np.testing.assert_array_equal(system.coupling, [[0, -0.5j], [-0.5j, 0]])
    assert system.label == "molecule:2"


def test_molecule_is_tridiagonal(molecule10):
    np.testing.assert_array_equal(molecule10.spectrum, np.arange(1, 11) ** 2)
    b = molecule10.coupling
    assert b[0, 2] == 0 and b[4, 5] == -0.5j
    assert molecule10.coupling_column_norm(1) == pytest.approx(0.5)
    assert molecule10.coupling_column_norm(5) == pytest.approx(1 / np.sqrt(2))


def test_molecule_needs_two_levels():
    with pytest.raises(ValidationError):
        build_molecule(1)


def test_spectrum_must_be_non_decreasing():
    with pytest.raises(ValidationError, match="non-decreasing"):
        GalerkinSystem([4.0, 1.0], np.zeros((2, 2)))


def test_zero_eigenvalue_needs_relaxation():
    coupling = np.array([[0, -0.5j], [-0.5j, 0]])
    with pytest.raises(ValidationError, match="positive"):
        GalerkinSystem([0.0, 0.0], coupling)
    system = GalerkinSystem([0.0, 0.0], coupling, allow_zero_eigenvalue=True)
    assert system.n_levels == 2


def test_coupling_must_be_skew_hermitian():
    with pytest.raises(ValidationError, match="skew-Hermitian"):
        GalerkinSystem([1.0, 2.0], [[0, 1], [1, 0]])


def test_system_is_immutable(molecule4):
    with pytest.raises(ValueError):
        molecule4.coupling[0, 1] = 1.0


def test_truncation(molecule10):
    small = molecule10.truncate(4)
    assert small.is_truncation_of(molecule10)
    assert not molecule10.is_truncation_of(small)
    assert build_molecule(4).is_truncation_of(molecule10)
    assert not build_molecule(4).is_truncation_of(GalerkinSystem(np.arange(1, 11) ** 2,
                                                                np.zeros((10, 10))))


def test_load_data_file_matches_builder(data_dir):
    assert load_system(data_dir / "molecule_5.json") == build_molecule(5)


def test_save_then_load_preserves_system(tmp_path, full_coupling):
    system = full_coupling([0.5, 1.0 + 1.0 / 3.0, 2.0])
    path = save_system(system, tmp_path / "full.json")
    assert load_system(path) == system


def test_missing_lower_triangle_is_completed():
    text = '{"n_levels": 2, "spectrum": [1, 4], "coupling_entries": [[1, 2, 0.3, -0.5]]}'
    system = parse_system(text)
    assert system.coupling[1, 0] == complex(-0.3, -0.5)


def test_malformed_json_reports_location():
    text = '{\n  "n_levels": 2,\n  "spectrum": [1, 4]\n  "coupling_entries": []\n}'
    with pytest.raises(SystemFileError) as err:
        parse_system(text, path="broken.json")
    assert err.value.line == 4
    assert str(err.value).startswith("broken.json:4:")


def test_schema_errors_report_line():
    text = '{\n  "n_levels": 2,\n  "spectrum": [1, 4],\n  "couplings": []\n}'
    with pytest.raises(SystemFileError) as err:
        parse_system(text, path="typo.json")
    assert err.value.line == 4


def test_spectrum_length_mismatch():
    with pytest.raises(SystemFileError, match="spectrum has 3 values"):
        parse_system('{"n_levels": 2, "spectrum": [1, 4, 9]}')


def test_out_of_range_and_duplicate_entries():
    with pytest.raises(SystemFileError, match="outside"):
        parse_system('{"n_levels": 2, "spectrum": [1, 4], "coupling_entries": [[1, 3, 0, 1]]}')
    with pytest.raises(SystemFileError, match="duplicate"):
        parse_system('{"n_levels": 2, "spectrum": [1, 4], '
                     '"coupling_entries": [[1, 2, 0, 1], [1, 2, 0, 1]]}')


def test_resolve_system(data_dir):
    assert resolve_system("molecule:6") == build_molecule(6)
    assert resolve_system(str(data_dir / "molecule_5.json")).n_levels == 5
    with pytest.raises(ValidationError, match="bad molecule size"):
        resolve_system("molecule:x")
    with pytest.raises(OSError):
        resolve_system(str(data_dir / "missing.json"))
