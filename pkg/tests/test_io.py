import numpy as np
import pytest

from eunn import cell as C
from eunn import io as fio
from eunn import unitary as U
from eunn.complex_core import haar_unitary
from eunn.errors import ConfigError, ParseError
from eunn.optim import TrainConfig


def test_matrix_roundtrip_is_exact(tmp_path, rng):
    m = haar_unitary(5, rng)
    fio.write_matrix(tmp_path / "m.txt", m)
    assert np.array_equal(fio.read_matrix(tmp_path / "m.txt"), m)


def test_matrix_format_text():
    assert fio.format_matrix(np.array([[1, 0.5j], [-2, 0]])) == "2\n1.0,0.0 0.0,0.5\n-2.0,0.0 0.0,0.0\n"


@pytest.mark.parametrize("text, line", [
    ("2\n1,0 0,0\n0,0 1;0\n", 3),
    ("2\n1,0 0,0\n0,0\n", 3),
    ("2\n1,0 0,0\n", 3),
    ("x\n", 1),
    ("1\n1,0\n0,0\n", 3),
    ("2\n1,0 0,0\n0,0 1,zz\n", 3),
])
def test_matrix_parse_errors_carry_line(tmp_path, text, line):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(ParseError) as err:
        fio.read_matrix(p)
    assert err.value.line == line
    assert f":{line}:" in str(err.value)


def test_program_roundtrip(tmp_path, rng):
    prog = U.decompose_unitary(haar_unitary(4, rng))
    fio.write_program(tmp_path / "p.txt", prog)
    back = fio.read_program(tmp_path / "p.txt")
    assert back.rotations == prog.rotations
    assert np.array_equal(back.diag.w, prog.diag.w)
    text = (tmp_path / "p.txt").read_text().splitlines()
    assert len(text) == 7 and text[0].startswith("3 2 ") and text[-1].startswith("D ")


def test_program_parse_errors(tmp_path):
    p = tmp_path / "p.txt"
    p.write_text("1 0 0.1 0.2\n")
    with pytest.raises(ParseError, match="D w"):
        fio.read_program(p)
    p.write_text("1 0 0.1\nD 0 0\n")
    with pytest.raises(ParseError) as err:
        fio.read_program(p)
    assert err.value.line == 1
    p.write_text("# comment\n1 5 0.1 0.2\nD 0 0\n")
    with pytest.raises(ParseError) as err:
        fio.read_program(p)
    assert err.value.line == 2


def test_config_roundtrip(tmp_path):
    cfg = TrainConfig(lr=0.0123456789012345, iters=7, model="vanilla", record_time=True)
    fio.write_config(tmp_path / "c", cfg)
    assert TrainConfig(**fio.read_config(tmp_path / "c", TrainConfig)) == cfg


def test_config_errors(tmp_path):
    p = tmp_path / "c"
    p.write_text("iters=3\nbogus=1\n")
    with pytest.raises(ParseError) as err:
        fio.read_config(p, TrainConfig)
    assert err.value.line == 2
    p.write_text("iters=three\n")
    with pytest.raises(ConfigError, match="iters"):
        fio.read_config(p, TrainConfig)


@pytest.mark.parametrize("make", [
    lambda r: C.init_eurnn(3, 8, 4, r, "tunable", 3),
    lambda r: C.init_eurnn(3, 8, 4, r, "fft"),
    lambda r: C.init_vanilla(3, 8, 4, r),
])
def test_checkpoint_bit_exact(tmp_path, rng, make):
    cell = make(rng)
    path = str(tmp_path / "ck.npz")
    fio.save_checkpoint(path, cell, TrainConfig())
    back, meta = fio.load_checkpoint(path)
    assert meta["version"] == fio.CHECKPOINT_VERSION and meta["config"]["lr"] == 0.001
    for k, v in cell.params().items():
        assert np.array_equal(back.params()[k], v) and back.params()[k].dtype == v.dtype
    x = rng.standard_normal((4, 2, 3))
    assert np.array_equal(back.predict(x), cell.predict(x))
