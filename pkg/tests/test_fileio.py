import numpy as np
import pytest

from rgks.fileio import (
    read_checkpoint,
    read_rimg,
    write_checkpoint,
    write_pgm,
    write_rimg,
)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        V = rng.standard_normal((37, 5))
        x = rng.standard_normal(37)
        lam = 0.123456789e-7
        path = tmp_path / "b.rgks"
        write_checkpoint(path, V, x, lam)
        V2, x2, lam2 = read_checkpoint(path)
        assert V2.tobytes() == V.tobytes()
        assert x2.tobytes() == x.tobytes()
        assert lam2 == lam

    def test_layout_is_stable(self, tmp_path):
        V = np.array([[1.0, 3.0], [2.0, 4.0]])
        x = np.array([5.0, 6.0])
        path = tmp_path / "b.rgks"
        write_checkpoint(path, V, x, 7.0)
        raw = path.read_bytes()
        assert raw[:4] == b"RGKS"
        assert int.from_bytes(raw[4:8], "little") == 1
        assert int.from_bytes(raw[8:16], "little") == 2  # n
        assert int.from_bytes(raw[16:24], "little") == 2  # k
        # columns are stored consecutively
        vals = np.frombuffer(raw, dtype="<f8", offset=24)
        assert vals.tolist() == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]

    def test_rejects_foreign_files(self, tmp_path):
        path = tmp_path / "junk"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ValueError):
            read_checkpoint(path)

    def test_write_twice_identical_bytes(self, tmp_path):
        rng = np.random.default_rng(1)
        V = rng.standard_normal((10, 3))
        x = rng.standard_normal(10)
        p1, p2 = tmp_path / "a", tmp_path / "b"
        write_checkpoint(p1, V, x, 0.5)
        write_checkpoint(p2, V, x, 0.5)
        assert p1.read_bytes() == p2.read_bytes()


class TestRimg:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        vals = rng.standard_normal(4 * 5 * 3)
        path = tmp_path / "img.rimg"
        write_rimg(path, vals, 4, 5, 3)
        got, dims = read_rimg(path)
        assert dims == (4, 5, 3)
        assert got.tobytes() == vals.tobytes()

    def test_dimension_validation(self, tmp_path):
        with pytest.raises(ValueError):
            write_rimg(tmp_path / "x", np.zeros(5), 2, 3, 1)


class TestPgm:
    def test_header_and_scaling(self, tmp_path):
        img = np.array([[0.0, 0.5], [1.0, 0.25]])
        path = tmp_path / "p.pgm"
        write_pgm(path, img)
        raw = path.read_bytes()
        assert raw.startswith(b"P5\n2 2\n255\n")
        pixels = list(raw[len(b"P5\n2 2\n255\n"):])
        assert pixels == [0, 128, 255, 64]

    def test_flat_image(self, tmp_path):
        path = tmp_path / "f.pgm"
        write_pgm(path, np.full((3, 3), 2.0))
        body = path.read_bytes().split(b"255\n", 1)[1]
        assert body == b"\x00" * 9
