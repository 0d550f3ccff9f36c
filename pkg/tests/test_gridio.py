import io

import numpy as np
import pytest

from nccbank import gridio


def test_roundtrip_exact_bits():
    rng = np.random.default_rng(7)
    for _ in range(20):
        rows = int(rng.integers(1, 9))
        cols = int(rng.integers(1, 9))
        g = rng.normal(scale=10.0 ** rng.integers(-8, 9), size=(rows, cols))
        back = gridio.parse_grid(gridio.format_grid(g))
        assert back.shape == g.shape
        assert np.array_equal(back, g)  # repr round-trips doubles exactly


def test_roundtrip_awkward_values():
    g = np.array([[0.1, -0.0, 1e-300], [1e300, 123456789.123456789, 3.0]])
    back = gridio.parse_grid(gridio.format_grid(g))
    assert np.array_equal(back, g)


def test_header_matches_shape():
    text = gridio.format_grid(np.zeros((3, 5)))
    assert text.splitlines()[0] == "3 5"
    assert len(text.splitlines()) == 4


def test_file_roundtrip(tmp_path):
    g = np.arange(12, dtype=float).reshape(3, 4) / 7.0
    path = tmp_path / "g.txt"
    gridio.write_grid(g, path)
    assert np.array_equal(gridio.read_grid(path), g)


def test_stream_roundtrip():
    g = np.array([[1.5, -2.5]])
    buf = io.StringIO()
    gridio.write_grid(g, buf)
    buf.seek(0)
    assert np.array_equal(gridio.read_grid(buf), g)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "2\n1 2\n3 4\n",
        "2 2\n1 2\n",
        "2 2\n1 2 3\n4 5\n",
        "2 2\n1 x\n3 4\n",
        "0 4\n",
        "a b\n1 2\n",
    ],
)
def test_malformed_rejected(text):
    with pytest.raises(ValueError):
        gridio.parse_grid(text)


def test_non_2d_rejected():
    with pytest.raises(ValueError):
        gridio.format_grid(np.zeros(4))
    with pytest.raises(ValueError):
        gridio.format_grid(np.zeros((2, 2, 2)))
