import numpy as np
import pytest

from wassood.distributions import DiscretePmf
from wassood.exceptions import InputFormatError
from wassood.io import (
    read_pmf_csv,
    read_sample_csv,
    read_scores_csv,
    read_softmax_csv,
    write_pmf_csv,
    write_sample_csv,
    write_softmax_csv,
)


def test_sample_round_trip_is_exact(tmp_path, rng):
    X = rng.standard_normal((13, 4)) * 10.0 ** rng.integers(-8, 8, size=(13, 4))
    write_sample_csv(tmp_path / "x.csv", X)
    assert (tmp_path / "x.csv").read_text().splitlines()[0] == "f0,f1,f2,f3"
    np.testing.assert_array_equal(read_sample_csv(tmp_path / "x.csv"), X)


def test_pmf_round_trip(tmp_path):
    pmf = DiscretePmf([0.0, 0.5, 2.0], [0.2, 0.3, 0.5])
    write_pmf_csv(tmp_path / "p.csv", pmf)
    back = read_pmf_csv(tmp_path / "p.csv")
    np.testing.assert_array_equal(back.weights, pmf.weights)


def test_softmax_round_trip(tmp_path, rng):
    P = rng.dirichlet(np.ones(4), size=6)
    y = np.array([0, 1, 0, 1, 1, 0])
    write_softmax_csv(tmp_path / "s.csv", P, y)
    P2, y2 = read_softmax_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(P2, P)
    np.testing.assert_array_equal(y2, y)


def test_diagnostics(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("f0,f1\n1,2\n3,oops\n")
    with pytest.raises(InputFormatError, match=r"row 3, column 1 \(f1\)"):
        read_sample_csv(path)
    path.write_text("f0,f1\n1,2\n3\n")
    with pytest.raises(InputFormatError, match="row 3 has 1 fields"):
        read_sample_csv(path)
    path.write_text("a,b\n1,2\n")
    with pytest.raises(InputFormatError, match="header"):
        read_sample_csv(path)
    path.write_text("f0\n")
    with pytest.raises(InputFormatError, match="no observations"):
        read_sample_csv(path)
    path.write_text("")
    with pytest.raises(InputFormatError, match="empty"):
        read_sample_csv(path)
    with pytest.raises(InputFormatError, match="cannot read"):
        read_sample_csv(tmp_path / "missing.csv")


def test_softmax_simplex_rows(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("p0,p1,label\n0.5,0.5,0\n0.7,0.7,1\n0.2,0.8,1\n1.1,-0.1,0\n")
    with pytest.raises(InputFormatError, match="rows violate the probability simplex: 3, 5"):
        read_softmax_csv(path)
    path.write_text("p0,p1,label\n0.5,0.5,2\n")
    with pytest.raises(InputFormatError, match="label"):
        read_softmax_csv(path)


def test_scores(tmp_path):
    path = tmp_path / "sc.csv"
    path.write_text("score,label\n0.5,1\n0.1,0\n")
    s, y = read_scores_csv(path)
    np.testing.assert_array_equal(s, [0.5, 0.1])
    np.testing.assert_array_equal(y, [1, 0])
