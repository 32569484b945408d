import numpy as np
import pytest

from dsgdrer.trace import CSV_HEADER, ErrorTrace, group_from_filename


def sample_trace():
    errors = np.array([[0.1, 0.2], [1 / 3, np.pi / 10]])
    return ErrorTrace("dsgd_rer", 4, np.array([0, 1]), np.array([10, 20]), errors)


def test_csv_round_trip_exact():
    t = sample_trace()
    text = t.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert len(text.splitlines()) == 1 + 4
    back = ErrorTrace.from_csv(text)
    assert back.algo == "dsgd_rer" and back.seed == 4
    assert np.array_equal(back.errors, t.errors)
    assert np.array_equal(back.samples, t.samples)
    assert back.to_csv() == text


def test_agent_mean_and_final():
    t = sample_trace()
    assert np.allclose(t.agent_mean(), [0.15, (1 / 3 + np.pi / 10) / 2])
    assert t.final_error == pytest.approx((1 / 3 + np.pi / 10) / 2)
    assert t.n_agents == 2


@pytest.mark.parametrize("text, msg", [
    ("a,b\n", "header"),
    (",".join(CSV_HEADER) + "\n", "no rows"),
    (",".join(CSV_HEADER) + "\nx,0,0,1,0,0.1\ny,0,0,1,0,0.1\n", "single algo"),
    (",".join(CSV_HEADER) + "\nx,0,0,1,0,0.1\nx,0,0,1,1,0.1\nx,0,1,2,0,0.1\n", "missing"),
])
def test_csv_rejects_malformed(text, msg):
    with pytest.raises(ValueError, match=msg):
        ErrorTrace.from_csv(text)


def test_read_sets_group(tmp_path):
    path = tmp_path / "m5-cyclic__dsgd_rer__seed4.csv"
    path.write_text(sample_trace().to_csv())
    t = ErrorTrace.read(path)
    assert t.meta["group"] == "m5-cyclic"
    assert group_from_filename("plain.csv") == "plain"
