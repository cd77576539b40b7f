import json
import math

import numpy as np
import pytest

from oracles import double_loop_mae
from paap.analysis import (
    build_report,
    emit_plot_data,
    emit_report,
    improvement_percent,
    load_report,
    mae_per_param,
    per_phoneme_improvement,
    relative_mae_change,
    report_from_dict,
    report_to_dict,
)
from paap.errors import ArgumentError
from paap.phonemes import DEFAULT_VOCAB

AA = DEFAULT_VOCAB.index("AA")
SIL_IDX = DEFAULT_VOCAB.silence_index


def corpus(seed, n_utt=3):
    rng = np.random.default_rng(seed)
    triples, idx = [], []
    for _ in range(n_utt):
        n = int(rng.integers(5, 30))
        C = rng.standard_normal((n, 25))
        E = C + 0.1 * rng.standard_normal((n, 25))
        B = C + rng.standard_normal((n, 25))
        triples.append((E, B, C))
        idx.append(rng.integers(0, 41, n))
    return triples, idx


def test_mae_identical_zero():
    D = np.random.default_rng(0).standard_normal((6, 25))
    np.testing.assert_array_equal(mae_per_param(D, D), 0.0)


def test_mae_constant_offset():
    D = np.random.default_rng(1).standard_normal((6, 25))
    E = D.copy()
    E[:, 4] += -2.5
    expected = np.zeros(25)
    expected[4] = 2.5
    np.testing.assert_allclose(mae_per_param(E, D), expected, atol=1e-15)


def test_mae_matches_double_loop():
    rng = np.random.default_rng(2)
    E, C = rng.standard_normal((2, 4, 25))
    np.testing.assert_allclose(mae_per_param(E, C), double_loop_mae(E.tolist(), C.tolist()), atol=1e-12)


def test_mae_shape_mismatch():
    with pytest.raises(ArgumentError):
        mae_per_param(np.zeros((3, 25)), np.zeros((4, 25)))


def test_improvement_endpoints():
    assert improvement_percent(1.3, 1.3) == 0.0
    assert improvement_percent(0.0, 1.3) == 100.0
    assert improvement_percent(1.0, 2.0) == 50.0
    assert math.isnan(improvement_percent(1.0, 0.0))


def test_printed_formula_is_negated():
    rng = np.random.default_rng(3)
    for e, b in rng.uniform(0.01, 5, (20, 2)):
        assert relative_mae_change(e, b) == -improvement_percent(e, b)


def test_single_phoneme_row_equals_global():
    rng = np.random.default_rng(4)
    C = rng.standard_normal((10, 25))
    E = C + 0.2 * rng.standard_normal((10, 25))
    B = C + rng.standard_normal((10, 25))
    imp, mean_c = per_phoneme_improvement(E, B, C, [AA] * 10)
    glob = [improvement_percent(e, b) for e, b in zip(mae_per_param(E, C), mae_per_param(B, C))]
    np.testing.assert_allclose(imp[AA], glob, rtol=1e-12)
    assert np.all(np.isnan(np.delete(imp, AA, axis=0)))
    np.testing.assert_allclose(mean_c[AA], np.abs(C).mean(axis=0))


def test_perfect_enhancement_is_100():
    triples, idx = corpus(5)
    triples = [(C, B, C) for _, B, C in triples]
    rep = build_report(triples, idx)
    occupied = rep.phoneme_frames > 0
    cells = rep.phoneme_improvement[occupied]
    valid = rep.phoneme_mae_baseline[occupied] > 0
    np.testing.assert_array_equal(cells[valid], 100.0)
    assert np.all(np.isnan(rep.phoneme_improvement[~occupied]))


def test_two_phoneme_hand_table():
    # 3 frames of AA then 2 of SIL, one parameter column of interest
    C = np.zeros((5, 25))
    E = np.zeros((5, 25))
    B = np.zeros((5, 25))
    E[:, 0] = [1.0, 0.0, -1.0, 2.0, 0.0]
    B[:, 0] = [2.0, 2.0, 2.0, 4.0, -4.0]
    idx = [AA, AA, AA, SIL_IDX, SIL_IDX]
    rep = build_report([(E, B, C)], [idx])
    # AA: MAE_E = 2/3, MAE_B = 2 -> 66.67 %; SIL: MAE_E = 1, MAE_B = 4 -> 75 %
    assert rep.phoneme_mae_enhanced[AA, 0] == pytest.approx(2 / 3)
    assert rep.phoneme_mae_baseline[AA, 0] == pytest.approx(2.0)
    assert rep.phoneme_improvement[AA, 0] == pytest.approx(100 * (2 - 2 / 3) / 2)
    assert rep.phoneme_improvement[SIL_IDX, 0] == pytest.approx(75.0)
    # zero baseline error on every other column -> not applicable
    assert np.all(np.isnan(rep.phoneme_improvement[AA, 1:]))
    assert list(rep.phoneme_frames[[AA, SIL_IDX]]) == [3, 2]


def test_decomposition_recovers_global_mae():
    triples, idx = corpus(6)
    rep = build_report(triples, idx)
    occupied = rep.phoneme_frames > 0
    weights = rep.phoneme_frames[occupied][:, None]
    recon = (rep.phoneme_mae_enhanced[occupied] * weights).sum(axis=0) / rep.n_frames
    np.testing.assert_allclose(recon, rep.mae_enhanced, atol=1e-9)
    allE = np.vstack([t[0] for t in triples])
    allC = np.vstack([t[2] for t in triples])
    np.testing.assert_allclose(rep.mae_enhanced, mae_per_param(allE, allC), atol=1e-12)
    assert rep.phoneme_frames.sum() == rep.n_frames


def test_shrinking_errors_raises_improvement():
    triples, idx = corpus(7)
    base = build_report(triples, idx)
    shrunk = build_report([(C + 0.5 * (E - C), B, C) for E, B, C in triples], idx)
    ok = ~np.isnan(base.phoneme_improvement) & (base.phoneme_mae_enhanced > 0)
    assert np.all(shrunk.phoneme_improvement[ok] > base.phoneme_improvement[ok])
    assert np.all(shrunk.improvement > base.improvement)


def test_report_errors():
    with pytest.raises(ArgumentError):
        build_report([], [])
    triples, idx = corpus(8, 2)
    with pytest.raises(ArgumentError):
        build_report(triples, idx[:1])
    with pytest.raises(ArgumentError, match="utterance 1"):
        build_report(triples, [idx[0], idx[1][:-1]])


def test_json_round_trip(tmp_path):
    triples, idx = corpus(9)
    rep = build_report(triples, idx)
    p = tmp_path / "r.json"
    emit_report(rep, p, config_digest="abc")
    doc = json.loads(p.read_text())
    assert doc["config_digest"] == "abc"
    assert any(v is None for row in doc["per_phoneme"]["improvement_percent"] for v in row)
    assert load_report(p) == rep
    assert report_from_dict(report_to_dict(rep)) == rep


def test_csv_schema(tmp_path):
    triples, idx = corpus(10)
    rep = build_report(triples, idx)
    p = tmp_path / "r.csv"
    written = emit_report(rep, p, config_digest="d1")
    assert written == [p, tmp_path / "r_params.csv"]
    lines = p.read_text().splitlines()
    assert lines[0] == "# config_digest: d1"
    assert len(lines[1:]) == 1 + 41
    header = lines[1].split(",")
    assert header[:4] == ["phoneme", "category", "is_silence", "frames"]
    assert len(header) == 4 + 2 * 25
    empty_row = next(l for l in lines[2:] if l.split(",")[3] == "0")
    assert set(empty_row.split(",")[4:]) == {""}
    assert lines[-1].startswith("SIL,silence,1,")
    params = (tmp_path / "r_params.csv").read_text().splitlines()
    assert len(params) == 1 + 1 + 25 + 1


def test_emission_deterministic(tmp_path):
    triples, idx = corpus(11)
    for fmt in ("json", "csv"):
        a = tmp_path / f"a.{fmt}"
        b = tmp_path / f"b.{fmt}"
        emit_report(build_report(triples, idx), a)
        emit_report(build_report(triples, idx), b)
        assert a.read_bytes() == b.read_bytes()


def test_unknown_format(tmp_path):
    triples, idx = corpus(12)
    with pytest.raises(ArgumentError):
        emit_report(build_report(triples, idx), tmp_path / "r.xlsx")


def test_plot_data(tmp_path):
    triples, idx = corpus(13)
    rep = build_report(triples, idx)
    bar, scatter = emit_plot_data(rep, tmp_path / "plots", "dg")
    bar_lines = bar.read_text().splitlines()
    assert bar_lines[0] == "# config_digest: dg" and len(bar_lines) == 2 + 25
    rows = scatter.read_text().splitlines()[2:]
    assert len(rows) == 25 * int((rep.phoneme_frames > 0).sum())
    cats = {r.split(",")[2] for r in rows}
    assert cats <= {"vowel", "labial", "coronal", "dorsal", "laryngeal", "silence"}
