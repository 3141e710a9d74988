import csv
import io
import math

import numpy as np
import pytest

from wdrocore.bench import (
    DUALCORE,
    RAW_HEADER,
    SUMMARY_HEADER,
    UNISAMP,
    WHOLE,
    BenchConfig,
    BenchRow,
    SummaryRow,
    budget_for,
    emit_csv,
    emit_plotdata,
    format_csv,
    format_plotdata,
    load_bench_data,
    run_bench,
    substream,
    summarize,
)

TINY = dict(n=120, m=3, trials=3, rates=(0.1, 0.2), steps=15, noise_std=0.5, flip_rate=0.1,
            normalize=False)


def test_config_defaults_and_validation():
    cfg = BenchConfig()
    assert cfg.gamma == 7.0 and cfg.trials == 50 and cfg.sigma == 0.3
    assert cfg.rates == tuple(k / 100 for k in range(1, 11))
    assert BenchConfig(rates=(0.5, 0.1)).rates == (0.1, 0.5)
    for bad in (dict(rates=(0.0,)), dict(rates=(1.5,)), dict(trials=0), dict(methods=("Foo",)),
                dict(anchor="random")):
        with pytest.raises(ValueError):
            BenchConfig(**bad)


def test_config_from_text():
    cfg = BenchConfig.from_text("""
        # comment
        loss = svm
        sigma = 0.1
        rates = 0.05, 0.01
        methods = DualCore, Whole
        normalize = false
        eta0 = auto
        trials = 4
    """)
    assert cfg.loss == "svm" and cfg.sigma == 0.1 and cfg.trials == 4
    assert cfg.rates == (0.01, 0.05) and cfg.methods == (DUALCORE, WHOLE)
    assert cfg.normalize is False and cfg.eta0 is None
    with pytest.raises(ValueError):
        BenchConfig.from_text("colour = blue")
    with pytest.raises(ValueError):
        BenchConfig.from_text("just words")
    with pytest.raises(ValueError):
        BenchConfig.from_text("normalize = maybe")


def test_substream_deterministic_and_distinct():
    assert substream(0, 1, 2, 3) == substream(0, 1, 2, 3)
    assert len({substream(0, 1, 2, t) for t in range(100)}) == 100
    assert substream(0, 1) != substream(1, 1)


def test_budget_for():
    assert budget_for(0.01, 2000) == 20
    assert budget_for(0.001, 100) == 1
    assert budget_for(1.0, 7) == 7


def test_load_bench_data_deterministic():
    cfg = BenchConfig(**TINY)
    assert load_bench_data(cfg).equals(load_bench_data(cfg))
    assert load_bench_data(cfg).n == 120


def test_load_bench_data_from_file(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("0,1,1\n1,0,-1\n2,2,1\n")
    cfg = BenchConfig(dataset=str(p), normalize=True)
    ds = load_bench_data(cfg)
    assert ds.n == 3 and ds.X.max() == 1.0


def test_whole_only_rows_identical():
    cfg = BenchConfig(methods=(WHOLE,), **TINY)
    rows = run_bench(cfg)
    assert len(rows) == 2 * 3
    assert len({r.risk for r in rows}) == 1


def test_full_rate_dualcore_matches_whole():
    cfg = BenchConfig(**{**TINY, "rates": (1.0,), "trials": 2})
    rows = run_bench(cfg)
    whole = [r.risk for r in rows if r.method == WHOLE][0]
    for r in rows:
        assert abs(r.risk - whole) <= 1e-6


def test_row_structure_and_whole_invariance():
    cfg = BenchConfig(**TINY)
    rows = run_bench(cfg)
    assert len(rows) == 3 * 2 * 3
    assert [r.method for r in rows[:6]] == [DUALCORE] * 6
    whole = {r.risk for r in rows if r.method == WHOLE}
    assert max(whole) - min(whole) <= 1e-12
    assert all(r.risk >= 0 for r in rows)
    assert all(math.isnan(r.wall_time_ms) for r in rows)


def test_threads_do_not_change_results():
    a = run_bench(BenchConfig(**TINY))
    b = run_bench(BenchConfig(**TINY, threads=3))
    assert format_csv(a) == format_csv(b)


def test_timings_recorded_when_enabled():
    rows = run_bench(BenchConfig(**{**TINY, "trials": 1, "timings": True}))
    assert all(r.wall_time_ms >= 0 for r in rows)
    assert all(r.coreset_build_ms >= 0 for r in rows)


@pytest.mark.parametrize("anchor", ["pilot", "whole"])
def test_trained_anchors_run(anchor):
    rows = run_bench(BenchConfig(**{**TINY, "trials": 1, "anchor": anchor}))
    assert len(rows) == 6


def test_summarize_examples():
    one = summarize([BenchRow(UNISAMP, 0.1, 0, 0.7, 1.0, 0.0)])
    assert one[0].risk_std == 0.0 and one[0].risk_mean == 0.7
    two = summarize([BenchRow(UNISAMP, 0.1, 0, 1.0, 1.0, 0.0), BenchRow(UNISAMP, 0.1, 1, 3.0, 3.0, 0.0)])
    assert two[0].risk_mean == 2.0 and two[0].risk_std == pytest.approx(math.sqrt(2), rel=1e-15)
    assert two[0].time_mean_ms == 2.0


def test_summarize_ordering_and_best_flag():
    rows = [BenchRow(UNISAMP, 0.2, 0, 0.5, 0, 0), BenchRow(DUALCORE, 0.2, 0, 0.4, 0, 0),
            BenchRow(WHOLE, 0.2, 0, 0.1, 0, 0), BenchRow(DUALCORE, 0.1, 0, 0.9, 0, 0),
            BenchRow(UNISAMP, 0.1, 0, 0.8, 0, 0)]
    out = summarize(rows)
    assert [(r.method, r.c) for r in out] == sorted((r.method, r.c) for r in out)
    best = {(r.method, r.c) for r in out if r.best}
    assert best == {(DUALCORE, 0.2), (UNISAMP, 0.1)}


def test_csv_empty_is_header_only():
    assert format_csv([], summary=False) == RAW_HEADER + "\n"
    assert format_csv([], summary=True) == SUMMARY_HEADER + "\n"


def test_csv_roundtrip_and_columns(tmp_path):
    rows = [BenchRow(DUALCORE, 0.01, 3, 0.123456789, 12.5, 0.75),
            BenchRow(WHOLE, 0.02, 0, 1 / 3, math.nan, math.nan)]
    path = tmp_path / "raw.csv"
    emit_csv(rows, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    parsed = list(csv.reader(io.StringIO(raw.decode("utf-8"))))
    assert parsed[0] == RAW_HEADER.split(",")
    assert parsed[1] == ["DualCore", "0.01", "3", "0.123457", "12.5", "0.75"]
    assert {len(r) for r in parsed} == {6}
    summ = summarize(rows)
    emit_csv(summ, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == SUMMARY_HEADER and {len(l.split(",")) for l in lines} == {5}


def test_plotdata_blocks(tmp_path):
    summ = [SummaryRow(DUALCORE, 0.01, 0.7, 0.01, 0), SummaryRow(DUALCORE, 0.02, 0.6, 0.02, 0),
            SummaryRow(UNISAMP, 0.01, 0.8, 0.03, 0)]
    emit_plotdata(summ, tmp_path / "p.dat")
    text = (tmp_path / "p.dat").read_text()
    blocks = text.split("\n\n\n")
    assert len(blocks) == 2
    assert blocks[0].splitlines() == ["# DualCore", "0.01 0.7 0.01", "0.02 0.6 0.02"]
    assert blocks[1].splitlines() == ["# UniSamp", "0.01 0.8 0.03"]
    for line in text.splitlines():
        if line and not line.startswith("#"):
            assert len(line.split()) == 3
    assert format_plotdata([]) == ""
