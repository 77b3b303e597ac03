import math

import pytest

import parsetalk.harness as harness
from parsetalk import cli, toy_grammar, toy_kb
from parsetalk.harness import (
    EXCLUDED,
    INF,
    OK,
    ConfluenceViolation,
    RunReport,
    bundled_corpus,
    compare_reports,
    counts_from_csv,
    emit_outputs,
    factor,
    load_corpus,
    mean_factor,
    parse_seeds,
    run_corpus,
)
from parsetalk.runtime import ProtocolViolation

G, KB = toy_grammar(), toy_kb()


@pytest.fixture(scope="module")
def report():
    return run_corpus(bundled_corpus(), G, KB, seeds=[1, 2])


def test_bundled_corpus_shape():
    corpus = bundled_corpus()
    assert [e.id for e in corpus] == list(range(1, 14))
    lengths = [len(e.tokens) for e in corpus]
    assert lengths == sorted(lengths) and min(lengths) == 2 and max(lengths) == 12
    assert sum("ungrammatical" in e.flags for e in corpus) == 2
    assert sum("discontinuous" in e.flags for e in corpus) == 2


def test_load_corpus_errors():
    with pytest.raises(ValueError, match="unique"):
        load_corpus("1\t-\ta b\n1\t-\tc\n")
    with pytest.raises(ValueError, match="flag"):
        load_corpus("1\tweird\ta b\n")
    with pytest.raises(ValueError, match="3 tab"):
        load_corpus("1 a b\n")


def test_parse_seeds():
    assert parse_seeds("1..5") == [1, 2, 3, 4, 5]
    assert parse_seeds("3,1,2..3") == [1, 2, 3]
    with pytest.raises(ValueError):
        parse_seeds("")


def test_factor_arithmetic():
    cells = [factor(40, 10), factor(100, 20)]
    assert [c.value for c in cells] == [4.0, 5.0]
    assert mean_factor(cells) == 4.5
    assert factor(7, 7).value == 1.0


def test_factor_zero_cases():
    assert factor(0, 0).status == EXCLUDED
    inf = factor(3, 0)
    assert inf.status == INF and math.isinf(inf.value)
    assert factor(None, 4).status == "aborted"
    assert mean_factor([factor(8, 2), factor(0, 0), factor(None, 1), factor(3, 0)]) == 4.0


def test_compare_from_rows_mirrors_example():
    rows = [(1, "PT", "SYN", 10), (2, "PT", "SYN", 20), (1, "CP", "SYN", 40), (2, "CP", "SYN", 100)]
    table = compare_reports(rows)
    assert table.cells[1, "CP", "SYN"] == harness.FactorCell(4.0, OK)
    assert table.mean("CP", "SYN") == 4.5


def test_excluded_cell_is_flagged():
    rows = [(1, "PT", "SYN", 0), (1, "CP", "SYN", 0), (2, "PT", "SYN", 2), (2, "CP", "SYN", 6)]
    table = compare_reports(rows)
    assert table.mean("CP", "SYN") == 3.0
    assert any("sentence 1" in n and "excluded" in n for n in table.notes)


def test_empty_report_headers_only(tmp_path):
    emit_outputs(RunReport(), tmp_path)
    assert (tmp_path / "counts.csv").read_text() == "sentence_id,parser,predicate,count\n"
    assert (tmp_path / "factors.csv").read_text() == "sentence_id,baseline,predicate,factor,status\n"


def test_full_run_rows_and_abort_marker(report, tmp_path):
    assert len(report.rows()) == 13 * 3 * 2
    assert report.count(10, "CP.disc", "SYN") is None
    assert report.count(10, "PT", "SYN") > 0
    emit_outputs(report, tmp_path)
    lines = (tmp_path / "counts.csv").read_text().splitlines()
    assert len(lines) == 1 + 13 * 3 * 2
    assert "10,CP.disc,SYN," in lines  # missing value, not zero
    fig4 = (tmp_path / "fig4.dat").read_text().splitlines()
    assert fig4[1].split()[2:] == ["PT", "CP", "CP.disc"]
    assert fig4[11].split()[0] == "10" and fig4[11].split()[3] == "NaN"
    summary = (tmp_path / "summary.txt").read_text()
    assert "mean CP/PT SYN" in summary and "subsumption" in summary


def test_ungrammatical_rows(report):
    for run in report.runs:
        if "ungrammatical" in run.entry.flags:
            assert run.pt.skip_events and run.pt.fragments
            assert "CP" in run.charts


def test_outputs_byte_identical(report, tmp_path):
    emit_outputs(report, tmp_path / "a")
    again = run_corpus(bundled_corpus(), G, KB, seeds=[1, 2])
    emit_outputs(again, tmp_path / "b")
    for name in ("counts.csv", "factors.csv", "fig4.dat", "fig5.dat", "summary.txt", "analyses.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_factors_recomputable_from_counts_csv(report, tmp_path):
    emit_outputs(report, tmp_path)
    rows = counts_from_csv((tmp_path / "counts.csv").read_text())
    assert harness.factors_csv(compare_reports(rows)) == (tmp_path / "factors.csv").read_text()


def test_confluence_violation_detected(monkeypatch, tmp_path):
    real = harness.parse

    def flaky(tokens, grammar, kb, seed=0, **kw):
        r = real(tokens, grammar, kb, seed=seed, **kw)
        if seed == 2:
            r.diagnostics["syn"] += 1
        return r

    monkeypatch.setattr(harness, "parse", flaky)
    with pytest.raises(ConfluenceViolation):
        run_corpus(bundled_corpus()[:1], G, KB, seeds=[1, 2])
    assert cli.main(["run", "--out", str(tmp_path), "--seeds", "1..2", "--parsers", "pt"]) == 2


def test_cli_protocol_violation_exit_code(monkeypatch, tmp_path):
    def broken(*a, **kw):
        raise ProtocolViolation("boom")

    monkeypatch.setattr(harness, "parse", broken)
    assert cli.main(["run", "--out", str(tmp_path), "--seeds", "1", "--parsers", "pt"]) == 3


def test_cli_run_writes_outputs(tmp_path, capsys):
    assert cli.main(["run", "--out", str(tmp_path), "--seeds", "1..2", "--parsers", "pt,cp", "--trace"]) == 0
    assert (tmp_path / "counts.csv").exists() and (tmp_path / "trace-1.txt").exists()
    assert "CP.disc" not in (tmp_path / "counts.csv").read_text()
    assert "mean CP/PT" in capsys.readouterr().out


def test_cli_parse_formats(tmp_path, capsys):
    src = tmp_path / "in.txt"
    src.write_text("the blorp server crashes\n")
    assert cli.main(["parse", str(src)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "sentence 1 parser=PT tokens=4"
    assert "edge 2 -det-> 0" in out and "edge 3 -subject-> 2" in out
    assert any(line.startswith("fragment root=1") for line in out)
    assert "skip active=2 over=1 outcome=attached" in out
    assert out[-1] == "end"

    assert cli.main(["parse", str(src), "--parser", "cpdisc", "--json"]) == 0
    doc = capsys.readouterr().out
    assert doc.index('"sentence"') < doc.index('"parser"') < doc.index('"analyses"')
    assert '"CP.disc"' in doc


def test_cli_bad_parser_name():
    with pytest.raises(SystemExit):
        cli.main(["run", "--out", "x", "--parsers", "pt,bogus"])
