"""Command line behavior: outputs, determinism, and the exit-code contract."""

from __future__ import annotations

import json

import pytest

from chainv.cli import main
from chainv.harness import RunReport, read_run_reports, rep_score, write_run_reports
from chainv.trace_model import read_hint_records

from engine_helpers import FIXTURES, GOLDENS

DEMO = str(FIXTURES / "demo.trace")
WAIT_TRACE = str(FIXTURES / "waitloop.trace")
SCRIPT = str(FIXTURES / "waitloop.script.json")
BASE_SCRIPT = str(FIXTURES / "waitloop_baseline.script.json")
CFG = str(FIXTURES / "config_chainv.json")
BASE_CFG = str(FIXTURES / "config_baseline.json")


def _run_pair(tmp_path):
    results = tmp_path / "method.results"
    baseline = tmp_path / "baseline.results"
    assert main(["run", "--config", CFG, "--script", SCRIPT,
                 "--trace", WAIT_TRACE, "--out", str(results)]) == 0
    assert main(["run", "--config", BASE_CFG, "--script", BASE_SCRIPT,
                 "--trace", WAIT_TRACE, "--out", str(baseline)]) == 0
    return results, baseline


# ---------------------------------------------------------------------------
# select / score
# ---------------------------------------------------------------------------


def test_select_demo_trace(tmp_path):
    out = tmp_path / "demo.hints"
    assert main(["select", "--trace", DEMO, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == '{"format_version":1}'
    assert len(lines) == 11  # header + one hint per trace record
    hints = read_hint_records(out)
    assert len(hints) == 10
    assert all(h.hint_kind in {"line", "triangle", "box"} for h in hints)


def test_select_all_hints_triples_the_stream(tmp_path):
    out = tmp_path / "demo.hints"
    assert main(["select", "--trace", DEMO, "--out", str(out),
                 "--all-hints"]) == 0
    assert len(read_hint_records(out)) == 30


def test_select_small_k_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["select", "--trace", DEMO, "--out", str(tmp_path / "x"), "--k", "2"])
    assert err.value.code == 1


def test_select_missing_file_is_a_data_error(tmp_path, capsys):
    code = main(["select", "--trace", str(tmp_path / "absent.trace"),
                 "--out", str(tmp_path / "x")])
    assert code == 2
    assert "no such file" in capsys.readouterr().err


def test_select_corrupt_line_reports_its_number(tmp_path, capsys):
    lines = (FIXTURES / "demo.trace").read_text().splitlines()
    lines[2] = '{"not": "a record"'
    bad = tmp_path / "bad.trace"
    bad.write_text("\n".join(lines) + "\n")
    code = main(["select", "--trace", str(bad), "--out", str(tmp_path / "x")])
    assert code == 2
    assert "line 3" in capsys.readouterr().err


def test_score_prints_three_rows_per_record(capsys):
    assert main(["score", "--trace", DEMO]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["session", "step", "kind", "mean_attention",
                                "consistency", "quality"]
    assert len(lines) == 1 + 3 * 10
    kinds = [line.split()[2] for line in lines[1:]]
    assert set(kinds) == {"line", "triangle", "box"}


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def test_run_is_byte_deterministic(tmp_path):
    first = tmp_path / "a.results"
    second = tmp_path / "b.results"
    for out in (first, second):
        hints = str(out) + ".hints"
        assert main(["run", "--config", CFG, "--script", SCRIPT,
                     "--trace", WAIT_TRACE, "--out", str(out),
                     "--hints-out", hints]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert (tmp_path / "a.results.hints").read_bytes() == \
        (tmp_path / "b.results.hints").read_bytes()


def test_run_seed_flag_matching_config_changes_nothing(tmp_path):
    plain = tmp_path / "plain.results"
    seeded = tmp_path / "seeded.results"
    assert main(["run", "--config", CFG, "--script", SCRIPT,
                 "--trace", WAIT_TRACE, "--out", str(plain)]) == 0
    cfg_seed = json.loads((FIXTURES / "config_chainv.json").read_text())
    seed = str(cfg_seed["scheduler"]["rng_seed"])
    assert main(["run", "--config", CFG, "--script", SCRIPT,
                 "--trace", WAIT_TRACE, "--out", str(seeded),
                 "--seed", seed]) == 0
    assert plain.read_bytes() == seeded.read_bytes()


def _half_probability_config(tmp_path):
    obj = json.loads((FIXTURES / "config_chainv.json").read_text())
    obj["scheduler"]["p_min"] = 0.5
    obj["scheduler"]["p_max"] = 0.5
    path = tmp_path / "cfg_half.json"
    path.write_text(json.dumps(obj))
    return path, obj


def test_run_seed_override_reaches_the_scheduler(tmp_path):
    cfg_path, obj = _half_probability_config(tmp_path)
    # --seed S is byte-equivalent to writing rng_seed=S into the config
    obj["scheduler"]["rng_seed"] = 777
    reseeded_cfg = tmp_path / "cfg_777.json"
    reseeded_cfg.write_text(json.dumps(obj))
    via_flag = tmp_path / "flag.results"
    via_config = tmp_path / "config.results"
    assert main(["run", "--config", str(cfg_path), "--script", SCRIPT,
                 "--trace", WAIT_TRACE, "--out", str(via_flag),
                 "--seed", "777"]) == 0
    assert main(["run", "--config", str(reseeded_cfg), "--script", SCRIPT,
                 "--trace", WAIT_TRACE, "--out", str(via_config)]) == 0
    assert via_flag.read_bytes() == via_config.read_bytes()
    # and at half probability some reseed changes the trigger pattern
    base = read_run_reports(via_flag)
    changed = False
    for seed in range(1, 33):
        out = tmp_path / f"seed{seed}.results"
        assert main(["run", "--config", str(cfg_path), "--script", SCRIPT,
                     "--trace", WAIT_TRACE, "--out", str(out),
                     "--seed", str(seed)]) == 0
        reports = read_run_reports(out)
        assert [r.session_id for r in reports] == [r.session_id for r in base]
        if [r.wait_tokens for r in reports] != [r.wait_tokens for r in base]:
            changed = True
            break
    assert changed


def test_run_hints_out_collects_inserted_hints(tmp_path):
    results = tmp_path / "run.results"
    hints_path = tmp_path / "run.hints"
    assert main(["run", "--config", CFG, "--script", SCRIPT,
                 "--trace", WAIT_TRACE, "--out", str(results),
                 "--hints-out", str(hints_path)]) == 0
    reports = read_run_reports(results)
    hints = read_hint_records(hints_path)
    assert len(hints) == sum(r.insertions for r in reports)
    assert len(hints) > 0


def test_run_misaligned_script_is_a_data_error(tmp_path, capsys):
    results = tmp_path / "x.results"
    code = main(["run", "--config", CFG, "--script", SCRIPT,
                 "--out", str(results)])  # no --trace at all
    assert code == 2
    assert "trace" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def test_metrics_self_baseline_is_zero(tmp_path, capsys):
    results, _ = _run_pair(tmp_path)
    assert main(["metrics", "--results", str(results),
                 "--baseline", str(results), "--t-max", "4096"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0].split() == ["method", "sessions", "mean_tokens",
                               "mean_waits", "rep"]
    assert rows[1].split()[-1] == "0.00"
    assert rows[2].split()[-1] == "0.00"


def test_metrics_matches_rep_oracle(tmp_path, capsys):
    results, baseline = _run_pair(tmp_path)
    assert main(["metrics", "--results", str(results),
                 "--baseline", str(baseline), "--t-max", "4096"]) == 0
    rows = capsys.readouterr().out.splitlines()
    method_row = rows[1].split()
    got_rep = float(method_row[-1])
    method_reports = read_run_reports(results)
    base_reports = read_run_reports(baseline)

    def acc(reports):
        flags = [r.accuracy_flag for r in reports if r.accuracy_flag is not None]
        return 100.0 * sum(flags) / len(flags)

    mean_tokens = sum(r.output_tokens for r in method_reports) / len(method_reports)
    want = rep_score(acc(method_reports), acc(base_reports), mean_tokens, 4096)
    assert got_rep == pytest.approx(want, abs=0.005)
    assert float(method_row[2]) == pytest.approx(mean_tokens, abs=0.005)


def test_metrics_nonpositive_budget_is_a_usage_error(tmp_path):
    results, baseline = _run_pair(tmp_path)
    with pytest.raises(SystemExit) as err:
        main(["metrics", "--results", str(results),
              "--baseline", str(baseline), "--t-max", "0"])
    assert err.value.code == 1


def test_metrics_session_mismatch_is_a_data_error(tmp_path, capsys):
    left = tmp_path / "left.results"
    right = tmp_path / "right.results"
    write_run_reports(left, [RunReport(session_id="a", output_tokens=5,
                                       wait_tokens=0, insertions=0)])
    write_run_reports(right, [RunReport(session_id="b", output_tokens=5,
                                        wait_tokens=0, insertions=0)])
    code = main(["metrics", "--results", str(left),
                 "--baseline", str(right), "--t-max", "100"])
    assert code == 2
    assert "session ids" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# render and global flags
# ---------------------------------------------------------------------------


def test_render_box_exact_sentence(capsys):
    assert main(["render", "--kind", "box", "--vertices", "(0,0),(32,32)",
                 "--quality", "high"]) == 0
    assert capsys.readouterr().out == (
        "Hold on. The high highlight location in the second image is "
        "<box>(0,0),(32,32)</box>.\n")


def test_render_line_exact_sentence(capsys):
    assert main(["render", "--kind", "line", "--vertices", "(8,8),(24,24)",
                 "--quality", "low"]) == 0
    assert capsys.readouterr().out == (
        "Hold on. The low highlight location in the second image is "
        "<line>(8,8),(24,24)</line>.\n")


def test_render_rejects_malformed_vertices():
    for bad in ["(0,0),(32,32", "0,0 32,32", "(0,0)(32,32)", ""]:
        with pytest.raises(SystemExit) as err:
            main(["render", "--kind", "box", "--vertices", bad])
        assert err.value.code == 1


def test_render_rejects_wrong_vertex_count():
    with pytest.raises(SystemExit) as err:
        main(["render", "--kind", "triangle", "--vertices", "(0,0),(1,1)"])
    assert err.value.code == 1


def test_unknown_flag_and_command_are_usage_errors():
    with pytest.raises(SystemExit) as err:
        main(["select", "--trace", DEMO, "--out", "x", "--mystery"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 1


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0
    assert capsys.readouterr().out.startswith("chainv ")


# ---------------------------------------------------------------------------
# goldens: committed outputs must be reproducible byte for byte
# ---------------------------------------------------------------------------


def test_golden_demo_hints(tmp_path):
    golden = GOLDENS / "demo.hints.golden"
    assert golden.exists(), "run tests/fixtures/generate.py --goldens first"
    out = tmp_path / "demo.hints"
    assert main(["select", "--trace", DEMO, "--out", str(out)]) == 0
    assert out.read_bytes() == golden.read_bytes()


def test_golden_waitloop_run(tmp_path):
    results_golden = GOLDENS / "waitloop.results.golden"
    hints_golden = GOLDENS / "waitloop.hints.golden"
    assert results_golden.exists() and hints_golden.exists()
    results = tmp_path / "waitloop.results"
    hints = tmp_path / "waitloop.hints"
    assert main(["run", "--config", CFG, "--script", SCRIPT,
                 "--trace", WAIT_TRACE, "--out", str(results),
                 "--hints-out", str(hints)]) == 0
    assert results.read_bytes() == results_golden.read_bytes()
    assert hints.read_bytes() == hints_golden.read_bytes()
