import json
import re

import numpy as np
import pytest

from dsgdrer.exceptions import ConfigError
from dsgdrer.harness import cli
from dsgdrer.harness.config import AlgoSpec, ExperimentConfig, load_config, parse_config
from dsgdrer.harness.experiment import OUTPUT_ENV, plan_entries, run_experiment
from dsgdrer.harness.plotting import emit_plot
from dsgdrer.harness.presets import PRESETS, preset
from dsgdrer.harness.summary import summarize, summary_csv, summary_text
from dsgdrer.trace import ErrorTrace

TINY = """
[experiment]
name = tiny
algorithms = dsgd_rer, sgd_rer, vanilla_dsgd@complete, ols
seeds = 0, 1
[system]
d = 3
levels = 0.8, 0.2
[buffers]
horizon = 4000
u = 8
b_multiplier = 5
[network]
m = 1, 3
topology = complete, cyclic
[output]
directory = unused
"""


def trace(errors, group="g", algo="dsgd_rer", seed=0, samples=None):
    errors = np.asarray(errors, dtype=float).reshape(len(errors), -1)
    n = len(errors)
    samples = np.arange(1, n + 1) * 10 if samples is None else np.asarray(samples)
    return ErrorTrace(algo, seed, np.arange(n), samples, errors, {"group": group})


def test_presets_parse():
    for name in PRESETS:
        cfg = preset(name)
        assert parse_config(cfg.to_ini()) == cfg
    fig2 = preset("paper-fig2-desk")
    assert fig2.m == (1, 5, 20) and fig2.seeds == (0, 1, 2, 3, 4)
    assert fig2.buffer_params() == (1280, 128)
    assert fig2.eigenvalues() == [0.9, 0.9, 0.9, 0.3, 0.3]
    assert preset("paper-fig2-full").buffer_params() == (7870, 787)
    with pytest.raises(ConfigError, match="unknown preset"):
        preset("nope")


def test_config_round_trip_and_digest():
    cfg = parse_config(TINY)
    assert cfg.algorithms[2] == AlgoSpec("vanilla_dsgd", "complete")
    assert cfg.u == 8 and cfg.buffer_params() == (40, 8)
    again = parse_config(cfg.to_ini())
    assert again == cfg and again.digest == cfg.digest
    assert cfg.with_overrides(seeds=(5,)).digest != cfg.digest


@pytest.mark.parametrize("edit, msg", [
    (("seeds = 0, 1", "seeds ="), "seeds list is empty"),
    (("seeds = 0, 1", "seeds = 1, 1"), "duplicate"),
    (("dsgd_rer, sgd_rer", "dsgd, sgd_rer"), "unknown algorithm"),
    (("complete, cyclic", "star"), "unknown topology"),
    (("horizon = 4000", "horizon = lots"), "cannot parse"),
    (("[output]", "[extras]"), "unknown config sections"),
    (("d = 3", "d = 3\nnoise = cauchy"), "noise"),
])
def test_config_errors(edit, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(TINY.replace(*edit))


def test_config_requires_matrix_for_custom():
    with pytest.raises(ConfigError, match="matrix_file"):
        ExperimentConfig(topologies=("custom",))
    with pytest.raises(ConfigError, match="gamma"):
        ExperimentConfig(step_mode="global")


def test_load_config_from_manifest(tmp_path):
    res = run_experiment(parse_config(TINY).with_overrides(m=(3,), seeds=(0,)), output_dir=tmp_path)
    cfg = load_config(tmp_path / "manifest.json")
    assert cfg == res.config
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_plan_entries():
    entries = plan_entries(parse_config(TINY))
    labels = [(e.group, e.algo, e.seed) for e in entries]
    assert labels[:2] == [("central", "sgd_rer", 0), ("central", "sgd_rer", 1)]
    assert ("m1-identity", "dsgd_rer", 0) in labels
    assert ("m3-complete", "vanilla_dsgd", 1) in labels
    assert ("m3-cyclic", "vanilla_dsgd", 0) not in labels
    assert len(labels) == len(set(labels))
    # m=1 collapses both topologies to identity; vanilla_dsgd is pinned to complete
    assert sorted({a for g, a, _ in labels if g == "m1-identity"}) == ["dsgd_rer", "ols"]


def test_run_experiment_outputs(tmp_path):
    res = run_experiment(parse_config(TINY), output_dir=tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    files = sorted(p.name for p in tmp_path.glob("*.csv"))
    assert files == sorted(e["file"] for e in manifest["entries"])
    assert manifest["config_hash"] == res.config.digest
    assert {"python", "numpy", "numba"} <= set(manifest["environment"])
    assert not list(tmp_path.glob(".*tmp"))
    for entry in manifest["entries"]:
        t = ErrorTrace.read(tmp_path / entry["file"])
        assert float(entry["final_error"]) == t.final_error
        assert np.all(np.diff(t.buffers) > 0)


def test_manifest_regenerates_every_number(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    run_experiment(parse_config(TINY), output_dir=first)
    run_experiment(load_config(first / "manifest.json"), output_dir=second)
    for f in first.glob("*.csv"):
        assert f.read_bytes() == (second / f.name).read_bytes()


def test_outputs_independent_of_worker_count(tmp_path):
    cfg = parse_config(TINY)
    run_experiment(cfg, workers=1, output_dir=tmp_path / "w1")
    run_experiment(cfg, workers=2, output_dir=tmp_path / "w2")
    names = sorted(p.name for p in (tmp_path / "w1").glob("*.csv"))
    assert names == sorted(p.name for p in (tmp_path / "w2").glob("*.csv"))
    for n in names:
        assert (tmp_path / "w1" / n).read_bytes() == (tmp_path / "w2" / n).read_bytes()


def test_constant_trace_plots_one_horizontal_line():
    svg = emit_plot([trace([0.5, 0.5, 0.5])])
    lines = re.findall(r'<polyline class="curve"[^>]*points="([^"]+)"', svg)
    assert len(lines) == 1
    ys = {p.split(",")[1] for p in lines[0].split()}
    assert len(ys) == 1
    assert svg.startswith("<?xml") and svg.rstrip().endswith("</svg>")
    assert "(log)" in svg


def test_plot_legend_follows_input_order():
    traces = [trace([0.5, 0.2], group="m20-cyclic"), trace([0.9, 0.4], group="m5-cyclic")]
    svg = emit_plot(traces)
    assert len(re.findall(r"<polyline", svg)) == 2
    legend = re.findall(r'<g class="legend">.*?<text[^>]*>([^<]+)</text>', svg)
    assert legend == ["m20-cyclic dsgd_rer", "m5-cyclic dsgd_rer"]


def test_plot_averages_seeds_and_is_deterministic():
    traces = [trace([[1.0, 3.0]], seed=0), trace([[3.0, 1.0]], seed=1)]
    svg = emit_plot(traces)
    assert svg == emit_plot(traces)
    assert len(re.findall(r"<polyline", svg)) == 1
    with pytest.raises(ValueError):
        emit_plot([])


def test_summary_identical_groups_ratio_one():
    rows = summarize([trace([0.4], "a"), trace([0.4], "b")])
    assert [r.ratio for r in rows] == [1.0, 1.0]


def test_summary_single_group_omits_ratio():
    rows = summarize([trace([0.4], seed=0), trace([0.6], seed=1)])
    assert rows[0].ratio is None
    assert rows[0].mean == pytest.approx(0.5) and rows[0].std == pytest.approx(np.std([0.4, 0.6], ddof=1))
    assert "ratio" not in summary_text(rows) and "ratio" not in summary_csv(rows)


def test_summary_ratio_against_reference():
    rows = summarize([trace([0.4], "m5"), trace([0.2], "m20")])
    assert rows[1].ratio == pytest.approx(0.5)
    rows = summarize([trace([0.4], "m5"), trace([0.2], "m20")], reference="m20 dsgd_rer")
    assert rows[0].ratio == pytest.approx(2.0)
    assert summary_csv(rows).splitlines()[0] == "group,n_seeds,samples,final_mean,final_std,ratio"


def test_summary_rejects_mismatched_configs():
    with pytest.raises(ValueError, match="configs mismatch"):
        summarize([trace([0.4], "a", samples=[100]), trace([0.4], "b", samples=[200])])
    with pytest.raises(ValueError, match="mixes horizons"):
        summarize([trace([0.4], "a", samples=[100]), trace([0.4], "a", seed=1, samples=[200])])


def write_config(tmp_path, text=TINY):
    path = tmp_path / "tiny.ini"
    path.write_text(text)
    return path


def test_cli_run_and_env_override(tmp_path, monkeypatch, capsys):
    cfg = write_config(tmp_path)
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env_out"))
    assert cli.main(["run", str(cfg)]) == 0
    out = tmp_path / "env_out"
    assert (out / "manifest.json").exists() and (out / "errors.svg").exists()
    assert "final mean" in capsys.readouterr().out
    assert cli.main(["run", str(cfg), "-o", str(tmp_path / "flag_out")]) == 0
    assert (tmp_path / "flag_out" / "summary.csv").exists()


def test_cli_plot_and_summarize(tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["run", str(write_config(tmp_path)), "-o", str(out)]) == 0
    assert cli.main(["plot", str(out), "-o", str(tmp_path / "p.svg")]) == 0
    assert (tmp_path / "p.svg").read_text().count("<polyline") == 8
    assert cli.main(["summarize", str(out), "--csv", str(tmp_path / "s.csv")]) == 0
    assert "central sgd_rer" in capsys.readouterr().out
    assert (tmp_path / "s.csv").read_text().startswith("group,")


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.ini")]) == 1
    assert cli.main(["run", str(write_config(tmp_path, TINY.replace("seeds = 0, 1", "seeds =")))]) == 1
    unstable = TINY.replace("[step_size]", "") + "\n[step_size]\nmode = global\ngamma = 50\n"
    assert cli.main(["run", str(write_config(tmp_path, unstable)), "-o", str(tmp_path / "x")]) == 2
    assert "divergence" in capsys.readouterr().err
    assert cli.main(["summarize", str(tmp_path / "empty_dir_missing.csv")]) == 1


def test_cli_check_flag_reports_failure(tmp_path, capsys):
    # with one network size the ordering rule cannot pass
    cfg = write_config(tmp_path, TINY.replace("m = 1, 3", "m = 3"))
    assert cli.main(["sweep-size", str(cfg), "-o", str(tmp_path / "o"), "--check"]) == 3
    assert "[FAIL] size_scaling" in capsys.readouterr().out


def test_cli_verify_quick(capsys):
    assert cli.main(["verify", "--quick"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 6
