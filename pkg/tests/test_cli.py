import filecmp
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from citemap.cli import main
from citemap.pipeline import STAGE_ORDER, RunConfig, load_config_file, run_pipeline, stage_seed


def tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != "timings.json"}


def test_run_outputs(synthetic_export, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(synthetic_export), "--out", str(out), "--k", "2"]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert list(man["stages"]) == STAGE_ORDER
    assert man["stages"]["windows"]["windows"] == 9
    for name in ["documents.csv", "clean_documents.csv", "frequencies.csv", "windows.csv", "metrics.csv",
                 "networks/net_2011.net", "partitions/part_2011.clu", "factors/loadings_2011.csv",
                 "flow.csv", "events.csv", "layout/frame_2011.csv", "layout/layout_manifest.json",
                 "reports/alluvial.svg", "reports/loadings_report_2011.csv", "plots/network_metrics.svg"]:
        assert (out / name).exists(), name


def test_subcommands_equal_run(synthetic_export, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    common = ["--k", "2", "--seed", "5"]
    assert main(["run", str(synthetic_export), "--out", str(a), *common]) == 0
    for name in STAGE_ORDER:
        args = [name, "--out", str(b), *common]
        if name == "parse":
            args.insert(1, str(synthetic_export))
        assert main(args) == 0, name
    assert tree(a) == tree(b)


def test_workers_do_not_change_outputs(synthetic_export, tmp_path):
    cfg = dict(inputs=[str(synthetic_export)], k=2)
    run_pipeline(RunConfig(out=str(tmp_path / "a"), **cfg))
    run_pipeline(RunConfig(out=str(tmp_path / "b"), workers=3, **cfg))
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


def test_pure_python_backend_same_outputs(synthetic_export, tmp_path):
    pytest.importorskip("citemap._ckernels")
    run_pipeline(RunConfig(inputs=[str(synthetic_export)], out=str(tmp_path / "c"), k=2))
    env = {**os.environ, "CITEMAP_PURE": "1"}
    code = ("import sys; from citemap.cli import main; from citemap import BACKEND; "
            "assert BACKEND == 'python'; sys.exit(main(sys.argv[1:]))")
    subprocess.run([sys.executable, "-c", code, "run", str(synthetic_export), "--out", str(tmp_path / "p"),
                    "--k", "2"], check=True, env=env)
    assert tree(tmp_path / "c") == tree(tmp_path / "p")


def test_validation_exit_codes(synthetic_export, tmp_path, capsys):
    assert main(["run", str(synthetic_export), "--tau", "1.0", "--out", str(tmp_path)]) == 2
    assert "tau" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["run", "--span", "x"])
    assert exc.value.code == 2


def test_stage_failure_names_stage(tmp_path, capsys):
    assert main(["net", "--out", str(tmp_path / "empty")]) == 1
    assert "'net'" in capsys.readouterr().err


def test_failure_keeps_prior_outputs(synthetic_export, tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(synthetic_export), "--out", str(out), "--k", "2"]) == 0
    before = (out / "metrics.csv").read_bytes()
    (out / "networks" / "net_2011.net").write_text("garbage\n")
    assert main(["metrics", "--out", str(out)]) == 1
    assert (out / "metrics.csv").read_bytes() == before


def test_config_file_and_flag_override(synthetic_export, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text(f"# settings\ninputs = {synthetic_export}\nk-factors = 2\ntau = 0.25\nweighted = false\n")
    assert load_config_file(conf)["tau"] == 0.25
    out = tmp_path / "o"
    assert main(["freq", "--config", str(conf), "--out", str(out), "--tau", "0.3"]) == 1  # nothing parsed yet
    assert main(["parse", "--config", str(conf), "--out", str(out), "--tau", "0.3"]) == 0
    echo = json.loads((out / "manifest.json").read_text())["config"]
    assert echo["tau"] == 0.3 and echo["k"] == 2 and echo["weighted"] is False
    conf.write_text("bogus = 1\n")
    assert main(["parse", "--config", str(conf)]) == 2


def test_single_window(tmp_path):
    from citemap.synthetic import SyntheticSpec, write_export

    path = tmp_path / "four.txt"
    write_export(path, SyntheticSpec(n_docs=80, n_years=4))
    out = tmp_path / "o"
    assert main(["run", str(path), "--out", str(out), "--k", "2", "--min-count", "5"]) == 0
    assert json.loads((out / "manifest.json").read_text())["stages"]["windows"]["windows"] == 1


def test_synth_command(tmp_path):
    assert main(["synth", str(tmp_path / "x.txt"), "--first-year", "1980", "--years", "32"]) == 0
    assert (tmp_path / "x.txt").read_text().startswith("FN ")


def test_stage_seeds_differ():
    assert stage_seed(0, "layout") != stage_seed(0, "communities:2003") != stage_seed(1, "layout")
    assert stage_seed(0, "layout") == stage_seed(0, "layout")


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "citemap", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "citemap" in r.stdout
    assert filecmp.cmp(__file__, __file__)
