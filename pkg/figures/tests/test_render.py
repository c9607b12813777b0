from __future__ import annotations

import hashlib
import subprocess
import sys
from pathlib import Path

import pytest

from cachefigs.render import main, render_figures

SCENARIO = """
[catalog]
count = 24
size_min = 2MB
size_max = 8MB
rate = 128Kbps
seed = 7

[topology]
routers = 2
nodes_per_router = 2
core_capacity = 60Mbps
edge_capacity = 6Mbps

[nodes]
capacity_ratio = 0.5
capacity_min = 50MB
capacity_max = 100MB
seed = 5

[demand]
population_min = 20
population_max = 30
seed = 11

[placement]
strategy = srs
precision = 0.01

[simulation]
slots = 20
intensity = 30
seed = 23
"""


def _cachenet(*args: str) -> None:
    proc = subprocess.run([sys.executable, "-m", "cachenet.cli", *args],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


@pytest.fixture(scope="module")
def result_tables(tmp_path_factory):
    """Real tables produced end-to-end through the simulation CLI."""
    root = tmp_path_factory.mktemp("pipeline")
    scenario = root / "desk.cfg"
    scenario.write_text(SCENARIO)
    runs = root / "runs"
    _cachenet("place", "--scenario", str(scenario), "--out", str(runs),
              "--alpha-scan", "0.05")
    _cachenet("sweep", "--scenario", str(scenario), "--out", str(runs),
              "--static", "--param", "intensity=10,20,30",
              "--param", "strategy=linkshare,nearest,random,te",
              "--param", "seed=0,1")
    _cachenet("sweep", "--scenario", str(scenario), "--out", str(runs),
              "--param", "delta=0.1,0.2,0.3", "--intensity", "60")
    tables = root / "tables"
    _cachenet("report", "--results", str(runs), "--out", str(tables))
    return tables


def test_pipeline_tables_exist(result_tables):
    for name in ("table_alpha_scan.csv", "table_static_cost.csv",
                 "table_delta_sweep.csv"):
        assert (result_tables / name).exists(), name


def test_renders_required_figures_with_series(result_tables, tmp_path):
    out = tmp_path / "figs"
    rendered = render_figures(result_tables, out)
    for figure_id in ("alpha_scan", "static_cost", "delta_sweep"):
        assert figure_id in rendered, f"{figure_id} missing"
        result = rendered[figure_id]
        assert result.series > 0
        assert result.path.exists()
        assert result.path.stat().st_size > 1000


def test_cli_exits_zero(result_tables, tmp_path):
    rc = main([str(result_tables), str(tmp_path / "figs"),
               "--only", "alpha_scan", "static_cost", "delta_sweep"])
    assert rc == 0
    assert (tmp_path / "figs" / "delta_sweep.png").exists()


def test_rendering_is_deterministic(result_tables, tmp_path):
    digests = []
    for label in ("a", "b"):
        out = tmp_path / label
        render_figures(result_tables, out, only=["static_cost"])
        digests.append(hashlib.sha256(
            (out / "static_cost.png").read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_empty_results_dir_renders_nothing(tmp_path):
    rendered = render_figures(tmp_path / "nothing_here", tmp_path / "out")
    assert rendered == {}
    rc = main([str(tmp_path / "nothing_here"), str(tmp_path / "out2")])
    assert rc == 1


def test_unknown_figure_id_rejected(tmp_path):
    with pytest.raises(ValueError):
        render_figures(tmp_path, tmp_path / "out", only=["warp_field"])


def test_broken_table_fails_alone(result_tables, tmp_path):
    results = tmp_path / "results"
    results.mkdir()
    for name in ("table_static_cost.csv", "table_delta_sweep.csv"):
        (results / name).write_text((result_tables / name).read_text())
    (results / "table_alpha_scan.csv").write_text("bogus\n1\n")
    rendered = render_figures(results, tmp_path / "out")
    assert "static_cost" in rendered
    assert "delta_sweep" in rendered
    assert "alpha_scan" not in rendered


def test_acceptance_artifacts_render_when_present(tmp_path):
    artifacts = Path(__file__).resolve().parents[2] / "results" / "acceptance"
    if not artifacts.exists():
        pytest.skip("primary acceptance artifacts not generated yet")
    rendered = render_figures(artifacts, tmp_path / "out")
    for figure_id in ("alpha_scan", "static_cost", "delta_sweep"):
        assert figure_id in rendered
        assert rendered[figure_id].series > 0
