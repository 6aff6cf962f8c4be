import csv
import re

from visual_tracking import report, sim


def test_gnuplot_script_uses_logged_columns(preset, tmp_path):
    log = sim.run(preset.with_overrides({"sim.duration": 0.1}))
    paths = report.write_run_artifacts(log, preset, tmp_path, figures=False)
    script = paths["gnuplot"].read_text()
    used = set(re.findall(r"using 't':'(\w+)'", script))
    assert used and used <= set(log.columns)
    header = next(csv.reader(open(paths["lyapunov"])))
    assert header == report.LYAPUNOV_COLUMNS
    assert not (tmp_path / "depth.png").exists()


def test_json_handles_numpy(tmp_path):
    import json

    import numpy as np

    report.write_json(tmp_path / "x.json", {"a": np.float64(1.5), "b": np.arange(2), "c": np.bool_(True)})
    assert json.loads((tmp_path / "x.json").read_text()) == {"a": 1.5, "b": [0, 1], "c": True}
