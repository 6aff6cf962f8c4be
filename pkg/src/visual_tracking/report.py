"""Run artifacts: CSVs, summary JSON, a gnuplot script and matplotlib figures."""
import json
from pathlib import Path

import numpy as np

LYAPUNOV_COLUMNS = ["t", "V1", "V2_core", "integral_term", "V2", "H_min_eig"]

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "figure.figsize": (5.0, 3.2),
    "savefig.dpi": 150,
}

GNUPLOT = """\
# gnuplot -e "datafile='{csv}'" plot.gp
if (!exists("datafile")) datafile = '{csv}'
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 800,500
set xlabel 't (s)'

set output 'tracking_errors_gnuplot.png'
set ylabel 'pixels'
plot datafile using 't':'dx_u' with lines title 'x_1 - x_{{d1}}', \\
     '' using 't':'dx_v' with lines title 'x_2 - x_{{d2}}'

set output 'observation_errors_gnuplot.png'
plot datafile using 't':'dxo_u' with lines title 'x_{{o1}} - x_1', \\
     '' using 't':'dxo_v' with lines title 'x_{{o2}} - x_2'

set output 'depth_gnuplot.png'
set ylabel 'm'
plot datafile using 't':'z' with lines title 'z', \\
     '' using 't':'z_hat' with lines title 'estimated z'
"""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_lyapunov_csv(log, path):
    idx = [log.columns.index(c) for c in LYAPUNOV_COLUMNS]
    with open(path, "w") as fh:
        fh.write(",".join(LYAPUNOV_COLUMNS) + "\n")
        for row in log.data[:, idx]:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def render_figures(log, outdir):
    """Tracking errors, observation errors and depth estimate as PNG files."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    t = log.column("t")
    paths = []
    with plt.rc_context(RC):
        panels = [
            ("tracking_errors.png", "image tracking error (px)",
             [("dx_u", r"$x_1 - x_{d1}$"), ("dx_v", r"$x_2 - x_{d2}$")]),
            ("observation_errors.png", "observation error (px)",
             [("dxo_u", r"$x_{o1} - x_1$"), ("dxo_v", r"$x_{o2} - x_2$")]),
            ("depth.png", "depth (m)", [("z", "actual"), ("z_hat", "estimated")]),
        ]
        for name, ylabel, series in panels:
            fig, ax = plt.subplots()
            for col, label in series:
                ax.plot(t, log.column(col), label=label)
            ax.set_xlabel("t (s)")
            ax.set_ylabel(ylabel)
            ax.legend(loc="best")
            fig.tight_layout()
            fig.savefig(outdir / name)
            plt.close(fig)
            paths.append(outdir / name)

        fig, ax = plt.subplots()
        ax.plot(t, log.column("V1"), label=r"$V_1$")
        ax.plot(t, log.column("V2"), label=r"$V_2$")
        ax.set_yscale("log")
        ax.set_xlabel("t (s)")
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(outdir / "lyapunov.png")
        plt.close(fig)
        paths.append(outdir / "lyapunov.png")
    return paths


def write_run_artifacts(log, cfg, outdir, figures=True):
    """Write everything a run produces into ``outdir``; returns the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "trajectory": outdir / "trajectory.csv",
        "lyapunov": outdir / "lyapunov.csv",
        "summary": outdir / "summary.json",
        "config": outdir / "config.ini",
        "gnuplot": outdir / "plot.gp",
    }
    log.write_csv(paths["trajectory"])
    write_lyapunov_csv(log, paths["lyapunov"])
    write_json(paths["summary"], log.summary)
    cfg.write(paths["config"])
    paths["gnuplot"].write_text(GNUPLOT.format(csv="trajectory.csv"))
    if figures and len(log):
        for p in render_figures(log, outdir):
            paths[p.stem] = p
    return paths
