"""Report figures rendered to files next to the delimited output.

Four plots summarize a pipeline run: the breakthrough curves of all three
models at one test parameter, the singular-value decay behind the reduced
basis, the greedy residual decay of the kernel fit, and the cumulative-cost
crossover that visualizes the pay-off query count.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _save(fig, path):
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def breakthrough_figure(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    mu = report.sample_mu
    ax.plot(report.times, report.sample_fom, "k-", lw=2, label="FOM")
    ax.plot(report.times, report.sample_rom, "C0--", lw=1.5, label="RB-ROM")
    if report.sample_ml is not None:
        ax.plot(report.times, report.sample_ml, "C3:", lw=1.5, label="kernel")
    ax.set_xlabel("t")
    ax.set_ylabel("outflow concentration")
    ax.set_title(f"breakthrough curve at da={mu.da:.3g}, pe={mu.pe:.3g}")
    ax.legend()
    return _save(fig, path)


def singular_values_figure(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    sv = np.asarray(report.singular_values)
    ax.semilogy(np.arange(1, sv.size + 1), sv, "C0o-", ms=4)
    ax.set_xlabel("mode index")
    ax.set_ylabel("singular value")
    ax.set_title("reduced-basis singular values")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def greedy_decay_figure(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    res = np.asarray(report.greedy_residuals)
    ax.semilogy(np.arange(1, res.size + 1), res, "C3s-", ms=4)
    ax.set_xlabel("selected centers")
    ax.set_ylabel("max residual norm")
    ax.set_title("f-greedy residual decay")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def payoff_figure(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    fom = report.row("fom")
    ml = report.row("ml")
    q_star = report.pay_off_queries
    q_max = max(2 * q_star if q_star else 10, 10)
    q = np.arange(0, q_max + 1)
    ax.plot(q, fom.offline_s + q * fom.online_s, "k-", label="FOM only")
    ax.plot(q, ml.offline_s + q * ml.online_s, "C2-", label="full pipeline")
    if q_star is not None:
        ax.axvline(q_star, color="0.5", ls="--", lw=1)
        ax.annotate(f"pay-off: {q_star}", (q_star, fom.offline_s),
                    textcoords="offset points", xytext=(6, 10))
    ax.set_xlabel("queries")
    ax.set_ylabel("cumulative seconds")
    ax.set_title("cumulative cost vs. number of queries")
    ax.legend()
    return _save(fig, path)


def render_report_figures(report, out_dir, stem="fig"):
    """Render every figure the report data supports; returns the paths."""
    base = f"{out_dir}/{stem}"
    tag = report.config_hash
    paths = []
    if report.sample_fom is not None and report.times is not None:
        paths.append(breakthrough_figure(report, f"{base}_breakthrough_{tag}.png"))
    if report.singular_values is not None and np.size(report.singular_values):
        paths.append(singular_values_figure(report, f"{base}_singular_values_{tag}.png"))
    if report.greedy_residuals is not None and np.size(report.greedy_residuals):
        paths.append(greedy_decay_figure(report, f"{base}_greedy_decay_{tag}.png"))
    paths.append(payoff_figure(report, f"{base}_payoff_{tag}.png"))
    return paths
