"""Figures written next to the CSV reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

TERMS = ("val_amp", "val_vel", "val_acc", "val_freq")
LABELS = {"val_amp": "amp", "val_vel": "vel", "val_acc": "acc", "val_freq": "freq"}
ACTIVE = dict(zip(TERMS, range(4)))


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_history(report, path, weights=None, title=None):
    """Validation loss terms (active ones bold) and SNR per epoch."""
    fig, (ax_loss, ax_snr) = plt.subplots(1, 2, figsize=(9, 3.4))
    epochs = report.column("epoch")
    for term in TERMS:
        bold = weights is not None and weights.as_tuple()[ACTIVE[term]] > 0
        ax_loss.plot(epochs, report.column(term), lw=2.2 if bold else 0.9,
                     alpha=1.0 if bold else 0.6, label=LABELS[term])
    ax_loss.set_yscale("log")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("validation loss")
    ax_loss.legend(frameon=False, fontsize=8)
    ax_snr.plot(epochs, report.column("val_snr"), color="k")
    if report.best_epoch:
        ax_snr.axvline(report.best_epoch, color="0.6", ls="--", lw=0.8)
    ax_snr.set_xlabel("epoch")
    ax_snr.set_ylabel("validation SNR (dB)")
    if title:
        fig.suptitle(title, fontsize=10)
    _save(fig, path)


def plot_ablation(rows, path):
    """One panel of validation loss traces per configuration plus an SNR overlay."""
    n = len(rows)
    fig, axes = plt.subplots(1, n + 1, figsize=(3.0 * (n + 1), 3.0), sharex=True)
    for ax, row in zip(axes, rows):
        epochs = row.report.column("epoch")
        for i, term in enumerate(TERMS):
            bold = row.weights.as_tuple()[i] > 0
            ax.plot(epochs, row.report.column(term), lw=2.0 if bold else 0.8,
                    alpha=1.0 if bold else 0.6, label=LABELS[term])
        ax.set_yscale("log")
        ax.set_title(row.name, fontsize=9)
        ax.set_xlabel("epoch")
    axes[0].set_ylabel("validation loss")
    axes[0].legend(frameon=False, fontsize=7)
    for row in rows:
        axes[-1].plot(row.report.column("epoch"), row.report.column("val_snr"), label=row.name)
    axes[-1].set_title("validation SNR (dB)", fontsize=9)
    axes[-1].legend(frameon=False, fontsize=7)
    _save(fig, path)


def plot_bins(freqs, profiles: dict, path):
    """Mean absolute spectral error per frequency bin for one or more models."""
    fig, ax = plt.subplots(figsize=(6, 3.2))
    for label, err in profiles.items():
        ax.plot(np.asarray(freqs), np.asarray(err), lw=1.0, label=label)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("mean |F_Y - F_X|")
    if len(profiles) > 1:
        ax.legend(frameon=False, fontsize=8)
    _save(fig, path)
