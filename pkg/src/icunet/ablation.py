"""Train one model per loss configuration and tabulate split-wise MSE/SNR."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from .losses import LossWeights
from .metrics import MetricSummary, summarize
from .network import UNet, UNetConfig, init_params
from .training import TrainConfig, TrainingReport, train

log = logging.getLogger(__name__)

ABLATION_CONFIGS = {
    "L_amp": LossWeights(1, 0, 0, 0),
    "L_vel": LossWeights(0, 1, 0, 0),
    "L_acc": LossWeights(0, 0, 1, 0),
    "L_freq": LossWeights(0, 0, 0, 1),
    "L_ens": LossWeights(1, 1, 1, 1),
}

SPLITS = ("train", "val", "test")
ABLATION_HEADER = ("loss", "alpha", "epoch_star") + tuple(
    f"{split}_{metric}_{stat}" for split in SPLITS for metric in ("mse", "snr")
    for stat in ("mean", "std"))


@dataclass
class AblationRow:
    name: str
    weights: LossWeights
    report: TrainingReport
    metrics: dict[str, MetricSummary]
    params: dict

    @property
    def epoch_star(self) -> int:
        return self.report.best_epoch

    def csv_row(self) -> list:
        row = [self.name, ",".join(f"{a:g}" for a in self.weights.as_tuple()), self.epoch_star]
        for split in SPLITS:
            m = self.metrics[split]
            row += [m.mse_mean, m.mse_std, m.snr_mean, m.snr_std]
        return row


def ablation_run(train_pairs, val_pairs, test_pairs, config: UNetConfig, tc: TrainConfig,
                 init_seed: int = 0, configs: dict | None = None, on_epoch=None) -> list[AblationRow]:
    """One training run per weight configuration, all from the same initial parameters.

    Every run is evaluated at its own best epoch on all three splits.
    """
    configs = ABLATION_CONFIGS if configs is None else configs
    init = init_params(config, init_seed)
    rows = []
    for name, weights in configs.items():
        log.info("ablation run %s alpha=%s", name, weights.as_tuple())
        callback = None if on_epoch is None else (lambda rec, p, best, n=name: on_epoch(n, rec))
        params, report = train(init, config, train_pairs, val_pairs,
                               replace(tc, weights=weights), on_epoch=callback)
        if report.best_epoch == 0:
            params = {k: v.astype(tc.dtype) for k, v in init.items()}
        model = UNet(params, config)
        metrics = {split: summarize(model, pairs)
                   for split, pairs in zip(SPLITS, (train_pairs, val_pairs, test_pairs))}
        rows.append(AblationRow(name, weights, report, metrics, params))
    return rows
