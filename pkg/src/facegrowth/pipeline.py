"""In-memory pipeline: cohort -> aligned shapes, measurements, labels, feature tables."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import analysis, cephalometrics, features, geometry
from .data_model import Cohort


@dataclass
class Prepared:
    cohort: Cohort
    aligned: Mapping[tuple[str, int], np.ndarray]
    transformed: Mapping[tuple[str, int], np.ndarray]
    measurements: Mapping[tuple[str, int], Mapping[str, float]]
    labels: Mapping[str, Mapping[str, int]]
    label_stats: Mapping[str, analysis.LabelingStats]
    panel_names: tuple[str, ...]

    def table(self, scenario: features.Scenario | str) -> features.FeatureTable:
        if isinstance(scenario, str):
            scenario = features.Scenario.parse(scenario)
        return features.assemble(self.cohort, self.aligned, self.measurements, self.labels, scenario,
                                 transformed=self.transformed, panel_names=self.panel_names)

    def tables(self, scenarios: Sequence[features.Scenario | str] | None = None) -> dict[str, features.FeatureTable]:
        scenarios = features.enumerate_scenarios() if scenarios is None else scenarios
        out = {}
        for sc in scenarios:
            tab = self.table(sc)
            out[tab.scenario.key] = tab
        return out


def prepare(cohort: Cohort, mode: str = "joint", balanced: bool = False,
            panel: cephalometrics.MeasurementPanel | None = None) -> Prepared:
    panel = panel or cephalometrics.MeasurementPanel()
    aligned, _ = geometry.align_cohort(cohort, mode=mode)
    transformed = {(c.patient_id, c.stage): geometry.transform_to_sn_frame(c) for c in cohort.cephalograms()}
    meas = cephalometrics.measure_cohort(cohort, panel)
    labels, stats = {}, {}
    for target in cephalometrics.TARGETS:
        deltas = analysis.growth_deltas(meas, target).deltas
        lab, st = analysis.label(deltas)
        if balanced:
            lab = analysis.balanced_relabel(deltas, lab)
        labels[target], stats[target] = lab, st
    return Prepared(cohort, aligned, transformed, meas, labels, stats, panel.names)
