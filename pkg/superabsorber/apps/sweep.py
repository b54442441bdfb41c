from __future__ import annotations

from typing import List, Optional

import numpy as np

from superabsorber.lib.quantum.superatom import SuperatomParams, sweep_gamma_eff
from superabsorber.prelude import Experiment, OutputWriter, ValidationError


class Sweep(Experiment):
    """gamma_eff over a log spaced omega_n / gamma grid"""

    command = 'sweep'

    class Config:
        n_atoms: int = 9
        omega_n: float = 1.0
        ratio_min: float = 0.05
        ratio_max: float = 50.0
        points: int = 30
        ratios: Optional[List[float]] = None
        samples: Optional[int] = None
        tol: float = 1e-8

    def check(self) -> None:
        s = self.settings
        if s['ratios'] is not None:
            ratios = np.asarray(s['ratios'], dtype=float)
        else:
            if s['points'] < 1:
                raise ValidationError(f"points must be >= 1, got {s['points']}")
            if not 0 < s['ratio_min'] <= s['ratio_max']:
                raise ValidationError('need 0 < ratio_min <= ratio_max')
            ratios = np.geomspace(s['ratio_min'], s['ratio_max'], s['points'])
        if len(ratios) == 0 or np.any(~np.isfinite(ratios)) or np.any(ratios <= 0):
            raise ValidationError('sweep ratios must be a non-empty list of positive numbers')

        self.ratios = ratios
        self.params = SuperatomParams.from_collective(s['n_atoms'], s['omega_n'], s['omega_n'])

    def execute(self, writer: OutputWriter) -> None:
        s = self.settings
        sweep = sweep_gamma_eff(
            self.params,
            self.ratios,
            samples=s['samples'],
            tol=s['tol'],
            workers=self.runner.threads,
        )

        writer.write_table(
            'sweep.csv',
            [
                'omega_n_over_gamma',
                'gamma',
                'gamma_eff',
                'gamma_eff_over_gamma',
                'gamma_eff_over_omega_n',
                'regime',
                'fit_residual',
                'undershoot',
            ],
            [
                (
                    r.ratio,
                    r.gamma,
                    r.gamma_eff,
                    r.gamma_eff_over_gamma,
                    r.gamma_eff_over_omega_n,
                    r.regime,
                    r.fit_residual,
                    r.undershoot,
                )
                for r in sweep.rows
            ],
            n_atoms=s['n_atoms'],
        )
        writer.write_table(
            'sweep_summary.csv',
            ['flip_ratio', 'visible_ratio', 'fastest_ratio', 'overdamped_prefactor', 'plateau'],
            [
                (
                    sweep.flip_ratio,
                    sweep.visible_ratio(),
                    sweep.fastest_ratio,
                    sweep.overdamped_prefactor(),
                    sweep.plateau(),
                )
            ],
            n_atoms=s['n_atoms'],
        )
