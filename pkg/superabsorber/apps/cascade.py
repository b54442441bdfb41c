from __future__ import annotations

from typing import Optional

from superabsorber.lib.quantum.channel import cascade
from superabsorber.lib.quantum.states import StatePrepSpec, prepare
from superabsorber.prelude import Experiment, OutputWriter, ValidationError


class Cascade(Experiment):
    """fired count distribution of k absorber cells in a row"""

    command = 'cascade'

    class Config:
        state: str = 'fock'
        n: int = 3
        alpha: complex = 0.0
        w: float = 1.0
        n_max: int = 20
        k: int = 5
        gamma_eff: Optional[float] = None
        t_cell: Optional[float] = None
        tol: float = 1e-8

    def check(self) -> None:
        s = self.settings
        if s['k'] < 1:
            raise ValidationError(f"k must be >= 1, got {s['k']}")
        if (s['gamma_eff'] is None) != (s['t_cell'] is None):
            raise ValidationError('a finite time cascade needs both gamma_eff and t_cell')
        self.field = prepare(
            StatePrepSpec(s['state'], s['n_max'], n=s['n'], alpha=s['alpha'], w=s['w'])
        )

    def execute(self, writer: OutputWriter) -> None:
        s = self.settings
        result = cascade(
            self.field, s['k'], gamma_eff=s['gamma_eff'], t_cell=s['t_cell'], tol=s['tol']
        )
        self.info(f'most likely fired count {result.most_likely} of {result.k}')

        writer.write_table(
            'cascade_distribution.csv',
            ['fired', 'probability'],
            list(enumerate(result.fired_distribution)),
            k=s['k'],
        )
        for fired, field in sorted(result.conditional_outputs.items()):
            writer.write_density_matrix(f'cascade_fired_{fired}_rho.csv', field.rho, fired=fired)
