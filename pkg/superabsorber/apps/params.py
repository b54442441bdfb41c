from __future__ import annotations

from typing import Callable, List, Optional, Tuple

from rich.console import Console
from rich.table import Table

from superabsorber.lib.errors import ValidationError
from superabsorber.lib.quantum.superatom import (
    SuperatomParams,
    UnitSystem,
    blockade_radius,
    collective_rabi,
    optical_thickness,
    two_photon_rabi,
)
from superabsorber.prelude import Experiment, OutputWriter

RowT = Tuple[str, str, str]


class Params(Experiment):
    """derived superatom frequencies, blockade radius and optical thickness"""

    command = 'params'

    class Config:
        n_atoms: int = 1
        omega_p: float = 1.0
        omega_c: float = 1.0
        delta_c: float = 10.0
        gamma: float = 1.0
        c6: Optional[float] = None
        dipole: Optional[float] = None
        mode_area: Optional[float] = None
        omega_probe: Optional[float] = None
        units: str = 'natural'

    console: Optional[Console] = None

    def check(self) -> None:
        s = self.settings
        try:
            units = UnitSystem(s['units'])
        except ValueError:
            raise ValidationError(f"units must be one of {', '.join(u.value for u in UnitSystem)}")
        self.params = SuperatomParams(**{**s, 'units': units})

    def _row(
        self,
        name: str,
        compute: Callable[[SuperatomParams], float],
        note: Callable[[float], str],
    ) -> RowT:
        try:
            value = compute(self.params)
        except ValidationError as e:
            self.warning(f'{name} unavailable: {e}')
            return name, 'unavailable', str(e)
        return name, format(value, '.6g'), note(value)

    def rows(self) -> List[RowT]:
        p = self.params
        return [
            self._row('Omega', two_photon_rabi, lambda _: 'omega_c omega_p / 4 delta_c'),
            self._row('Omega_N', collective_rabi, lambda _: 'sqrt(N) Omega'),
            self._row('r_B', blockade_radius, lambda _: f'length unit of c6 ({p.units.value})'),
            self._row(
                'kappa',
                optical_thickness,
                lambda k: 'optically thick' if k > 1 else 'kappa > 1 required',
            ),
            ('adiabatic', 'yes' if p.adiabatic else 'no', '|delta_c| >= 10 |omega_c|'),
        ]

    def execute(self, writer: OutputWriter) -> None:
        table = Table(title=f'superatom parameters (N={self.params.n_atoms})')
        for column in ('quantity', 'value', 'note'):
            table.add_column(column)
        for row in self.rows():
            table.add_row(*row)
        (self.console or Console(width=120)).print(table)
