from __future__ import annotations

from typing import Dict, List

from superabsorber.lib.quantum.channel import multi_subtract
from superabsorber.lib.quantum.states import StatePrepSpec, best_cat_fidelity, prepare
from superabsorber.lib.quantum.wigner import default_axis, negativity_volume, wigner
from superabsorber.prelude import Experiment, OutputWriter, ValidationError

GRID_KEYS = {'extent', 'points'}


class Subtract(Experiment):
    """k photon subtraction from a prepared state, with wigner grids before and after"""

    command = 'subtract'

    class Config:
        state: str = 'squeezed_coherent'
        n: int = 0
        alpha: complex = 0.2
        w: float = 0.6
        n_max: int = 20
        k: List[int] = (1,)
        grid: Dict[str, float] = {'extent': 6.0, 'points': 201}

    def check(self) -> None:
        s = self.settings
        if not s['k'] or any(k < 1 for k in s['k']):
            raise ValidationError('k must list subtraction counts >= 1')
        if unknown := set(s['grid']) - GRID_KEYS:
            raise ValidationError(f'unknown grid keys: {", ".join(sorted(unknown))}')
        grid = {'extent': 6.0, 'points': 201, **s['grid']}
        if grid['extent'] <= 0 or int(grid['points']) < 2:
            raise ValidationError('grid needs extent > 0 and at least 2 points')

        self.axis = default_axis(grid['extent'], int(grid['points']))
        self.spec = StatePrepSpec(s['state'], s['n_max'], n=s['n'], alpha=s['alpha'], w=s['w'])
        self.field = prepare(self.spec)

    def execute(self, writer: OutputWriter) -> None:
        grids = {'input': wigner(self.field, self.axis, self.axis)}
        outputs = {k: multi_subtract(self.field, k) for k in self.settings['k']}
        grids.update({f'k{k}': wigner(r.field, self.axis, self.axis) for k, r in outputs.items()})

        writer.write_density_matrix('subtract_input_rho.csv', self.field.rho)
        writer.write_wigner('subtract_input_wigner.csv', grids['input'])
        for k, result in outputs.items():
            writer.write_density_matrix(f'subtract_k{k}_rho.csv', result.field.rho, k=k)
            writer.write_wigner(f'subtract_k{k}_wigner.csv', grids[f'k{k}'], k=k)

        writer.write_table(
            'subtract_pvac.csv',
            ['k', 'step', 'p_vac'],
            [(k, step + 1, p) for k, r in outputs.items() for step, p in enumerate(r.p_vac_trace)],
        )

        rows = [self._summary('input', 0, 1.0, self.field, grids['input'])]
        for k, result in outputs.items():
            rows.append(self._summary(f'k{k}', k, result.probability, result.field, grids[f'k{k}']))
        writer.write_table(
            'subtract_summary.csv',
            [
                'state',
                'k',
                'probability',
                'mean_photon_number',
                'parity',
                'wigner_origin',
                'negativity_volume',
                'grid_integral',
                'cat_fidelity',
                'cat_amplitude_re',
                'cat_amplitude_im',
            ],
            rows,
        )

    def _summary(self, name, k, probability, field, grid) -> List[object]:
        cat = best_cat_fidelity(field)
        self.info(
            f'{name}: negativity {negativity_volume(grid):.4g}, cat fidelity {cat.fidelity:.4f}'
        )
        return [
            name,
            k,
            probability,
            field.mean_photon_number,
            field.parity,
            grid.at(0.0, 0.0),
            negativity_volume(grid),
            grid.integral,
            cat.fidelity,
            cat.amplitude.real,
            cat.amplitude.imag,
        ]
