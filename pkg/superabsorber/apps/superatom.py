from __future__ import annotations

from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from superabsorber.lib.quantum.core import (
    DensityMatrix,
    NoiseSpec,
    fit_discretization_bias,
    stochastic_evolve,
    trace_distance,
)
from superabsorber.lib.quantum.superatom import (
    GammaEffFit,
    SuperatomModel,
    SuperatomParams,
    absorption_fidelity,
    absorption_run,
    fit_gamma_eff,
    track_populations,
)
from superabsorber.prelude import Experiment, OutputWriter, ValidationError


class RatioResult(NamedTuple):
    ratio: float
    columns: Dict[str, np.ndarray]
    fit: GammaEffFit
    fidelity: float
    max_distance: Optional[float] = None
    bias: Optional[float] = None
    bound: Optional[float] = None


class Superatom(Experiment):
    """rho_gg(t) of the N atom superatom for each gamma / omega_n ratio"""

    command = 'superatom'

    class Config:
        n_atoms: int = 9
        omega_n: float = 1.0
        ratios: List[float] = (7.0, 1.0, 1 / 3)
        t_max: Optional[float] = None
        samples: Optional[int] = None
        tol: float = 1e-8
        seed: int = 0
        ensemble_size: int = 0
        dt: Optional[float] = None
        bias_dts: List[float] = ()

    def check(self) -> None:
        s = self.settings
        if not s['ratios']:
            raise ValidationError('ratios must list at least one gamma / omega_n value')
        if any(not r > 0 for r in s['ratios']):
            raise ValidationError('ratios must be positive')
        if s['ensemble_size'] < 0:
            raise ValidationError('ensemble_size must be >= 0')
        if s['bias_dts'] and not s['ensemble_size']:
            raise ValidationError('bias_dts needs ensemble_size > 0')
        if any(not dt > 0 for dt in s['bias_dts']):
            raise ValidationError('bias_dts must be positive')
        self.params = [self._params(r) for r in s['ratios']]

    def _params(self, ratio: float) -> SuperatomParams:
        s = self.settings
        return SuperatomParams.from_collective(s['n_atoms'], s['omega_n'], ratio * s['omega_n'])

    def _noise(self, p: SuperatomParams) -> NoiseSpec:
        s = self.settings
        fastest = max(s['omega_n'], p.gamma)
        return NoiseSpec(
            gamma=p.gamma,
            n_sites=p.n_atoms,
            seed=s['seed'],
            dt=s['dt'] or 0.02 / fastest,
            ensemble_size=s['ensemble_size'],
        )

    def _stochastic(
        self,
        ratio: float,
        model: SuperatomModel,
        t: np.ndarray,
        states: Sequence[DensityMatrix],
        fit: GammaEffFit,
        fidelity: float,
        columns: Dict[str, np.ndarray],
    ) -> RatioResult:
        s = self.settings
        noise = self._noise(model.params)
        args = (model.ground_state(), model.hamiltonian, model.jump_operators)
        observables = {'rho_gg': model.ground_projector}

        bias = bound = None
        if s['bias_dts']:
            fitted = fit_discretization_bias(
                *args,
                noise,
                t,
                states,
                (noise.dt, *s['bias_dts']),
                observables=observables,
                workers=self.runner.threads,
            )
            run, max_distance = fitted.runs[0], fitted.distances[0]
            bias, bound = fitted.coefficient, fitted.bound(noise.dt)
            if max_distance > bound:
                self.warning(
                    f'gamma/omega_n={ratio:.4g}: stochastic average is {max_distance:.3g} from '
                    f'the master equation, above 3/sqrt(M) + C dt = {bound:.3g}'
                )
        else:
            run = stochastic_evolve(
                *args, noise, t, observables=observables, workers=self.runner.threads
            )
            max_distance = max(trace_distance(a, b) for a, b in zip(run.states, states))

        columns['rho_gg_stochastic'] = run.series['rho_gg'].values
        columns['rho_gg_stderr'] = run.stderr['rho_gg']
        return RatioResult(ratio, columns, fit, fidelity, max_distance, bias, bound)

    def execute(self, writer: OutputWriter) -> None:
        s = self.settings
        results: List[RatioResult] = []

        for ratio, p in zip(s['ratios'], self.params):
            model, t, states = absorption_run(p, s['t_max'], s['samples'], s['tol'])
            series = track_populations(model, t, states)
            fit = fit_gamma_eff(series['rho_gg'], p.n_atoms, gamma=p.gamma or None)
            self.info(
                f'gamma/omega_n={ratio:.4g}: gamma_eff={fit.gamma_eff:.6g} ({fit.regime.value})'
            )

            columns = {
                't': t,
                'rho_gg': series['rho_gg'].values,
                'w': series['w'].values,
                'dark': series['dark'].values,
            }
            fidelity = absorption_fidelity(states[-1])
            if s['ensemble_size']:
                results.append(self._stochastic(ratio, model, t, states, fit, fidelity, columns))
            else:
                results.append(RatioResult(ratio, columns, fit, fidelity))

        for i, r in enumerate(results):
            writer.write_columns(
                f'superatom_{i:02d}.csv',
                r.columns,
                gamma_over_omega_n=r.ratio,
                n_atoms=s['n_atoms'],
            )

        writer.write_table(
            'superatom_summary.csv',
            [
                'gamma_over_omega_n',
                'gamma_eff',
                'regime',
                'fit_residual',
                'rho_gg_final',
                'fidelity',
                'stochastic_max_distance',
                'stochastic_bias_c',
                'stochastic_bound',
            ],
            [
                (
                    r.ratio,
                    r.fit.gamma_eff,
                    r.fit.regime,
                    r.fit.fit_residual,
                    r.columns['rho_gg'][-1],
                    r.fidelity,
                    r.max_distance,
                    r.bias,
                    r.bound,
                )
                for r in results
            ],
            n_atoms=s['n_atoms'],
        )
