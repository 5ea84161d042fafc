"""Named coefficient/operator presets addressable from the CLI.

Public presets (printed by ``list-presets``):

  * ``scalar-linear-osc``     du = (-u + sin(t/eps)) dt + dW
  * ``scalar-holder-osc``     scalar drift sin(sqrt|u|) plus a sqrt delay
                              integral, multiplicative cos(sqrt|u|) noise
  * ``reaction-diffusion-delay``  Laplace(u) - u|u|^{q-2} with a delayed
                              Holder drift and diagonal additive noise
  * ``porous-media-sin``      Laplace(|u|^{q-2}u + u) with Holder drift and
                              rank-one multiplicative noise

Diagnostic configurations (not listed, addressable by name where a sweep
needs them): ``heat-deterministic`` and the deliberately broken
``broken-quadratic`` used by the falsifier tests.

Constant derivations for the assumption profiles are recorded in the README.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .coefficients import (
    AssumptionProfile,
    CoefficientSet,
    DiffusionSpec,
    DriftSpec,
    Oscillator,
)
from .delay import ConstantTail, DelayMeasure, HistoryBuffer
from .spectral import PdeOperator, SpectralSpace

H_WEIGHT = 1.0  # history weight shared by the presets


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    operator: PdeOperator
    coefficients: CoefficientSet
    initial: HistoryBuffer
    dt: float
    T: float
    k_w: int
    public: bool = True

    @property
    def dim(self) -> int:
        return self.coefficients.dim


def _scalar_linear_osc() -> Preset:
    profile = AssumptionProfile(
        alpha1=1.0, alpha2=1.0, M=1.0, L_M=1.0, beta=1.0, gamma=1.0, p=2.0,
        mu1=DelayMeasure.point_mass(), mu2=DelayMeasure.point_mass(),
        overrides={"growth_alpha1": 1.0, "growth_M": 1.5},
    )
    cs = CoefficientSet(
        drift=DriftSpec(constant=1.0),
        diffusion=DiffusionSpec(kind="scalar", gain=1.0),
        osc1=Oscillator.sinusoid(0.0, 1.0, 1.0),
        osc2=Oscillator.constant(1.0),
        profile=profile,
    )
    return Preset(
        name="scalar-linear-osc",
        description="scalar du = (-u + sin(t/eps)) dt + dW; closed-form oracle",
        operator=PdeOperator("scalar_linear", a=1.0),
        coefficients=cs,
        initial=HistoryBuffer.from_tail(H_WEIGHT, ConstantTail(np.array([0.0]))),
        dt=2e-4, T=1.0, k_w=1,
    )


def _scalar_holder_osc() -> Preset:
    mu = DelayMeasure.exponential(H_WEIGHT)
    profile = AssumptionProfile(
        alpha1=1.0, alpha2=2.5, M=2.5, L_M=3.5, beta=1.0, gamma=0.5, p=2.0,
        mu1=mu, mu2=DelayMeasure.point_mass(),
        overrides={"growth_alpha1": 1.0, "growth_M": 3.0,
                   "h5_alpha1": 1.0, "h5_alpha2": 2.5},
    )
    cs = CoefficientSet(
        drift=DriftSpec(pointwise="sin_sqrt_abs", delay_kernel_power=0.5,
                        delay_measure=mu),
        diffusion=DiffusionSpec(kind="scalar", pointwise="cos_sqrt_abs", gain=0.5),
        osc1=Oscillator.sinusoid(1.0, 0.5, 1.0),
        osc2=Oscillator.constant(1.0),
        profile=profile,
    )
    return Preset(
        name="scalar-holder-osc",
        description="scalar Holder drift with sqrt delay integral and "
                    "multiplicative Holder noise",
        operator=PdeOperator("scalar_linear", a=1.0),
        coefficients=cs,
        initial=HistoryBuffer.from_tail(H_WEIGHT, ConstantTail(np.array([0.5]))),
        dt=1e-3, T=1.0, k_w=1,
    )


def _reaction_diffusion_delay(k: int = 32) -> Preset:
    space = SpectralSpace(1.0, k)
    mu = DelayMeasure.exponential(H_WEIGHT)
    profile = AssumptionProfile(
        alpha1=1.0, alpha2=2.5, M=2.6, L_M=3.5, beta=1.0, gamma=0.5, p=2.0,
        mu1=mu, mu2=mu,
        overrides={"growth_alpha1": 1.0, "growth_M": 3.0,
                   "h5_alpha1": 1.0, "h5_alpha2": 2.5,
                   "growthA_alpha1": 10.0, "growthA_M": 1.0,
                   "coercivity_alpha1": 1.0, "coercivity_alpha2": 0.0,
                   "coercivity_M": 1e-9},
    )
    cs = CoefficientSet(
        drift=DriftSpec(pointwise="cos_sqrt_abs", delay_kernel_power=0.5,
                        delay_measure=mu),
        diffusion=DiffusionSpec(kind="diagonal", gain=0.3, decay=1.0),
        osc1=Oscillator.sinusoid(1.0, 0.5, 1.0),
        osc2=Oscillator.constant(1.0),
        profile=profile,
        space=space,
    )
    # smooth initial profile: 3 * projection of x(1-x)
    init = 3.0 * np.array([4.0 * math.sqrt(2.0) / (i * math.pi) ** 3 if i % 2 else 0.0
                           for i in range(1, k + 1)])
    return Preset(
        name="reaction-diffusion-delay",
        description="reaction-diffusion field with delayed Holder drift and "
                    "diagonal additive noise",
        operator=PdeOperator("reaction_diffusion", q=3.0),
        coefficients=cs,
        initial=HistoryBuffer.from_tail(H_WEIGHT, ConstantTail(init)),
        dt=1e-3, T=1.0, k_w=k,
    )


def _porous_media_sin(k: int = 16) -> Preset:
    space = SpectralSpace(1.0, k)
    pm = DelayMeasure.point_mass()
    profile = AssumptionProfile(
        alpha1=1.0, alpha2=1.5, M=2.0, L_M=1.5, beta=1.0, gamma=0.5, p=3.0,
        mu1=pm, mu2=pm,
        overrides={"growth_alpha1": 1.0, "growth_M": 2.0,
                   "h5_alpha1": 1.0, "h5_alpha2": 1.5,
                   "growthA_alpha1": 3.0, "growthA_M": 1.0,
                   "coercivity_alpha1": 1.0, "coercivity_alpha2": 0.0,
                   "coercivity_M": 1e-9},
    )
    cs = CoefficientSet(
        drift=DriftSpec(pointwise="sin_sqrt_abs"),
        diffusion=DiffusionSpec(kind="pointwise_field", pointwise="cos_sqrt_abs",
                                gain=0.5),
        osc1=Oscillator.sinusoid(1.0, 0.5, 1.0),
        osc2=Oscillator.constant(1.0),
        profile=profile,
        space=space,
    )
    init = 0.5 * space.basis_vector(1)
    return Preset(
        name="porous-media-sin",
        description="generalized porous-media field with Holder drift and "
                    "rank-one multiplicative noise",
        operator=PdeOperator("porous_media", q=3.0),
        coefficients=cs,
        initial=HistoryBuffer.from_tail(H_WEIGHT, ConstantTail(init)),
        dt=1e-3, T=1.0, k_w=1,
    )


def _heat_deterministic(k: int = 8) -> Preset:
    space = SpectralSpace(1.0, k)
    profile = AssumptionProfile(
        alpha1=1.0, alpha2=0.0, M=1.0, L_M=1.0, beta=1.0, gamma=1.0, p=2.0,
        mu1=DelayMeasure.point_mass(), mu2=DelayMeasure.point_mass(),
    )
    cs = CoefficientSet(
        drift=DriftSpec(),
        diffusion=DiffusionSpec(kind="diagonal", gain=0.0),
        osc1=Oscillator.constant(1.0),
        osc2=Oscillator.constant(1.0),
        profile=profile,
        space=space,
    )
    return Preset(
        name="heat-deterministic",
        description="noise-free heat decay of the first mode (diagnostics)",
        operator=PdeOperator("pure_laplacian"),
        coefficients=cs,
        initial=HistoryBuffer.from_tail(H_WEIGHT, ConstantTail(space.basis_vector(1))),
        dt=2.5e-4, T=1.0, k_w=1,
        public=False,
    )


def _broken_quadratic() -> Preset:
    profile = AssumptionProfile(
        alpha1=1.0, alpha2=1.0, M=1.0, L_M=1.0, beta=1.0, gamma=1.0, p=2.0,
        mu1=DelayMeasure.point_mass(), mu2=DelayMeasure.point_mass(),
    )
    cs = CoefficientSet(
        drift=DriftSpec(seminorm_power=2.0, seminorm_gain=1.0),
        diffusion=DiffusionSpec(kind="scalar", gain=0.1),
        osc1=Oscillator.constant(1.0),
        osc2=Oscillator.constant(1.0),
        profile=profile,
    )
    return Preset(
        name="broken-quadratic",
        description="deliberately super-linear drift; growth audit must fail",
        operator=PdeOperator("scalar_linear", a=1.0),
        coefficients=cs,
        initial=HistoryBuffer.from_tail(H_WEIGHT, ConstantTail(np.array([0.0]))),
        dt=1e-3, T=1.0, k_w=1,
        public=False,
    )


_BUILDERS = {
    "scalar-linear-osc": lambda k=None: _scalar_linear_osc(),
    "scalar-holder-osc": lambda k=None: _scalar_holder_osc(),
    "reaction-diffusion-delay": lambda k=None: _reaction_diffusion_delay(k or 32),
    "porous-media-sin": lambda k=None: _porous_media_sin(k or 16),
    "heat-deterministic": lambda k=None: _heat_deterministic(k or 8),
    "broken-quadratic": lambda k=None: _broken_quadratic(),
}


def public_names() -> list[str]:
    return ["porous-media-sin", "reaction-diffusion-delay",
            "scalar-linear-osc", "scalar-holder-osc"]


def get_preset(name: str, k: int | None = None) -> Preset:
    if name not in _BUILDERS:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(_BUILDERS)}")
    return _BUILDERS[name](k)


def constant_xi(preset: Preset) -> Preset:
    """Degenerate twin of a preset: oscillators replaced by their means, so
    the fast system and the averaged system coincide exactly."""
    cs = preset.coefficients
    frozen = replace(cs,
                     osc1=Oscillator.constant(cs.osc1.mean()),
                     osc2=Oscillator.constant(cs.osc2.mean()))
    return replace(preset, coefficients=frozen,
                   name=preset.name + "+constant-xi", public=False)
